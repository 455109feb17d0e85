#include <doctest.h>

#include <cmath>

#include "hamlens/boundary.hpp"
#include "hamlens/hamiltonian.hpp"
#include "hamlens/rng.hpp"
#include "hamlens/rootfind.hpp"
#include "hamlens/traveltime.hpp"
#include "oracles.hpp"

using namespace hamlens;

namespace {

HamiltonianModel gaussian_well(double depth = 0.4) {
    auto c = [depth](const Vec& x) { return 1.0 - depth * std::exp(-x.squaredNorm() / 1.28); };
    auto gc = [depth](const Vec& x) {
        return Vec(depth * (2.0 / 1.28) * std::exp(-x.squaredNorm() / 1.28) * x);
    };
    return make_conformal(2, c, gc, "gaussian_well");
}

HamiltonianModel strong_lens() {
    auto c = [](const Vec& x) { return 1.0 - 0.5 * std::exp(-x.squaredNorm() / 0.72); };
    auto gc = [](const Vec& x) {
        return Vec(0.5 * (2.0 / 0.72) * std::exp(-x.squaredNorm() / 0.72) * x);
    };
    return make_conformal(2, c, gc, "strong_lens");
}

} // namespace

TEST_CASE("exp map of flat metrics is affine with unit differential") {
    HamiltonianModel m = make_constant_metric(Mat(Mat::Identity(2, 2)), "euclid");
    const Vec x = (Vec(2) << 0.3, -0.2).finished();
    const Vec xi = (Vec(2) << 1.1, 0.4).finished();
    const ExpJet jet = exp_map(m, x, xi);
    CHECK((jet.y - (x + xi)).norm() < 1e-10);
    CHECK((jet.dexp - Mat::Identity(2, 2)).norm() < 1e-8);
    CHECK((jet.end.xi - xi).norm() < 1e-10);

    const Mat G = (Mat(2, 2) << 4.0, 1.0, 1.0, 2.0).finished();
    HamiltonianModel mg = make_constant_metric(G, "anisotropic");
    const ExpJet jg = exp_map(mg, x, xi);
    CHECK((jg.y - (x + G * xi)).norm() < 1e-10);
    CHECK((jg.dexp - G).norm() < 1e-8);
}

TEST_CASE("travel times match closed forms for flat and scaled metrics") {
    Rng rng(11);
    HamiltonianModel euclid = make_constant_metric(Mat(Mat::Identity(2, 2)), "euclid");
    const Mat G = (Mat(2, 2) << 2.5, 0.4, 0.4, 1.5).finished();
    HamiltonianModel aniso = make_constant_metric(G, "anisotropic");
    HamiltonianModel scaled = make_conformal(
        2, [](const Vec&) { return 2.0; }, [](const Vec& x) { return Vec(Vec::Zero(x.size())); },
        "speed_two");
    for (int i = 0; i < 8; ++i) {
        const Vec x = rng.uniform_vec(2, -1.0, 1.0);
        Vec y = rng.uniform_vec(2, -1.0, 1.0);
        if ((y - x).norm() < 0.3) y.array() += 0.7;

        const TravelTime te = travel_time(euclid, x, y);
        CHECK(std::abs(te.T - (y - x).norm()) < 1e-9);
        CHECK((te.end.x - y).norm() < 1e-10);
        CHECK(std::abs(euclid.value(PhasePoint{x, te.xi_unit}) - 0.5) < 1e-11);

        const TravelTime ta = travel_time(aniso, x, y);
        const double dist = std::sqrt((y - x).dot(G.inverse() * (y - x)));
        CHECK(std::abs(ta.T - dist) < 1e-9);

        const TravelTime ts = travel_time(scaled, x, y);
        CHECK(std::abs(ts.T - 0.5 * (y - x).norm()) < 1e-9);
    }
}

TEST_CASE("shooting through a gaussian well matches the fan-search oracle") {
    // Depth in the single-image regime so the coarse fan seeding stands alone.
    HamiltonianModel m = gaussian_well(0.25);
    const Vec starts[3] = {(Vec(2) << -1.8, 0.1).finished(), (Vec(2) << -1.5, -0.6).finished(),
                           (Vec(2) << -2.0, 0.4).finished()};
    const Vec ends[3] = {(Vec(2) << 1.6, -0.3).finished(), (Vec(2) << 1.8, 0.5).finished(),
                         (Vec(2) << 1.4, 0.0).finished()};
    for (int k = 0; k < 3; ++k) {
        const TravelTime tt = travel_time(m, starts[k], ends[k]);
        CHECK(tt.shot.err < 1e-10);
        CHECK(!tt.shot.conjugate);
        const double aim = std::atan2(ends[k](1) - starts[k](1), ends[k](0) - starts[k](0));
        const oracle::FanHit hit =
            oracle::fan_connect(m, starts[k], ends[k], aim - 0.8, aim + 0.8, 8.0);
        REQUIRE(hit.miss < 1e-9);
        CHECK(std::abs(tt.T - hit.t) < 1e-7);
    }
}

TEST_CASE("focusing lens develops a conjugate point at the oracle radius") {
    HamiltonianModel m = strong_lens();
    const Vec x = (Vec(2) << -2.0, 0.0).finished();
    // Unit-energy covector along +e0: H = c^2 xi^2 / 2 = 1/2.
    const double c0 = 1.0 - 0.5 * std::exp(-x.squaredNorm() / 0.72);
    const Vec xi = (Vec(2) << 1.0 / c0, 0.0).finished();

    auto det_at = [&](double t) { return exp_map(m, x, Vec(t * xi)).dexp.determinant(); };
    double lo = 0.5, hi = 0.0;
    double flo = det_at(lo);
    for (double t = 1.0; t <= 6.01; t += 0.25) {
        const double ft = det_at(t);
        if (flo * ft < 0.0) {
            hi = t;
            break;
        }
        lo = t;
        flo = ft;
    }
    REQUIRE(hi > 0.0);
    const double t_lib = rootfind::bracketed(det_at, lo, hi, flo, det_at(hi), 1e-12, 1e-14);

    const double t_oracle = oracle::caustic_time(m, x, xi, 6.0);
    REQUIRE(t_oracle > 0.0);
    CHECK(std::abs(t_lib - t_oracle) < 0.02 * t_oracle);

    CHECK(is_conjugate(m, x, Vec(t_lib * xi), {}, 1e-6).conjugate);
    const ConjugacyProbe half = is_conjugate(m, x, Vec(0.5 * t_lib * xi));
    CHECK(!half.conjugate);
    CHECK(half.sigma_ratio > 1e-3);
}

TEST_CASE("boundary travel time behaves as a generating function of the flow") {
    Domain disk = make_disk();
    Vec u(1), w(1);
    u << 2.2;
    w << -0.8;

    HamiltonianModel euclid = make_constant_metric(Mat(Mat::Identity(2, 2)), "euclid");
    const GeneratingResiduals ge = generating_check(euclid, disk, 0, u, 0, w);
    const Vec xe = chart_embed(disk, 0, u).x, ye = chart_embed(disk, 0, w).x;
    CHECK(std::abs(ge.T - (ye - xe).norm()) < 1e-9);
    CHECK(ge.r_full < 1e-4);
    CHECK(ge.r_tangential < 1e-4);

    const GeneratingResiduals gw = generating_check(gaussian_well(), disk, 0, u, 0, w);
    CHECK(gw.r_full < 1e-4);
    CHECK(gw.r_tangential < 1e-4);
}

TEST_CASE("first variation of travel time equals minus the flow integral") {
    const Vec x = (Vec(2) << -1.2, 0.3).finished();
    const Vec y = (Vec(2) << 1.4, -0.2).finished();

    ModelFamily conformal_fam = [](double s) {
        auto c = [s](const Vec& p) {
            return 1.0 - 0.4 * std::exp(-p.squaredNorm() / 1.28) + s * 0.3 * std::exp(-p.squaredNorm());
        };
        auto gc = [s](const Vec& p) {
            return Vec((0.4 * (2.0 / 1.28) * std::exp(-p.squaredNorm() / 1.28) -
                        s * 0.6 * std::exp(-p.squaredNorm())) *
                       p);
        };
        return make_conformal(2, c, gc, "well_family");
    };
    const Vec seed0 = fan_seed(conformal_fam(0.0), x, y);
    const VariationResult vr = first_variation_check(conformal_fam, x, y, seed0);
    CHECK(std::abs(vr.lhs) > 1e-3); // family genuinely moves the travel time
    CHECK(vr.residual < 1e-4);

    ModelFamily metric_fam = [](double s) {
        const Mat A = (Mat(2, 2) << 0.4, 0.1, 0.1, -0.2).finished();
        return make_constant_metric(Mat(Mat::Identity(2, 2) + s * A), "metric_family");
    };
    const VariationResult vm = first_variation_check(metric_fam, x, y, Vec(y - x));
    CHECK(std::abs(vm.lhs) > 1e-3);
    CHECK(vm.residual < 1e-4);
}

TEST_CASE("uniform rescaling of the hamiltonian shifts travel time at rate minus one half") {
    ModelFamily scaling_fam = [](double s) {
        return HamiltonianModel(
            2, HamiltonianModel::Kind::generic, "scaled_euclid",
            [s](const Vec&, const Vec& xi) { return 0.5 * (1.0 + s) * xi.squaredNorm(); },
            [](const Vec&, const Vec&) { return Vec(Vec::Zero(2)); },
            [s](const Vec&, const Vec& xi) { return Vec((1.0 + s) * xi); });
    };
    const Vec x = (Vec(2) << 0.1, -0.4).finished();
    const Vec y = (Vec(2) << 1.3, 0.8).finished();
    const double T = (y - x).norm();
    const VariationResult vr = first_variation_check(scaling_fam, x, y, Vec(y - x));
    CHECK(std::abs(vr.lhs + 0.5 * T) < 1e-6);
    CHECK(vr.residual < 1e-6);
}

TEST_CASE("free-endpoint energy variation balances the boundary pairing") {
    const Vec x0 = (Vec(2) << -0.5, 0.2).finished();
    const Vec xi0 = (Vec(2) << 0.9, -0.3).finished();
    const Vec a = (Vec(2) << 0.4, 0.7).finished();
    const Vec b = (Vec(2) << -0.2, 0.5).finished();

    // Fixed flat model, varying start: lhs has the closed form xi0 . b.
    ModelFamily flat = [](double) {
        return make_constant_metric(Mat(Mat::Identity(2, 2)), "euclid");
    };
    auto start = [&](double s) { return PhasePoint{Vec(x0 + s * a), Vec(xi0 + s * b)}; };
    const VariationResult ve = variation_energy_check(flat, start);
    CHECK(std::abs(ve.lhs - xi0.dot(b)) < 1e-7);
    CHECK(ve.residual < 1e-7);

    // Genuinely x-dependent family along a perturbed start.
    ModelFamily waves = [](double s) {
        auto c = [s](const Vec& p) { return 1.0 + 0.2 * s * std::sin(p(0) + 0.3 * p(1)); };
        auto gc = [s](const Vec& p) {
            const double d = 0.2 * s * std::cos(p(0) + 0.3 * p(1));
            return Vec((Vec(2) << d, 0.3 * d).finished());
        };
        return make_conformal(2, c, gc, "wave_family");
    };
    const VariationResult vw = variation_energy_check(waves, start);
    CHECK(std::abs(vw.lhs) > 1e-3);
    CHECK(vw.residual < 1e-6);
}

TEST_CASE("chart gradients of the connecting energy obey the sign law") {
    HamiltonianModel mink = make_constant_metric((Mat(2, 2) << -1, 0, 0, 1).finished(), "minkowski");
    Domain slab = make_slab(2, 1, 1.0);
    const Mat G = (Mat(2, 2) << -1, 0, 0, 1).finished();
    for (double du : {-0.6, 0.15, 0.5}) {
        Vec u(1), w(1);
        u << 0.1;
        w << 0.1 + du;
        const Vec x = (Vec(2) << u(0), 0.0).finished();
        const Vec y = (Vec(2) << w(0), 1.0).finished();
        const Vec seed = G * (y - x);
        const SigmaProbe sp = sigma_probe(mink, slab, 0, u, 1, w, seed);
        CHECK(std::abs(sp.r - 0.5 * (1.0 - du * du)) < 1e-10);
        CHECK(std::abs(sp.grad_u(0) - du) < 1e-8);
        CHECK(std::abs(sp.grad_w(0) + du) < 1e-8);
        CHECK(sp.law_residual < 1e-8);
    }

    Domain disk = make_disk();
    HamiltonianModel euclid = make_constant_metric(Mat(Mat::Identity(2, 2)), "euclid");
    Vec u(1), w(1);
    u << 2.2;
    w << -0.8;
    const Vec x = chart_embed(disk, 0, u).x, y = chart_embed(disk, 0, w).x;
    const SigmaProbe sp = sigma_probe(euclid, disk, 0, u, 0, w, Vec(y - x));
    CHECK(std::abs(sp.r - 0.5 * (y - x).squaredNorm()) < 1e-10);
    CHECK(sp.law_residual < 1e-5);
}

TEST_CASE("linearized connecting energy carries a unit density") {
    ModelFamily fam = [](double s) {
        auto c = [s](const Vec& p) { return 1.0 + 0.3 * s * std::exp(-p.squaredNorm()); };
        auto gc = [s](const Vec& p) {
            return Vec(-0.6 * s * std::exp(-p.squaredNorm()) * p);
        };
        return make_conformal(2, c, gc, "bump_family");
    };
    Rng rng(29);
    std::vector<ShootProblem> problems;
    for (int i = 0; i < 6; ++i) {
        ShootProblem pb;
        pb.x = rng.uniform_vec(2, -1.5, -0.4);
        pb.y = rng.uniform_vec(2, 0.4, 1.5);
        pb.seed = pb.y - pb.x;
        problems.push_back(pb);
    }
    const DrCheckResult dr = dr_check(fam, problems);
    CHECK(std::abs(dr.rho_fit - 1.0) < 1e-4);
    CHECK(dr.max_residual < 1e-6);
    for (double I : dr.integrals) CHECK(std::abs(I) > 1e-4);
}

TEST_CASE("failure modes surface as typed errors") {
    HamiltonianModel mink = make_constant_metric((Mat(2, 2) << -1, 0, 0, 1).finished(), "minkowski");
    const Vec x = Vec::Zero(2);
    const Vec y = (Vec(2) << 1.0, 1.0).finished(); // null separation
    try {
        (void)travel_time(mink, x, y, Vec((Vec(2) << -1.0, 1.0).finished()));
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::LevelSetViolation);
    }

    HamiltonianModel well = gaussian_well();
    ShootConfig strict;
    strict.tol = 1e-14;
    strict.max_iter = 1;
    try {
        (void)shoot(well, (Vec(2) << -1.5, 0.0).finished(), (Vec(2) << 1.5, 0.2).finished(),
                    (Vec(2) << 0.0, 2.0).finished(), strict);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NewtonDiverged);
    }

    HamiltonianModel e4 = make_constant_metric(Mat(Mat::Identity(4, 4)), "euclid4");
    try {
        (void)fan_seed(e4, Vec(Vec::Zero(4)), Vec(Vec::Ones(4)));
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidArgument);
    }
}
