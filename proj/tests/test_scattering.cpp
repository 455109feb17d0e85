#include <doctest.h>

#include <cmath>

#include "hamlens/boundary.hpp"
#include "hamlens/hamiltonian.hpp"
#include "hamlens/scattering.hpp"

using namespace hamlens;

namespace {

HamiltonianModel euclid2() {
    return make_constant_metric(Mat(Mat::Identity(2, 2)), "euclid");
}

HamiltonianModel gaussian_bump() {
    auto c = [](const Vec& x) { return 1.0 + 0.3 * std::exp(-x.squaredNorm()); };
    auto gc = [](const Vec& x) { return Vec(-0.6 * std::exp(-x.squaredNorm()) * x); };
    return make_conformal(2, c, gc, "gaussian_bump");
}

} // namespace

TEST_CASE("disk chords at unit energy match the straight-line closed form") {
    HamiltonianModel m = euclid2();
    Domain disk = make_disk();
    for (double theta : {-2.0, -0.7, 0.3, 1.9}) {
        for (double s : {0.0, -0.35, 0.8}) {
            Vec u(1), xp(1);
            u << theta;
            xp << s;
            const ScatterRecord rec = scatter(m, disk, {0, u, xp}, 0.5, Branch::incoming);
            REQUIRE(rec.status == ScatterStatus::ok);
            const double c = std::sqrt(1.0 - s * s);
            const Vec x = (Vec(2) << std::cos(theta), std::sin(theta)).finished();
            const Vec tau = (Vec(2) << -std::sin(theta), std::cos(theta)).finished();
            const Vec xi = s * tau - c * x;
            CHECK(std::abs(rec.ell - 2.0 * c) < 1e-8);
            CHECK((rec.entry.xi - xi).norm() < 1e-10);
            CHECK((rec.exit.x - (x + 2.0 * c * xi)).norm() < 1e-8);
            CHECK((rec.exit.xi - xi).norm() < 1e-8);
            CHECK(std::abs(rec.energy - 0.5) < 1e-12);
            CHECK(rec.transv_entry > 0.0);
            CHECK(rec.transv_exit < 0.0);
            REQUIRE(rec.exit_bc.has_value());
            const ChartFrame f = chart_embed(disk, rec.exit_bc->chart, rec.exit_bc->u);
            CHECK((f.x - rec.exit.x).norm() < 1e-8);
            REQUIRE(rec.traj);
            CHECK(rec.traj->contains(0.5 * rec.ell));
            CHECK(std::abs(m.value(rec.exit) - 0.5) < 1e-10);
        }
    }
}

TEST_CASE("slab crossings of a lorentzian metric match the closed form") {
    HamiltonianModel m = make_constant_metric((Mat(2, 2) << -1, 0, 0, 1).finished(), "minkowski");
    Domain slab = make_slab(2, 1, 1.0);
    for (double xi0 : {-0.9, 0.0, 1.3}) {
        Vec u(1), xp(1);
        u << 0.2;
        xp << xi0;
        const ScatterRecord rec = scatter(m, slab, {0, u, xp}, 0.5, Branch::incoming);
        REQUIRE(rec.status == ScatterStatus::ok);
        // H = (-xi0^2 + xi1^2)/2 = 1/2 and xdot = (-xi0, xi1).
        const double xi1 = std::sqrt(1.0 + xi0 * xi0);
        CHECK(std::abs(rec.entry.xi(1) - xi1) < 1e-12);
        CHECK(std::abs(rec.ell - 1.0 / xi1) < 1e-10);
        CHECK(std::abs(rec.exit.x(0) - (0.2 - xi0 / xi1)) < 1e-10);
        CHECK(std::abs(rec.exit.x(1) - 1.0) < 1e-10);
        REQUIRE(rec.exit_bc.has_value());
        CHECK(rec.exit_bc->chart == 1);
    }
}

TEST_CASE("rescaled scattering agrees with the dilated unit-energy record") {
    Domain disk = make_disk();
    for (const HamiltonianModel& m : {euclid2(), gaussian_bump()}) {
        for (double lambda : {0.5, 2.0, 5.0}) {
            Vec u(1), xps(1);
            u << 0.4;
            xps << 0.25 * lambda;
            const ScatterRecord direct =
                scatter(m, disk, {0, u, xps}, 0.5 * lambda * lambda, Branch::incoming);
            const ScatterRecord scaled = scatter_lambda(m, disk, {0, u, xps}, lambda);
            REQUIRE(direct.status == ScatterStatus::ok);
            REQUIRE(scaled.status == ScatterStatus::ok);
            const double fiber = std::max(1.0, lambda);
            CHECK((direct.exit.x - scaled.exit.x).norm() < 1e-7);
            CHECK((direct.exit.xi - scaled.exit.xi).norm() < 1e-7 * fiber);
            CHECK(std::abs(direct.ell - scaled.ell) < 1e-7 * std::max(1.0, 1.0 / lambda));
            CHECK(std::abs(direct.energy - scaled.energy) < 1e-12 * fiber * fiber);
            CHECK(std::abs(scaled.energy - 0.5 * lambda * lambda) < 1e-12 * fiber * fiber);
        }
    }
}

TEST_CASE("zero-energy scattering is homogeneous of degree minus one in ell") {
    HamiltonianModel m = make_constant_metric((Mat(2, 2) << -1, 0, 0, 1).finished(), "minkowski");
    Domain slab = make_slab(2, 1, 1.0);
    Vec u(1), xp(1);
    u << 0.2;
    xp << 0.8;
    const ScatterRecord base = scatter_zero(m, slab, {0, u, xp}, Branch::incoming);
    REQUIRE(base.status == ScatterStatus::ok);
    CHECK(std::abs(base.energy) < 1e-12);
    CHECK(std::abs(base.ell - 1.0 / 0.8) < 1e-10);
    CHECK(std::abs(base.exit.x(0) - (-0.8)) < 1e-10);
    for (double lambda : {0.5, 2.0, 5.0}) {
        Vec xpl(1);
        xpl << 0.8 * lambda;
        const ScatterRecord rec = scatter_zero(m, slab, {0, u, xpl}, Branch::incoming);
        REQUIRE(rec.status == ScatterStatus::ok);
        CHECK(std::abs(lambda * rec.ell - base.ell) < 1e-8);
        CHECK((rec.exit.x - base.exit.x).norm() < 1e-8);
        CHECK((rec.exit.xi - lambda * base.exit.xi).norm() < 1e-8 * std::max(1.0, lambda));
        CHECK(std::abs(rec.energy) < 1e-10 * std::max(1.0, lambda * lambda));
    }
}

TEST_CASE("an outgoing seed runs the flow backward and inverts the relation") {
    HamiltonianModel m = gaussian_bump();
    Domain disk = make_disk();
    Vec u(1), xp(1);
    u << -0.9;
    xp << 0.3;
    const ScatterRecord fwd = scatter(m, disk, {0, u, xp}, 0.5, Branch::incoming);
    REQUIRE(fwd.status == ScatterStatus::ok);
    const ScatterRecord back = scatter_hat(m, disk, fwd.exit);
    REQUIRE(back.status == ScatterStatus::ok);
    CHECK(back.ell < 0.0);
    CHECK(std::abs(back.ell + fwd.ell) < 1e-6);
    CHECK(phase_dist(back.exit, fwd.entry) < 1e-6);
}

TEST_CASE("tangential seeds and slow crossings are reported in the status") {
    HamiltonianModel m = euclid2();
    Domain disk = make_disk();
    const Vec x = (Vec(2) << 0.0, 1.0).finished();
    const PhasePoint grazing{x, (Vec(2) << 1.0, 0.0).finished()};
    CHECK(scatter_hat(m, disk, grazing).status == ScatterStatus::tangential_entry);

    Domain slab = make_slab(2, 1, 1.0);
    Vec u(1), xp(1);
    u << 0.0;
    xp << 0.999; // normal momentum ~0.045: crossing takes ~22 time units
    ScatterConfig cfg;
    cfg.max_time = 1.0;
    const ScatterRecord rec = scatter(m, slab, {0, u, xp}, 0.5, Branch::incoming, cfg);
    CHECK(rec.status == ScatterStatus::trapped);
    CHECK(std::string(scatter_status_name(rec.status)) == "trapped");
}

TEST_CASE("ball chords in three dimensions") {
    HamiltonianModel m = make_constant_metric(Mat(Mat::Identity(3, 3)), "euclid3");
    Domain ball = make_ball(3);
    const Vec x = (Vec(3) << 0.0, 1.0, 0.0).finished();
    const PhasePoint p{x, (Vec(3) << 0.0, -1.0, 0.0).finished()};
    const ScatterRecord rec = scatter_hat(m, ball, p);
    REQUIRE(rec.status == ScatterStatus::ok);
    CHECK(std::abs(rec.ell - 2.0) < 1e-8);
    CHECK((rec.exit.x + x).norm() < 1e-8);
}
