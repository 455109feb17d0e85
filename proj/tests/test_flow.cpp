#include <doctest.h>

#include <cmath>

#include "hamlens/errors.hpp"
#include "hamlens/fd.hpp"
#include "hamlens/flow.hpp"
#include "hamlens/hamiltonian.hpp"
#include "hamlens/ode.hpp"
#include "hamlens/rng.hpp"
#include "oracles.hpp"

using namespace hamlens;

namespace {

HamiltonianModel gaussian_well() {
    auto c = [](const Vec& x) { return 1.0 - 0.4 * std::exp(-x.squaredNorm() / 0.64); };
    auto grad_c = [](const Vec& x) {
        return Vec((0.8 / 0.64) * std::exp(-x.squaredNorm() / 0.64) * x);
    };
    return make_conformal(2, c, grad_c, "well");
}

} // namespace

TEST_CASE("stepper: dense output is continuous at the step ends") {
    // sin/cos system; also probes the interpolant coefficients, which must
    // reproduce both endpoint states exactly.
    OdeRhs rhs = [](double, const Vec& y, Vec& dy) {
        dy.resize(2);
        dy << y(1), -y(0);
    };
    Vec y0(2);
    y0 << 1.0, 0.0;
    Dopri5Stepper st(rhs, 0.0, y0, {1e-10, 1e-12});
    int steps = 0;
    while (st.advance(10.0)) {
        ++steps;
        const DenseCoeffs& d = st.dense();
        CHECK((d.eval(st.t_prev()) - st.y_prev()).cwiseAbs().maxCoeff() < 1e-13);
        CHECK((d.eval(st.t_curr()) - st.y_curr()).cwiseAbs().maxCoeff() < 1e-13);
        const double tm = 0.5 * (st.t_prev() + st.t_curr());
        const Vec mid = d.eval(tm);
        CHECK(std::abs(mid(0) - std::cos(tm)) < 1e-9);
        CHECK(std::abs(mid(1) + std::sin(tm)) < 1e-9);
    }
    CHECK(steps > 5);
    CHECK(std::abs(st.y_curr()(0) - std::cos(10.0)) < 1e-8);
}

TEST_CASE("stepper: quartic interpolant is exact on cubic solutions") {
    OdeRhs rhs = [](double t, const Vec&, Vec& dy) {
        dy.resize(1);
        dy << 3.0 * t * t - 2.0 * t + 0.5;
    };
    Vec y0(1);
    y0 << 0.25;
    auto exact = [](double t) { return t * t * t - t * t + 0.5 * t + 0.25; };
    Dopri5Stepper st(rhs, 0.0, y0, {1e-8, 1e-10, 0.5});
    while (st.advance(2.0)) {
        for (double f : {0.2, 0.5, 0.8}) {
            const double t = st.t_prev() + f * (st.t_curr() - st.t_prev());
            CHECK(std::abs(st.dense().eval(t)(0) - exact(t)) < 1e-12);
        }
    }
}

TEST_CASE("euclidean and constant-metric flows match closed forms") {
    Mat g(2, 2);
    g << 1.7, 0.4, 0.4, 0.8;
    Rng rng(5);
    for (const Mat& metric : {Mat(Mat::Identity(2, 2)), g}) {
        HamiltonianModel m = make_constant_metric(metric, "cm");
        for (int i = 0; i < 4; ++i) {
            const PhasePoint p0{rng.uniform_vec(2, -1.0, 1.0), rng.covector(2)};
            const double t = rng.uniform(0.2, 2.0);
            const PhasePoint p1 = flow_map(m, p0, t);
            CHECK((p1.x - (p0.x + t * metric * p0.xi)).cwiseAbs().maxCoeff() < 1e-10);
            CHECK((p1.xi - p0.xi).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("minkowski flow matches the closed form including backward time") {
    Mat g = Mat::Identity(2, 2);
    g(0, 0) = -1.0;
    HamiltonianModel m = make_constant_metric(g, "mink");
    const PhasePoint p0{(Vec(2) << 0.2, -0.1).finished(), (Vec(2) << 0.9, 0.9).finished()};
    for (double t : {1.3, -0.7}) {
        const PhasePoint p1 = flow_map(m, p0, t);
        CHECK((p1.x - (p0.x + t * g * p0.xi)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("conformal flow agrees with a fixed-step oracle and conserves energy") {
    HamiltonianModel m = gaussian_well();
    Rng rng(9);
    for (int i = 0; i < 3; ++i) {
        const PhasePoint p0{rng.uniform_vec(2, -0.6, 0.6), rng.covector(2)};
        const double t = 1.2;
        const PhasePoint adaptive = flow_map(m, p0, t);
        const PhasePoint reference = oracle::rk4_flow(m, p0, t, 6000);
        CHECK(phase_dist(adaptive, reference) < 1e-7);

        Trajectory traj = integrate(m, p0, 0.0, t);
        double drift = 0.0;
        for (int j = 0; j <= traj.n_steps(); ++j)
            drift = std::max(drift, std::abs(m.value(traj.phase_node(j)) - traj.energy0));
        CHECK(drift < 1e-8);
    }
}

TEST_CASE("flow roundtrip: backward integration inverts forward") {
    HamiltonianModel m = gaussian_well();
    const PhasePoint p0{(Vec(2) << 0.25, -0.4).finished(), (Vec(2) << 0.8, 0.35).finished()};
    const PhasePoint p1 = flow_map(m, p0, 1.1);
    const PhasePoint back = flow_map(m, p1, -1.1);
    CHECK(phase_dist(back, p0) < 1e-9);
}

TEST_CASE("variational jacobians are symplectic and match finite differences") {
    HamiltonianModel m = gaussian_well();
    Rng rng(13);
    const PhasePoint p0{rng.uniform_vec(2, -0.5, 0.5), rng.covector(2)};
    const FlowJet jet = flow_jet(m, p0, 0.9);
    CHECK(symplectic_residual(jet.M) < 1e-8);

    const Mat fd_jac = fd::jacobian(
        [&m](const Vec& y) { return pack(flow_map(m, unpack(y), 0.9)); }, pack(p0), 1e-6, 4);
    CHECK((jet.M - fd_jac).cwiseAbs().maxCoeff() < 1e-5);
    CHECK(phase_dist(jet.p, flow_map(m, p0, 0.9)) < 1e-12);
}

TEST_CASE("rescaling law holds at positive, negative sign patterns and zero energy") {
    Mat g = Mat::Identity(2, 2);
    g(0, 0) = -1.0;
    HamiltonianModel mink = make_constant_metric(g, "mink");
    HamiltonianModel well = gaussian_well();
    HamiltonianModel euclid = make_constant_metric(Mat(Mat::Identity(2, 2)), "euclid");

    const PhasePoint null_pt{(Vec(2) << 0.1, 0.0).finished(), (Vec(2) << 0.7, 0.7).finished()};
    const PhasePoint generic{(Vec(2) << 0.3, -0.2).finished(), (Vec(2) << 0.9, 0.4).finished()};

    for (double lambda : {0.5, 2.0, 5.0}) {
        CHECK(rescale_check(euclid, generic, lambda, 0.8) < 1e-9);
        CHECK(rescale_check(well, generic, lambda, 0.8) < 1e-8);
        CHECK(rescale_check(mink, null_pt, lambda, 0.8) < 1e-9); // E = 0
    }
}

TEST_CASE("requests beyond the time cutoff are rejected") {
    HamiltonianModel m = make_constant_metric(Mat(Mat::Identity(2, 2)), "euclid");
    const PhasePoint p0{Vec::Zero(2), (Vec(2) << 1.0, 0.0).finished()};
    try {
        (void)integrate(m, p0, 0.0, 2e3);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MaxTimeExceeded);
    }
}

TEST_CASE("mu-reparametrized flow traces the same null ray as point sets") {
    Mat g = Mat::Identity(2, 2);
    g(0, 0) = -1.0;
    HamiltonianModel mink = make_constant_metric(g, "mink");
    PhaseFn mu = [](const PhasePoint& p) {
        return 1.0 + 0.2 * std::sin(p.x(0) + p.x(1) * p.xi(0) / p.xi(1));
    };
    const PhasePoint p0{(Vec(2) << 0.3, 0.0).finished(), (Vec(2) << 1.1, 1.1).finished()};
    const MuReparam mr = reparametrize_mu(mink, mu, p0, 1.0);
    CHECK(mu_pointset_residual(mr) < 1e-9);
    // ds_breve/ds = 1/mu: matched parameters must be strictly increasing.
    for (std::size_t i = 1; i < mr.s_breve.size(); ++i) CHECK(mr.s_breve[i] > mr.s_breve[i - 1]);
}

TEST_CASE("trajectory dense lookup matches endpoint states") {
    HamiltonianModel m = gaussian_well();
    const PhasePoint p0{(Vec(2) << -0.2, 0.5).finished(), (Vec(2) << 0.6, -0.9).finished()};
    Trajectory traj = integrate(m, p0, 0.0, 1.4);
    CHECK(traj.contains(0.7));
    CHECK(!traj.contains(1.5));
    const PhasePoint mid = traj.phase_at(0.7);
    CHECK(phase_dist(mid, flow_map(m, p0, 0.7)) < 1e-9);
    CHECK(phase_dist(traj.phase_at(1.4), flow_map(m, p0, 1.4)) < 1e-12);
}
