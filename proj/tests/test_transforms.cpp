#include <doctest.h>

#include <cmath>

#include "hamlens/boundary.hpp"
#include "hamlens/hamiltonian.hpp"
#include "hamlens/scattering.hpp"
#include "hamlens/transforms.hpp"

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

BoundaryCovector disk_bc(double theta, double s) {
    Vec u(1), xp(1);
    u << theta;
    xp << s;
    return {0, u, xp};
}

} // namespace

TEST_CASE("x-ray of the constant function is the chord length") {
    HamiltonianModel m = euclid2();
    Domain disk = make_disk();
    auto one = [](const PhasePoint&) { return 1.0; };
    for (double s : {0.0, 0.45, -0.7}) {
        const RayIntegral ri = xray(m, disk, one, disk_bc(0.9, s));
        REQUIRE(ri.ray.status == ScatterStatus::ok);
        CHECK(std::abs(ri.value - 2.0 * std::sqrt(1.0 - s * s)) < 1e-9);
        CHECK(std::abs(ri.value - ri.length) < 1e-12);
    }
}

TEST_CASE("the transform is linear in the integrand") {
    HamiltonianModel m = gaussian_bump();
    Domain disk = make_disk();
    auto f1 = [](const PhasePoint& p) { return std::exp(-p.x.squaredNorm()) * (1.0 + p.xi(0)); };
    auto f2 = [](const PhasePoint& p) { return std::cos(p.x(0) + 0.4 * p.x(1)) + 0.1 * p.xi(1); };
    auto f3 = [&](const PhasePoint& p) { return 2.0 * f1(p) - 3.0 * f2(p); };
    const BoundaryCovector bc = disk_bc(-1.4, 0.3);
    const double v1 = xray(m, disk, f1, bc).value;
    const double v2 = xray(m, disk, f2, bc).value;
    const double v3 = xray(m, disk, f3, bc).value;
    CHECK(std::abs(v3 - (2.0 * v1 - 3.0 * v2)) < 1e-10);
}

TEST_CASE("integrating a flow derivative telescopes to boundary values") {
    Domain disk = make_disk();
    auto phi = [](const PhasePoint& p) {
        return std::sin(p.x(0)) * p.xi(1) + 0.3 * p.x(1) * p.x(1) * p.xi(0);
    };
    for (const HamiltonianModel& m : {euclid2(), gaussian_bump()}) {
        const PhaseFunction f = xh_of(m, phi);
        for (double s : {0.1, -0.5}) {
            const RayIntegral ri = xray(m, disk, f, disk_bc(2.0, s));
            REQUIRE(ri.ray.status == ScatterStatus::ok);
            const double jump = phi(ri.ray.exit) - phi(ri.ray.entry);
            CHECK(std::abs(ri.value - jump) < 1e-7 * std::max(1.0, ri.length));
        }
    }
}

TEST_CASE("gauge terms vanishing on the boundary are in the kernel") {
    Domain disk = make_disk();
    auto phi = [](const PhasePoint& p) { return (1.0 - p.x.squaredNorm()) * p.xi(1); };
    for (const HamiltonianModel& m : {euclid2(), gaussian_bump()}) {
        const PhaseFunction f = xh_of(m, phi);
        for (double theta : {0.3, 1.7, -2.4}) {
            for (double s : {0.0, 0.55}) {
                const RayIntegral ri = xray(m, disk, f, disk_bc(theta, s));
                REQUIRE(ri.ray.status == ScatterStatus::ok);
                CHECK(std::abs(ri.value) < 1e-7 * std::max(1.0, ri.length));
            }
        }
    }
}

TEST_CASE("gauge potential reconstructs the planted potential along rays") {
    Domain disk = make_disk();
    auto phi = [](const PhasePoint& p) { return (1.0 - p.x.squaredNorm()) * p.xi(1); };
    for (const HamiltonianModel& m : {euclid2(), gaussian_bump()}) {
        const PhaseFunction f = xh_of(m, phi);
        const ScatterRecord rec = scatter(m, disk, disk_bc(0.7, 0.25), 0.5, Branch::incoming);
        REQUIRE(rec.status == ScatterStatus::ok);
        for (double frac : {0.3, 0.6, 0.9}) {
            const PhasePoint p = rec.traj->phase_at(frac * rec.ell);
            const double rebuilt = gauge_potential(m, disk, f, p);
            CHECK(std::abs(rebuilt - phi(p)) < 1e-6);
        }
    }
}

TEST_CASE("light-ray transform kills wall-vanishing gauges on null rays") {
    HamiltonianModel m = make_constant_metric((Mat(2, 2) << -1, 0, 0, 1).finished(), "minkowski");
    Domain slab = make_slab(2, 1, 1.0);
    auto phi = [](const PhasePoint& p) { return p.x(1) * (1.0 - p.x(1)) * p.xi(0); };
    const PhaseFunction f = xh_of(m, phi);
    auto one = [](const PhasePoint&) { return 1.0; };
    for (double xp : {0.8, 1.6, -1.1}) {
        Vec u(1), s(1);
        u << 0.3;
        s << xp;
        const RayIntegral kern = lightray(m, slab, f, {0, u, s});
        REQUIRE(kern.ray.status == ScatterStatus::ok);
        CHECK(std::abs(kern.ray.energy) < 1e-12);
        CHECK(std::abs(kern.value) < 1e-8 * std::max(1.0, kern.length));
        const RayIntegral len = lightray(m, slab, one, {0, u, s});
        CHECK(std::abs(len.value - 1.0 / std::abs(xp)) < 1e-9);
    }
}

TEST_CASE("trapped rays keep the transform undefined") {
    HamiltonianModel m = euclid2();
    Domain slab = make_slab(2, 1, 1.0);
    Vec u(1), s(1);
    u << 0.0;
    s << 0.999;
    TransformConfig cfg;
    cfg.scatter.max_time = 1.0;
    auto one = [](const PhasePoint&) { return 1.0; };
    const RayIntegral ri = xray(m, slab, one, {0, u, s}, cfg);
    CHECK(ri.ray.status == ScatterStatus::trapped);
    CHECK(std::isnan(ri.value));
}
