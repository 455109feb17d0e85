#include "hamlens/boundary.hpp"

#include <algorithm>
#include <cmath>

#include "hamlens/errors.hpp"
#include "hamlens/fd.hpp"
#include "hamlens/rootfind.hpp"

namespace hamlens {

namespace {

constexpr double kOnBoundaryTol = 1e-8;   // |rho| for restriction preconditions
constexpr double kArmRho = 1e-9;          // inside margin before crossings count
constexpr double kRhoRootTol = 1e-13;     // |rho| at polished hits
constexpr double kChartCoverBand = 1e-6;  // distance to the wall for chart coverage

Vec drop_coord(const Vec& x, int axis) {
    Vec u(x.size() - 1);
    int j = 0;
    for (int i = 0; i < x.size(); ++i)
        if (i != axis) u(j++) = x(i);
    return u;
}

Vec insert_coord(const Vec& u, int axis, double value) {
    Vec x(u.size() + 1);
    int j = 0;
    for (int i = 0; i < x.size(); ++i) x(i) = (i == axis) ? value : u(j++);
    return x;
}

Mat insert_jacobian(int dim, int axis) {
    Mat J = Mat::Zero(dim, dim - 1);
    int j = 0;
    for (int i = 0; i < dim; ++i)
        if (i != axis) J(i, j++) = 1.0;
    return J;
}

BoundaryChart wall_chart(int dim, int axis, double value, std::string name) {
    BoundaryChart c;
    c.ambient_dim = dim;
    c.name = std::move(name);
    c.param = [axis, value](const Vec& u) { return insert_coord(u, axis, value); };
    c.jacobian = [dim, axis](const Vec&) { return insert_jacobian(dim, axis); };
    c.inverse = [axis, value](const Vec& x) -> std::optional<Vec> {
        if (std::abs(x(axis) - value) > kChartCoverBand * std::max(1.0, std::abs(value)))
            return std::nullopt;
        return drop_coord(x, axis);
    };
    return c;
}

BoundaryChart angle_chart(bool cut_at_pi) {
    // cut_at_pi: theta in (-pi, pi); otherwise theta in (0, 2 pi).
    BoundaryChart c;
    c.ambient_dim = 2;
    c.name = cut_at_pi ? "angle" : "angle_shifted";
    c.param = [](const Vec& u) {
        Vec x(2);
        x << std::cos(u(0)), std::sin(u(0));
        return x;
    };
    c.jacobian = [](const Vec& u) {
        Mat J(2, 1);
        J << -std::sin(u(0)), std::cos(u(0));
        return J;
    };
    c.inverse = [cut_at_pi](const Vec& x) -> std::optional<Vec> {
        if (std::abs(x.norm() - 1.0) > kChartCoverBand) return std::nullopt;
        double th = std::atan2(x(1), x(0));
        if (cut_at_pi) {
            if (std::abs(th) > M_PI - 0.05) return std::nullopt;
        } else {
            if (th <= 0.0) th += 2.0 * M_PI;
            if (th < 0.05 || th > 2.0 * M_PI - 0.05) return std::nullopt;
        }
        Vec u(1);
        u << th;
        return u;
    };
    return c;
}

BoundaryChart hemisphere_chart(int dim, int axis, double sign) {
    BoundaryChart c;
    c.ambient_dim = dim;
    c.name = std::string("hemi_") + std::to_string(axis) + (sign > 0 ? "p" : "m");
    c.param = [axis, sign](const Vec& u) {
        const double rr = u.squaredNorm();
        if (rr > 1.0 - 1e-12)
            fail(ErrorCode::InvalidArgument, "hemisphere chart coordinates outside the unit disk");
        return insert_coord(u, axis, sign * std::sqrt(1.0 - rr));
    };
    c.jacobian = [dim, axis, sign](const Vec& u) {
        const double rr = u.squaredNorm();
        if (rr > 1.0 - 1e-12)
            fail(ErrorCode::InvalidArgument, "hemisphere chart coordinates outside the unit disk");
        Mat J = insert_jacobian(dim, axis);
        const double root = std::sqrt(1.0 - rr);
        for (int j = 0; j < dim - 1; ++j) J(axis, j) = -sign * u(j) / root;
        return J;
    };
    const double cover = 1.0 / std::sqrt(static_cast<double>(dim)) - 1e-9;
    c.inverse = [axis, sign, cover](const Vec& x) -> std::optional<Vec> {
        if (std::abs(x.norm() - 1.0) > kChartCoverBand) return std::nullopt;
        if (sign * x(axis) < cover) return std::nullopt;
        return drop_coord(x, axis);
    };
    return c;
}

} // namespace

Domain make_half_space(int dim, int axis) {
    if (axis < 0 || axis >= dim) fail(ErrorCode::InvalidArgument, "half-space axis out of range");
    Domain d;
    d.dim = dim;
    d.name = "half_space";
    d.rho = [axis](const Vec& x) { return x(axis); };
    d.grad_rho = [dim, axis](const Vec&) {
        Vec g = Vec::Zero(dim);
        g(axis) = 1.0;
        return g;
    };
    d.charts.push_back(wall_chart(dim, axis, 0.0, "wall"));
    return d;
}

Domain make_slab(int dim, int axis, double width) {
    if (axis < 0 || axis >= dim) fail(ErrorCode::InvalidArgument, "slab axis out of range");
    if (!(width > 0.0)) fail(ErrorCode::InvalidArgument, "slab width must be positive");
    Domain d;
    d.dim = dim;
    d.name = "slab";
    d.rho = [axis, width](const Vec& x) { return x(axis) * (width - x(axis)) / width; };
    d.grad_rho = [dim, axis, width](const Vec& x) {
        Vec g = Vec::Zero(dim);
        g(axis) = (width - 2.0 * x(axis)) / width;
        return g;
    };
    d.charts.push_back(wall_chart(dim, axis, 0.0, "near_wall"));
    d.charts.push_back(wall_chart(dim, axis, width, "far_wall"));
    return d;
}

Domain make_disk() {
    Domain d;
    d.dim = 2;
    d.name = "disk";
    d.rho = [](const Vec& x) { return 1.0 - x.squaredNorm(); };
    d.grad_rho = [](const Vec& x) { return Vec(-2.0 * x); };
    d.charts.push_back(angle_chart(true));
    d.charts.push_back(angle_chart(false));
    return d;
}

Domain make_ball(int dim) {
    if (dim < 2) fail(ErrorCode::InvalidArgument, "ball dimension must be at least 2");
    Domain d;
    d.dim = dim;
    d.name = "ball";
    d.rho = [](const Vec& x) { return 1.0 - x.squaredNorm(); };
    d.grad_rho = [](const Vec& x) { return Vec(-2.0 * x); };
    for (int axis = 0; axis < dim; ++axis) {
        d.charts.push_back(hemisphere_chart(dim, axis, +1.0));
        d.charts.push_back(hemisphere_chart(dim, axis, -1.0));
    }
    return d;
}

Vec domain_grad_rho(const Domain& domain, const Vec& x) {
    if (domain.grad_rho) return domain.grad_rho(x);
    const double h = fd::step(fd::inf_norm(x), 1e-6);
    return fd::gradient(domain.rho, x, h);
}

Mat chart_jacobian(const BoundaryChart& chart, const Vec& u) {
    if (chart.jacobian) return chart.jacobian(u);
    const double h = fd::step(fd::inf_norm(u), 1e-6);
    return fd::jacobian(chart.param, u, h, chart.ambient_dim);
}

ChartFrame chart_embed(const Domain& domain, int chart, const Vec& u) {
    if (chart < 0 || chart >= static_cast<int>(domain.charts.size()))
        fail(ErrorCode::InvalidArgument, "chart index out of range");
    const BoundaryChart& c = domain.charts[chart];
    return ChartFrame{c.param(u), chart_jacobian(c, u)};
}

double transversality(const HamiltonianModel& model, const Domain& domain, const PhasePoint& p) {
    return domain_grad_rho(domain, p.x).dot(model.grad_xi(p));
}

BoundaryCovector restrict_covector(const Domain& domain, const PhasePoint& p) {
    if (std::abs(domain.rho(p.x)) > kOnBoundaryTol * std::max(1.0, fd::inf_norm(p.x)))
        fail(ErrorCode::InvalidArgument, "point is not on the boundary");
    for (int i = 0; i < static_cast<int>(domain.charts.size()); ++i) {
        const auto u = domain.charts[i].inverse ? domain.charts[i].inverse(p.x) : std::nullopt;
        if (!u) continue;
        const Mat dq = chart_jacobian(domain.charts[i], *u);
        BoundaryCovector bc;
        bc.chart = i;
        bc.u = *u;
        bc.xi_prime = dq.transpose() * p.xi;
        return bc;
    }
    fail(ErrorCode::NoChartCovers, "no boundary chart covers the base point");
}

BoundaryCovector restrict_covector_chart(const Domain& domain, const PhasePoint& p, int chart) {
    if (chart < 0 || chart >= static_cast<int>(domain.charts.size()))
        fail(ErrorCode::InvalidArgument, "restrict_covector_chart: no such chart");
    if (std::abs(domain.rho(p.x)) > kOnBoundaryTol * std::max(1.0, fd::inf_norm(p.x)))
        fail(ErrorCode::InvalidArgument, "point is not on the boundary");
    const auto u = domain.charts[chart].inverse ? domain.charts[chart].inverse(p.x) : std::nullopt;
    if (!u) fail(ErrorCode::NoChartCovers, "requested chart does not cover the base point");
    const Mat dq = chart_jacobian(domain.charts[chart], *u);
    BoundaryCovector bc;
    bc.chart = chart;
    bc.u = *u;
    bc.xi_prime = dq.transpose() * p.xi;
    return bc;
}

namespace {

struct ZetaRoot {
    double s;
    double transv;
    double transv_scale;
};

// All transversal/tangential roots of H(x, xi_part + s nu) = E over an
// expanding symmetric bracket.
std::vector<ZetaRoot> zeta_roots(const HamiltonianModel& model, const Vec& x, const Vec& xi_part,
                                 const Vec& nu, const Vec& grho, double energy,
                                 const ZetaConfig& cfg) {
    auto f = [&](double s) { return model.value(x, xi_part + s * nu) - energy; };
    auto transv_at = [&](double s) {
        const Vec hxi = model.grad_xi(x, xi_part + s * nu);
        return std::pair<double, double>(grho.dot(hxi), std::max(1.0, grho.norm() * hxi.norm()));
    };
    const double f_scale = std::max({1.0, std::abs(energy), xi_part.squaredNorm()});

    double S = cfg.bracket_factor * (xi_part.norm() + std::sqrt(2.0 * std::abs(energy)) + 1.0);
    for (int attempt = 0; attempt <= cfg.max_expand; ++attempt, S *= 2.0) {
        std::vector<double> roots;
        const int N = cfg.scan_points;
        double prev_s = -S, prev_f = f(prev_s);
        double best_abs = std::abs(prev_f), best_s = prev_s;
        for (int i = 1; i < N; ++i) {
            const double s = -S + 2.0 * S * static_cast<double>(i) / (N - 1);
            const double fs = f(s);
            if (std::abs(fs) < best_abs) {
                best_abs = std::abs(fs);
                best_s = s;
            }
            if (prev_f == 0.0 || prev_f * fs < 0.0)
                roots.push_back(rootfind::bracketed(f, prev_s, s, prev_f, fs, 1e-15,
                                                    1e-14 * f_scale));
            prev_s = s;
            prev_f = fs;
        }
        if (prev_f == 0.0) roots.push_back(prev_s);
        // A grazing (double) root touches zero without a sign change.
        if (best_abs <= 1e-9 * f_scale &&
            std::none_of(roots.begin(), roots.end(),
                         [&](double r) { return std::abs(r - best_s) < 4.0 * S / (N - 1); }))
            roots.push_back(best_s);

        if (!roots.empty()) {
            std::sort(roots.begin(), roots.end());
            std::vector<ZetaRoot> out;
            for (double r : roots) {
                if (!out.empty() && std::abs(r - out.back().s) < 1e-9 * std::max(1.0, S)) continue;
                const auto [tv, scale] = transv_at(r);
                out.push_back(ZetaRoot{r, tv, scale});
            }
            return out;
        }
    }
    fail(ErrorCode::NoRoot, "no covector with the requested tangential data and energy");
}

PhasePoint zeta_common(const HamiltonianModel& model, const Domain& domain,
                       const BoundaryCovector& bc, double energy, const ZetaConfig& cfg,
                       const std::function<PhasePoint(const Vec&, const Vec&, const Vec&,
                                                      const std::vector<ZetaRoot>&)>& pick) {
    const ChartFrame frame = chart_embed(domain, bc.chart, bc.u);
    const Vec grho = domain_grad_rho(domain, frame.x);
    Vec nu = grho;
    const double gn = nu.norm();
    if (gn < 1e-12) fail(ErrorCode::InvalidArgument, "degenerate boundary defining gradient");
    nu /= gn;
    if ((frame.dq.transpose() * nu).cwiseAbs().maxCoeff() > 1e-8)
        fail(ErrorCode::InvalidArgument, "chart tangent frame is not tangent to the boundary");

    Eigen::LDLT<Mat> gram(frame.dq.transpose() * frame.dq);
    if (gram.info() != Eigen::Success)
        fail(ErrorCode::SingularJacobian, "boundary chart differential is rank-deficient");
    const Vec xi_part = frame.dq * gram.solve(bc.xi_prime);

    const auto roots = zeta_roots(model, frame.x, xi_part, nu, grho, energy, cfg);
    return pick(frame.x, xi_part, nu, roots);
}

} // namespace

PhasePoint solve_zeta(const HamiltonianModel& model, const Domain& domain,
                      const BoundaryCovector& bc, double energy, Branch branch,
                      const ZetaConfig& cfg) {
    return zeta_common(
        model, domain, bc, energy, cfg,
        [&](const Vec& x, const Vec& xi_part, const Vec& nu,
            const std::vector<ZetaRoot>& roots) -> PhasePoint {
            std::vector<const ZetaRoot*> matching;
            bool saw_tangential = false;
            for (const auto& r : roots) {
                if (std::abs(r.transv) < cfg.transv_tol * r.transv_scale) {
                    saw_tangential = true;
                    continue;
                }
                const bool incoming = r.transv > 0.0;
                if ((branch == Branch::incoming) == incoming) matching.push_back(&r);
            }
            if (matching.empty()) {
                if (saw_tangential)
                    fail(ErrorCode::NoTransversalSolution,
                         "only tangential covectors realize the requested data");
                fail(ErrorCode::NoRoot, "no covector on the requested branch");
            }
            if (matching.size() > 1)
                fail(ErrorCode::AmbiguousBranch, "several covectors on the requested branch");
            return PhasePoint(x, xi_part + matching.front()->s * nu);
        });
}

PhasePoint solve_zeta_seeded(const HamiltonianModel& model, const Domain& domain,
                             const BoundaryCovector& bc, double energy, double seed,
                             const ZetaConfig& cfg) {
    return zeta_common(
        model, domain, bc, energy, cfg,
        [&](const Vec& x, const Vec& xi_part, const Vec& nu,
            const std::vector<ZetaRoot>& roots) -> PhasePoint {
            const ZetaRoot* best = nullptr;
            for (const auto& r : roots)
                if (!best || std::abs(r.s - seed) < std::abs(best->s - seed)) best = &r;
            if (std::abs(best->transv) < cfg.transv_tol * best->transv_scale)
                fail(ErrorCode::NoTransversalSolution, "nearest covector is tangential");
            return PhasePoint(x, xi_part + best->s * nu);
        });
}

namespace {

struct CrossingScanner {
    const HamiltonianModel& model;
    const Domain& domain;
    bool skipping; // waiting to move inside after a boundary start
    double prev_t;
    double prev_rho;

    CrossingScanner(const HamiltonianModel& m, const Domain& d, double t0, double rho0)
        : model(m), domain(d), skipping(rho0 <= kArmRho), prev_t(t0), prev_rho(rho0) {
        if (rho0 < -kArmRho)
            fail(ErrorCode::InvalidArgument, "trajectory starts outside the domain");
    }

    // Feed one sample; on a sign change, polish the crossing with eval_rho.
    std::optional<Hit> feed(double t, double rho_t,
                            const std::function<double(double)>& eval_rho,
                            const std::function<PhasePoint(double)>& eval_phase) {
        std::optional<Hit> out;
        if (skipping) {
            if (rho_t > kArmRho) skipping = false;
        } else if (prev_rho >= 0.0 && rho_t < 0.0) {
            const double t_hit =
                rootfind::bracketed(eval_rho, prev_t, t, prev_rho, rho_t, 1e-15, kRhoRootTol);
            Hit hit;
            hit.t = t_hit;
            hit.p = eval_phase(t_hit);
            hit.transv = transversality(model, domain, hit.p);
            out = hit;
        }
        prev_t = t;
        prev_rho = rho_t;
        return out;
    }
};

constexpr int kSamplesPerStep = 8;

bool tangential_hit(const HamiltonianModel& model, const Domain& domain, const Hit& hit) {
    const double scale =
        std::max(1.0, domain_grad_rho(domain, hit.p.x).norm() * model.grad_xi(hit.p).norm());
    return std::abs(hit.transv) < 1e-8 * scale;
}

} // namespace

bool tangential_at(const HamiltonianModel& model, const Domain& domain, const PhasePoint& p) {
    Hit probe;
    probe.p = p;
    probe.transv = transversality(model, domain, p);
    return tangential_hit(model, domain, probe);
}

Hit hit_boundary(const HamiltonianModel& model, const Domain& domain, const Trajectory& traj,
                 bool reverse_scan) {
    const int steps = traj.n_steps();
    if (steps == 0) fail(ErrorCode::NoHitWithinMaxTime, "trajectory has no extent");

    auto eval_rho = [&](double t) { return domain.rho(traj.phase_at(t).x); };
    auto eval_phase = [&](double t) { return traj.phase_at(t); };

    const double t_first = reverse_scan ? traj.t_end() : traj.t_start();
    CrossingScanner scanner(model, domain, t_first, eval_rho(t_first));

    for (int k = 0; k < steps; ++k) {
        const int idx = reverse_scan ? steps - 1 - k : k;
        const double a = reverse_scan ? traj.times()[idx + 1] : traj.times()[idx];
        const double b = reverse_scan ? traj.times()[idx] : traj.times()[idx + 1];
        for (int j = 1; j <= kSamplesPerStep; ++j) {
            const double t = a + (b - a) * static_cast<double>(j) / kSamplesPerStep;
            if (auto hit = scanner.feed(t, eval_rho(t), eval_rho, eval_phase)) {
                if (tangential_hit(model, domain, *hit))
                    fail(ErrorCode::TangentialHit, "boundary hit is tangential");
                return *hit;
            }
        }
    }
    fail(ErrorCode::NoHitWithinMaxTime, "no boundary crossing along the trajectory");
}

HitResult first_exit(const HamiltonianModel& model, const Domain& domain, const PhasePoint& p0,
                     double time_sign, const IntegratorConfig& cfg, double max_time) {
    if (time_sign == 0.0) fail(ErrorCode::InvalidArgument, "time direction must be nonzero");
    const double dir = time_sign > 0.0 ? 1.0 : -1.0;
    const int n = model.dim();

    Vec y0(2 * n);
    y0.head(n) = p0.x;
    y0.tail(n) = p0.xi;

    HitResult result;
    result.traj = Trajectory(n, false);
    result.traj.energy0 = model.value(p0);
    result.traj.push_first(0.0, y0);

    auto rhs = [&model, n](double, const Vec& y, Vec& dydt) {
        dydt.head(n) = model.grad_xi(y.head(n), y.tail(n));
        dydt.tail(n) = -model.grad_x(y.head(n), y.tail(n));
    };
    Dopri5Stepper stepper(rhs, 0.0, y0, cfg.ode());
    CrossingScanner scanner(model, domain, 0.0, domain.rho(p0.x));

    const double t_target = dir * max_time;
    while (stepper.advance(t_target)) {
        result.traj.push_step(stepper.t_curr(), stepper.y_curr(), stepper.dense());
        const DenseCoeffs& dense = stepper.dense();
        auto eval_rho = [&](double t) { return domain.rho(dense.eval(t).head(n)); };
        auto eval_phase = [&](double t) {
            const Vec y = dense.eval(t);
            return PhasePoint(y.head(n), y.segment(n, n));
        };
        const double a = stepper.t_prev(), b = stepper.t_curr();
        for (int j = 1; j <= kSamplesPerStep; ++j) {
            const double t = a + (b - a) * static_cast<double>(j) / kSamplesPerStep;
            if (auto hit = scanner.feed(t, eval_rho(t), eval_rho, eval_phase)) {
                result.status =
                    tangential_hit(model, domain, *hit) ? HitStatus::tangential : HitStatus::ok;
                result.hit = *hit;
                return result;
            }
        }
    }
    result.status = HitStatus::trapped;
    result.hit.t = stepper.t_curr();
    result.hit.p = PhasePoint(stepper.y_curr().head(n), stepper.y_curr().tail(n));
    return result;
}

} // namespace hamlens
