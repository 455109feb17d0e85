#include "hamlens/flow.hpp"

#include <algorithm>
#include <cmath>

#include "hamlens/errors.hpp"
#include "hamlens/quadrature.hpp"

namespace hamlens {

void Trajectory::push_first(double t, const Vec& y) {
    times_.push_back(t);
    states_.push_back(y);
}

void Trajectory::push_step(double t, const Vec& y, const DenseCoeffs& dense) {
    times_.push_back(t);
    states_.push_back(y);
    dense_.push_back(dense);
}

bool Trajectory::contains(double t) const {
    const double lo = std::min(t_start(), t_end());
    const double hi = std::max(t_start(), t_end());
    const double slack = 1e-12 * std::max(1.0, hi - lo);
    return t >= lo - slack && t <= hi + slack;
}

int Trajectory::locate(double t) const {
    const double dir = (t_end() >= t_start()) ? 1.0 : -1.0;
    int lo = 0, hi = static_cast<int>(dense_.size()) - 1;
    while (lo < hi) {
        const int mid = (lo + hi) / 2;
        if (dir * t <= dir * times_[mid + 1])
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo;
}

Vec Trajectory::state_at(double t) const {
    if (dense_.empty()) return states_.front();
    if (!contains(t)) fail(ErrorCode::InvalidArgument, "time outside trajectory range");
    return dense_[locate(t)].eval(t);
}

PhasePoint Trajectory::phase_from_state(const Vec& y, int n) {
    return PhasePoint(y.head(n), y.segment(n, n));
}

Mat Trajectory::jacobian_from_state(const Vec& y, int n) {
    Mat M(2 * n, 2 * n);
    for (int j = 0; j < 2 * n; ++j) M.col(j) = y.segment(2 * n + 2 * n * j, 2 * n);
    return M;
}

PhasePoint Trajectory::phase_at(double t) const { return phase_from_state(state_at(t), n_); }

Mat Trajectory::jacobian_at(double t) const {
    if (!with_jac_) fail(ErrorCode::InvalidArgument, "trajectory carries no variational data");
    return jacobian_from_state(state_at(t), n_);
}

PhasePoint Trajectory::phase_node(int i) const { return phase_from_state(states_.at(i), n_); }

Mat Trajectory::jacobian_node(int i) const {
    if (!with_jac_) fail(ErrorCode::InvalidArgument, "trajectory carries no variational data");
    return jacobian_from_state(states_.at(i), n_);
}

namespace {

OdeRhs hamilton_rhs(const HamiltonianModel& model, bool with_jacobian) {
    const int n = model.dim();
    if (!with_jacobian) {
        return [&model, n](double, const Vec& y, Vec& dydt) {
            const Vec x = y.head(n);
            const Vec xi = y.segment(n, n);
            dydt.head(n) = model.grad_xi(x, xi);
            dydt.segment(n, n) = -model.grad_x(x, xi);
        };
    }
    return [&model, n](double, const Vec& y, Vec& dydt) {
        const Vec x = y.head(n);
        const Vec xi = y.segment(n, n);
        const PhasePoint p(x, xi);
        dydt.head(n) = model.grad_xi(p);
        dydt.segment(n, n) = -model.grad_x(p);
        const Mat A = model.linearization(p);
        for (int j = 0; j < 2 * n; ++j)
            dydt.segment(2 * n + 2 * n * j, 2 * n) = A * y.segment(2 * n + 2 * n * j, 2 * n);
    };
}

} // namespace

Trajectory integrate(const HamiltonianModel& model, const PhasePoint& p0, double t0, double t1,
                     const IntegratorConfig& cfg) {
    if (std::abs(t1 - t0) > cfg.max_time)
        fail(ErrorCode::MaxTimeExceeded, "requested span exceeds the configured cutoff");
    const int n = model.dim();
    Vec y0(cfg.with_jacobian ? 2 * n + 4 * n * n : 2 * n);
    y0.head(n) = p0.x;
    y0.segment(n, n) = p0.xi;
    if (cfg.with_jacobian) {
        y0.tail(4 * n * n).setZero();
        for (int j = 0; j < 2 * n; ++j) y0(2 * n + 2 * n * j + j) = 1.0;
    }

    Trajectory traj(n, cfg.with_jacobian);
    traj.energy0 = model.value(p0);
    traj.push_first(t0, y0);
    if (t1 == t0) return traj;

    Dopri5Stepper stepper(hamilton_rhs(model, cfg.with_jacobian), t0, y0, cfg.ode());
    while (stepper.advance(t1))
        traj.push_step(stepper.t_curr(), stepper.y_curr(), stepper.dense());
    traj.max_step_error = stepper.max_err_seen();
    return traj;
}

PhasePoint flow_map(const HamiltonianModel& model, const PhasePoint& p0, double t,
                    const IntegratorConfig& cfg) {
    if (t == 0.0) return p0;
    IntegratorConfig c = cfg;
    c.with_jacobian = false;
    const Trajectory traj = integrate(model, p0, 0.0, t, c);
    return traj.phase_at(t);
}

FlowJet flow_jet(const HamiltonianModel& model, const PhasePoint& p0, double t,
                 const IntegratorConfig& cfg) {
    IntegratorConfig c = cfg;
    c.with_jacobian = true;
    const Trajectory traj = integrate(model, p0, 0.0, t, c);
    if (t == 0.0) return FlowJet{p0, Mat::Identity(2 * model.dim(), 2 * model.dim())};
    return FlowJet{traj.phase_at(t), traj.jacobian_at(t)};
}

double rescale_check(const HamiltonianModel& model, const PhasePoint& p0, double lambda, double t,
                     const IntegratorConfig& cfg) {
    const PhasePoint lhs = flow_map(model, dilate(p0, lambda), t, cfg);
    const PhasePoint rhs = dilate(flow_map(model, p0, lambda * t, cfg), lambda);
    return phase_dist(lhs, rhs);
}

MuReparam reparametrize_mu(const HamiltonianModel& model, const PhaseFn& mu, const PhasePoint& p0,
                           double s1, const IntegratorConfig& cfg) {
    const double level_scale = std::max(1.0, p0.xi.squaredNorm());
    if (std::abs(model.value(p0)) > 1e-9 * level_scale)
        fail(ErrorCode::LevelSetViolation, "reparametrization requires a zero-energy start");

    MuReparam mr;
    mr.base = integrate(model, p0, 0.0, s1, cfg);

    auto inv_mu = [&](double t) {
        const double m = mu(mr.base.phase_at(t));
        if (!(m > 0.0)) fail(ErrorCode::NonPositiveMu, "mu must be positive along the flow");
        return 1.0 / m;
    };

    mr.s = mr.base.times();
    mr.s_breve.resize(mr.s.size());
    mr.s_breve[0] = 0.0;
    for (std::size_t i = 1; i < mr.s.size(); ++i)
        mr.s_breve[i] =
            mr.s_breve[i - 1] + quad::adaptive_simpson(inv_mu, mr.s[i - 1], mr.s[i], 1e-13);

    HamiltonianModel scaled = make_custom(
        model.dim(),
        [&model, mu](const Vec& x, const Vec& xi) {
            return mu(PhasePoint(x, xi)) * model.value(x, xi);
        },
        model.name() + "_mu_scaled", model.kind());
    mr.breve = integrate(scaled, p0, 0.0, mr.s_breve.back(), cfg);
    return mr;
}

double mu_pointset_residual(const MuReparam& mr) {
    double worst = 0.0;
    for (std::size_t i = 0; i < mr.s.size(); ++i) {
        const PhasePoint a = mr.base.phase_at(mr.s[i]);
        const PhasePoint b = mr.breve.phase_at(mr.s_breve[i]);
        worst = std::max(worst, phase_dist(a, b));
    }
    return worst;
}

} // namespace hamlens
