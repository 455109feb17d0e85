#include "hamlens/transforms.hpp"

#include "hamlens/errors.hpp"
#include "hamlens/fd.hpp"
#include "hamlens/quadrature.hpp"

namespace hamlens {

double ray_integral(const PhaseFunction& f, const ScatterRecord& rec, double quad_tol) {
    if (!rec.traj) fail(ErrorCode::InvalidArgument, "ray_integral: record carries no trajectory");
    const Trajectory& traj = *rec.traj;
    const double a = std::min(0.0, rec.ell), b = std::max(0.0, rec.ell);
    return quad::adaptive_simpson([&](double t) { return f(traj.phase_at(t)); }, a, b, quad_tol);
}

RayIntegral xray(const HamiltonianModel& model, const Domain& domain, const PhaseFunction& f,
                 const BoundaryCovector& bc, const TransformConfig& cfg) {
    RayIntegral out;
    out.ray = scatter(model, domain, bc, 0.5, Branch::incoming, cfg.scatter);
    if (out.ray.status == ScatterStatus::ok) {
        out.length = std::abs(out.ray.ell);
        out.value = ray_integral(f, out.ray, cfg.quad_tol);
    }
    return out;
}

RayIntegral lightray(const HamiltonianModel& model, const Domain& domain, const PhaseFunction& f,
                     const BoundaryCovector& bc, const TransformConfig& cfg) {
    RayIntegral out;
    out.ray = scatter_zero(model, domain, bc, Branch::incoming, cfg.scatter);
    if (out.ray.status == ScatterStatus::ok) {
        out.length = std::abs(out.ray.ell);
        out.value = ray_integral(f, out.ray, cfg.quad_tol);
    }
    return out;
}

double flow_derivative(const HamiltonianModel& model, const PhaseFunction& f,
                       const PhasePoint& p, double h, const IntegratorConfig& integ) {
    return fd::derivative4([&](double t) { return f(flow_map(model, p, t, integ)); }, h);
}

PhaseFunction xh_of(const HamiltonianModel& model, const PhaseFunction& f, double h,
                    const IntegratorConfig& integ) {
    return [model, f, h, integ](const PhasePoint& p) {
        return flow_derivative(model, f, p, h, integ);
    };
}

double gauge_potential(const HamiltonianModel& model, const Domain& domain,
                       const PhaseFunction& f, const PhasePoint& p,
                       const TransformConfig& cfg) {
    const double rho0 = domain.rho(p.x);
    if (std::abs(rho0) <= cfg.scatter.boundary_tol * std::max(1.0, p.x.lpNorm<Eigen::Infinity>()) &&
        transversality(model, domain, p) > 0)
        return 0.0;

    HitResult back = first_exit(model, domain, p, -1.0, cfg.scatter.integ, cfg.scatter.max_time);
    if (back.status == HitStatus::trapped)
        fail(ErrorCode::Trapped, "gauge_potential: backward ray never reaches the boundary");
    if (back.status == HitStatus::tangential)
        fail(ErrorCode::TangentialHit, "gauge_potential: backward ray grazes the boundary");
    const Trajectory& traj = back.traj;
    return quad::adaptive_simpson([&](double t) { return f(traj.phase_at(t)); },
                                  back.hit.t, 0.0, cfg.quad_tol);
}

} // namespace hamlens
