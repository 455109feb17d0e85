#include "hamlens/scattering.hpp"

#include "hamlens/errors.hpp"

namespace hamlens {

const char* scatter_status_name(ScatterStatus s) {
    switch (s) {
    case ScatterStatus::ok: return "ok";
    case ScatterStatus::trapped: return "trapped";
    case ScatterStatus::tangential_entry: return "tangential_entry";
    case ScatterStatus::tangential_exit: return "tangential_exit";
    }
    return "?";
}

namespace {

std::optional<BoundaryCovector> try_restrict(const Domain& domain, const PhasePoint& p) {
    try {
        return restrict_covector(domain, p);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::NoChartCovers) return std::nullopt;
        throw;
    }
}

} // namespace

ScatterRecord scatter_hat(const HamiltonianModel& model, const Domain& domain,
                          const PhasePoint& p, const ScatterConfig& cfg) {
    const double rho0 = domain.rho(p.x);
    if (std::abs(rho0) > cfg.boundary_tol * std::max(1.0, p.x.lpNorm<Eigen::Infinity>()))
        fail(ErrorCode::InvalidArgument, "scatter_hat: seed is not on the boundary, rho = " + std::to_string(rho0));

    ScatterRecord rec;
    rec.entry = p;
    rec.energy = model.value(p);
    rec.transv_entry = transversality(model, domain, p);
    rec.entry_bc = try_restrict(domain, p);

    if (tangential_at(model, domain, p)) {
        rec.status = ScatterStatus::tangential_entry;
        return rec;
    }
    const double time_sign = rec.transv_entry > 0 ? 1.0 : -1.0;

    HitResult fe = first_exit(model, domain, p, time_sign, cfg.integ, cfg.max_time);
    rec.traj = std::make_shared<Trajectory>(std::move(fe.traj));
    switch (fe.status) {
    case HitStatus::trapped:
        rec.status = ScatterStatus::trapped;
        rec.ell = fe.hit.t;
        return rec;
    case HitStatus::tangential:
        rec.status = ScatterStatus::tangential_exit;
        rec.exit = fe.hit.p;
        rec.ell = fe.hit.t;
        rec.transv_exit = fe.hit.transv;
        return rec;
    case HitStatus::ok:
        break;
    }
    rec.status = ScatterStatus::ok;
    rec.exit = fe.hit.p;
    rec.ell = fe.hit.t;
    rec.transv_exit = fe.hit.transv;
    rec.exit_bc = try_restrict(domain, rec.exit);
    return rec;
}

ScatterRecord scatter(const HamiltonianModel& model, const Domain& domain,
                      const BoundaryCovector& bc, double energy, Branch branch,
                      const ScatterConfig& cfg) {
    PhasePoint p = solve_zeta(model, domain, bc, energy, branch, cfg.zeta);
    ScatterRecord rec = scatter_hat(model, domain, p, cfg);
    rec.entry_bc = bc;
    return rec;
}

ScatterRecord scatter_lambda(const HamiltonianModel& model, const Domain& domain,
                             const BoundaryCovector& bc, double lambda,
                             const ScatterConfig& cfg) {
    if (!(lambda > 0)) fail(ErrorCode::NonPositiveLambda, "scatter_lambda: lambda must be positive");
    BoundaryCovector unit = bc;
    unit.xi_prime = bc.xi_prime / lambda;
    ScatterRecord base = scatter(model, domain, unit, 0.5, Branch::incoming, cfg);

    ScatterRecord rec = base;
    rec.entry = dilate(base.entry, lambda);
    rec.entry_bc = bc;
    rec.energy = 0.5 * lambda * lambda;
    rec.transv_entry = lambda * base.transv_entry;
    rec.ell = base.ell / lambda;
    if (base.status == ScatterStatus::ok || base.status == ScatterStatus::tangential_exit) {
        rec.exit = dilate(base.exit, lambda);
        rec.transv_exit = lambda * base.transv_exit;
        if (base.exit_bc) {
            rec.exit_bc = base.exit_bc;
            rec.exit_bc->xi_prime = base.exit_bc->xi_prime * lambda;
        }
    }
    return rec; // traj stays at unit energy; reparametrize via the dilation law if needed
}

ScatterRecord scatter_zero(const HamiltonianModel& model, const Domain& domain,
                           const BoundaryCovector& bc, Branch branch,
                           const ScatterConfig& cfg) {
    return scatter(model, domain, bc, 0.0, branch, cfg);
}

} // namespace hamlens
