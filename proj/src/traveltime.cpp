#include "hamlens/traveltime.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "hamlens/errors.hpp"
#include "hamlens/quadrature.hpp"

namespace hamlens {

ExpJet exp_map(const HamiltonianModel& model, const Vec& x, const Vec& xi,
               const IntegratorConfig& cfg) {
    IntegratorConfig jc = cfg;
    jc.with_jacobian = true;
    FlowJet fj = flow_jet(model, PhasePoint{x, xi}, 1.0, jc);
    const int n = static_cast<int>(x.size());
    ExpJet jet;
    jet.y = fj.p.x;
    jet.dexp = fj.M.topRightCorner(n, n);
    jet.dflow = fj.M;
    jet.end = fj.p;
    return jet;
}

ConjugacyProbe is_conjugate(const HamiltonianModel& model, const Vec& x, const Vec& xi,
                            const IntegratorConfig& cfg, double tol) {
    ExpJet jet = exp_map(model, x, xi, cfg);
    Eigen::JacobiSVD<Mat> svd(jet.dexp);
    const auto& sv = svd.singularValues();
    ConjugacyProbe probe;
    probe.det = jet.dexp.determinant();
    probe.sigma_ratio = sv(sv.size() - 1) / sv(0);
    probe.conjugate = probe.sigma_ratio < tol;
    return probe;
}

ShootResult shoot(const HamiltonianModel& model, const Vec& x, const Vec& y,
                  const Vec& seed, const ShootConfig& cfg) {
    const auto n = x.size();
    if (y.size() != n || seed.size() != n)
        fail(ErrorCode::InvalidArgument, "shoot: dimension mismatch");
    IntegratorConfig pc = cfg.integ;
    pc.with_jacobian = false;

    Vec xi = seed;
    ExpJet jet;
    double err = std::numeric_limits<double>::infinity();
    int iter = 0;
    bool done = false;
    for (; iter < cfg.max_iter; ++iter) {
        jet = exp_map(model, x, xi, cfg.integ);
        Vec F = jet.y - y;
        err = F.lpNorm<Eigen::Infinity>();
        if (err <= cfg.tol) {
            done = true;
            break;
        }
        Eigen::FullPivLU<Mat> lu(jet.dexp);
        if (!lu.isInvertible())
            fail(ErrorCode::ConjugatePoint, "shoot: singular differential during Newton iteration");
        Vec delta = lu.solve(-F);
        double alpha = 1.0;
        bool accepted = false;
        for (int k = 0; k < 40; ++k) {
            Vec trial = xi + alpha * delta;
            PhasePoint pe = flow_map(model, PhasePoint{x, trial}, 1.0, pc);
            if ((pe.x - y).lpNorm<Eigen::Infinity>() < err) {
                xi = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted)
            fail(ErrorCode::NewtonDiverged, "shoot: damping failed to reduce the residual");
    }
    if (!done) {
        jet = exp_map(model, x, xi, cfg.integ);
        err = (jet.y - y).lpNorm<Eigen::Infinity>();
        if (err > cfg.tol)
            fail(ErrorCode::NewtonDiverged, "shoot: no convergence within max_iter");
    }

    ShootResult res;
    res.xi0 = xi;
    res.end = jet.end;
    res.err = err;
    res.iters = iter;
    res.det = jet.dexp.determinant();
    Eigen::JacobiSVD<Mat> svd(jet.dexp);
    const auto& sv = svd.singularValues();
    res.conjugate = sv(sv.size() - 1) / sv(0) < cfg.conj_tol;
    return res;
}

Vec fan_seed(const HamiltonianModel& model, const Vec& x, const Vec& y,
             const IntegratorConfig& cfg) {
    const auto n = x.size();
    if (n != 2 && n != 3)
        fail(ErrorCode::InvalidArgument, "fan_seed: generic seeding covers dimensions 2 and 3 only");
    const double base = std::max((y - x).norm(), 0.5);
    std::vector<Vec> dirs;
    if (n == 2) {
        for (int k = 0; k < 48; ++k) {
            const double a = 2.0 * M_PI * k / 48.0;
            dirs.push_back(Vec{{std::cos(a), std::sin(a)}});
        }
    } else {
        const int N = 96;
        const double golden = M_PI * (3.0 - std::sqrt(5.0));
        for (int k = 0; k < N; ++k) {
            const double z = 1.0 - 2.0 * (k + 0.5) / N;
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double a = golden * k;
            dirs.push_back(Vec{{r * std::cos(a), r * std::sin(a), z}});
        }
    }
    const double radii[] = {0.35, 0.7, 1.0, 1.5, 2.5, 4.0};

    Vec best;
    double best_err = std::numeric_limits<double>::infinity();
    for (const Vec& d : dirs) {
        for (double r : radii) {
            Vec xi = (r * base) * d;
            try {
                PhasePoint pe = flow_map(model, PhasePoint{x, xi}, 1.0, cfg);
                double e = (pe.x - y).lpNorm<Eigen::Infinity>();
                if (e < best_err) {
                    best_err = e;
                    best = xi;
                }
            } catch (const Error&) {
            }
        }
    }
    if (best.size() == 0)
        fail(ErrorCode::NewtonDiverged, "fan_seed: every probe ray failed to integrate");
    return best;
}

TravelTime travel_time(const HamiltonianModel& model, const Vec& x, const Vec& y,
                       std::optional<Vec> seed, const ShootConfig& cfg) {
    Vec s0 = seed ? *seed : fan_seed(model, x, y);
    ShootResult shot = shoot(model, x, y, s0, cfg);
    const double E = model.value(PhasePoint{x, shot.xi0});
    if (!(E > 0))
        fail(ErrorCode::LevelSetViolation, "travel_time: connecting curve has non-positive energy");
    TravelTime tt;
    tt.T = std::sqrt(2.0 * E);
    tt.xi0 = shot.xi0;
    tt.xi_unit = shot.xi0 / tt.T;
    tt.end = shot.end;
    tt.shot = std::move(shot);
    return tt;
}

GeneratingResiduals generating_check(const HamiltonianModel& model, const Domain& domain,
                                     int chart_u, const Vec& u, int chart_v, const Vec& w,
                                     std::optional<Vec> seed, const GeneratingCheckConfig& cfg) {
    ChartFrame fu = chart_embed(domain, chart_u, u);
    ChartFrame fv = chart_embed(domain, chart_v, w);
    const Vec x = fu.x, y = fv.x;
    const auto n = x.size();
    const double h = cfg.fd_step;

    TravelTime base = travel_time(model, x, y, seed, cfg.shoot);
    auto T_of = [&](const Vec& xa, const Vec& ya) {
        return travel_time(model, xa, ya, base.xi0, cfg.shoot).T;
    };

    Vec gx(n), gy(n);
    for (int i = 0; i < n; ++i) {
        Vec e = Vec::Zero(n);
        e(i) = h;
        gx(i) = (T_of(x + e, y) - T_of(x - e, y)) / (2.0 * h);
        gy(i) = (T_of(x, y + e) - T_of(x, y - e)) / (2.0 * h);
    }

    GeneratingResiduals out;
    out.T = base.T;

    PhasePoint fl = flow_map(model, PhasePoint{x, -gx}, base.T, cfg.shoot.integ);
    out.r_full = std::max((fl.x - y).lpNorm<Eigen::Infinity>(),
                          (fl.xi - gy).lpNorm<Eigen::Infinity>());

    const auto m = u.size();
    Vec gu(m), gw(m);
    for (int j = 0; j < m; ++j) {
        Vec e = Vec::Zero(m);
        e(j) = h;
        gu(j) = (T_of(chart_embed(domain, chart_u, u + e).x, y) -
                 T_of(chart_embed(domain, chart_u, u - e).x, y)) / (2.0 * h);
        gw(j) = (T_of(x, chart_embed(domain, chart_v, w + e).x) -
                 T_of(x, chart_embed(domain, chart_v, w - e).x)) / (2.0 * h);
    }
    Vec xi_prime = fu.dq.transpose() * base.xi_unit;
    Vec eta_prime = fv.dq.transpose() * (base.end.xi / base.T);
    out.r_tangential = std::max((gu + xi_prime).lpNorm<Eigen::Infinity>(),
                                (gw - eta_prime).lpNorm<Eigen::Infinity>());
    return out;
}

VariationResult first_variation_check(const ModelFamily& fam, const Vec& x, const Vec& y,
                                      const Vec& seed, const VariationConfig& cfg) {
    const double h = cfg.s_step;
    HamiltonianModel m0 = fam(0.0), mp = fam(h), mm = fam(-h);

    TravelTime base = travel_time(m0, x, y, seed, cfg.shoot);
    const double Tp = travel_time(mp, x, y, base.xi0, cfg.shoot).T;
    const double Tm = travel_time(mm, x, y, base.xi0, cfg.shoot).T;

    VariationResult out;
    out.lhs = (Tp - Tm) / (2.0 * h);

    Trajectory ray = integrate(m0, PhasePoint{x, base.xi_unit}, 0.0, base.T, cfg.shoot.integ);
    auto Hs = [&](double t) {
        PhasePoint p = ray.phase_at(t);
        return (mp.value(p) - mm.value(p)) / (2.0 * h);
    };
    out.rhs = -quad::adaptive_simpson(Hs, 0.0, base.T, cfg.quad_tol);
    out.residual = std::abs(out.lhs - out.rhs);
    return out;
}

VariationResult variation_energy_check(const ModelFamily& fam,
                                       const std::function<PhasePoint(double)>& p0_family,
                                       const VariationConfig& cfg) {
    const double h = cfg.s_step;
    HamiltonianModel m0 = fam(0.0), mp = fam(h), mm = fam(-h);

    Trajectory g0 = integrate(m0, p0_family(0.0), 0.0, 1.0, cfg.shoot.integ);
    Trajectory gp = integrate(mp, p0_family(h), 0.0, 1.0, cfg.shoot.integ);
    Trajectory gm = integrate(mm, p0_family(-h), 0.0, 1.0, cfg.shoot.integ);

    auto E_of = [&](const Trajectory& g) {
        return quad::adaptive_simpson([&](double t) { return m0.value(g.phase_at(t)); },
                                      0.0, 1.0, cfg.quad_tol);
    };
    VariationResult out;
    out.lhs = (E_of(gp) - E_of(gm)) / (2.0 * h);

    auto xs_at = [&](double t) {
        return Vec((gp.phase_at(t).x - gm.phase_at(t).x) / (2.0 * h));
    };
    const double bnd = g0.phase_at(1.0).xi.dot(xs_at(1.0)) - g0.phase_at(0.0).xi.dot(xs_at(0.0));
    const double integral = quad::adaptive_simpson(
        [&](double t) {
            PhasePoint p = g0.phase_at(t);
            return (mp.value(p) - mm.value(p)) / (2.0 * h);
        },
        0.0, 1.0, cfg.quad_tol);
    out.rhs = bnd - 2.0 * integral;
    out.residual = std::abs(out.lhs - out.rhs);
    return out;
}

SigmaProbe sigma_probe(const HamiltonianModel& model, const Domain& domain,
                       int chart_u, const Vec& u, int chart_v, const Vec& w,
                       const Vec& seed, const GeneratingCheckConfig& cfg) {
    ChartFrame fu = chart_embed(domain, chart_u, u);
    ChartFrame fv = chart_embed(domain, chart_v, w);
    const double h = cfg.fd_step;

    ShootResult base = shoot(model, fu.x, fv.x, seed, cfg.shoot);
    auto r_of = [&](const Vec& xa, const Vec& ya) {
        ShootResult s = shoot(model, xa, ya, base.xi0, cfg.shoot);
        return model.value(PhasePoint{xa, s.xi0});
    };

    SigmaProbe out;
    out.r = model.value(PhasePoint{fu.x, base.xi0});
    out.xi0 = base.xi0;
    out.eta0 = base.end.xi;

    const auto m = u.size();
    out.grad_u.resize(m);
    out.grad_w.resize(m);
    for (int j = 0; j < m; ++j) {
        Vec e = Vec::Zero(m);
        e(j) = h;
        out.grad_u(j) = (r_of(chart_embed(domain, chart_u, u + e).x, fv.x) -
                         r_of(chart_embed(domain, chart_u, u - e).x, fv.x)) / (2.0 * h);
        out.grad_w(j) = (r_of(fu.x, chart_embed(domain, chart_v, w + e).x) -
                         r_of(fu.x, chart_embed(domain, chart_v, w - e).x)) / (2.0 * h);
    }
    out.law_residual = std::max(
        (out.grad_u + fu.dq.transpose() * out.xi0).lpNorm<Eigen::Infinity>(),
        (out.grad_w - fv.dq.transpose() * out.eta0).lpNorm<Eigen::Infinity>());
    return out;
}

DrCheckResult dr_check(const ModelFamily& fam, const std::vector<ShootProblem>& problems,
                       const VariationConfig& cfg) {
    if (problems.empty()) fail(ErrorCode::InvalidArgument, "dr_check: no problems given");
    const double h = cfg.s_step;
    HamiltonianModel m0 = fam(0.0), mp = fam(h), mm = fam(-h);

    DrCheckResult out;
    for (const ShootProblem& pb : problems) {
        ShootResult s0 = shoot(m0, pb.x, pb.y, pb.seed, cfg.shoot);
        ShootResult sp = shoot(mp, pb.x, pb.y, s0.xi0, cfg.shoot);
        ShootResult sm = shoot(mm, pb.x, pb.y, s0.xi0, cfg.shoot);
        const double rp = mp.value(PhasePoint{pb.x, sp.xi0});
        const double rm = mm.value(PhasePoint{pb.x, sm.xi0});
        out.lhs.push_back((rp - rm) / (2.0 * h));

        Trajectory g0 = integrate(m0, PhasePoint{pb.x, s0.xi0}, 0.0, 1.0, cfg.shoot.integ);
        out.integrals.push_back(quad::adaptive_simpson(
            [&](double t) {
                PhasePoint p = g0.phase_at(t);
                return (mp.value(p) - mm.value(p)) / (2.0 * h);
            },
            0.0, 1.0, cfg.quad_tol));
    }

    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < out.lhs.size(); ++k) {
        num += out.lhs[k] * out.integrals[k];
        den += out.integrals[k] * out.integrals[k];
    }
    out.rho_fit = den > 1e-18 ? -num / den : 1.0;
    for (std::size_t k = 0; k < out.lhs.size(); ++k)
        out.max_residual = std::max(out.max_residual,
                                    std::abs(out.lhs[k] + out.rho_fit * out.integrals[k]));
    return out;
}

} // namespace hamlens
