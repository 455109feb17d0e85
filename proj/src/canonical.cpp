#include "hamlens/canonical.hpp"

#include <cmath>
#include <memory>

#include <Eigen/Dense>

#include "hamlens/errors.hpp"
#include "hamlens/fd.hpp"

namespace hamlens {

namespace {
constexpr double kGradOfGradStep = 1e-5;
} // namespace

// ---------------------------------------------------------------------------
// PsiChart
// ---------------------------------------------------------------------------

PsiChart::PsiChart(HamiltonianModel model, Domain domain, int chart, PsiConfig cfg)
    : model_(std::move(model)), domain_(std::move(domain)), chart_(chart),
      n_(model_.dim()), cfg_(cfg) {
    if (domain_.dim != n_)
        fail(ErrorCode::InvalidArgument, "PsiChart: model and domain dimensions differ");
    if (chart_ < 0 || chart_ >= static_cast<int>(domain_.charts.size()))
        fail(ErrorCode::InvalidArgument, "PsiChart: no such boundary chart");
}

PhasePoint PsiChart::map(const Vec& coords) const {
    if (coords.size() != 2 * n_)
        fail(ErrorCode::InvalidArgument, "PsiChart::map: expected 2n coordinates");
    const int m = n_ - 1;
    const Vec u = coords.head(m);
    const double s = coords(m);
    const Vec xi_prime = coords.segment(m + 1, m);
    const double last = coords(2 * m + 1);

    if (!cfg_.homogeneous) {
        BoundaryCovector bc{chart_, u, xi_prime};
        PhasePoint p0 = solve_zeta(model_, domain_, bc, last, cfg_.branch, cfg_.zeta);
        return s == 0.0 ? p0 : flow_map(model_, p0, s, cfg_.integ);
    }
    const double lambda = last;
    if (!(lambda > 0))
        fail(ErrorCode::NonPositiveLambda, "PsiChart::map: homogeneous chart needs lambda > 0");
    BoundaryCovector bc{chart_, u, Vec(xi_prime / lambda)};
    PhasePoint p0 = dilate(solve_zeta(model_, domain_, bc, 0.5, cfg_.branch, cfg_.zeta), lambda);
    return s == 0.0 ? p0 : flow_map(model_, p0, s / lambda, cfg_.integ);
}

Vec PsiChart::inverse(const PhasePoint& p) const {
    const int m = n_ - 1;
    const double E = model_.value(p);
    double s;
    BoundaryCovector bc;
    if (std::abs(domain_.rho(p.x)) <= 1e-10 * std::max(1.0, fd::inf_norm(p.x))) {
        s = 0.0;
        bc = restrict_covector_chart(domain_, p, chart_);
    } else {
        const double time_sign = cfg_.branch == Branch::incoming ? -1.0 : 1.0;
        HitResult hr = first_exit(model_, domain_, p, time_sign, cfg_.integ);
        if (hr.status == HitStatus::trapped)
            fail(ErrorCode::Trapped, "PsiChart::inverse: orbit does not reach the boundary");
        if (hr.status == HitStatus::tangential)
            fail(ErrorCode::TangentialHit, "PsiChart::inverse: orbit grazes the boundary");
        s = -hr.hit.t;
        bc = restrict_covector_chart(domain_, hr.hit.p, chart_);
    }

    Vec out(2 * n_);
    out.head(m) = bc.u;
    out.segment(m + 1, m) = bc.xi_prime;
    if (!cfg_.homogeneous) {
        out(m) = s;
        out(2 * m + 1) = E;
    } else {
        if (!(E > 0))
            fail(ErrorCode::LevelSetViolation, "PsiChart::inverse: homogeneous chart needs E > 0");
        const double lambda = std::sqrt(2.0 * E);
        out(m) = s * lambda;
        out(2 * m + 1) = lambda;
    }
    return out;
}

Mat PsiChart::jacobian_fd(const Vec& coords, double h) const {
    return fd::jacobian([this](const Vec& c) { return pack(map(c)); }, coords, h, 2 * n_);
}

Mat PsiChart::jacobian_propagated(const Vec& coords, double h) const {
    const int m = n_ - 1;
    Vec c0 = coords;
    c0(m) = 0.0;
    Mat J0 = jacobian_fd(c0, h);
    double s = coords(m);
    if (cfg_.homogeneous) s /= coords(2 * m + 1);
    if (s == 0.0) return J0;
    IntegratorConfig jc = cfg_.integ;
    jc.with_jacobian = true;
    FlowJet jet = flow_jet(model_, map(c0), s, jc);
    return jet.M * J0;
}

Mat boundary_adapted_frame(int n, int axis, double sign) {
    Mat P = Mat::Zero(2 * n, 2 * n);
    int k = 0;
    for (int i = 0; i < n; ++i) {
        if (i == axis) continue;
        P(k, i) = 1.0;
        P(n + k, n + i) = 1.0;
        ++k;
    }
    P(n - 1, axis) = sign;
    P(2 * n - 1, n + axis) = sign;
    return P;
}

Mat psi_block_matrix(const HamiltonianModel& model, const PhasePoint& p, int axis, double sign) {
    const int n = model.dim();
    const int m = n - 1;
    const Vec gx = model.grad_x(p);
    const Vec gxi = model.grad_xi(p);
    const double a = sign * gxi(axis);
    if (std::abs(a) < 1e-12)
        fail(ErrorCode::NoTransversalSolution, "psi_block_matrix: flow is tangent to the wall");
    const double b = -sign * gx(axis);
    Vec C(m), D(m);
    int k = 0;
    for (int i = 0; i < n; ++i) {
        if (i == axis) continue;
        C(k) = gxi(i);
        D(k) = -gx(i);
        ++k;
    }

    Mat A = Mat::Zero(2 * n, 2 * n);
    A.topLeftCorner(m, m).setIdentity();
    A.block(0, m, m, 1) = C;
    A(m, m) = a;
    A.block(n, m, m, 1) = D;
    A.block(n, n, m, m).setIdentity();
    A.block(2 * n - 1, 0, 1, m) = D.transpose() / a;
    A(2 * n - 1, m) = b;
    A.block(2 * n - 1, n, 1, m) = -C.transpose() / a;
    A(2 * n - 1, 2 * n - 1) = 1.0 / a;
    return A;
}

// ---------------------------------------------------------------------------
// Cotangent lift
// ---------------------------------------------------------------------------

CanonicalMap cotangent_lift(const DiffeoMap& base) {
    const int n = base.dim;
    auto psi = base.psi;
    std::function<Mat(const Vec&)> dpsi = base.dpsi;
    if (!dpsi)
        dpsi = [psi, n](const Vec& x) { return fd::jacobian(psi, x, kGradOfGradStep, n); };

    CanonicalMap k;
    k.dim = n;
    k.kind = KappaKind::cotangent_lift;
    k.name = base.name;
    k.forward = [psi, dpsi](const PhasePoint& p) {
        Eigen::FullPivLU<Mat> lu(Mat(dpsi(p.x).transpose()));
        if (!lu.isInvertible())
            fail(ErrorCode::SingularJacobian, "cotangent_lift: base map is singular");
        return PhasePoint(psi(p.x), lu.solve(p.xi));
    };
    k.inverse = [psi, dpsi, psi_inv = base.psi_inv](const PhasePoint& q) {
        Vec x;
        if (psi_inv) {
            x = psi_inv(q.x);
        } else {
            x = q.x;
            bool done = false;
            for (int it = 0; it < 60; ++it) {
                Vec F = psi(x) - q.x;
                if (fd::inf_norm(F) <= 1e-12 * std::max(1.0, fd::inf_norm(q.x))) {
                    done = true;
                    break;
                }
                Eigen::FullPivLU<Mat> lu(dpsi(x));
                if (!lu.isInvertible())
                    fail(ErrorCode::SingularJacobian, "cotangent_lift: base map is singular");
                x -= lu.solve(F);
            }
            if (!done)
                fail(ErrorCode::InverseChartFailure, "cotangent_lift: inverse iteration stalled");
        }
        return PhasePoint(x, dpsi(x).transpose() * q.xi);
    };
    return k;
}

// ---------------------------------------------------------------------------
// Generating function
// ---------------------------------------------------------------------------

CanonicalMap kappa_from_generating(const GeneratingFunction& gf, const GeneratingConfig& cfg) {
    const int n = gf.dim;
    auto phi = gf.phi;
    std::function<Vec(const Vec&, const Vec&)> gx = gf.grad_x;
    std::function<Vec(const Vec&, const Vec&)> geta = gf.grad_eta;
    if (!gx)
        gx = [phi, h = cfg.fd_step](const Vec& x, const Vec& eta) {
            return fd::gradient([&](const Vec& xv) { return phi(xv, eta); }, x, h);
        };
    if (!geta)
        geta = [phi, h = cfg.fd_step](const Vec& x, const Vec& eta) {
            return fd::gradient([&](const Vec& ev) { return phi(x, ev); }, eta, h);
        };

    auto newton = [n, cfg](const std::function<Vec(const Vec&)>& F, Vec z,
                           const char* where) {
        double err = std::numeric_limits<double>::infinity();
        for (int it = 0; it < cfg.max_iter; ++it) {
            Vec r = F(z);
            err = fd::inf_norm(r);
            if (err <= cfg.tol) return z;
            Mat J = fd::jacobian(F, z, kGradOfGradStep, n);
            Eigen::FullPivLU<Mat> lu(J);
            if (!lu.isInvertible())
                fail(ErrorCode::SingularMixedHessian, std::string(where) +
                     ": mixed second derivative of the generating function is singular");
            Vec dz = lu.solve(-r);
            z += dz;
            if (fd::inf_norm(dz) <= 1e-13 * std::max(1.0, fd::inf_norm(z))) break;
        }
        if (fd::inf_norm(F(z)) > 1e3 * cfg.tol)
            fail(ErrorCode::NewtonDiverged, std::string(where) + ": iteration did not converge");
        return z;
    };

    CanonicalMap k;
    k.dim = n;
    k.kind = KappaKind::generating_function;
    k.name = gf.name;
    k.forward = [gx, geta, newton](const PhasePoint& p) {
        const Vec& y = p.x;
        const Vec& eta = p.xi;
        Vec x = newton([&](const Vec& xv) { return Vec(geta(xv, eta) - y); }, y,
                       "kappa_from_generating::forward");
        return PhasePoint(x, gx(x, eta));
    };
    k.inverse = [gx, geta, newton](const PhasePoint& q) {
        const Vec& x = q.x;
        const Vec& xi = q.xi;
        Vec eta = newton([&](const Vec& ev) { return Vec(gx(x, ev) - xi); }, xi,
                         "kappa_from_generating::inverse");
        return PhasePoint(geta(x, eta), eta);
    };
    return k;
}

// ---------------------------------------------------------------------------
// Pair transfer
// ---------------------------------------------------------------------------

namespace {

struct PairData {
    HamiltonianModel a, b;
    Domain ma, mb;
    KappaPairConfig cfg;
};

struct BackwardLeg {
    double ell_minus = 0.0;
    PhasePoint entry;
    BoundaryCovector bc;
};

BackwardLeg trace_backward(const HamiltonianModel& model, const Domain& domain,
                           const PhasePoint& p, const KappaPairConfig& cfg) {
    BackwardLeg leg;
    const double rho0 = domain.rho(p.x);
    if (std::abs(rho0) <= cfg.boundary_tol * std::max(1.0, fd::inf_norm(p.x)) &&
        transversality(model, domain, p) > 0) {
        leg.entry = p;
        leg.bc = restrict_covector(domain, p);
        return leg;
    }
    HitResult hr = first_exit(model, domain, p, -1.0, cfg.integ, cfg.max_time);
    if (hr.status == HitStatus::trapped)
        fail(ErrorCode::Trapped, "kappa: backward orbit stays inside the domain");
    if (hr.status == HitStatus::tangential)
        fail(ErrorCode::TangentialHit, "kappa: backward orbit grazes the boundary");
    leg.ell_minus = -hr.hit.t;
    leg.entry = hr.hit.p;
    leg.bc = restrict_covector(domain, hr.hit.p);
    return leg;
}

PhasePoint pair_transfer(const HamiltonianModel& src, const Domain& msrc,
                         const HamiltonianModel& dst, const Domain& mdst,
                         const PhasePoint& p, const KappaPairConfig& cfg) {
    const double E = src.value(p);
    BackwardLeg leg = trace_backward(src, msrc, p, cfg);
    PhasePoint pe = solve_zeta(dst, mdst, leg.bc, E, Branch::incoming, cfg.zeta);
    return leg.ell_minus == 0.0 ? pe : flow_map(dst, pe, leg.ell_minus, cfg.integ);
}

double forward_chord(const HamiltonianModel& model, const Domain& domain,
                     const PhasePoint& entry, const KappaPairConfig& cfg) {
    HitResult hr = first_exit(model, domain, entry, 1.0, cfg.integ, cfg.max_time);
    if (hr.status == HitStatus::trapped)
        fail(ErrorCode::Trapped, "kappa: chord never leaves the domain");
    if (hr.status == HitStatus::tangential)
        fail(ErrorCode::TangentialHit, "kappa: chord grazes the boundary");
    return hr.hit.t;
}

void check_null_level(const HamiltonianModel& model, const PhasePoint& p, double tol) {
    const double scale = std::max(1.0, fd::inf_norm(p.xi) * fd::inf_norm(p.xi));
    if (std::abs(model.value(p)) > tol * scale)
        fail(ErrorCode::LevelSetViolation, "zero-energy map evaluated off the null level");
}

} // namespace

CanonicalMap kappa_from_pair(HamiltonianModel model, Domain domain,
                             HamiltonianModel model_t, Domain domain_t,
                             KappaPairConfig cfg) {
    auto data = std::make_shared<PairData>(
        PairData{std::move(model), std::move(model_t), std::move(domain), std::move(domain_t), cfg});
    CanonicalMap k;
    k.dim = data->a.dim();
    k.kind = KappaKind::psi_pair;
    k.name = data->a.name() + "->" + data->b.name();
    k.forward = [data](const PhasePoint& p) {
        return pair_transfer(data->a, data->ma, data->b, data->mb, p, data->cfg);
    };
    k.inverse = [data](const PhasePoint& q) {
        return pair_transfer(data->b, data->mb, data->a, data->ma, q, data->cfg);
    };
    return k;
}

ZeroEnergyKappa kappa_zero_energy(HamiltonianModel model, Domain domain,
                                  HamiltonianModel model_t, Domain domain_t,
                                  KappaPairConfig cfg) {
    auto data = std::make_shared<PairData>(
        PairData{std::move(model), std::move(model_t), std::move(domain), std::move(domain_t), cfg});

    auto chords = [data](const PhasePoint& p, bool from_a) {
        const HamiltonianModel& src = from_a ? data->a : data->b;
        const HamiltonianModel& dst = from_a ? data->b : data->a;
        const Domain& msrc = from_a ? data->ma : data->mb;
        const Domain& mdst = from_a ? data->mb : data->ma;
        check_null_level(src, p, data->cfg.level_tol);
        BackwardLeg leg = trace_backward(src, msrc, p, data->cfg);
        const double chord_src = forward_chord(src, msrc, leg.entry, data->cfg);
        PhasePoint pe = solve_zeta(dst, mdst, leg.bc, 0.0, Branch::incoming, data->cfg.zeta);
        const double chord_dst = forward_chord(dst, mdst, pe, data->cfg);
        struct Out {
            BackwardLeg leg;
            PhasePoint pe;
            double ratio;
        };
        if (!(chord_src > 0) || !(chord_dst > 0))
            fail(ErrorCode::NonPositiveMu, "kappa_zero_energy: degenerate chord times");
        return Out{std::move(leg), std::move(pe), chord_src / chord_dst};
    };

    ZeroEnergyKappa zk;
    zk.kappa.dim = data->a.dim();
    zk.kappa.kind = KappaKind::zero_energy;
    zk.kappa.name = data->a.name() + "->" + data->b.name() + "@0";
    zk.kappa.forward = [data, chords](const PhasePoint& p) {
        auto c = chords(p, true);
        return c.leg.ell_minus == 0.0
                   ? c.pe
                   : flow_map(data->b, c.pe, c.leg.ell_minus / c.ratio, data->cfg.integ);
    };
    zk.kappa.inverse = [data, chords](const PhasePoint& q) {
        auto c = chords(q, false);
        return c.leg.ell_minus == 0.0
                   ? c.pe
                   : flow_map(data->a, c.pe, c.leg.ell_minus / c.ratio, data->cfg.integ);
    };
    zk.mu = [chords](const PhasePoint& p) { return chords(p, true).ratio; };
    return zk;
}

HamiltonianModel transported_model(const HamiltonianModel& model, const CanonicalMap& kappa,
                                   const std::string& name) {
    if (!kappa.has_inverse())
        fail(ErrorCode::InvalidArgument, "transported_model: map carries no inverse");
    auto src = std::make_shared<HamiltonianModel>(model);
    auto inv = kappa.inverse;
    return make_custom(model.dim(),
                       [src, inv](const Vec& x, const Vec& xi) {
                           return src->value(inv(PhasePoint(x, xi)));
                       },
                       name, model.kind());
}

// ---------------------------------------------------------------------------
// Residuals
// ---------------------------------------------------------------------------

double kappa_symplectic_residual(const CanonicalMap& kappa, const PhasePoint& p, double h) {
    const int n = p.dim();
    Mat J = fd::jacobian([&](const Vec& z) { return pack(kappa.forward(unpack(z))); },
                         pack(p), h, 2 * n);
    return symplectic_residual(J);
}

double kappa_pullback_residual(const HamiltonianModel& model, const HamiltonianModel& model_t,
                               const CanonicalMap& kappa, const PhasePoint& p) {
    return std::abs(model_t.value(kappa.forward(p)) - model.value(p));
}

double kappa_conjugation_residual(const HamiltonianModel& model, const HamiltonianModel& model_t,
                                  const CanonicalMap& kappa, const PhasePoint& p, double s,
                                  const IntegratorConfig& integ) {
    PhasePoint lhs = kappa.forward(flow_map(model, p, s, integ));
    PhasePoint rhs = flow_map(model_t, kappa.forward(p), s, integ);
    return phase_dist(lhs, rhs);
}

double kappa_conjugation_residual_mu(const HamiltonianModel& model, const HamiltonianModel& model_t,
                                     const ZeroEnergyKappa& zk, const PhasePoint& p, double s,
                                     const IntegratorConfig& integ) {
    const double mu = zk.mu(p);
    PhasePoint lhs = zk.kappa.forward(flow_map(model, p, s, integ));
    PhasePoint rhs = flow_map(model_t, zk.kappa.forward(p), s / mu, integ);
    return phase_dist(lhs, rhs);
}

double kappa_boundary_residual(const Domain& domain, const CanonicalMap& kappa,
                               const PhasePoint& p) {
    BoundaryCovector bc = restrict_covector(domain, p);
    ChartFrame f = chart_embed(domain, bc.chart, bc.u);
    PhasePoint q = kappa.forward(p);
    return std::max((q.x - p.x).lpNorm<Eigen::Infinity>(),
                    (f.dq.transpose() * (q.xi - p.xi)).lpNorm<Eigen::Infinity>());
}

double kappa_homogeneity_residual(const CanonicalMap& kappa, const PhasePoint& p, double lambda) {
    return phase_dist(kappa.forward(dilate(p, lambda)), dilate(kappa.forward(p), lambda));
}

double tangential_symplectic_residual(const HamiltonianModel& model, const CanonicalMap& kappa,
                                      const PhasePoint& p, double h) {
    const int n = p.dim();
    Vec g(2 * n);
    g.head(n) = model.grad_x(p);
    g.tail(n) = model.grad_xi(p);
    Mat gcol = g;
    Eigen::HouseholderQR<Mat> qr(gcol);
    Mat Q = qr.householderQ();

    const Vec z0 = pack(p);
    std::vector<Vec> image;
    for (int j = 1; j < 2 * n; ++j) {
        Vec v = Q.col(j);
        Vec fp = pack(kappa.forward(unpack(z0 + h * v)));
        Vec fm = pack(kappa.forward(unpack(z0 - h * v)));
        image.push_back((fp - fm) / (2.0 * h));
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < image.size(); ++i)
        for (std::size_t j = i + 1; j < image.size(); ++j) {
            const double lhs = symplectic_form(image[i], image[j]);
            const double rhs = symplectic_form(Q.col(static_cast<int>(i) + 1),
                                               Q.col(static_cast<int>(j) + 1));
            worst = std::max(worst, std::abs(lhs - rhs));
        }
    return worst;
}

} // namespace hamlens
