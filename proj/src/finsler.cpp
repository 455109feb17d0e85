#include "hamlens/finsler.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "hamlens/errors.hpp"
#include "hamlens/fd.hpp"
#include "hamlens/flow.hpp"

namespace hamlens {

FinslerModel make_randers(const Mat& A, const Vec& b, std::string name) {
    const auto n = A.rows();
    if (A.cols() != n || b.size() != n)
        fail(ErrorCode::InvalidArgument, "make_randers: shape mismatch");
    if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()))
        fail(ErrorCode::NonSymmetricMatrix, "make_randers: A must be symmetric");
    Eigen::LLT<Mat> llt(A);
    if (llt.info() != Eigen::Success)
        fail(ErrorCode::NotPositiveDefinite, "make_randers: A must be positive definite");
    if (b.dot(llt.solve(b)) >= 1.0)
        fail(ErrorCode::InvalidArgument, "make_randers: drift too large, norm loses positivity");

    FinslerModel fm;
    fm.dim = static_cast<int>(n);
    fm.name = std::move(name);
    fm.F = [A, b](const Vec&, const Vec& v) { return std::sqrt(v.dot(A * v)) + b.dot(v); };
    return fm;
}

Vec legendre(const FinslerModel& fm, const Vec& x, const Vec& v, double h) {
    return fd::gradient([&](const Vec& w) {
        const double f = fm.F(x, w);
        return 0.5 * f * f;
    }, v, h);
}

Mat fundamental_tensor(const FinslerModel& fm, const Vec& x, const Vec& v, double h) {
    Mat g = fd::hessian([&](const Vec& w) {
        const double f = fm.F(x, w);
        return 0.5 * f * f;
    }, v, h);
    Eigen::LLT<Mat> llt(g);
    if (llt.info() != Eigen::Success)
        fail(ErrorCode::NotPositiveDefinite, "fundamental_tensor: not positive definite at v");
    return g;
}

Vec legendre_inverse(const FinslerModel& fm, const Vec& x, const Vec& xi,
                     std::optional<Vec> seed, double tol, int max_iter) {
    Vec v = seed ? *seed : xi;
    double err = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        Vec r = legendre(fm, x, v) - xi;
        err = fd::inf_norm(r);
        if (err <= tol * std::max(1.0, fd::inf_norm(xi))) return v;
        Mat g = fundamental_tensor(fm, x, v);
        Vec dv = Eigen::LLT<Mat>(g).solve(-r);
        double alpha = 1.0;
        bool accepted = false;
        for (int k = 0; k < 30; ++k) {
            Vec trial = v + alpha * dv;
            if (fd::inf_norm(Vec(legendre(fm, x, trial) - xi)) < err) {
                v = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            // Stalled at the finite-difference noise floor; accept if already
            // inside the relaxed band, otherwise the damping genuinely failed.
            if (err <= 1e3 * tol * std::max(1.0, fd::inf_norm(xi))) return v;
            fail(ErrorCode::NewtonDiverged, "legendre_inverse: damping stalled");
        }
    }
    if (err > 1e3 * tol * std::max(1.0, fd::inf_norm(xi)))
        fail(ErrorCode::NewtonDiverged, "legendre_inverse: no convergence");
    return v;
}

double dual_norm(const FinslerModel& fm, const Vec& x, const Vec& xi, std::optional<Vec> seed) {
    Vec v = legendre_inverse(fm, x, xi, std::move(seed));
    return xi.dot(v) / fm.F(x, v);
}

HamiltonianModel to_hamiltonian(const FinslerModel& fm, std::string name) {
    if (name.empty()) name = fm.name + "_dual";
    FinslerModel copy = fm;
    return make_custom(fm.dim,
                       [copy](const Vec& x, const Vec& xi) {
                           const double fs = dual_norm(copy, x, xi);
                           return 0.5 * fs * fs;
                       },
                       std::move(name), HamiltonianModel::Kind::generic);
}

TangentPoint el_flow(const FinslerModel& fm, const TangentPoint& p0, double t,
                     const ElConfig& cfg) {
    const int n = fm.dim;
    if (t == 0.0) return p0;
    auto lagrangian = [&fm](const Vec& x, const Vec& v) {
        const double f = fm.F(x, v);
        return 0.5 * f * f;
    };
    OdeRhs rhs = [&](double, const Vec& y, Vec& dy) {
        const Vec x = y.head(n), v = y.tail(n);
        Mat g = fundamental_tensor(fm, x, v);
        Vec Lx = fd::gradient([&](const Vec& xv) { return lagrangian(xv, v); }, x, cfg.grad_step);
        Mat Lvx = fd::mixed_hessian([&](const Vec& a, const Vec& b) { return lagrangian(b, a); },
                                    v, x, cfg.mixed_step, cfg.mixed_step);
        dy.resize(2 * n);
        dy.head(n) = v;
        dy.tail(n) = Eigen::LLT<Mat>(g).solve(Lx - Lvx * v);
    };

    Vec y0(2 * n);
    y0 << p0.x, p0.v;
    Dopri5Stepper stepper(rhs, 0.0, y0, cfg.ode);
    const bool fwd = t > 0;
    while (fwd ? stepper.t_curr() < t : stepper.t_curr() > t) stepper.advance(t);
    TangentPoint out;
    out.x = stepper.y_curr().head(n);
    out.v = stepper.y_curr().tail(n);
    return out;
}

double el_conjugation_residual(const FinslerModel& fm, const HamiltonianModel& model,
                               const TangentPoint& p0, double t, const ElConfig& cfg,
                               const IntegratorConfig& integ) {
    Vec xi0 = legendre(fm, p0.x, p0.v);
    PhasePoint ham = flow_map(model, PhasePoint(p0.x, xi0), t, integ);
    TangentPoint el = el_flow(fm, p0, t, cfg);
    return std::max((ham.x - el.x).lpNorm<Eigen::Infinity>(),
                    (legendre(fm, el.x, el.v) - ham.xi).lpNorm<Eigen::Infinity>());
}

BoundaryCovector finsler_restrict(const FinslerModel& fm, const Domain& domain,
                                  const TangentPoint& p) {
    return restrict_covector(domain, PhasePoint(p.x, legendre(fm, p.x, p.v)));
}

TangentPoint finsler_lift(const HamiltonianModel& model, const Domain& domain,
                          const BoundaryCovector& bc, Branch branch, const ZetaConfig& cfg) {
    PhasePoint p = solve_zeta(model, domain, bc, 0.5, branch, cfg);
    return TangentPoint{p.x, model.grad_xi(p)};
}

FinslerScatter finsler_scatter(const FinslerModel& fm, const HamiltonianModel& model,
                               const Domain& domain, const TangentPoint& entry,
                               const ScatterConfig& cfg) {
    Vec xi0 = legendre(fm, entry.x, entry.v);
    FinslerScatter out;
    out.entry = entry;
    out.record = scatter_hat(model, domain, PhasePoint(entry.x, xi0), cfg);
    out.status = out.record.status;
    out.ell = out.record.ell;
    if (out.status == ScatterStatus::ok)
        out.exit = TangentPoint{out.record.exit.x, model.grad_xi(out.record.exit)};
    return out;
}

double finsler_dual_route_residual(const FinslerModel& fm, const HamiltonianModel& model,
                                   const Domain& domain, const TangentPoint& entry,
                                   const ScatterConfig& scfg, const ElConfig& ecfg) {
    FinslerScatter fs = finsler_scatter(fm, model, domain, entry, scfg);
    if (fs.status != ScatterStatus::ok)
        fail(ErrorCode::Trapped, "finsler_dual_route_residual: chord is not scattering");
    TangentPoint el = el_flow(fm, entry, fs.ell, ecfg);
    return std::max((el.x - fs.record.exit.x).lpNorm<Eigen::Infinity>(),
                    (legendre(fm, el.x, el.v) - fs.record.exit.xi).lpNorm<Eigen::Infinity>());
}

DualSolve finsler_from_hamiltonian(const HamiltonianModel& model, const Vec& x, const Vec& v,
                                   std::optional<Vec> seed, double tol, int max_iter) {
    Vec xi = seed ? *seed : v;
    double err = std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iter; ++it) {
        Vec r = model.grad_xi(x, xi) - v;
        err = fd::inf_norm(r);
        if (err <= tol * std::max(1.0, fd::inf_norm(v))) break;
        Mat J = model.hessian(x, xi).xixi;
        Eigen::FullPivLU<Mat> lu(J);
        if (!lu.isInvertible())
            fail(ErrorCode::SingularJacobian, "finsler_from_hamiltonian: fiber Hessian is singular");
        Vec dxi = lu.solve(-r);
        double alpha = 1.0;
        bool accepted = false;
        for (int k = 0; k < 30; ++k) {
            Vec trial = xi + alpha * dxi;
            if (fd::inf_norm(Vec(model.grad_xi(x, trial) - v)) < err) {
                xi = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted)
            fail(ErrorCode::NewtonDiverged, "finsler_from_hamiltonian: damping stalled");
    }
    if (err > tol * std::max(1.0, fd::inf_norm(v)))
        fail(ErrorCode::NewtonDiverged, "finsler_from_hamiltonian: no convergence");

    Eigen::LLT<Mat> llt(Mat(model.hessian(x, xi).xixi));
    if (llt.info() != Eigen::Success)
        fail(ErrorCode::NotConvexOnImage,
             "finsler_from_hamiltonian: Hamiltonian is not fiberwise convex at the solution");
    const double H = model.value(x, xi);
    if (!(H > 0))
        fail(ErrorCode::LevelSetViolation, "finsler_from_hamiltonian: non-positive energy");
    DualSolve out;
    out.F = std::sqrt(2.0 * H);
    out.xi = std::move(xi);
    return out;
}

} // namespace hamlens
