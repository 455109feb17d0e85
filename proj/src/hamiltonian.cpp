#include "hamlens/hamiltonian.hpp"

#include <cmath>
#include <memory>
#include <utility>

#include "hamlens/fd.hpp"

namespace hamlens {

namespace {

constexpr double kGradStep = 6e-6;
constexpr double kHessStep = 1.2e-4;
constexpr double kGradOfGradStep = 1e-5;

Mat symmetrize(const Mat& A) { return 0.5 * (A + A.transpose()); }

void check_symmetric(const Mat& G) {
    const double scale = std::max(1.0, G.cwiseAbs().maxCoeff());
    if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        fail(ErrorCode::NonSymmetricMatrix, "cometric is not symmetric");
}

} // namespace

HamiltonianModel::HamiltonianModel(int dim, Kind kind, std::string name, EvalFn eval,
                                   GradFn grad_x, GradFn grad_xi, HessFn hess)
    : dim_(dim), kind_(kind), name_(std::move(name)), eval_(std::move(eval)),
      grad_x_fn_(std::move(grad_x)), grad_xi_fn_(std::move(grad_xi)), hess_fn_(std::move(hess)) {
    if (dim_ < 2) fail(ErrorCode::InvalidArgument, "phase dimension must be at least 2");
    if (!eval_) fail(ErrorCode::InvalidArgument, "evaluation callback is required");
}

double HamiltonianModel::value(const Vec& x, const Vec& xi) const { return eval_(x, xi); }

Vec HamiltonianModel::grad_x(const Vec& x, const Vec& xi) const {
    if (grad_x_fn_) return grad_x_fn_(x, xi);
    const double h = fd::step(fd::inf_norm(x), kGradStep);
    return fd::gradient([&](const Vec& xv) { return eval_(xv, xi); }, x, h);
}

Vec HamiltonianModel::grad_xi(const Vec& x, const Vec& xi) const {
    if (grad_xi_fn_) return grad_xi_fn_(x, xi);
    const double h = fd::step(fd::inf_norm(xi), kGradStep);
    return fd::gradient([&](const Vec& xiv) { return eval_(x, xiv); }, xi, h);
}

HessBlocks HamiltonianModel::hessian(const Vec& x, const Vec& xi) const {
    if (hess_fn_) return hess_fn_(x, xi);
    HessBlocks out;
    const double hx = fd::step(fd::inf_norm(x), kGradOfGradStep);
    const double hxi = fd::step(fd::inf_norm(xi), kGradOfGradStep);
    const int n = dim_;
    if (grad_x_fn_) {
        out.xx = symmetrize(fd::jacobian(
            [&](const Vec& xv) { return grad_x_fn_(xv, xi); }, x, hx, n));
    } else {
        out.xx = fd::hessian([&](const Vec& xv) { return eval_(xv, xi); }, x,
                             fd::step(fd::inf_norm(x), kHessStep));
    }
    if (grad_xi_fn_) {
        out.xixi = symmetrize(fd::jacobian(
            [&](const Vec& xiv) { return grad_xi_fn_(x, xiv); }, xi, hxi, n));
        // row i: d/dx_i of H_xi
        Mat m(n, n);
        Vec xt = x;
        for (int i = 0; i < n; ++i) {
            xt(i) = x(i) + hx;
            const Vec gp = grad_xi_fn_(xt, xi);
            xt(i) = x(i) - hx;
            const Vec gm = grad_xi_fn_(xt, xi);
            xt(i) = x(i);
            m.row(i) = ((gp - gm) / (2.0 * hx)).transpose();
        }
        out.xxi = m;
    } else {
        out.xixi = fd::hessian([&](const Vec& xiv) { return eval_(x, xiv); }, xi,
                               fd::step(fd::inf_norm(xi), kHessStep));
        out.xxi = fd::mixed_hessian(eval_, x, xi,
                                    fd::step(fd::inf_norm(x), kHessStep),
                                    fd::step(fd::inf_norm(xi), kHessStep));
    }
    return out;
}

Vec HamiltonianModel::rhs(const PhasePoint& p) const {
    Vec out(2 * dim_);
    out.head(dim_) = grad_xi(p);
    out.tail(dim_) = -grad_x(p);
    return out;
}

Mat HamiltonianModel::linearization(const PhasePoint& p) const {
    const HessBlocks hb = hessian(p);
    const int n = dim_;
    Mat A(2 * n, 2 * n);
    A.topLeftCorner(n, n) = hb.xxi.transpose();
    A.topRightCorner(n, n) = hb.xixi;
    A.bottomLeftCorner(n, n) = -hb.xx;
    A.bottomRightCorner(n, n) = -hb.xxi;
    return A;
}

namespace {

HamiltonianModel make_quadratic_form(int dim, MetricFn cometric, MetricDerivFn d_cometric,
                                     std::string name, HamiltonianModel::Kind kind,
                                     bool require_positive) {
    auto metric_at = [cometric = std::move(cometric), require_positive](const Vec& x) -> Mat {
        Mat G = cometric(x);
        check_symmetric(G);
        if (require_positive) {
            Eigen::LLT<Mat> llt(G);
            if (llt.info() != Eigen::Success)
                fail(ErrorCode::NotPositiveDefinite, "cometric is not positive definite");
        } else {
            Eigen::FullPivLU<Mat> lu(G);
            if (!lu.isInvertible())
                fail(ErrorCode::SingularMatrix, "cometric is degenerate");
        }
        return G;
    };

    auto eval = [metric_at](const Vec& x, const Vec& xi) {
        return 0.5 * xi.dot(metric_at(x) * xi);
    };
    auto gxi = [metric_at](const Vec& x, const Vec& xi) -> Vec { return metric_at(x) * xi; };

    HamiltonianModel::GradFn gx;
    if (d_cometric) {
        gx = [d_cometric](const Vec& x, const Vec& xi) -> Vec {
            const std::vector<Mat> dG = d_cometric(x);
            Vec g(x.size());
            for (int i = 0; i < x.size(); ++i) g(i) = 0.5 * xi.dot(dG[i] * xi);
            return g;
        };
    } else {
        gx = [metric_at](const Vec& x, const Vec& xi) -> Vec {
            const double h = fd::step(fd::inf_norm(x), kGradStep);
            return fd::gradient([&](const Vec& xv) { return 0.5 * xi.dot(metric_at(xv) * xi); }, x, h);
        };
    }

    return HamiltonianModel(dim, kind, std::move(name), eval, gx, gxi, {});
}

} // namespace

HamiltonianModel make_riemannian(int dim, MetricFn cometric, std::string name,
                                 MetricDerivFn d_cometric) {
    return make_quadratic_form(dim, std::move(cometric), std::move(d_cometric), std::move(name),
                               HamiltonianModel::Kind::metric, true);
}

HamiltonianModel make_pseudo_riemannian(int dim, MetricFn cometric, std::string name,
                                        MetricDerivFn d_cometric) {
    return make_quadratic_form(dim, std::move(cometric), std::move(d_cometric), std::move(name),
                               HamiltonianModel::Kind::lorentzian, false);
}

HamiltonianModel make_constant_metric(const Mat& G, std::string name) {
    check_symmetric(G);
    const int dim = static_cast<int>(G.rows());
    Eigen::SelfAdjointEigenSolver<Mat> es(G);
    const Vec ev = es.eigenvalues();
    if (ev.cwiseAbs().minCoeff() < 1e-14 * std::max(1.0, ev.cwiseAbs().maxCoeff()))
        fail(ErrorCode::SingularMatrix, "constant cometric is degenerate");
    const bool positive = ev.minCoeff() > 0.0;
    const auto kind = positive ? HamiltonianModel::Kind::metric : HamiltonianModel::Kind::lorentzian;
    Mat Gc = G;
    auto eval = [Gc](const Vec&, const Vec& xi) { return 0.5 * xi.dot(Gc * xi); };
    auto gx = [dim](const Vec&, const Vec&) -> Vec { return Vec::Zero(dim); };
    auto gxi = [Gc](const Vec&, const Vec& xi) -> Vec { return Gc * xi; };
    auto hess = [Gc, dim](const Vec&, const Vec&) -> HessBlocks {
        return HessBlocks{Mat::Zero(dim, dim), Mat::Zero(dim, dim), Gc};
    };
    return HamiltonianModel(dim, kind, std::move(name), eval, gx, gxi, hess);
}

HamiltonianModel make_conformal(int dim, std::function<double(const Vec&)> c,
                                std::function<Vec(const Vec&)> grad_c, std::string name) {
    auto eval = [c](const Vec& x, const Vec& xi) {
        const double cv = c(x);
        return 0.5 * cv * cv * xi.squaredNorm();
    };
    auto gxi = [c](const Vec& x, const Vec& xi) -> Vec {
        const double cv = c(x);
        return (cv * cv) * xi;
    };
    HamiltonianModel::GradFn gx;
    if (grad_c) {
        gx = [c, grad_c](const Vec& x, const Vec& xi) -> Vec {
            return c(x) * xi.squaredNorm() * grad_c(x);
        };
    }
    return HamiltonianModel(dim, HamiltonianModel::Kind::metric, std::move(name), eval, gx, gxi, {});
}

HamiltonianModel make_polynomial(int dim, std::vector<Monomial> monomials, std::string name) {
    for (const auto& m : monomials) {
        if (static_cast<int>(m.exponents.size()) != dim)
            fail(ErrorCode::BadDegree, "monomial exponent list does not match dimension");
        int total = 0;
        for (int e : m.exponents) {
            if (e < 0) fail(ErrorCode::BadDegree, "negative exponent");
            total += e;
        }
        if (total != 2) fail(ErrorCode::BadDegree, "monomial is not homogeneous of degree 2");
        if (!m.coeff) fail(ErrorCode::InvalidArgument, "monomial needs a coefficient callback");
    }

    auto mono_xi = [](const Monomial& m, const Vec& xi) {
        double v = 1.0;
        for (int i = 0; i < xi.size(); ++i)
            for (int e = 0; e < m.exponents[i]; ++e) v *= xi(i);
        return v;
    };

    auto table = std::make_shared<std::vector<Monomial>>(std::move(monomials));

    auto eval = [table, mono_xi](const Vec& x, const Vec& xi) {
        double s = 0.0;
        for (const auto& m : *table) s += m.coeff(x) * mono_xi(m, xi);
        return s;
    };
    auto gxi = [table](const Vec& x, const Vec& xi) -> Vec {
        Vec g = Vec::Zero(xi.size());
        for (const auto& m : *table) {
            const double c = m.coeff(x);
            for (int i = 0; i < xi.size(); ++i) {
                if (m.exponents[i] == 0) continue;
                double v = static_cast<double>(m.exponents[i]);
                for (int j = 0; j < xi.size(); ++j) {
                    int e = m.exponents[j] - (j == i ? 1 : 0);
                    for (int k = 0; k < e; ++k) v *= xi(j);
                }
                g(i) += c * v;
            }
        }
        return g;
    };
    auto gx = [table, mono_xi](const Vec& x, const Vec& xi) -> Vec {
        Vec g = Vec::Zero(x.size());
        for (const auto& m : *table) {
            const double mv = mono_xi(m, xi);
            Vec cg;
            if (m.coeff_grad) {
                cg = m.coeff_grad(x);
            } else {
                const double h = fd::step(fd::inf_norm(x), kGradStep);
                cg = fd::gradient(m.coeff, x, h);
            }
            g += mv * cg;
        }
        return g;
    };
    return HamiltonianModel(dim, HamiltonianModel::Kind::generic, std::move(name), eval, gx, gxi, {});
}

HamiltonianModel make_custom(int dim, HamiltonianModel::EvalFn eval, std::string name,
                             HamiltonianModel::Kind kind) {
    return HamiltonianModel(dim, kind, std::move(name), std::move(eval), {}, {}, {});
}

PhasePoint dilate(const PhasePoint& p, double lambda) {
    if (!(lambda > 0.0)) fail(ErrorCode::NonPositiveLambda, "dilation requires lambda > 0");
    return PhasePoint(p.x, lambda * p.xi);
}

double homogeneity_residual(const HamiltonianModel& model, const PhasePoint& p, double lambda) {
    const PhasePoint q = dilate(p, lambda);
    return std::abs(model.value(q) - lambda * lambda * model.value(p));
}

double euler_residual(const HamiltonianModel& model, const PhasePoint& p) {
    return std::abs(p.xi.dot(model.grad_xi(p)) - 2.0 * model.value(p));
}

double gradient_check(const HamiltonianModel& model, const PhasePoint& p, double h) {
    const double hx = fd::step(fd::inf_norm(p.x), h);
    const double hxi = fd::step(fd::inf_norm(p.xi), h);
    const Vec gx_fd = fd::gradient([&](const Vec& xv) { return model.value(xv, p.xi); }, p.x, hx);
    const Vec gxi_fd = fd::gradient([&](const Vec& xiv) { return model.value(p.x, xiv); }, p.xi, hxi);
    return std::max((model.grad_x(p) - gx_fd).cwiseAbs().maxCoeff(),
                    (model.grad_xi(p) - gxi_fd).cwiseAbs().maxCoeff());
}

} // namespace hamlens
