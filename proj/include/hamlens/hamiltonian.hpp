// Fiberwise degree-2 homogeneous Hamiltonians on T*R^n and their derivatives.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hamlens/errors.hpp"
#include "hamlens/types.hpp"

namespace hamlens {

// Second derivative blocks of H at a phase point.
// xxi(i,j) = d^2 H / dx_i dxi_j; xx and xixi are symmetric.
struct HessBlocks {
    Mat xx;
    Mat xxi;
    Mat xixi;
};

class HamiltonianModel {
public:
    enum class Kind { metric, lorentzian, generic };

    using EvalFn = std::function<double(const Vec&, const Vec&)>;
    using GradFn = std::function<Vec(const Vec&, const Vec&)>;
    using HessFn = std::function<HessBlocks(const Vec&, const Vec&)>;

    HamiltonianModel() = default;
    HamiltonianModel(int dim, Kind kind, std::string name, EvalFn eval,
                     GradFn grad_x = {}, GradFn grad_xi = {}, HessFn hess = {});

    int dim() const { return dim_; }
    Kind kind() const { return kind_; }
    const std::string& name() const { return name_; }

    double value(const Vec& x, const Vec& xi) const;
    double value(const PhasePoint& p) const { return value(p.x, p.xi); }

    Vec grad_x(const Vec& x, const Vec& xi) const;
    Vec grad_x(const PhasePoint& p) const { return grad_x(p.x, p.xi); }
    Vec grad_xi(const Vec& x, const Vec& xi) const;
    Vec grad_xi(const PhasePoint& p) const { return grad_xi(p.x, p.xi); }

    HessBlocks hessian(const Vec& x, const Vec& xi) const;
    HessBlocks hessian(const PhasePoint& p) const { return hessian(p.x, p.xi); }

    // Hamiltonian vector field X_H = (H_xi, -H_x) packed as a 2n vector.
    Vec rhs(const PhasePoint& p) const;

    // Jacobian of X_H, the coefficient matrix of the variational equations.
    Mat linearization(const PhasePoint& p) const;

    bool has_analytic_gradients() const { return bool(grad_x_fn_) && bool(grad_xi_fn_); }

private:
    int dim_ = 0;
    Kind kind_ = Kind::generic;
    std::string name_;
    EvalFn eval_;
    GradFn grad_x_fn_;
    GradFn grad_xi_fn_;
    HessFn hess_fn_;
};

// One degree-2 monomial c(x) * prod_i xi_i^{exponents[i]}.
struct Monomial {
    std::vector<int> exponents;
    std::function<double(const Vec&)> coeff;
    std::function<Vec(const Vec&)> coeff_grad; // optional
};

using MetricFn = std::function<Mat(const Vec&)>;
// d_cometric(x)[i] = dG/dx_i.
using MetricDerivFn = std::function<std::vector<Mat>(const Vec&)>;

// H = (1/2) xi^T G(x) xi with G(x) symmetric positive definite.
HamiltonianModel make_riemannian(int dim, MetricFn cometric, std::string name = "riemannian",
                                 MetricDerivFn d_cometric = {});

// Same quadratic form with G(x) symmetric nondegenerate (indefinite allowed).
HamiltonianModel make_pseudo_riemannian(int dim, MetricFn cometric,
                                        std::string name = "pseudo_riemannian",
                                        MetricDerivFn d_cometric = {});

// Constant-coefficient quadratic form; fully analytic derivatives.
HamiltonianModel make_constant_metric(const Mat& G, std::string name = "constant_metric");

// H = (1/2) c(x)^2 |xi|^2.
HamiltonianModel make_conformal(int dim, std::function<double(const Vec&)> c,
                                std::function<Vec(const Vec&)> grad_c = {},
                                std::string name = "conformal");

// Sum of degree-2 monomials with x-dependent coefficients.
HamiltonianModel make_polynomial(int dim, std::vector<Monomial> monomials,
                                 std::string name = "polynomial");

// Evaluation callback only; every derivative falls back to finite differences.
HamiltonianModel make_custom(int dim, HamiltonianModel::EvalFn eval,
                             std::string name = "custom",
                             HamiltonianModel::Kind kind = HamiltonianModel::Kind::generic);

// Fiber dilation M_lambda(x, xi) = (x, lambda xi); lambda must be positive.
PhasePoint dilate(const PhasePoint& p, double lambda);

// |H(x, lambda xi) - lambda^2 H(x, xi)|.
double homogeneity_residual(const HamiltonianModel& model, const PhasePoint& p, double lambda);

// |xi . H_xi - 2 H|.
double euler_residual(const HamiltonianModel& model, const PhasePoint& p);

// Max abs difference between analytic gradients and central differences of eval.
double gradient_check(const HamiltonianModel& model, const PhasePoint& p, double h = 1e-5);

} // namespace hamlens
