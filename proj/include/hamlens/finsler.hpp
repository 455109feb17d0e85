// Finsler norms, the fiber derivative and its inverse, dual Hamiltonians,
// Euler-Lagrange dynamics, and the tangent-side scattering bridge.
#pragma once

#include <functional>
#include <optional>
#include <string>

#include "hamlens/boundary.hpp"
#include "hamlens/hamiltonian.hpp"
#include "hamlens/ode.hpp"
#include "hamlens/scattering.hpp"

namespace hamlens {

// Norm F(x, v), positive and 1-homogeneous in v away from v = 0.
struct FinslerModel {
    int dim = 0;
    std::function<double(const Vec&, const Vec&)> F;
    std::string name;

    double value(const Vec& x, const Vec& v) const { return F(x, v); }
};

// F = sqrt(v^T A v) + <b, v> with A symmetric positive definite and
// |b|_{A^{-1}} < 1.
FinslerModel make_randers(const Mat& A, const Vec& b, std::string name = "randers");

// Fiber derivative xi = d_v (F^2/2) = F dF/dv.
Vec legendre(const FinslerModel& fm, const Vec& x, const Vec& v, double h = 1e-5);

// Hessian of F^2/2 in v; must be positive definite for a Finsler norm.
Mat fundamental_tensor(const FinslerModel& fm, const Vec& x, const Vec& v, double h = 1.2e-4);

// Solve legendre(x, v) = xi for v by damped Newton.
Vec legendre_inverse(const FinslerModel& fm, const Vec& x, const Vec& xi,
                     std::optional<Vec> seed = std::nullopt, double tol = 1e-11,
                     int max_iter = 60);

// F*(x, xi) = <xi, v> / F(x, v) at v = legendre_inverse(x, xi).
double dual_norm(const FinslerModel& fm, const Vec& x, const Vec& xi,
                 std::optional<Vec> seed = std::nullopt);

// H = (F*)^2 / 2, evaluated through the inverse fiber derivative.
HamiltonianModel to_hamiltonian(const FinslerModel& fm, std::string name = "");

struct TangentPoint {
    Vec x, v;
};

struct ElConfig {
    OdeConfig ode{1e-10, 1e-12};
    double grad_step = 1e-5;
    double mixed_step = 1e-4;
};

// Euler-Lagrange flow of L = F^2/2 on the tangent bundle.
TangentPoint el_flow(const FinslerModel& fm, const TangentPoint& p0, double t,
                     const ElConfig& cfg = {});

// Distance between the fiber-derivative image of the EL flow and the
// Hamiltonian flow of H started at the matched covector.
double el_conjugation_residual(const FinslerModel& fm, const HamiltonianModel& model,
                               const TangentPoint& p0, double t, const ElConfig& cfg = {},
                               const IntegratorConfig& integ = {});

// Boundary restriction of the fiber derivative.
BoundaryCovector finsler_restrict(const FinslerModel& fm, const Domain& domain,
                                  const TangentPoint& p);

// Inverse restriction: lift boundary data to the F-unit tangent vector on the
// requested branch (through the unit covector of the dual Hamiltonian).
TangentPoint finsler_lift(const HamiltonianModel& model, const Domain& domain,
                          const BoundaryCovector& bc, Branch branch, const ZetaConfig& cfg = {});

struct FinslerScatter {
    ScatterStatus status = ScatterStatus::trapped;
    TangentPoint entry, exit;
    double ell = 0.0;
    ScatterRecord record;
};

// Tangent-side scattering through the dual Hamiltonian.
FinslerScatter finsler_scatter(const FinslerModel& fm, const HamiltonianModel& model,
                               const Domain& domain, const TangentPoint& entry,
                               const ScatterConfig& cfg = {});

// Re-run the chord on the Lagrangian side for the cotangent-side exit data.
double finsler_dual_route_residual(const FinslerModel& fm, const HamiltonianModel& model,
                                   const Domain& domain, const TangentPoint& entry,
                                   const ScatterConfig& scfg = {}, const ElConfig& ecfg = {});

struct DualSolve {
    double F = 0.0; // recovered norm of v
    Vec xi;         // solves H_xi(x, xi) = v
};

// Recover the norm generating a Hamiltonian: solve H_xi = v, F = sqrt(2H).
// Fails with NotConvexOnImage when the fiber Hessian is not positive definite
// at the solution.
DualSolve finsler_from_hamiltonian(const HamiltonianModel& model, const Vec& x, const Vec& v,
                                   std::optional<Vec> seed = std::nullopt, double tol = 1e-10,
                                   int max_iter = 60);

} // namespace hamlens
