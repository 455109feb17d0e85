// Flow-out charts from the boundary and canonical transformations built from
// them: pair transfer, generating functions, cotangent lifts, zero-energy
// matching with conformal factor recovery.
#pragma once

#include <functional>
#include <string>

#include "hamlens/boundary.hpp"
#include "hamlens/flow.hpp"
#include "hamlens/scattering.hpp"

namespace hamlens {

// ---------------------------------------------------------------------------
// Flow-out chart (u, s, xi', E) -> Phi^s(zeta_E(u, xi')). In homogeneous mode
// the coordinates are (u, t, lambda) with map Phi^{t/lambda}(M_lambda
// zeta_{1/2}(u, xi'/lambda)); (t, lambda) is again a conjugate pair.
// ---------------------------------------------------------------------------

struct PsiConfig {
    IntegratorConfig integ;
    ZetaConfig zeta;
    Branch branch = Branch::incoming;
    bool homogeneous = false;
};

class PsiChart {
public:
    PsiChart(HamiltonianModel model, Domain domain, int chart, PsiConfig cfg = {});

    int ambient_dim() const { return n_; }
    int chart() const { return chart_; }
    int coord_dim() const { return 2 * n_; }

    // coords = (u[n-1], s, xi'[n-1], E)
    PhasePoint map(const Vec& coords) const;
    Vec inverse(const PhasePoint& p) const;

    Mat jacobian_fd(const Vec& coords, double h = 1e-4) const;
    // d(map) at (u, s0, xi', E) as the flow differential over s0 applied to
    // the boundary-slice Jacobian.
    Mat jacobian_propagated(const Vec& coords, double h = 1e-4) const;

    const HamiltonianModel& model() const { return model_; }
    const Domain& domain() const { return domain_; }

private:
    HamiltonianModel model_;
    Domain domain_;
    int chart_;
    int n_;
    PsiConfig cfg_;
};

// Change of differentials from ambient (x, xi) to wall-adapted coordinates
// (x', x^n, xi', xi_n) where x^n = sign * x[axis] up to an offset.
Mat boundary_adapted_frame(int n, int axis, double sign);

// Closed-form Jacobian of the flow-out chart at s = 0 on a flat wall, in
// wall-adapted coordinates; symplectic by construction.
Mat psi_block_matrix(const HamiltonianModel& model, const PhasePoint& p, int axis, double sign);

// ---------------------------------------------------------------------------
// Canonical maps
// ---------------------------------------------------------------------------

enum class KappaKind { psi_pair, generating_function, cotangent_lift, zero_energy };

struct CanonicalMap {
    int dim = 0;
    KappaKind kind = KappaKind::cotangent_lift;
    std::string name;
    std::function<PhasePoint(const PhasePoint&)> forward;
    std::function<PhasePoint(const PhasePoint&)> inverse;

    bool has_inverse() const { return static_cast<bool>(inverse); }
    PhasePoint operator()(const PhasePoint& p) const { return forward(p); }
};

struct DiffeoMap {
    int dim = 0;
    std::function<Vec(const Vec&)> psi;
    std::function<Mat(const Vec&)> dpsi;    // FD fallback when empty
    std::function<Vec(const Vec&)> psi_inv; // Newton fallback when empty
    std::string name;
};

// (x, xi) -> (psi(x), dpsi(x)^{-T} xi).
CanonicalMap cotangent_lift(const DiffeoMap& base);

// Kind-III generating function phi(x, eta), positively homogeneous of degree
// one in eta: (d_eta phi(x, eta), eta) -> (x, d_x phi(x, eta)).
struct GeneratingFunction {
    int dim = 0;
    std::function<double(const Vec&, const Vec&)> phi;
    std::function<Vec(const Vec&, const Vec&)> grad_x;   // FD fallback
    std::function<Vec(const Vec&, const Vec&)> grad_eta; // FD fallback
    std::string name;
};

struct GeneratingConfig {
    double fd_step = 1e-6;
    double tol = 1e-10;
    int max_iter = 50;
};

CanonicalMap kappa_from_generating(const GeneratingFunction& gf, const GeneratingConfig& cfg = {});

// Transfer map between two flow systems: trace backward to the entry data
// under the first, re-emit with matched boundary data and energy under the
// second, flow forward for the same parameter.
struct KappaPairConfig {
    IntegratorConfig integ{1e-12, 1e-14}; // transfers feed finite differences
    ZetaConfig zeta;
    double max_time = 1e3;
    double boundary_tol = 1e-8;
    double level_tol = 1e-6; // zero-energy build: allowed |H| at arguments
};

CanonicalMap kappa_from_pair(HamiltonianModel model, Domain domain,
                             HamiltonianModel model_t, Domain domain_t,
                             KappaPairConfig cfg = {});

// Zero-energy variant: flow parameters transfer through the ratio of chord
// times, and the ratio recovers the conformal factor between the two
// Hamiltonians when they share null rays.
struct ZeroEnergyKappa {
    CanonicalMap kappa;
    std::function<double(const PhasePoint&)> mu; // entry chord time ratio, flow-constant
};

ZeroEnergyKappa kappa_zero_energy(HamiltonianModel model, Domain domain,
                                  HamiltonianModel model_t, Domain domain_t,
                                  KappaPairConfig cfg = {});

// H composed with the inverse of kappa, as a new model.
HamiltonianModel transported_model(const HamiltonianModel& model, const CanonicalMap& kappa,
                                   const std::string& name);

// ---------------------------------------------------------------------------
// Residuals
// ---------------------------------------------------------------------------

double kappa_symplectic_residual(const CanonicalMap& kappa, const PhasePoint& p, double h = 1e-4);

double kappa_pullback_residual(const HamiltonianModel& model, const HamiltonianModel& model_t,
                               const CanonicalMap& kappa, const PhasePoint& p);

double kappa_conjugation_residual(const HamiltonianModel& model, const HamiltonianModel& model_t,
                                  const CanonicalMap& kappa, const PhasePoint& p, double s,
                                  const IntegratorConfig& integ = {});

// For zero-energy maps the flow parameter transfers as s / mu(p).
double kappa_conjugation_residual_mu(const HamiltonianModel& model, const HamiltonianModel& model_t,
                                     const ZeroEnergyKappa& zk, const PhasePoint& p, double s,
                                     const IntegratorConfig& integ = {});

// iota* o kappa = iota*: base point and tangential covector are preserved at
// boundary points.
double kappa_boundary_residual(const Domain& domain, const CanonicalMap& kappa, const PhasePoint& p);

double kappa_homogeneity_residual(const CanonicalMap& kappa, const PhasePoint& p, double lambda);

// Pullback of the canonical two-form restricted to the tangent space of the
// zero level at p.
double tangential_symplectic_residual(const HamiltonianModel& model, const CanonicalMap& kappa,
                                      const PhasePoint& p, double h = 1e-4);

} // namespace hamlens
