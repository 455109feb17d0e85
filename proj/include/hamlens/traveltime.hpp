// Time-one exponential shooting, travel times, and their differentials.
#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "hamlens/boundary.hpp"
#include "hamlens/flow.hpp"
#include "hamlens/hamiltonian.hpp"

namespace hamlens {

struct ExpJet {
    Vec y;      // base point of the time-one flow
    Mat dexp;   // d y / d xi0, the top-right block of the flow Jacobian
    Mat dflow;  // full 2n x 2n Jacobian
    PhasePoint end;
};

ExpJet exp_map(const HamiltonianModel& model, const Vec& x, const Vec& xi,
               const IntegratorConfig& cfg = {});

struct ConjugacyProbe {
    double det = 0.0;         // det(dexp)
    double sigma_ratio = 0.0; // smallest/largest singular value of dexp
    bool conjugate = false;
};

ConjugacyProbe is_conjugate(const HamiltonianModel& model, const Vec& x, const Vec& xi,
                            const IntegratorConfig& cfg = {}, double tol = 1e-9);

struct ShootConfig {
    IntegratorConfig integ{1e-12, 1e-14};
    double tol = 1e-11;      // endpoint residual, inf norm
    int max_iter = 50;
    double conj_tol = 1e-9;  // singular-value ratio flagging a conjugate endpoint
};

struct ShootResult {
    Vec xi0;          // covector with exp_x(xi0) = y
    PhasePoint end;   // time-one endpoint (y, eta0)
    double err = 0.0; // final endpoint residual
    int iters = 0;
    double det = 0.0;
    bool conjugate = false;
};

// Damped Newton on xi |-> exp_x(xi) - y. Throws NewtonDiverged when the
// residual stalls and ConjugatePoint when the differential degenerates
// mid-iteration.
ShootResult shoot(const HamiltonianModel& model, const Vec& x, const Vec& y,
                  const Vec& seed, const ShootConfig& cfg = {});

// Coarse fan search for a shooting seed (dimensions 2 and 3 only).
Vec fan_seed(const HamiltonianModel& model, const Vec& x, const Vec& y,
             const IntegratorConfig& cfg = {1e-6, 1e-9});

struct TravelTime {
    double T = 0.0;
    Vec xi0;      // connecting covector, exp_x(xi0) = y
    Vec xi_unit;  // xi0 / T, on the level H = 1/2
    PhasePoint end;
    ShootResult shot;
};

// T = sqrt(2 H(x, xi0)); requires the connecting energy to be positive.
TravelTime travel_time(const HamiltonianModel& model, const Vec& x, const Vec& y,
                       std::optional<Vec> seed = std::nullopt, const ShootConfig& cfg = {});

struct GeneratingCheckConfig {
    ShootConfig shoot;
    double fd_step = 1e-4;
};

struct GeneratingResiduals {
    double r_full = 0.0;       // (y, d_y T) vs time-T flow of (x, -d_x T)
    double r_tangential = 0.0; // chart gradients of T vs restricted ray covectors
    double T = 0.0;
};

// Differentiates T between two boundary points by finite differences and
// checks both gradient laws against the unit-speed connecting ray.
GeneratingResiduals generating_check(const HamiltonianModel& model, const Domain& domain,
                                     int chart_u, const Vec& u, int chart_v, const Vec& w,
                                     std::optional<Vec> seed = std::nullopt,
                                     const GeneratingCheckConfig& cfg = {});

using ModelFamily = std::function<HamiltonianModel(double)>;

struct VariationResult {
    double lhs = 0.0;
    double rhs = 0.0;
    double residual = 0.0;
};

struct VariationConfig {
    ShootConfig shoot;
    double s_step = 1e-4;
    double quad_tol = 1e-11;
};

// dT/ds at s=0 for fixed endpoints against -int_0^T (dH/ds) along the base ray.
VariationResult first_variation_check(const ModelFamily& fam, const Vec& x, const Vec& y,
                                      const Vec& seed, const VariationConfig& cfg = {});

// d/ds of int_0^1 H_0 along curves of the s-family (free endpoints) against
// the boundary pairing minus twice int_0^1 (dH/ds).
VariationResult variation_energy_check(const ModelFamily& fam,
                                       const std::function<PhasePoint(double)>& p0_family,
                                       const VariationConfig& cfg = {});

struct SigmaProbe {
    double r = 0.0;       // energy of the time-one connecting curve
    Vec xi0, eta0;        // initial and final covectors of that curve
    Vec grad_u, grad_w;   // chart gradients of r
    double law_residual = 0.0; // grad_u + dq_U^T xi0 and grad_w - dq_V^T eta0
};

// r(u, w) = H at the time-one connecting covector between two chart points;
// its chart gradients reproduce the restricted ray covectors with a sign.
SigmaProbe sigma_probe(const HamiltonianModel& model, const Domain& domain,
                       int chart_u, const Vec& u, int chart_v, const Vec& w,
                       const Vec& seed, const GeneratingCheckConfig& cfg = {});

struct ShootProblem {
    Vec x, y, seed;
};

struct DrCheckResult {
    double rho_fit = 0.0;      // least-squares factor in dr/ds = -rho * int f
    double max_residual = 0.0; // worst |dr/ds + rho_fit * int f|
    std::vector<double> lhs;
    std::vector<double> integrals;
};

// Linearization of r under a model family, over a batch of endpoint pairs.
DrCheckResult dr_check(const ModelFamily& fam, const std::vector<ShootProblem>& problems,
                       const VariationConfig& cfg = {});

} // namespace hamlens
