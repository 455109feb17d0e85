// Scattering relations and travel times between boundary hits.
#pragma once

#include <memory>
#include <optional>

#include "hamlens/boundary.hpp"
#include "hamlens/flow.hpp"
#include "hamlens/hamiltonian.hpp"

namespace hamlens {

enum class ScatterStatus { ok, trapped, tangential_entry, tangential_exit };

const char* scatter_status_name(ScatterStatus s);

struct ScatterRecord {
    ScatterStatus status = ScatterStatus::trapped;
    PhasePoint entry;
    PhasePoint exit;
    std::optional<BoundaryCovector> entry_bc;
    std::optional<BoundaryCovector> exit_bc;
    double ell = 0.0;    // flow parameter from seed to hit; negative for outgoing seeds
    double energy = 0.0;
    double transv_entry = 0.0;
    double transv_exit = 0.0;
    std::shared_ptr<const Trajectory> traj; // covers [0, ell] on success
};

struct ScatterConfig {
    IntegratorConfig integ;
    double max_time = 1e3;
    double boundary_tol = 1e-8;
    ZetaConfig zeta;
};

// Follow the bicharacteristic seeded at a boundary phase point to its first
// transversal boundary crossing (forward for incoming seeds, backward for
// outgoing ones). Trapping and tangency are reported in the status.
ScatterRecord scatter_hat(const HamiltonianModel& model, const Domain& domain,
                          const PhasePoint& p, const ScatterConfig& cfg = {});

// Boundary-data scattering: lift (u, xi') to the energy-E covector on the
// requested branch, then apply scatter_hat.
ScatterRecord scatter(const HamiltonianModel& model, const Domain& domain,
                      const BoundaryCovector& bc, double energy, Branch branch,
                      const ScatterConfig& cfg = {});

// Rescaled relation: the energy-(lambda^2/2) record derived from the unit-
// energy one via fiber dilation; ell scales by 1/lambda.
ScatterRecord scatter_lambda(const HamiltonianModel& model, const Domain& domain,
                             const BoundaryCovector& bc, double lambda,
                             const ScatterConfig& cfg = {});

// Zero-energy scattering seeded from tangential boundary data.
ScatterRecord scatter_zero(const HamiltonianModel& model, const Domain& domain,
                           const BoundaryCovector& bc, Branch branch,
                           const ScatterConfig& cfg = {});

} // namespace hamlens
