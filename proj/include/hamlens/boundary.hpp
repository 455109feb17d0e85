// Domains with boundary defining functions, boundary charts, covector
// restriction and lifting, and boundary-hit detection along trajectories.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hamlens/flow.hpp"
#include "hamlens/hamiltonian.hpp"
#include "hamlens/types.hpp"

namespace hamlens {

struct BoundaryChart {
    int ambient_dim = 0;
    std::function<Vec(const Vec&)> param;               // u in R^{n-1} -> x on the boundary
    std::function<Mat(const Vec&)> jacobian;            // optional; FD fallback
    std::function<std::optional<Vec>(const Vec&)> inverse; // u when the chart covers x
    std::string name;
};

struct Domain {
    int dim = 0;
    std::function<double(const Vec&)> rho;       // positive inside, zero on the boundary
    std::function<Vec(const Vec&)> grad_rho;     // optional; FD fallback
    std::vector<BoundaryChart> charts;
    std::string name;
};

struct BoundaryCovector {
    int chart = -1;
    Vec u;
    Vec xi_prime;
};

enum class Branch { incoming, outgoing };

Domain make_half_space(int dim, int axis);
Domain make_slab(int dim, int axis, double width);
Domain make_disk();
Domain make_ball(int dim);

Vec domain_grad_rho(const Domain& domain, const Vec& x);
Mat chart_jacobian(const BoundaryChart& chart, const Vec& u);

// Boundary point and chart differential for given chart coordinates.
struct ChartFrame {
    Vec x;
    Mat dq; // n x (n-1)
};
ChartFrame chart_embed(const Domain& domain, int chart, const Vec& u);

// <d rho, H_xi> at a boundary point; positive iff the covector points inward.
double transversality(const HamiltonianModel& model, const Domain& domain, const PhasePoint& p);

// True when the flow direction is tangent to the boundary at p (scaled test).
bool tangential_at(const HamiltonianModel& model, const Domain& domain, const PhasePoint& p);

// Pull the covector back to the first chart covering the base point.
BoundaryCovector restrict_covector(const Domain& domain, const PhasePoint& p);

// Same through one prescribed chart.
BoundaryCovector restrict_covector_chart(const Domain& domain, const PhasePoint& p, int chart);

struct ZetaConfig {
    double energy_tol = 1e-13;   // |H - E| at the returned covector
    double transv_tol = 1e-8;    // below this the root counts as tangential
    double bracket_factor = 4.0;
    int scan_points = 257;
    int max_expand = 4;
};

// Full covector over chart coordinates with prescribed tangential part and
// energy, selected by transversality branch.
PhasePoint solve_zeta(const HamiltonianModel& model, const Domain& domain,
                      const BoundaryCovector& bc, double energy, Branch branch,
                      const ZetaConfig& cfg = {});

// Same, but picking the root nearest the seeded normal component.
PhasePoint solve_zeta_seeded(const HamiltonianModel& model, const Domain& domain,
                             const BoundaryCovector& bc, double energy, double seed,
                             const ZetaConfig& cfg = {});

struct Hit {
    double t = 0.0;
    PhasePoint p;
    double transv = 0.0;
};

enum class HitStatus { ok, trapped, tangential };

struct HitResult {
    HitStatus status = HitStatus::trapped;
    Hit hit;
    Trajectory traj;
};

// First boundary crossing along a stored trajectory (in its own parameter
// order, or from the far end when reverse_scan is set).
Hit hit_boundary(const HamiltonianModel& model, const Domain& domain, const Trajectory& traj,
                 bool reverse_scan = false);

// Integrate from p0 in the given time direction until the boundary is crossed
// or max_time elapses; the returned trajectory covers the hit parameter.
HitResult first_exit(const HamiltonianModel& model, const Domain& domain, const PhasePoint& p0,
                     double time_sign, const IntegratorConfig& cfg = {}, double max_time = 1e3);

} // namespace hamlens
