// Hamiltonian flow integration with dense output and variational Jacobians.
#pragma once

#include <functional>
#include <vector>

#include "hamlens/hamiltonian.hpp"
#include "hamlens/ode.hpp"
#include "hamlens/types.hpp"

namespace hamlens {

struct IntegratorConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double max_step = std::numeric_limits<double>::infinity();
    // Hard cutoff on the requested span; longer requests are a usage error.
    double max_time = 1e3;
    bool with_jacobian = false;

    OdeConfig ode() const { return OdeConfig{rel_tol, abs_tol, max_step, 0.0}; }
};

// Integrated curve with per-step quartic interpolants. The stored state is
// (x, xi) and, when requested, the columns of the variational matrix dPhi^t.
class Trajectory {
public:
    Trajectory() = default;
    Trajectory(int n, bool with_jacobian) : n_(n), with_jac_(with_jacobian) {}

    int dim() const { return n_; }
    bool has_jacobian() const { return with_jac_; }
    double t_start() const { return times_.front(); }
    double t_end() const { return times_.back(); }
    int n_steps() const { return static_cast<int>(dense_.size()); }

    const std::vector<double>& times() const { return times_; }
    double energy0 = 0.0;
    double max_step_error = 0.0;

    Vec state_at(double t) const;
    PhasePoint phase_at(double t) const;
    Mat jacobian_at(double t) const;
    PhasePoint phase_node(int i) const;
    Mat jacobian_node(int i) const;

    bool contains(double t) const;

    void push_first(double t, const Vec& y);
    void push_step(double t, const Vec& y, const DenseCoeffs& dense);

private:
    int locate(double t) const;
    static PhasePoint phase_from_state(const Vec& y, int n);
    static Mat jacobian_from_state(const Vec& y, int n);

    int n_ = 0;
    bool with_jac_ = false;
    std::vector<double> times_;
    std::vector<Vec> states_;
    std::vector<DenseCoeffs> dense_;
};

// Flow of X_H from p0 over [t0, t1] (either time direction).
Trajectory integrate(const HamiltonianModel& model, const PhasePoint& p0, double t0, double t1,
                     const IntegratorConfig& cfg = {});

PhasePoint flow_map(const HamiltonianModel& model, const PhasePoint& p0, double t,
                    const IntegratorConfig& cfg = {});

// Endpoint and variational matrix of the time-t flow.
struct FlowJet {
    PhasePoint p;
    Mat M; // 2n x 2n
};
FlowJet flow_jet(const HamiltonianModel& model, const PhasePoint& p0, double t,
                 const IntegratorConfig& cfg = {});

// || Phi^t(M_lambda p0) - M_lambda Phi^{lambda t}(p0) ||.
double rescale_check(const HamiltonianModel& model, const PhasePoint& p0, double lambda, double t,
                     const IntegratorConfig& cfg = {});

using PhaseFn = std::function<double(const PhasePoint&)>;

// Flow of mu*H and the parameter map s -> s_breve matching it to the H-flow,
// valid on the zero level set of H.
struct MuReparam {
    Trajectory base;   // H-flow over [0, s1]
    Trajectory breve;  // (mu H)-flow over the matched parameter range
    std::vector<double> s;        // base trajectory node parameters
    std::vector<double> s_breve;  // matched parameters, ds_breve/ds = 1/mu
};

MuReparam reparametrize_mu(const HamiltonianModel& model, const PhaseFn& mu, const PhasePoint& p0,
                           double s1, const IntegratorConfig& cfg = {});

// Max pointwise distance between the reparametrized flows at the matched nodes.
double mu_pointset_residual(const MuReparam& mr);

} // namespace hamlens
