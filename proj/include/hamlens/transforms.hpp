// Ray transforms along bicharacteristics and the associated gauge calculus.
#pragma once

#include <functional>

#include "hamlens/scattering.hpp"

namespace hamlens {

using PhaseFunction = std::function<double(const PhasePoint&)>;

struct TransformConfig {
    ScatterConfig scatter;
    double quad_tol = 1e-10;
    double fd_step = 1e-4;
};

struct RayIntegral {
    double value = std::numeric_limits<double>::quiet_NaN();
    double length = 0.0;
    ScatterRecord ray;
};

// Integral of f along an already-traced boundary-to-boundary record,
// oriented in flow direction.
double ray_integral(const PhaseFunction& f, const ScatterRecord& rec, double quad_tol = 1e-10);

// Ray transform at energy 1/2 seeded from incoming boundary data. The value
// stays NaN when the ray is trapped or tangential.
RayIntegral xray(const HamiltonianModel& model, const Domain& domain, const PhaseFunction& f,
                 const BoundaryCovector& bc, const TransformConfig& cfg = {});

// Ray transform on the zero-energy level.
RayIntegral lightray(const HamiltonianModel& model, const Domain& domain, const PhaseFunction& f,
                     const BoundaryCovector& bc, const TransformConfig& cfg = {});

// Derivative of f along the flow, by a centered 4-point stencil in flow time.
double flow_derivative(const HamiltonianModel& model, const PhaseFunction& f,
                       const PhasePoint& p, double h = 1e-4, const IntegratorConfig& integ = {});

// The function p -> X_H f (p) as a reusable object.
PhaseFunction xh_of(const HamiltonianModel& model, const PhaseFunction& f, double h = 1e-4,
                    const IntegratorConfig& integ = {});

// phi(p) = integral of f over the backward flow segment from p to its entry
// point; inverts f = X_H phi for phi vanishing on the inflow boundary.
double gauge_potential(const HamiltonianModel& model, const Domain& domain,
                       const PhaseFunction& f, const PhasePoint& p,
                       const TransformConfig& cfg = {});

} // namespace hamlens
