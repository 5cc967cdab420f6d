#pragma once

#include "chbctl/dynamics.hpp"

namespace chb {

/// Backward solution of the adjoint system, defined as the exact weighted
/// transpose of the forward theta scheme.  `states[k]` is (sigma, v) at t_k;
/// `observations[k]` is the intermediate P^* z_{k+1} that pairs with the
/// forcing of forward step k (identical to states[k] for theta = 1).
struct AdjointTrajectory {
    double dt = 0.0;
    std::vector<double> times;
    std::vector<CoupledState> states;
    std::vector<CoupledState> observations;

    const CoupledState& initial() const { return states.front(); }
    std::size_t steps() const noexcept { return observations.size(); }
};

/// Integrates from z_T at t_end back over `steps` steps.  Optional adjoint
/// forcing g enters as z_k = M_e^* P^* z_{k+1} + dt P^* g_k, a consistent
/// discretization of -z_t = A^* z + g (second order for theta = 1/2 when g
/// is sampled at t_{k+1/2}).
AdjointTrajectory solve_adjoint(const Propagator& prop, const CoupledState& z_T, int steps, double t_end,
                                const Sources* forcing = nullptr);
AdjointTrajectory solve_adjoint(const Propagator& prop, const CoupledState& z_T, double T);

struct DualityReport {
    double defect = 0.0;  // |<y(T), z_T> - <y0, z(0)> - sum_k dt <g_k, zeta_k>|
    double scale = 0.0;   // sum of the magnitudes of the individual pairings
    double relative() const noexcept { return scale > 0.0 ? defect / scale : defect; }
};

/// Discrete duality between the forward solve from y0 with control/sources and
/// the adjoint solve from z_T.  Zero up to round-off by construction.
DualityReport duality_defect(const Propagator& prop, const CoupledState& y0, const CoupledState& z_T,
                             const ControlSignal* control, const Sources* sources, double T);

}  // namespace chb
