#pragma once

#include <span>
#include <vector>

#include "chbctl/dynamics.hpp"
#include "chbctl/mesh.hpp"
#include "chbctl/source_term.hpp"

namespace chb {

struct NonlinearTerms {
    std::vector<double> n1;  // interior nodes
    std::vector<double> n2;  // all nodes
};

/// Pointwise N1, N2 of the perturbation system around (ubar, phibar) with
/// derivatives from the mesh operators; w on interior nodes, psi on all nodes.
NonlinearTerms eval_nonlinear(const Grid& grid, const OperatorSet& ops, std::span<const double> w,
                              std::span<const double> psi, double phibar);

/// sup_k ||y_k|| + (sum_k dt (||w_k||_{H1}^2 + ||psi_k||_{H2}^2))^{1/2}
double trajectory_norm(const Propagator& prop, const Trajectory& traj);
/// trajectory_norm of the difference of two trajectories on the same steps.
double trajectory_distance(const Propagator& prop, const Trajectory& a, const Trajectory& b);

/// N(y_k) for every state but the last, as sources with one sample per step
/// (N at the left end of each step, as in solve_nonlinear_forward).  Each
/// step is stored as g = N / ||N||_inf with log_amplitude = log ||N||_inf.
FactoredSources factor_nonlinear(const Propagator& prop, const Trajectory& traj);

struct FixedPointOptions {
    double tol = 1e-8;  // on distance / ||new iterate||
    int maxit = 20;
    /// Radius mu on ||y0||; larger data is rejected up front.
    double radius = 5e-2;
    SourceTermOptions source{.Kmax = 12, .tail_tol = 1e-8, .hum = {}, .cache_gramians = true, .refine_passes = 4, .adaptive_stop = false};
};

struct IterateRecord {
    int iter = 0;
    double distance = 0.0;           // relative to the new iterate
    double contraction_ratio = 0.0;  // distance_j / distance_{j-1}; 0 for the first
    double terminal_norm = 0.0;
};

struct FixedPointResult {
    ControlSignal control;
    Trajectory trajectory;
    std::vector<IterateRecord> history;
    bool converged = false;
    int iterations = 0;
    double max_contraction_ratio = 0.0;
    SourceTermResult last_solve;
};

/// Iterates y^{j+1} = Lambda(y^j): the controlled linear system driven by the
/// sources N(y^j), solved with the source-term method, starting from y^0 = 0.
/// Throws NumericalError("outside contraction regime") when the contraction
/// ratio is >= 1 on three consecutive steps and ConfigError when ||y0||
/// exceeds the radius.  Non-convergence within maxit is reported via
/// converged = false.
FixedPointResult fixed_point_control(const Propagator& prop, const CoupledState& y0, const SourceWeights& weights,
                                     double T, const FixedPointOptions& options = {});

struct ClosedLoopReport {
    double terminal_norm = 0.0;
    double trajectory_gap = 0.0;  // relative distance to the reference trajectory, if given
    Trajectory trajectory;
};

/// Re-simulates the full nonlinear system with `control`.
ClosedLoopReport verify_closed_loop(const Propagator& prop, const CoupledState& y0, const ControlSignal& control,
                                    double T, const Trajectory* reference = nullptr);

}  // namespace chb
