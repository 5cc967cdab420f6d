#pragma once

#include <vector>

#include "chbctl/adjoint.hpp"
#include "chbctl/dynamics.hpp"

namespace chb {

struct HumOptions {
    double epsilon = 1e-6;
    double cg_tol = 1e-10;  // relative to ||b||
    int maxit = 500;
    /// Throw NumericalError instead of returning converged = false.
    bool throw_on_stagnation = false;
};

struct HumResult {
    CoupledState z_T_opt;
    ControlSignal control;  // h = chi_O v along the optimal adjoint
    CoupledState terminal_state;
    Trajectory trajectory;
    int cg_iterations = 0;
    double cg_residual = 0.0;  // final ||b - (Lambda + eps) z|| / ||b||
    bool converged = true;
    double control_cost = 0.0;  // ||h||_{L2(0,T;L2(O))}
    double free_terminal_norm = 0.0;
};

/// Penalized HUM on a window of `steps` propagator steps starting at t0.
/// The propagator must outlive the problem.
class ControlProblem {
public:
    ControlProblem(const Propagator& prop, int steps, double t0 = 0.0);

    const Propagator& propagator() const noexcept { return *prop_; }
    int steps() const noexcept { return steps_; }
    double t0() const noexcept { return t0_; }
    double t1() const noexcept { return t0_ + steps_ * prop_->dt(); }

    /// Lambda z: terminal state from zero data driven by h = chi_O v, where v
    /// comes from the adjoint solved from z.  Uses the dense cache when built.
    CoupledState gramian_apply(const CoupledState& z) const;
    CoupledState gramian_apply_matrix_free(const CoupledState& z) const;
    /// sum_k dt ||chi_O v_k||^2 computed from the adjoint alone.
    double observation_energy(const CoupledState& z) const;

    /// Caches Lambda as a dense matrix (one matrix-free apply per column) so
    /// that repeated solves on the same window only cost dense products.
    void assemble_dense();
    bool has_dense() const noexcept { return !dense_.empty(); }

    ControlSignal control_from(const CoupledState& z) const;
    /// Terminal state of the uncontrolled evolution of y0 (plus sources).
    CoupledState free_terminal(const CoupledState& y0, const Sources* sources = nullptr) const;

    /// Solves (Lambda + eps) z = -(F y0 + S f) by conjugate gradient in the
    /// weighted inner product and returns the control read off the adjoint.
    /// y0.t is ignored; the window start t0 is used.
    HumResult solve(const CoupledState& y0, const HumOptions& options, const Sources* sources = nullptr) const;

    /// One pass of iterated penalization: solves (Lambda + eps) dz = -y(T)
    /// for the residual of `prev` and returns the result for z + dz, whose
    /// residual is eps (Lambda + eps)^{-1} times the previous one.
    HumResult refine(const HumResult& prev, const CoupledState& y0, const HumOptions& options,
                     const Sources* sources = nullptr) const;

    /// J(z) = 1/2 sum dt ||chi_O v||^2 + eps/2 ||z||^2 + <z(0), y0>
    double functional(const CoupledState& z, const CoupledState& y0, double epsilon) const;
    /// Lambda z + eps z + F y0
    CoupledState functional_gradient(const CoupledState& z, const CoupledState& y0, double epsilon) const;

private:
    // CG on (Lambda + eps) x = b in the weighted inner product.
    CoupledState conjugate_gradient(const CoupledState& b, const HumOptions& options, HumResult& res) const;
    void finish(HumResult& res, const CoupledState& y0, const Sources* sources) const;

    const Propagator* prop_;
    int steps_;
    double t0_;
    std::vector<double> dense_;  // row-major N x N
};

CoupledState gramian_apply(const Propagator& prop, const CoupledState& z_T, double T);
HumResult solve_null_control(const Propagator& prop, const CoupledState& y0, double T,
                             const HumOptions& options = {});
/// HUM on (0, T0) followed by zero control on (T0, T).
HumResult solve_null_control_padded(const Propagator& prop, const CoupledState& y0, double T, double T0,
                                    const HumOptions& options = {});

/// (||sigma(0)||^2 + ||v(0)||^2) / sum dt ||chi_O v||^2.  Throws
/// NumericalError("unobserved sample") when the denominator vanishes.
double observability_quotient(const Propagator& prop, const CoupledState& z_T, double T);

struct SweepRow {
    double T = 0.0;
    double epsilon = 0.0;
    double control_cost = 0.0;
    double terminal_norm = 0.0;
    int cg_iterations = 0;
};

/// Least-squares fit log ||h|| = log_prefactor + M (T + T^{-m}).
struct CostFit {
    double log_prefactor = 0.0;
    double M = 0.0;
    int m = 4;
    double rms_residual = 0.0;
};

std::vector<SweepRow> control_cost_sweep(const Propagator& prop, const CoupledState& y0,
                                         const std::vector<double>& horizons, const HumOptions& options);
CostFit fit_control_cost(const std::vector<SweepRow>& rows, int m);

}  // namespace chb
