#pragma once

#include <span>
#include <vector>

#include "chbctl/banded.hpp"
#include "chbctl/mesh.hpp"
#include "chbctl/steady.hpp"

namespace chb {

/// Pair (w, psi) stored contiguously: w on the n-1 interior nodes followed by
/// psi on all n+1 nodes.  The same layout holds adjoint pairs (sigma, v).
class CoupledState {
public:
    CoupledState() = default;
    CoupledState(std::size_t n_w, std::size_t n_psi, double t = 0.0)
        : t(t), data_(n_w + n_psi, 0.0), n_w_(n_w) {}

    static CoupledState zeros(const Grid& grid, double t = 0.0) {
        return CoupledState(grid.interior_count(), grid.node_count(), t);
    }
    /// Throws ContractViolation when the sizes do not fit the grid.
    static CoupledState from_fields(const Grid& grid, std::span<const double> w, std::span<const double> psi,
                                    double t = 0.0);

    std::span<double> w() noexcept { return {data_.data(), n_w_}; }
    std::span<const double> w() const noexcept { return {data_.data(), n_w_}; }
    std::span<double> psi() noexcept { return {data_.data() + n_w_, data_.size() - n_w_}; }
    std::span<const double> psi() const noexcept { return {data_.data() + n_w_, data_.size() - n_w_}; }
    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t w_size() const noexcept { return n_w_; }

    bool all_finite() const noexcept;

    double t = 0.0;

private:
    std::vector<double> data_;
    std::size_t n_w_ = 0;
};

/// Trapezoid-weighted inner product and norm on (L2)^2.
double inner(const Grid& grid, const CoupledState& a, const CoupledState& b);
double norm(const Grid& grid, const CoupledState& a);
/// y += alpha x
void axpy(double alpha, const CoupledState& x, CoupledState& y);

/// Per-step field sequence; entry k acts on (t_k, t_{k+1}).
using StepFields = std::vector<std::vector<double>>;

/// Control h on all psi nodes, piecewise constant in time over each step and
/// injected as chi_O h.
struct ControlSignal {
    StepFields values;

    static ControlSignal zeros(std::size_t steps, std::size_t nodes);
    std::size_t steps() const noexcept { return values.size(); }
    /// ||h||_{L2(0,T;L2(O))} with the trapezoid weights.
    double l2_norm(const Grid& grid, double dt) const;
    /// Zeroes every value outside the mask.
    void apply_mask(std::span<const double> mask);
};

/// Forcing (f1 on interior nodes, f2 on all nodes); empty means zero.
struct Sources {
    StepFields f1;
    StepFields f2;
    bool empty() const noexcept { return f1.empty() && f2.empty(); }
};

struct Trajectory {
    double dt = 0.0;
    std::vector<double> times;
    std::vector<CoupledState> states;

    const CoupledState& terminal() const { return states.back(); }
    std::size_t steps() const noexcept { return states.empty() ? 0 : states.size() - 1; }
};

/// One step of the theta scheme for the linearized system
///   (I - theta dt A) y_{k+1} = (I + (1 - theta) dt A) y_k + dt g_k
/// where A is
///   w-row:   gamma D2 w - ubar D1 w - ubar_x w + gamma1 d/dx psi
///   psi-row: -D4 psi - gamma2 D2 psi - ubar D1 psi.
/// The implicit matrix is assembled with w and psi interleaved node by node
/// (bandwidth 4) and LU-factorized once; every solve takes one refinement
/// pass with a long double residual.  Immutable after construction.
class Propagator {
public:
    Propagator(const Grid& grid, const SystemParams& params, double dt, double theta = 1.0);

    const Grid& grid() const noexcept { return grid_; }
    const SystemParams& params() const noexcept { return params_; }
    const OperatorSet& operators() const noexcept { return ops_; }
    double dt() const noexcept { return dt_; }
    double theta() const noexcept { return theta_; }
    std::size_t state_size() const noexcept { return grid_.interior_count() + grid_.node_count(); }
    /// Trapezoid weights of the stacked state.
    std::span<const double> weights() const noexcept { return weights_; }

    /// Number of steps covering [0, T]; throws ContractViolation if T is not a
    /// multiple of dt.
    int steps_for(double T) const;

    /// out = A y
    void apply_operator(std::span<const double> y, std::span<double> out) const;
    /// out = W^{-1} A^T W y, the adjoint of A in the weighted inner product.
    void apply_operator_adjoint(std::span<const double> y, std::span<double> out) const;

    /// out = P (M_e y + dt g); g may be empty.  out must not alias y.
    void step(std::span<const double> y, std::span<const double> g, std::span<double> out) const;
    /// Weighted transpose of step(): zeta = P^* z_next and z_prev = M_e^* zeta,
    /// so <step(y, g), z_next> = <y, z_prev> + dt <g, zeta>.
    void adjoint_step(std::span<const double> z_next, std::span<double> zeta, std::span<double> z_prev) const;
    /// out = P^* v = W^{-1} M_impl^{-T} W v.  out may alias v.
    void implicit_adjoint_solve(std::span<const double> v, std::span<double> out) const;

    const BandedOperator& block_ww() const noexcept { return a_ww_; }
    const BandedOperator& block_wpsi() const noexcept { return a_wpsi_; }
    const BandedOperator& block_psipsi() const noexcept { return a_pp_; }

private:
    // A or A^T (Euclidean) accumulated in long double, natural ordering.
    void apply_extended(std::span<const long double> x, std::vector<long double>& out, bool transpose) const;
    // (I - theta dt A) x = b or its transpose, with one refinement pass.
    void solve_implicit(std::span<const long double> b, std::vector<long double>& x, bool transpose) const;

    Grid grid_;
    SystemParams params_;
    OperatorSet ops_;
    double dt_;
    double theta_;
    BandedOperator a_ww_;
    BandedOperator a_wpsi_;
    BandedOperator a_pp_;
    std::vector<double> weights_;
    std::vector<std::size_t> perm_;  // natural index -> interleaved index
    BandLU lu_;
};

/// Linear forward solve from t0 over `steps` steps.  control / sources may be null.
Trajectory solve_linear_forward(const Propagator& prop, const CoupledState& y0, int steps,
                                const ControlSignal* control = nullptr, const Sources* sources = nullptr);
/// Same on [0, T]; throws InstabilityError naming the step on NaN/Inf.
Trajectory solve_linear_forward(const Propagator& prop, const CoupledState& y0, double T,
                                const ControlSignal* control = nullptr, const Sources* sources = nullptr);

/// Semi-implicit solve of the full nonlinear system: linear part as in
/// Propagator, N1/N2 evaluated explicitly at the left end of each step.
Trajectory solve_nonlinear_forward(const Propagator& prop, const CoupledState& y0, int steps,
                                   const ControlSignal* control = nullptr);
Trajectory solve_nonlinear_forward(const Propagator& prop, const CoupledState& y0, double T,
                                   const ControlSignal* control = nullptr);

struct EnergyRecord {
    double t = 0.0;
    double w_l2 = 0.0;
    double psi_l2 = 0.0;
    double psi_xx_l2 = 0.0;
};

/// Per-state norms ||w||, ||psi||, ||psi_xx|| along a trajectory.
std::vector<EnergyRecord> energy_report(const Propagator& prop, const Trajectory& traj);

/// Discrete mass sum_i q_i psi_i.
double mass(const Grid& grid, const CoupledState& y);

}  // namespace chb
