#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "chbctl/dynamics.hpp"
#include "chbctl/hum.hpp"

namespace chb {

/// rho_0(t) = exp(-p M / ((q-1)^m (T-t)^m))
/// rho_F(t) = exp(-(1+p) q^{2m} M / ((q-1)^m (T-t)^m))
/// Only logarithms are ever evaluated: the exponents are of order 1e5-1e6
/// for admissible q, far outside double range.
class SourceWeights {
public:
    double p() const noexcept { return p_; }
    double q() const noexcept { return q_; }
    double M() const noexcept { return M_; }
    int m() const noexcept { return m_; }
    double T() const noexcept { return T_; }

    /// -inf for t >= T.
    double log_rho0(double t) const;
    double log_rhoF(double t) const;
    /// log(rho_0^2 / rho_F); <= 0 on [0, T) for admissible (p, q).
    double log_ratio(double t) const;

    /// 2^{1/(2m)}
    static double q_upper(int m);
    /// q^{2m} / (2 - q^{2m})
    static double p_lower(double q, int m);

private:
    friend SourceWeights make_source_weights(double p, double q, double M, int m, double T);
    double p_ = 0.0, q_ = 0.0, M_ = 0.0, T_ = 0.0;
    int m_ = 0;
    double base_ = 0.0;  // M / (q-1)^m
};

/// Throws ConfigError naming the violated inequality.
SourceWeights make_source_weights(double p, double q, double M, int m, double T);

/// T_k = T - T / q^k, k = 0..Kmax.
struct Schedule {
    double T = 0.0;
    double q = 0.0;
    int Kmax = 0;
    double tail_tol = 0.0;
    std::vector<double> times;
    /// Relative defects of log rho_0(T_{k+1}) = log rho_F(T_{k-1}) + M / (T_{k+1} - T_k)^m, k = 1..Kmax-1.
    std::vector<double> identity_defects;
};

/// Builds the schedule and verifies the weight identity at every k >= 1;
/// throws NumericalError if a defect exceeds 1e-12.
Schedule make_schedule(const SourceWeights& weights, int Kmax, double tail_tol);

/// Sources f_i = rho_F(t) exp(log_scale_k) g_{i,k}.  rho_F is sampled at
/// (k + theta) dt, the time the theta scheme evaluates step k's forcing.
/// log_scale may be empty (all zeros).
///
/// log_amplitude, when set, replaces rho_F(t) exp(log_scale_k) by
/// exp(log_amplitude_k) directly.  Sources computed from states (the
/// nonlinear terms) use it: the relative scale -log rho_F reaches 1e17 near
/// T, and adding log rho_F back to it would cancel every significant digit.
struct FactoredSources {
    StepFields g1;
    StepFields g2;
    std::vector<double> log_scale;
    std::vector<double> log_amplitude;

    bool empty() const noexcept { return g1.empty() && g2.empty(); }
    /// Materializes f for steps [first, first + count); entries whose log
    /// magnitude is below -700 are flushed to zero.
    Sources materialize(const Propagator& prop, const SourceWeights& w, int first, int count) const;
    /// log(rho_F exp(log_scale)) or log_amplitude for step k.
    double log_factor(const Propagator& prop, const SourceWeights& w, int k) const;
    /// log of ||f_k / rho_F||, the integrand of the F-norm.
    double log_weighted_norm(const Propagator& prop, const SourceWeights& w, int k) const;
};

struct IntervalRecord {
    int k = 0;
    double T_k = 0.0;
    double T_next = 0.0;
    int first_step = 0;
    int steps = 0;
    double a_norm = 0.0;      // ||a_k||: state entering the interval from the previous source (a_0 = y0)
    double state_norm = 0.0;  // ||y(T_k)||: what the interval control drives to zero
    double control_norm = 0.0;
    double source_l1 = 0.0;   // ||f||_{L1(T_k, T_{k+1}; L2)}
    double stitch_jump = 0.0; // superposition defect at T_{k+1}, relative
    int cg_iterations = 0;
    bool final_direct = false;
    int refinements = 0;
};

struct SourceTermOptions {
    int Kmax = 12;
    double tail_tol = 1e-8;
    HumOptions hum;
    /// Assemble the dense Gramian of each interval on first use and keep it.
    bool cache_gramians = false;
    /// Iterated-penalization passes on the final interval while the terminal
    /// norm exceeds 10 tail_tol.  0 keeps the plain penalized solve.
    int refine_passes = 4;
    /// Stop the interval loop early once the remaining source mass is below
    /// tail_tol.  Off means every interval up to Kmax is always used, which
    /// keeps the solution map affine in the sources (fixed-point iteration).
    bool adaptive_stop = true;
};

struct SourceTermResult {
    ControlSignal control;
    Trajectory trajectory;
    std::vector<IntervalRecord> intervals;
    double terminal_norm = 0.0;
    double max_stitch_jump = 0.0;
    /// ||y(T)|| of an independent re-simulation with the assembled control
    double resimulated_terminal_norm = 0.0;
};

/// Piecewise control on the geometric schedule.  On each (T_k, T_{k+1}) the
/// source-only contribution a_{k+1} is integrated from zero and a HUM control
/// drives the current state to zero; once the remaining source mass is below
/// tail_tol (or k = Kmax) one direct HUM solve with the source drift included
/// covers (T_k, T).  Keeps per-interval control problems alive so repeated
/// solves (the nonlinear fixed point) reuse them.
class SourceTermSolver {
public:
    SourceTermSolver(const Propagator& prop, const SourceWeights& weights, double T, SourceTermOptions options = {});

    const Schedule& schedule() const noexcept { return schedule_; }
    const std::vector<int>& breakpoints() const noexcept { return breaks_; }
    const SourceWeights& weights() const noexcept { return weights_; }
    const Propagator& propagator() const noexcept { return *prop_; }
    int total_steps() const noexcept { return total_steps_; }

    SourceTermResult solve(const CoupledState& y0, const FactoredSources& sources);

private:
    ControlProblem& problem(int first, int steps);

    const Propagator* prop_;
    SourceWeights weights_;
    SourceTermOptions options_;
    Schedule schedule_;
    int total_steps_;
    std::vector<int> breaks_;  // T_k snapped to the step grid, strictly increasing, < total_steps
    std::vector<std::pair<int, std::unique_ptr<ControlProblem>>> problems_;
};

SourceTermResult solve_with_source(const Propagator& prop, const CoupledState& y0, const FactoredSources& sources,
                                   const SourceWeights& weights, double T, const SourceTermOptions& options = {});

/// Weighted norms as natural logarithms (the weights reach e^{-1e6}).
struct WeightedNorms {
    double log_y = 0.0;  // sup ||y/rho_0||_{L2} + ||y/rho_0||_{L2(H1 x H2)}
    double log_v = 0.0;  // ||h/rho_0||_{L2(0,T;L2(O))}
    double log_f = 0.0;  // ||f/rho_F||_{L1(0,T;L2)}
    double terminal_norm = 0.0;
    /// All three finite; fails when a weighted quantity diverges.
    bool bounded() const noexcept;
};

/// Evaluated on t in [0, T - dt]; throws NumericalError("unbounded weighted
/// norm") if a logarithm is not finite.
WeightedNorms weighted_norms(const Propagator& prop, const Trajectory& traj, const ControlSignal& control,
                             const FactoredSources& sources, const SourceWeights& weights);

}  // namespace chb
