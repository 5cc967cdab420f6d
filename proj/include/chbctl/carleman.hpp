#pragma once

#include <vector>

#include "chbctl/dynamics.hpp"
#include "chbctl/steady.hpp"

namespace chb {

/// nu on [0,1] built from nu' = c_plus on [0, alpha], -c_minus on [beta, 1]
/// and a degree-7 smoothstep in between (alpha, beta inside O_0).  nu' is C^3,
/// so nu is C^4 with closed-form derivatives.  c_minus = c_plus mid/(1 - mid)
/// (mid the transition midpoint) makes int nu' = 0, hence nu(1) = 0.
class AuxiliaryFunction {
public:
    AuxiliaryFunction(ControlRegion O0, double c_plus = 1.0);

    /// derivative order 0..4
    double eval(double x, int order = 0) const;
    std::vector<double> sample(const std::vector<double>& xs, int order = 0) const;

    double c_plus() const noexcept { return c_plus_; }
    double c_minus() const noexcept { return c_minus_; }
    /// min |nu'| outside O_0
    double slope_floor() const noexcept { return std::min(c_plus_, c_minus_); }
    double sup_norm() const noexcept { return sup_; }
    const ControlRegion& region() const noexcept { return O0_; }
    double transition_begin() const noexcept { return alpha_; }
    double transition_end() const noexcept { return beta_; }

private:
    ControlRegion O0_;
    double alpha_, beta_;
    double c_plus_, c_minus_;
    double sup_ = 0.0;
};

/// O_0 must satisfy 0 < a0 < b0 < 1; strictly inside O when O is given.
AuxiliaryFunction build_nu(const ControlRegion& O0, const ControlRegion* O = nullptr);

struct CarlemanParams {
    double s = 1.0;
    double lambda = 2.0;
    int k = 5;
    int m = 4;
    double T = 1.0;
};

/// Throws ConfigError unless k > m > 3, lambda >= 1, s > 0, T > 0.
void validate(const CarlemanParams& p);

/// s floor mu0 (e^{m C T} T^m + T^{2m-1} + T^{2m}).
double carleman_s_floor(double mu0, double C, int m, double T);

struct WeightSample {
    double phi = 0.0;
    double log_xi = 0.0;
    double xi() const;
    /// log(e^{-2 s phi} xi^l)
    double log_factor(double s, int l) const { return -2.0 * s * phi + l * log_xi; }
    /// e^{-2 s phi} xi^l with the exponent clamped at -700 (0 below).
    double factor(double s, int l) const;
};

/// phi_m = (e^{((m+1)/m) lambda k |nu|} - e^{lambda (k |nu| + nu(x))}) / (t^m (T-t)^m)
/// xi_m  = e^{lambda (k |nu| + nu(x))} / (t^m (T-t)^m)
/// Throws DomainError-like ConfigError for t outside (0, T).
WeightSample eval_carleman_weights(const AuxiliaryFunction& nu, const CarlemanParams& p, double t, double x);

struct CarlemanProbe {
    bool degenerate = false;  // z_T = 0
    double log_lhs_sigma = 0.0;
    double log_lhs_v = 0.0;
    double log_lhs = 0.0;
    double log_rhs = 0.0;
    double log_ratio = 0.0;
    double lhs() const;
    double rhs() const;
    double ratio() const;
};

/// Solves the adjoint from z_T on [0, p.T] and evaluates
///   LHS = s^3 lambda^4 sum e^{-2 s phi} xi^3 |sigma_x|^2 + s^7 lambda^8 sum e^{-2 s phi} xi^7 |v|^2
///   RHS = s^39 lambda^40 sum_O e^{-2 s phi} xi^39 |v|^2
/// with trapezoid weights in x and dt in time, excluding t = 0 and t = T.
/// Every sum is a log-sum-exp.  Throws NumericalError("weight underflow")
/// when the RHS vanishes while the LHS does not.
CarlemanProbe carleman_ratio(const Propagator& prop, const AuxiliaryFunction& nu, const CarlemanParams& p,
                             const CoupledState& z_T);

/// max over sampled (t, x) of |d/dx (e^{-2 s phi} xi^l)| / (s lambda e^{-2 s phi} xi^{l+1}),
/// from central differences of the log factor.
double weight_derivative_constant(const AuxiliaryFunction& nu, const CarlemanParams& p, int l, int nt, int nx);

/// ||z(0)||^2 / int_{T/4}^{3T/4} ||z||^2 for the adjoint from z_T.
double interior_energy_quotient(const Propagator& prop, const CoupledState& z_T, double T);

}  // namespace chb
