#include "chbctl/carleman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "chbctl/adjoint.hpp"
#include "chbctl/errors.hpp"

namespace chb {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// S(u) = 35u^4 - 84u^5 + 70u^6 - 20u^7: 0 -> 1 with S', S'', S''' = 0 at both ends.
double smoothstep(double u, int order) {
    switch (order) {
        case -1: return u * u * u * u * u * (7.0 - u * (14.0 - u * (10.0 - 2.5 * u)));
        case 0: return u * u * u * u * (35.0 - u * (84.0 - u * (70.0 - 20.0 * u)));
        case 1: return u * u * u * (140.0 - u * (420.0 - u * (420.0 - 140.0 * u)));
        case 2: return u * u * (420.0 - u * (1680.0 - u * (2100.0 - 840.0 * u)));
        case 3: return u * (840.0 - u * (5040.0 - u * (8400.0 - 4200.0 * u)));
        default: throw ContractViolation("smoothstep: order out of range");
    }
}

struct LogSum {
    double value = neg_inf;
    void add(double x) {
        if (x == neg_inf) return;
        if (value == neg_inf) {
            value = x;
        } else if (x > value) {
            value = x + std::log1p(std::exp(value - x));
        } else {
            value += std::log1p(std::exp(x - value));
        }
    }
};

double log_sq(double v) { return v == 0.0 ? neg_inf : 2.0 * std::log(std::abs(v)); }

}  // namespace

AuxiliaryFunction::AuxiliaryFunction(ControlRegion O0, double c_plus) : O0_(O0), c_plus_(c_plus) {
    const double width = O0.b - O0.a;
    alpha_ = O0.a + 0.25 * width;
    beta_ = O0.b - 0.25 * width;
    const double mid = 0.5 * (alpha_ + beta_);
    c_minus_ = c_plus * mid / (1.0 - mid);
    // nu' vanishes where S(u) = c_plus / (c_plus + c_minus); nu peaks there.
    const double target = c_plus_ / (c_plus_ + c_minus_);
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double u = 0.5 * (lo + hi);
        (smoothstep(u, 0) < target ? lo : hi) = u;
    }
    sup_ = eval(alpha_ + 0.5 * (lo + hi) * (beta_ - alpha_));
}

double AuxiliaryFunction::eval(double x, int order) const {
    const double L = beta_ - alpha_;
    const double jump = c_plus_ + c_minus_;
    if (x <= alpha_) {
        if (order == 0) return c_plus_ * x;
        return order == 1 ? c_plus_ : 0.0;
    }
    if (x >= beta_) {
        if (order == 0) return c_minus_ * (1.0 - x);
        return order == 1 ? -c_minus_ : 0.0;
    }
    const double u = (x - alpha_) / L;
    switch (order) {
        case 0: return c_plus_ * x - jump * L * smoothstep(u, -1);
        case 1: return c_plus_ - jump * smoothstep(u, 0);
        case 2: return -jump * smoothstep(u, 1) / L;
        case 3: return -jump * smoothstep(u, 2) / (L * L);
        case 4: return -jump * smoothstep(u, 3) / (L * L * L);
        default: throw ContractViolation("nu: derivative order must be 0..4");
    }
}

std::vector<double> AuxiliaryFunction::sample(const std::vector<double>& xs, int order) const {
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = eval(xs[i], order);
    return out;
}

AuxiliaryFunction build_nu(const ControlRegion& O0, const ControlRegion* O) {
    if (!(O0.a > 0.0 && O0.a < O0.b && O0.b < 1.0)) {
        throw ConfigError("nu: O_0 must satisfy 0 < a0 < b0 < 1");
    }
    if (O != nullptr && !(O->a < O0.a && O0.b < O->b)) {
        throw ConfigError("nu: O_0 must lie strictly inside the control region O");
    }
    return AuxiliaryFunction(O0);
}

void validate(const CarlemanParams& p) {
    if (!(p.m > 3)) throw ConfigError("carleman: need m > 3");
    if (!(p.k > p.m)) throw ConfigError("carleman: need k > m");
    if (!(p.lambda >= 1.0)) throw ConfigError("carleman: need lambda >= 1");
    if (!(p.s > 0.0)) throw ConfigError("carleman: need s > 0");
    if (!(p.T > 0.0)) throw ConfigError("carleman: need T > 0");
}

double carleman_s_floor(double mu0, double C, int m, double T) {
    return mu0 * (std::exp(m * C * T) * std::pow(T, m) + std::pow(T, 2 * m - 1) + std::pow(T, 2 * m));
}

double WeightSample::xi() const { return std::exp(log_xi); }

double WeightSample::factor(double s, int l) const {
    const double e = log_factor(s, l);
    return e < -700.0 ? 0.0 : std::exp(e);
}

WeightSample eval_carleman_weights(const AuxiliaryFunction& nu, const CarlemanParams& p, double t, double x) {
    if (!(t > 0.0 && t < p.T)) {
        std::ostringstream msg;
        msg << "carleman weights: t = " << t << " outside (0, " << p.T << ")";
        throw ConfigError(msg.str());
    }
    const double nrm = nu.sup_norm();
    const double A = (p.m + 1.0) / p.m * p.lambda * p.k * nrm;
    const double B = p.lambda * (p.k * nrm + nu.eval(x));
    const double log_tt = p.m * std::log(t * (p.T - t));
    WeightSample w;
    // e^A - e^B = e^A (1 - e^{B-A}), B < A because k > m
    w.phi = std::exp(A - log_tt) * -std::expm1(B - A);
    w.log_xi = B - log_tt;
    return w;
}

double CarlemanProbe::lhs() const { return std::exp(log_lhs); }
double CarlemanProbe::rhs() const { return std::exp(log_rhs); }
double CarlemanProbe::ratio() const {
    return degenerate ? std::numeric_limits<double>::quiet_NaN() : std::exp(log_ratio);
}

CarlemanProbe carleman_ratio(const Propagator& prop, const AuxiliaryFunction& nu, const CarlemanParams& p,
                             const CoupledState& z_T) {
    validate(p);
    const Grid& grid = prop.grid();
    CarlemanProbe out;
    if (norm(grid, z_T) == 0.0) {
        out.degenerate = true;
        out.log_lhs_sigma = out.log_lhs_v = out.log_lhs = out.log_rhs = neg_inf;
        out.log_ratio = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    const int steps = prop.steps_for(p.T);
    const AdjointTrajectory adj = solve_adjoint(prop, z_T, steps, p.T);
    const auto& mask = prop.params().control_mask;
    const double log_dt = std::log(prop.dt());
    const std::size_t nn = grid.node_count();

    LogSum sig, vv, rhs;
    for (int k = 1; k < steps; ++k) {
        const CoupledState& z = adj.states[k];
        const double t = k * prop.dt();
        const std::vector<double> sigma = pad_dirichlet(z.w());
        const std::vector<double> sigma_x = derivative_one_sided(grid, sigma);
        const auto v = z.psi();
        for (std::size_t i = 0; i < nn; ++i) {
            const WeightSample w = eval_carleman_weights(nu, p, t, grid.nodes[i]);
            const double base = log_dt + std::log(grid.quad_weights[i]);
            sig.add(base + w.log_factor(p.s, 3) + log_sq(sigma_x[i]));
            const double lv = log_sq(v[i]);
            vv.add(base + w.log_factor(p.s, 7) + lv);
            if (mask[i] != 0.0) rhs.add(base + w.log_factor(p.s, 39) + lv);
        }
    }
    const double ls = std::log(p.s), ll = std::log(p.lambda);
    out.log_lhs_sigma = 3.0 * ls + 4.0 * ll + sig.value;
    out.log_lhs_v = 7.0 * ls + 8.0 * ll + vv.value;
    LogSum total;
    total.add(out.log_lhs_sigma);
    total.add(out.log_lhs_v);
    out.log_lhs = total.value;
    out.log_rhs = 39.0 * ls + 40.0 * ll + rhs.value;
    if (out.log_rhs == neg_inf && out.log_lhs != neg_inf) {
        throw NumericalError("carleman ratio: weight underflow (observation term vanished); use a smaller s");
    }
    out.log_ratio = out.log_lhs - out.log_rhs;
    return out;
}

double weight_derivative_constant(const AuxiliaryFunction& nu, const CarlemanParams& p, int l, int nt, int nx) {
    validate(p);
    const double h = 1e-6;
    double worst = 0.0;
    for (int a = 1; a <= nt; ++a) {
        const double t = p.T * a / (nt + 1.0);
        for (int b = 1; b <= nx; ++b) {
            const double x = b / (nx + 1.0);
            const WeightSample w0 = eval_carleman_weights(nu, p, t, x);
            const WeightSample wp = eval_carleman_weights(nu, p, t, x + h);
            const WeightSample wm = eval_carleman_weights(nu, p, t, x - h);
            // d/dx F = F d/dx log F, so the bound reads |d/dx log F| / (s lambda xi)
            const double dlog = (wp.log_factor(p.s, l) - wm.log_factor(p.s, l)) / (2.0 * h);
            worst = std::max(worst, std::abs(dlog) / (p.s * p.lambda * w0.xi()));
        }
    }
    return worst;
}

double interior_energy_quotient(const Propagator& prop, const CoupledState& z_T, double T) {
    const Grid& grid = prop.grid();
    const int steps = prop.steps_for(T);
    const AdjointTrajectory adj = solve_adjoint(prop, z_T, steps, T);
    double mid = 0.0;
    for (int k = 0; k < steps; ++k) {
        const double t = k * prop.dt();
        if (t >= 0.25 * T && t < 0.75 * T) mid += prop.dt() * inner(grid, adj.states[k], adj.states[k]);
    }
    if (!(mid > 0.0)) throw NumericalError("interior energy quotient: adjoint vanishes on (T/4, 3T/4)");
    return inner(grid, adj.initial(), adj.initial()) / mid;
}

}  // namespace chb
