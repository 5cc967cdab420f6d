#pragma once

// Manufactured solutions of the linearized system and of its adjoint, with
// ubar = a sin(pi x) prescribed analytically.  Forcing is computed from the
// continuous operators by hand-differentiated closed forms.

#include <cmath>

#include "support.hpp"

#include "chbctl/adjoint.hpp"
#include "chbctl/dynamics.hpp"

namespace chb::test {

struct Manufactured {
    double gamma = 1.0;
    double gamma1 = -1.5;
    double gamma2 = 1.0;
    double amp = 0.1;  // ubar amplitude
    bool linear_time = false;  // time profile 1 + t instead of exponentials

    double fa(double t) const { return linear_time ? 1.0 + t : std::exp(-t); }
    double fa_t(double t) const { return linear_time ? 1.0 : -std::exp(-t); }
    double ab(double t) const { return linear_time ? 1.0 + t : std::exp(t); }
    double ab_t(double t) const { return linear_time ? 1.0 : std::exp(t); }

    double ub(double x) const { return amp * std::sin(pi * x); }
    double ubx(double x) const { return amp * pi * std::cos(pi * x); }

    // forward: w* = e^{-t} (sin(pi x) + 0.5 sin(2 pi x)), psi* = e^{-t} cos(pi x)
    double w(double t, double x) const { return fa(t) * (std::sin(pi * x) + 0.5 * std::sin(2 * pi * x)); }
    double psi(double t, double x) const { return fa(t) * std::cos(pi * x); }
    double f1(double t, double x) const {
        const double e = fa(t);
        const double s1 = std::sin(pi * x), s2 = std::sin(2 * pi * x);
        const double c1 = std::cos(pi * x), c2 = std::cos(2 * pi * x);
        const double wv = e * (s1 + 0.5 * s2);
        const double wt = fa_t(t) * (s1 + 0.5 * s2);
        const double wx = e * (pi * c1 + pi * c2);
        const double wxx = e * (-pi * pi * s1 - 2 * pi * pi * s2);
        const double px = -e * pi * s1;
        return wt - gamma * wxx + ub(x) * wx + ubx(x) * wv - gamma1 * px;
    }
    double f2(double t, double x) const {
        const double e = fa(t);
        const double c = std::cos(pi * x), s = std::sin(pi * x);
        const double pt = fa_t(t) * c, px = -e * pi * s, pxx = -e * pi * pi * c, pxxxx = e * std::pow(pi, 4) * c;
        return pt + pxxxx + gamma2 * pxx + ub(x) * px;
    }

    // adjoint: sigma* = e^{t} sin(pi x), v* = e^{t} (cos(pi x) + 0.5 cos(2 pi x)); -z_t = A^* z + g
    double sigma(double t, double x) const { return ab(t) * std::sin(pi * x); }
    double v(double t, double x) const { return ab(t) * (std::cos(pi * x) + 0.5 * std::cos(2 * pi * x)); }
    double g1(double t, double x) const {
        const double e = ab(t);
        const double s = std::sin(pi * x), c = std::cos(pi * x);
        const double st = ab_t(t) * s, sx = e * pi * c, sxx = -e * pi * pi * s;
        return -st - (gamma * sxx + ub(x) * sx);
    }
    double g2(double t, double x) const {
        const double e = ab(t);
        const double c1 = std::cos(pi * x), c2 = std::cos(2 * pi * x);
        const double s1 = std::sin(pi * x), s2 = std::sin(2 * pi * x);
        const double vv = e * (c1 + 0.5 * c2);
        const double vt = ab_t(t) * (c1 + 0.5 * c2);
        const double vx = e * (-pi * s1 - pi * s2);
        const double vxx = e * (-pi * pi * c1 - 2 * pi * pi * c2);
        const double vxxxx = e * (std::pow(pi, 4) * c1 + 8 * std::pow(pi, 4) * c2);
        const double sx = e * pi * c1;
        return -vt - (-vxxxx - gamma2 * vxx + ub(x) * vx + ubx(x) * vv - gamma1 * sx);
    }

    CoupledState forward_state(const Grid& g, double t) const {
        return CoupledState::from_fields(g, sample(g.interior_nodes(), [&](double x) { return w(t, x); }),
                                         sample(g.nodes, [&](double x) { return psi(t, x); }), t);
    }
    CoupledState adjoint_state(const Grid& g, double t) const {
        return CoupledState::from_fields(g, sample(g.interior_nodes(), [&](double x) { return sigma(t, x); }),
                                         sample(g.nodes, [&](double x) { return v(t, x); }), t);
    }
    /// Forward forcing for each step, sampled at t_k + theta dt.
    Sources forward_sources(const Grid& g, double dt, int steps, double theta) const {
        Sources s;
        for (int k = 0; k < steps; ++k) {
            const double t = (k + theta) * dt;
            s.f1.push_back(sample(g.interior_nodes(), [&](double x) { return f1(t, x); }));
            s.f2.push_back(sample(g.nodes, [&](double x) { return f2(t, x); }));
        }
        return s;
    }
    /// Adjoint forcing for step k (t_k -> t_{k+1}), sampled at t_{k+1} - theta dt.
    Sources adjoint_sources(const Grid& g, double dt, int steps, double theta) const {
        Sources s;
        for (int k = 0; k < steps; ++k) {
            const double t = (k + 1 - theta) * dt;
            s.f1.push_back(sample(g.interior_nodes(), [&](double x) { return g1(t, x); }));
            s.f2.push_back(sample(g.nodes, [&](double x) { return g2(t, x); }));
        }
        return s;
    }
    SystemParams params(const Grid& g) const {
        SystemParams p = analytic_params(g, 0.5, amp);
        return p;
    }
};

inline double state_error(const Grid& g, const CoupledState& a, const CoupledState& b) {
    CoupledState d = a;
    axpy(-1.0, b, d);
    return norm(g, d);
}

/// Forward error at T of the manufactured solution.  With linear_time the
/// time discretization is exact, so only the spatial error remains.
inline double forward_error(int n, double dt, double T, double theta, bool linear_time = false) {
    Manufactured m;
    m.linear_time = linear_time;
    const Grid g = make_grid(n);
    const Propagator prop(g, m.params(g), dt, theta);
    const int steps = prop.steps_for(T);
    const Sources src = m.forward_sources(g, dt, steps, theta);
    const Trajectory tr = solve_linear_forward(prop, m.forward_state(g, 0.0), steps, nullptr, &src);
    return state_error(g, tr.terminal(), m.forward_state(g, T));
}

/// Adjoint error at t = 0 of the manufactured adjoint solution started at T.
inline double adjoint_error(int n, double dt, double T, double theta, bool linear_time = false) {
    Manufactured m;
    m.linear_time = linear_time;
    const Grid g = make_grid(n);
    const Propagator prop(g, m.params(g), dt, theta);
    const int steps = prop.steps_for(T);
    const Sources src = m.adjoint_sources(g, dt, steps, theta);
    const AdjointTrajectory tr = solve_adjoint(prop, m.adjoint_state(g, T), steps, T, &src);
    return state_error(g, tr.initial(), m.adjoint_state(g, 0.0));
}

namespace detail {
inline Sources split(const Grid& g, const std::vector<std::vector<double>>& full) {
    Sources s;
    const std::size_t ni = g.interior_count();
    for (const auto& f : full) {
        s.f1.emplace_back(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(ni));
        s.f2.emplace_back(f.begin() + static_cast<std::ptrdiff_t>(ni), f.end());
    }
    return s;
}
}  // namespace detail

/// Temporal error against the semi-discrete oracle: the forcing is
/// y*' - A_h y* with y* the sampled manufactured field, so the sampled field
/// solves the space-discrete system exactly and only time error remains.
inline double forward_time_error(int n, double dt, double T, double theta) {
    const Manufactured m;
    const Grid g = make_grid(n);
    const Propagator prop(g, m.params(g), dt, theta);
    const int steps = prop.steps_for(T);
    std::vector<std::vector<double>> full;
    for (int k = 0; k < steps; ++k) {
        const double t = (k + theta) * dt;
        CoupledState y = m.forward_state(g, t);
        std::vector<double> ay(y.size());
        prop.apply_operator(y.data(), ay);
        // fa_t / fa is the same for every mode, so y*' = (fa_t / fa) y*
        const double r = m.fa_t(t) / m.fa(t);
        for (std::size_t i = 0; i < ay.size(); ++i) ay[i] = r * y.data()[i] - ay[i];
        full.push_back(std::move(ay));
    }
    const Sources src = detail::split(g, full);
    const Trajectory tr = solve_linear_forward(prop, m.forward_state(g, 0.0), steps, nullptr, &src);
    return state_error(g, tr.terminal(), m.forward_state(g, T));
}

/// Adjoint counterpart of forward_time_error with -z*' - A_h^* z* as forcing.
inline double adjoint_time_error(int n, double dt, double T, double theta) {
    const Manufactured m;
    const Grid g = make_grid(n);
    const Propagator prop(g, m.params(g), dt, theta);
    const int steps = prop.steps_for(T);
    std::vector<std::vector<double>> full;
    for (int k = 0; k < steps; ++k) {
        const double t = (k + 1 - theta) * dt;
        CoupledState z = m.adjoint_state(g, t);
        std::vector<double> az(z.size());
        prop.apply_operator_adjoint(z.data(), az);
        const double r = m.ab_t(t) / m.ab(t);
        for (std::size_t i = 0; i < az.size(); ++i) az[i] = -r * z.data()[i] - az[i];
        full.push_back(std::move(az));
    }
    const Sources src = detail::split(g, full);
    const AdjointTrajectory tr = solve_adjoint(prop, m.adjoint_state(g, T), steps, T, &src);
    return state_error(g, tr.initial(), m.adjoint_state(g, 0.0));
}

}  // namespace chb::test
