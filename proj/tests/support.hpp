#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "chbctl/dynamics.hpp"
#include "chbctl/mesh.hpp"
#include "chbctl/steady.hpp"

namespace chb::test {

inline constexpr double pi = std::numbers::pi;

inline std::vector<double> sample(const std::vector<double>& xs, const std::function<double(double)>& f) {
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = f(xs[i]);
    return out;
}

inline std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

inline CoupledState random_state(std::mt19937_64& rng, const Grid& g, double scale = 1.0) {
    return CoupledState::from_fields(g, random_vector(rng, g.interior_count(), scale),
                                     random_vector(rng, g.node_count(), scale));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Defaults used across the suites: phibar = 0.5, gamma = 1, O = (0.3, 0.7),
/// ubar from f_s = 0.1 sin(pi x).
inline SystemParams default_params(const Grid& g, double phibar = 0.5, bool allow_decoupled = false) {
    return make_system_params(g, 1.0, phibar, ControlRegion{0.3, 0.7},
                              sample(g.nodes, [](double x) { return 0.1 * std::sin(pi * x); }), allow_decoupled);
}

/// Params with a prescribed analytic ubar (no steady solve).
inline SystemParams analytic_params(const Grid& g, double phibar, double amp, bool allow_decoupled = false) {
    auto u = sample(g.nodes, [&](double x) { return amp * std::sin(pi * x); });
    auto ux = sample(g.nodes, [&](double x) { return amp * pi * std::cos(pi * x); });
    u.front() = u.back() = 0.0;
    return make_system_params(g, 1.0, phibar, ControlRegion{0.3, 0.7}, std::move(u), std::move(ux), {},
                              allow_decoupled);
}

/// (0.1 sin(pi x), 0.1 cos(pi x)) scaled by `amp / 0.1`.
inline CoupledState default_y0(const Grid& g, double amp = 0.1) {
    return CoupledState::from_fields(g, sample(g.interior_nodes(), [&](double x) { return amp * std::sin(pi * x); }),
                                     sample(g.nodes, [&](double x) { return amp * std::cos(pi * x); }));
}

}  // namespace chb::test
