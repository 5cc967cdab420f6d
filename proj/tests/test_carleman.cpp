#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "chbctl/carleman.hpp"
#include "chbctl/errors.hpp"
#include "support.hpp"

using namespace chb;
using namespace chb::test;

namespace {

std::vector<double> dense_grid(int n) {
    std::vector<double> xs(n + 1);
    for (int i = 0; i <= n; ++i) xs[i] = static_cast<double>(i) / n;
    return xs;
}

}  // namespace

TEST_CASE("nu vanishes at the ends with the prescribed slopes") {
    const AuxiliaryFunction nu = build_nu({0.4, 0.6});
    CHECK(std::abs(nu.eval(0.0)) <= 1e-14);
    CHECK(std::abs(nu.eval(1.0)) <= 1e-14);
    CHECK(nu.eval(0.0, 1) == nu.c_plus());
    CHECK(nu.eval(1.0, 1) == -nu.c_minus());
    CHECK(nu.eval(0.0, 2) == 0.0);
    CHECK(nu.eval(1.0, 2) == 0.0);
}

TEST_CASE("nu is positive with one interior maximum inside O0 and a slope floor outside") {
    for (const ControlRegion O0 : {ControlRegion{0.4, 0.6}, ControlRegion{0.35, 0.5}}) {
        const AuxiliaryFunction nu = build_nu(O0);
        const auto xs = dense_grid(640);
        const auto v = nu.sample(xs), d = nu.sample(xs, 1);
        int maxima = 0;
        for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
            CHECK(v[i] > 0.0);
            if (v[i] > v[i - 1] && v[i] >= v[i + 1]) {
                ++maxima;
                CHECK(O0.contains(xs[i]));
            }
            if (!O0.contains(xs[i])) CHECK(std::abs(d[i]) >= nu.slope_floor() * (1.0 - 1e-12));
        }
        CHECK(maxima == 1);
        const double grid_max = *std::max_element(v.begin(), v.end());
        CHECK(nu.sup_norm() >= grid_max);
        CHECK(nu.sup_norm() - grid_max <= 1e-4 * grid_max);
    }
}

TEST_CASE("nu derivatives are consistent and continuous up to order four") {
    const AuxiliaryFunction nu = build_nu({0.4, 0.6});
    const double h = 1e-5;
    for (double x : {0.2, 0.46, 0.5, 0.53, 0.8}) {
        for (int order = 0; order < 4; ++order) {
            const double fd = (nu.eval(x + h, order) - nu.eval(x - h, order)) / (2 * h);
            CHECK(fd == doctest::Approx(nu.eval(x, order + 1)).epsilon(1e-5).scale(1.0));
        }
    }
    // continuity of nu'''' at the ends of the transition
    for (double x : {nu.transition_begin(), nu.transition_end()}) {
        for (int order = 0; order <= 4; ++order) {
            CHECK(std::abs(nu.eval(x - 1e-12, order) - nu.eval(x + 1e-12, order)) <= 1e-3);
        }
    }
}

TEST_CASE("O0 must be interior") {
    const ControlRegion O{0.3, 0.7};
    CHECK_THROWS_AS(build_nu({0.0, 0.5}), ConfigError);
    CHECK_THROWS_AS(build_nu({0.2, 0.6}, &O), ConfigError);
    CHECK_NOTHROW(build_nu({0.4, 0.6}, &O));
}

TEST_CASE("weights are positive and satisfy the elementary bounds") {
    const AuxiliaryFunction nu = build_nu({0.4, 0.6});
    CarlemanParams p;
    p.s = carleman_s_floor(1.0, 1.0, p.m, p.T);
    CHECK(p.s == doctest::Approx(std::exp(4.0) + 2.0));
    for (int a = 1; a < 20; ++a) {
        const double t = a / 20.0;
        for (double x : dense_grid(50)) {
            const WeightSample w = eval_carleman_weights(nu, p, t, x);
            CHECK(w.phi > 0.0);
            CHECK(w.xi() > 0.0);
            CHECK(std::pow(w.xi(), 1.0 / p.m) <= std::pow(p.T, 2 * p.m - 2) * w.xi());
            if (a == 10) CHECK(w.xi() >= std::pow(4.0, p.m) / std::pow(p.T, 2 * p.m));
        }
    }
    // weights die at the time ends
    CHECK(eval_carleman_weights(nu, p, 1e-3, 0.5).factor(p.s, 39) == 0.0);
    CHECK_THROWS_AS(eval_carleman_weights(nu, p, 0.0, 0.5), ConfigError);
    CHECK_THROWS_AS(eval_carleman_weights(nu, p, 1.0, 0.5), ConfigError);
    CarlemanParams bad = p;
    bad.k = 4;
    CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("weight derivative bound has a moderate constant") {
    const AuxiliaryFunction nu = build_nu({0.4, 0.6});
    CarlemanParams p;
    p.s = 10.0;
    for (int l : {3, 7, 39}) {
        const double C = weight_derivative_constant(nu, p, l, 15, 40);
        CHECK(std::isfinite(C));
        // analytically |nu'| (2 + l / (s xi)) <= 2 max|nu'| + l / s
        CHECK(C <= 2.0 * std::max(nu.c_plus(), nu.c_minus()) + l / p.s + 1e-3);
    }
}

TEST_CASE("carleman ratio is finite and scale invariant") {
    const Grid g = make_grid(32);
    const Propagator prop(g, default_params(g), 2e-3);
    const ControlRegion O{0.3, 0.7};
    const AuxiliaryFunction nu = build_nu({0.4, 0.6}, &O);
    CarlemanParams p;
    p.s = carleman_s_floor(1.0, 1.0, p.m, p.T);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 5; ++i) {
        const CoupledState z = random_state(rng, g);
        CoupledState z2 = z;
        for (double& v : z2.data()) v *= -13.0;
        const CarlemanProbe a = carleman_ratio(prop, nu, p, z), b = carleman_ratio(prop, nu, p, z2);
        CHECK(std::isfinite(a.log_ratio));
        CHECK(std::abs(a.log_ratio - b.log_ratio) <= 1e-10);
    }
    const CarlemanProbe zero = carleman_ratio(prop, nu, p, CoupledState::zeros(g));
    CHECK(zero.degenerate);
    CHECK(std::isnan(zero.ratio()));
}

TEST_CASE("interior energy quotient is finite") {
    const Grid g = make_grid(32);
    const Propagator prop(g, default_params(g), 2e-3);
    const double q = interior_energy_quotient(prop, default_y0(g), 0.5);
    CHECK(std::isfinite(q));
    CHECK(q > 0.0);
}
