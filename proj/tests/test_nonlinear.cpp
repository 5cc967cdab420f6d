#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

#include "chbctl/errors.hpp"
#include "chbctl/nonlinear.hpp"
#include "support.hpp"

using namespace chb;
using namespace chb::test;

namespace {

double nl_norm(const Grid& g, const NonlinearTerms& nl) {
    return std::sqrt(inner(g, nl.n1, nl.n1) + inner(g, nl.n2, nl.n2));
}

NonlinearTerms eval(const Grid& g, const OperatorSet& ops, const CoupledState& y, double phibar = 0.5) {
    return eval_nonlinear(g, ops, y.w(), y.psi(), phibar);
}

// Smooth random field: a few low modes with random amplitudes.
CoupledState smooth_random(std::mt19937_64& rng, const Grid& g, double amp) {
    std::normal_distribution<double> d(0.0, 1.0);
    double a[4], b[4];
    for (int j = 0; j < 4; ++j) {
        a[j] = d(rng);
        b[j] = d(rng);
    }
    auto w = sample(g.interior_nodes(), [&](double x) {
        double s = 0.0;
        for (int j = 0; j < 4; ++j) s += a[j] * std::sin((j + 1) * pi * x) / (j + 1);
        return amp * s;
    });
    auto p = sample(g.nodes, [&](double x) {
        double s = 0.0;
        for (int j = 0; j < 4; ++j) s += b[j] * std::cos((j + 1) * pi * x) / (j + 1);
        return amp * s;
    });
    return CoupledState::from_fields(g, std::move(w), std::move(p));
}

struct Setup {
    Grid g = make_grid(32);
    Propagator prop{g, default_params(g), 2e-3};
    SourceWeights w = make_source_weights(3.0, 1.05, 1.0, 4, 1.0);
};

}  // namespace

TEST_CASE("nonlinear terms vanish on zero and constant fields") {
    const Grid g = make_grid(32);
    const OperatorSet ops = assemble_operators(g);
    const NonlinearTerms z = eval(g, ops, CoupledState::zeros(g));
    CHECK(nl_norm(g, z) == 0.0);
    const CoupledState c = CoupledState::from_fields(g, std::vector<double>(g.interior_count(), 0.0),
                                                     std::vector<double>(g.node_count(), 0.7));
    CHECK(nl_norm(g, eval(g, ops, c)) == 0.0);
}

TEST_CASE("burgers term alone matches its closed form") {
    double errs[2];
    const int ns[2] = {64, 128};
    for (int j = 0; j < 2; ++j) {
        const Grid g = make_grid(ns[j]);
        const OperatorSet ops = assemble_operators(g);
        const CoupledState y = CoupledState::from_fields(
            g, sample(g.interior_nodes(), [](double x) { return std::sin(pi * x); }),
            std::vector<double>(g.node_count(), 0.0));
        const NonlinearTerms nl = eval(g, ops, y);
        const auto exact = sample(g.interior_nodes(), [](double x) { return -0.5 * pi * std::sin(2 * pi * x); });
        errs[j] = max_abs_diff(nl.n1, exact);
        for (double v : nl.n2) REQUIRE(v == 0.0);
    }
    CHECK(errs[0] <= 10.0 / (64.0 * 64.0));
    CHECK(errs[0] / errs[1] == doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("halving small fields quarters the nonlinear terms") {
    const Grid g = make_grid(64);
    const OperatorSet ops = assemble_operators(g);
    std::mt19937_64 rng(13);
    for (int s = 0; s < 5; ++s) {
        CoupledState y = smooth_random(rng, g, 1e-2);
        CoupledState h = y;
        for (double& v : h.data()) v *= 0.5;
        const NonlinearTerms a = eval(g, ops, y), b = eval(g, ops, h);
        const double r1 = std::sqrt(inner(g, a.n1, a.n1) / inner(g, b.n1, b.n1));
        const double r2 = std::sqrt(inner(g, a.n2, a.n2) / inner(g, b.n2, b.n2));
        CHECK(r1 >= 3.5);
        CHECK(r1 <= 4.5);
        CHECK(r2 >= 3.5);
        CHECK(r2 <= 4.5);
    }
}

TEST_CASE("growth and Lipschitz bounds have stable constants") {
    const Grid g = make_grid(64);
    const OperatorSet ops = assemble_operators(g);
    std::mt19937_64 rng(5);
    auto poly = [](double r) { return r * r * r * r + r * r * r + r * r; };
    auto lip = [](double r) { return r * r * r + r * r + r; };
    // H1 x H2 size of the fields, the norm the bounds are stated in
    auto size = [&](const CoupledState& y) {
        const DiscreteNorms nw = discrete_norms(g, ops, y.w(), BoundaryKind::dirichlet);
        const DiscreteNorms np = discrete_norms(g, ops, y.psi(), BoundaryKind::neumann);
        return nw.l2 + nw.h1_semi + np.h1_semi + np.h2_1();
    };
    // sup over random samples of the ratio to the bound, per amplitude level:
    // the constants must stay bounded as the fields shrink
    double growth[3], lipschitz[3];
    const double amps[3] = {1e-3, 1e-2, 1e-1};
    for (int a = 0; a < 3; ++a) {
        growth[a] = lipschitz[a] = 0.0;
        for (int s = 0; s < 20; ++s) {
            const CoupledState y1 = smooth_random(rng, g, amps[a]), y2 = smooth_random(rng, g, amps[a]);
            const double r1 = size(y1), r2 = size(y2);
            const NonlinearTerms n1 = eval(g, ops, y1), n2 = eval(g, ops, y2);
            growth[a] = std::max(growth[a], nl_norm(g, n1) / poly(r1));
            CoupledState d = y1;
            axpy(-1.0, y2, d);
            NonlinearTerms diff = n1;
            for (std::size_t i = 0; i < diff.n1.size(); ++i) diff.n1[i] -= n2.n1[i];
            for (std::size_t i = 0; i < diff.n2.size(); ++i) diff.n2[i] -= n2.n2[i];
            lipschitz[a] = std::max(lipschitz[a], nl_norm(g, diff) / ((lip(r1) + lip(r2)) * size(d)));
        }
    }
    for (int a = 0; a < 3; ++a) {
        CHECK(growth[a] < 1.0);
        CHECK(lipschitz[a] < 1.0);
    }
    CHECK(growth[0] / growth[1] < 3.0);
    CHECK(lipschitz[0] / lipschitz[1] < 3.0);
}

TEST_CASE("factoring reproduces the nonlinear terms") {
    Setup s;
    const Trajectory tr = solve_linear_forward(s.prop, default_y0(s.g, 1e-2), 20);
    const FactoredSources fs = factor_nonlinear(s.prop, tr);
    const Sources f = fs.materialize(s.prop, s.w, 0, 20);
    for (int k = 0; k < 20; ++k) {
        const NonlinearTerms nl = eval(s.g, s.prop.operators(), tr.states[k]);
        CHECK(max_abs_diff(f.f1[k], nl.n1) <= 1e-15 * (1.0 + nl_norm(s.g, nl)));
        CHECK(max_abs_diff(f.f2[k], nl.n2) <= 1e-15 * (1.0 + nl_norm(s.g, nl)));
    }
}

TEST_CASE("zero data is a fixed point") {
    Setup s;
    const FixedPointResult r = fixed_point_control(s.prop, CoupledState::zeros(s.g), s.w, 1.0);
    CHECK(r.converged);
    CHECK(r.iterations == 0);
    CHECK(r.control.l2_norm(s.g, s.prop.dt()) == 0.0);
    const ClosedLoopReport cl = verify_closed_loop(s.prop, CoupledState::zeros(s.g), ControlSignal{}, 1.0);
    CHECK(cl.terminal_norm == 0.0);
}

TEST_CASE("small data converges and the closed loop reaches rest") {
    Setup s;
    const CoupledState y0 = default_y0(s.g, 1e-2);
    const double y0n = norm(s.g, y0);
    FixedPointOptions o;
    const FixedPointResult r = fixed_point_control(s.prop, y0, s.w, 1.0, o);
    CHECK(r.converged);
    CHECK(r.iterations <= 20);
    CHECK(r.max_contraction_ratio <= 0.9);
    const ClosedLoopReport cl = verify_closed_loop(s.prop, y0, r.control, 1.0, &r.trajectory);
    CHECK(cl.terminal_norm <= 1e-4 * y0n);
    CHECK(cl.trajectory_gap <= 10.0 * o.tol);
    const ClosedLoopReport open = verify_closed_loop(s.prop, y0, ControlSignal{}, 1.0);
    CHECK(open.terminal_norm > cl.terminal_norm);

    // smaller data contracts faster
    const FixedPointResult h = fixed_point_control(s.prop, default_y0(s.g, 5e-3), s.w, 1.0, o);
    CHECK(h.converged);
    CHECK(h.max_contraction_ratio < r.max_contraction_ratio);
}

TEST_CASE("large data is rejected or leaves the contraction regime") {
    Setup s;
    CHECK_THROWS_AS(fixed_point_control(s.prop, default_y0(s.g, 1.0), s.w, 1.0), ConfigError);
    FixedPointOptions o;
    o.radius = 100.0;
    try {
        fixed_point_control(s.prop, default_y0(s.g, 1.0), s.w, 1.0, o);
        FAIL("expected divergence");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("outside contraction regime") != std::string::npos);
    }
}
