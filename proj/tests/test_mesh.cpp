#include <tuple>
#include <cmath>
#include <random>

#include "doctest.h"
#include "support.hpp"

#include "chbctl/errors.hpp"
#include "chbctl/mesh.hpp"

using namespace chb;
using chb::test::pi;
using chb::test::sample;

TEST_CASE("make_grid spacing, nodes and quadrature") {
    const Grid g = make_grid(10);
    CHECK(g.dx == doctest::Approx(0.1));
    REQUIRE(g.nodes.size() == 11);
    for (int i = 0; i <= 10; ++i) CHECK(g.nodes[i] == doctest::Approx(0.1 * i));
    double s = 0.0;
    for (double w : g.quad_weights) s += w;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(g.n * g.dx == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(make_grid(4), ConfigError);
    CHECK_NOTHROW(make_grid(8));
}

TEST_CASE("D2_dir on sin(pi x) is second-order accurate") {
    for (int n : {32, 64, 128}) {
        const Grid g = make_grid(n);
        const OperatorSet ops = assemble_operators(g);
        const auto xi = g.interior_nodes();
        const auto f = sample(xi, [](double x) { return std::sin(pi * x); });
        const auto d2 = ops.d2_dir.apply(f);
        double err = 0.0;
        for (std::size_t i = 0; i < xi.size(); ++i) err = std::max(err, std::abs(d2[i] + pi * pi * f[i]));
        // Taylor remainder of the central stencil: h^2/12 max|f''''| = h^2 pi^4 / 12.
        CHECK(err <= std::pow(pi, 4) / 12.0 * g.dx * g.dx * 1.0001);
    }
}

TEST_CASE("D4_neu eigenvalues on cos(k pi x)") {
    const Grid g = make_grid(128);
    const OperatorSet ops = assemble_operators(g);
    for (int k = 1; k <= 4; ++k) {
        const auto f = sample(g.nodes, [&](double x) { return std::cos(k * pi * x); });
        const auto d4 = ops.d4_neu.apply(f);
        const double exact = std::pow(k * pi, 4);
        double worst = 0.0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (std::abs(f[i]) > 0.1) worst = std::max(worst, std::abs(d4[i] / f[i] - exact) / exact);
        }
        CHECK(worst <= 0.02);
    }
    const auto f = sample(g.nodes, [](double x) { return std::cos(2 * pi * x); });
    const auto d4 = ops.d4_neu.apply(f);
    CHECK(d4[0] == doctest::Approx(1558.545).epsilon(0.02));
}

TEST_CASE("null modes and weighted column sums") {
    const Grid g = make_grid(37);
    const OperatorSet ops = assemble_operators(g);
    const std::vector<double> one(g.node_count(), 1.0);
    for (double v : ops.d4_neu.apply(one)) CHECK(v == 0.0);
    for (double v : ops.d2_neu.apply(one)) CHECK(v == 0.0);
    const auto c4 = ops.d4_neu.apply_transpose(g.quad_weights);
    const auto c2 = ops.d2_neu.apply_transpose(g.quad_weights);
    const double s4 = ops.d4_neu.max_abs(), s2 = ops.d2_neu.max_abs();
    for (double v : c4) CHECK(std::abs(v) <= 1e-13 * s4);
    for (double v : c2) CHECK(std::abs(v) <= 1e-13 * s2);
}

TEST_CASE("transpose consistency and weighted symmetry (random fields)") {
    std::mt19937_64 rng(7);
    const Grid g = make_grid(64);
    const OperatorSet ops = assemble_operators(g);
    const BandedOperator* all[] = {&ops.d1_dir, &ops.d2_dir, &ops.d1_neu, &ops.d2_neu, &ops.d4_neu,
                                   &ops.d1_neu_to_interior};
    for (int trial = 0; trial < 10; ++trial) {
        for (const BandedOperator* a : all) {
            const auto x = test::random_vector(rng, a->cols());
            const auto y = test::random_vector(rng, a->rows());
            const auto ax = a->apply(x);
            const auto aty = a->apply_transpose(y);
            double lhs = 0.0, rhs = 0.0, nx = 0.0, ny = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) lhs += ax[i] * y[i], ny += y[i] * y[i];
            for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * aty[i], nx += x[i] * x[i];
            // ||A|| bounded by (bandwidth) * max entry
            const double anorm = (a->lower() + a->upper() + 1) * a->max_abs();
            CHECK(std::abs(lhs - rhs) <= 1e-12 * anorm * std::sqrt(nx * ny));
        }
        // Weighted symmetry of D2_dir and D4_neu, antisymmetry of D1 on the interior.
        const auto a = test::random_vector(rng, g.node_count());
        const auto b = test::random_vector(rng, g.node_count());
        const double s = inner(g, ops.d4_neu.apply(a), b) - inner(g, a, ops.d4_neu.apply(b));
        CHECK(std::abs(s) <= 1e-12 * ops.d4_neu.max_abs() * l2_norm(g, a) * l2_norm(g, b));
        const auto ai = test::random_vector(rng, g.interior_count());
        const auto bi = test::random_vector(rng, g.interior_count());
        const double s2 = inner(g, ops.d2_dir.apply(ai), bi) - inner(g, ai, ops.d2_dir.apply(bi));
        CHECK(std::abs(s2) <= 1e-12 * ops.d2_dir.max_abs() * l2_norm(g, ai) * l2_norm(g, bi));
        const double s1 = inner(g, ops.d1_dir.apply(ai), bi) + inner(g, ai, ops.d1_dir.apply(bi));
        CHECK(std::abs(s1) <= 1e-12 * ops.d1_dir.max_abs() * l2_norm(g, ai) * l2_norm(g, bi));
    }
}

TEST_CASE("observed order of the stencils on manufactured fields") {
    auto err_for = [](int n) {
        const Grid g = make_grid(n);
        const OperatorSet ops = assemble_operators(g);
        // cos(pi x) + 0.5 cos(3 pi x) satisfies both reflection conditions.
        const auto f = sample(g.nodes, [](double x) { return std::cos(pi * x) + 0.5 * std::cos(3 * pi * x); });
        const auto exact = sample(g.nodes, [](double x) {
            return std::pow(pi, 4) * std::cos(pi * x) + 0.5 * std::pow(3 * pi, 4) * std::cos(3 * pi * x);
        });
        const auto d4 = ops.d4_neu.apply(f);
        std::vector<double> e(d4.size());
        for (std::size_t i = 0; i < e.size(); ++i) e[i] = d4[i] - exact[i];
        return l2_norm(g, e);
    };
    const double e32 = err_for(32), e64 = err_for(64), e128 = err_for(128);
    const double p1 = std::log2(e32 / e64), p2 = std::log2(e64 / e128);
    CHECK(p1 >= 1.8);
    CHECK(p1 <= 2.2);
    CHECK(p2 >= 1.8);
    CHECK(p2 <= 2.2);
}

TEST_CASE("discrete norms") {
    const Grid g = make_grid(128);
    const OperatorSet ops = assemble_operators(g);
    const std::vector<double> one(g.node_count(), 1.0);
    CHECK(discrete_norms(g, ops, one, BoundaryKind::neumann).l2 == doctest::Approx(1.0).epsilon(1e-14));
    const auto s = sample(g.interior_nodes(), [](double x) { return std::sin(pi * x); });
    const DiscreteNorms nrm = discrete_norms(g, ops, s, BoundaryKind::dirichlet);
    CHECK(std::abs(nrm.l2 - 1.0 / std::sqrt(2.0)) <= 1e-3);
    CHECK(nrm.h1_semi == doctest::Approx(pi / std::sqrt(2.0)).epsilon(0.01));
    CHECK(nrm.h2_semi == doctest::Approx(pi * pi / std::sqrt(2.0)).epsilon(0.01));
    CHECK(nrm.h2_1() == doctest::Approx(nrm.l2 + nrm.h2_semi));
    CHECK_THROWS_AS(discrete_norms(g, ops, one, BoundaryKind::dirichlet), ContractViolation);
}

TEST_CASE("band solves agree with LAPACK dgbtrs in both orientations") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto [n, kl, ku] : {std::tuple<int, int, int>{1, 0, 0}, {7, 2, 1}, {40, 4, 4}, {33, 1, 3}}) {
        BandLU lu(n, kl, ku);
        std::vector<std::vector<double>> dense(n, std::vector<double>(n, 0.0));
        for (int i = 0; i < n; ++i)
            for (int j = std::max(0, i - kl); j <= std::min(n - 1, i + ku); ++j) {
                // weak diagonal so partial pivoting actually swaps rows
                const double v = u(rng) + (i == j ? 0.1 : 0.0);
                lu.add(i, j, v);
                dense[i][j] = v;
            }
        lu.factorize();
        for (bool tr : {false, true}) {
            const auto b = chb::test::random_vector(rng, n);
            std::vector<double> x(b), ref(b);
            lu.solve(x, tr);
            lu.solve_lapack(ref, tr);
            double scale = 0.0;
            for (double v : ref) scale = std::max(scale, std::abs(v));
            CHECK(chb::test::max_abs_diff(x, ref) <= 1e-12 * std::max(1.0, scale));
            // residual against the dense matrix
            double res = 0.0;
            for (int i = 0; i < n; ++i) {
                double s = 0.0;
                for (int j = 0; j < n; ++j) s += (tr ? dense[j][i] : dense[i][j]) * x[j];
                res = std::max(res, std::abs(s - b[i]));
            }
            CHECK(res <= 1e-10 * std::max(1.0, scale));
        }
    }
}
