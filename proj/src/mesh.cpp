#include "chbctl/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "chbctl/errors.hpp"

namespace chb {

std::vector<double> Grid::interior_weights() const { return std::vector<double>(interior_count(), dx); }

std::vector<double> Grid::interior_nodes() const {
    return std::vector<double>(nodes.begin() + 1, nodes.end() - 1);
}

Grid make_grid(int n) {
    if (n < 8) {
        throw ConfigError("grid: n = " + std::to_string(n) +
                          " is too small; the fourth-order stencil needs n >= 8");
    }
    Grid g;
    g.n = n;
    g.dx = 1.0 / n;
    g.nodes.resize(g.node_count());
    g.quad_weights.assign(g.node_count(), g.dx);
    for (int i = 0; i <= n; ++i) g.nodes[i] = static_cast<double>(i) / n;
    g.quad_weights.front() = g.quad_weights.back() = 0.5 * g.dx;
    return g;
}

namespace {

// Maps a ghost index onto the mirrored physical node.
std::size_t reflect(std::ptrdiff_t j, int n) {
    if (j < 0) j = -j;
    if (j > n) j = 2 * n - j;
    return static_cast<std::size_t>(j);
}

}  // namespace

OperatorSet assemble_operators(const Grid& grid) {
    const int n = grid.n;
    const double h = grid.dx;
    const std::size_t ni = grid.interior_count();
    const std::size_t nn = grid.node_count();
    OperatorSet ops{BandedOperator(ni, ni, 1, 1), BandedOperator(ni, ni, 1, 1),
                    BandedOperator(nn, nn, 1, 1), BandedOperator(nn, nn, 1, 1),
                    BandedOperator(nn, nn, 2, 2), BandedOperator(ni, nn, 1, 1, 1)};

    // Integer stencils, scaled afterwards so that row sums stay exact.
    for (std::size_t r = 0; r < ni; ++r) {
        if (r > 0) {
            ops.d1_dir.set(r, r - 1, -1.0);
            ops.d2_dir.set(r, r - 1, 1.0);
        }
        if (r + 1 < ni) {
            ops.d1_dir.set(r, r + 1, 1.0);
            ops.d2_dir.set(r, r + 1, 1.0);
        }
        ops.d2_dir.set(r, r, -2.0);
        // interior node i = r + 1 in all-node numbering
        ops.d1_neu_to_interior.set(r, r, -1.0);
        ops.d1_neu_to_interior.set(r, r + 2, 1.0);
    }

    const double c1[3] = {-1.0, 0.0, 1.0};
    const double c2[3] = {1.0, -2.0, 1.0};
    const double c4[5] = {1.0, -4.0, 6.0, -4.0, 1.0};
    for (int i = 0; i <= n; ++i) {
        const auto row = static_cast<std::size_t>(i);
        for (int d = -1; d <= 1; ++d) {
            const std::size_t col = reflect(i + d, n);
            ops.d1_neu.add(row, col, c1[d + 1]);
            ops.d2_neu.add(row, col, c2[d + 1]);
        }
        for (int d = -2; d <= 2; ++d) ops.d4_neu.add(row, reflect(i + d, n), c4[d + 2]);
    }
    ops.d1_dir.rescale(0.5 / h);
    ops.d1_neu.rescale(0.5 / h);
    ops.d1_neu_to_interior.rescale(0.5 / h);
    ops.d2_dir.rescale(1.0 / (h * h));
    ops.d2_neu.rescale(1.0 / (h * h));
    ops.d4_neu.rescale(1.0 / (h * h * h * h));
    return ops;
}

std::vector<double> derivative_one_sided(const Grid& grid, std::span<const double> f) {
    if (f.size() != grid.node_count()) throw ContractViolation("derivative_one_sided: size mismatch");
    const std::size_t n = static_cast<std::size_t>(grid.n);
    const double h = grid.dx;
    std::vector<double> d(f.size());
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    d[n] = (3.0 * f[n] - 4.0 * f[n - 1] + f[n - 2]) / (2.0 * h);
    for (std::size_t i = 1; i < n; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    return d;
}

double inner(const Grid& grid, std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ContractViolation("inner: size mismatch");
    double s = 0.0;
    if (a.size() == grid.node_count()) {
        for (std::size_t i = 0; i < a.size(); ++i) s += grid.quad_weights[i] * a[i] * b[i];
    } else if (a.size() == grid.interior_count()) {
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        s *= grid.dx;
    } else {
        throw ContractViolation("inner: field size " + std::to_string(a.size()) + " does not match grid");
    }
    return s;
}

double l2_norm(const Grid& grid, std::span<const double> field) {
    return std::sqrt(std::max(0.0, inner(grid, field, field)));
}

DiscreteNorms discrete_norms(const Grid& grid, const OperatorSet& ops, std::span<const double> field,
                             BoundaryKind kind) {
    const bool dir = kind == BoundaryKind::dirichlet;
    const std::size_t expected = dir ? grid.interior_count() : grid.node_count();
    if (field.size() != expected) {
        throw ContractViolation("discrete_norms: expected " + std::to_string(expected) + " values, got " +
                                std::to_string(field.size()));
    }
    const BandedOperator& d2 = dir ? ops.d2_dir : ops.d2_neu;
    const std::vector<double> f2 = d2.apply(field);
    DiscreteNorms out;
    out.l2 = l2_norm(grid, field);
    out.h1_semi = std::sqrt(std::max(0.0, -inner(grid, field, f2)));
    out.h2_semi = l2_norm(grid, f2);
    return out;
}

std::vector<double> pad_dirichlet(std::span<const double> interior) {
    std::vector<double> out(interior.size() + 2, 0.0);
    std::copy(interior.begin(), interior.end(), out.begin() + 1);
    return out;
}

}  // namespace chb
