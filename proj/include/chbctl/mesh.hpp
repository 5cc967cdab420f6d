#pragma once

#include <span>
#include <vector>

#include "chbctl/banded.hpp"

namespace chb {

/// Uniform partition of (0, 1) into n cells.
struct Grid {
    int n = 0;
    double dx = 0.0;
    std::vector<double> nodes;         // x_i = i dx, i = 0..n
    std::vector<double> quad_weights;  // trapezoid weights on all nodes

    std::size_t node_count() const noexcept { return static_cast<std::size_t>(n) + 1; }
    std::size_t interior_count() const noexcept { return static_cast<std::size_t>(n) - 1; }
    /// Trapezoid weights restricted to interior nodes (all equal to dx).
    std::vector<double> interior_weights() const;
    std::vector<double> interior_nodes() const;
};

/// Throws ConfigError for n < 8.
Grid make_grid(int n);

/// Central-difference operators.  `*_dir` act on the n-1 interior values of a
/// field vanishing at both ends; `*_neu` act on all n+1 nodes with the
/// even-reflection ghosts psi_{-j} = psi_j, psi_{n+j} = psi_{n-j}, which
/// enforces psi_x = psi_xxx = 0 at both ends.
struct OperatorSet {
    BandedOperator d1_dir;
    BandedOperator d2_dir;
    BandedOperator d1_neu;
    BandedOperator d2_neu;
    BandedOperator d4_neu;
    /// d/dx of an all-node field, evaluated at interior nodes: (n-1) x (n+1).
    BandedOperator d1_neu_to_interior;
};

OperatorSet assemble_operators(const Grid& grid);

/// Second-order derivative of an arbitrary all-node field, one-sided at the ends.
std::vector<double> derivative_one_sided(const Grid& grid, std::span<const double> field);

/// Weighted (trapezoid) inner product; the field is either interior-only
/// (n-1 values, zero at both ends) or all-node (n+1 values).
double inner(const Grid& grid, std::span<const double> a, std::span<const double> b);
double l2_norm(const Grid& grid, std::span<const double> field);

enum class BoundaryKind { dirichlet, neumann };

struct DiscreteNorms {
    double l2 = 0.0;
    double h1_semi = 0.0;
    double h2_semi = 0.0;
    /// ||f||_{L2} + ||f''||_{L2}
    double h2_1() const noexcept { return l2 + h2_semi; }
};

/// Dirichlet fields are passed on interior nodes, Neumann fields on all nodes.
/// The H1 seminorm is sqrt(<f, -D2 f>), i.e. cell difference quotients.
DiscreteNorms discrete_norms(const Grid& grid, const OperatorSet& ops, std::span<const double> field,
                             BoundaryKind kind);

/// Pads an interior field with its zero boundary values.
std::vector<double> pad_dirichlet(std::span<const double> interior);

}  // namespace chb
