#pragma once

#include <span>
#include <vector>

#include "chbctl/mesh.hpp"

namespace chb {

/// Open interval O = (a, b) where the control acts.
struct ControlRegion {
    double a = 0.3;
    double b = 0.7;
    bool contains(double x) const noexcept { return x > a && x < b; }
};

struct CouplingConstants {
    double gamma1 = 0.0;  // 4 phibar^3 - 4 phibar
    double gamma2 = 0.0;  // -(12 phibar^2 - 4)
    bool decoupled = false;
};

CouplingConstants coupling_constants(double phibar);

/// Coefficients of the system linearized around (ubar, phibar).  All fields
/// live on the n+1 grid nodes; ubar vanishes at both ends.
struct SystemParams {
    double gamma = 1.0;
    double phibar = 0.5;
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    std::vector<double> ubar;
    std::vector<double> ubar_x;
    std::vector<double> f_s;
    ControlRegion region;
    std::vector<double> control_mask;  // 1 on nodes inside O, 0 elsewhere
};

struct SteadyOptions {
    double tol = 1e-12;
    int maxit = 500;
    /// ||f_s|| above smallness_factor * gamma^2 is flagged (not rejected).
    double smallness_factor = 0.5;
};

struct SteadyResult {
    std::vector<double> ubar;    // all nodes, zero at the ends
    std::vector<double> ubar_x;  // all nodes
    int iterations = 0;
    double residual = 0.0;  // ||-gamma D2 u + u D1 u - f_s||_{L2} on interior nodes
    bool above_smallness_threshold = false;
    /// L2 norms of successive Picard increments.
    std::vector<double> increments;
};

/// Picard iteration u <- (-gamma D2)^{-1} (f_s - u D1 u) from u = 0.
/// f_s is given on all nodes.  Throws SmallnessViolated on divergence or
/// when maxit is exhausted.
SteadyResult solve_steady_burgers(const Grid& grid, std::span<const double> f_s, double gamma,
                                  const SteadyOptions& options = {});

std::vector<double> control_mask(const Grid& grid, const ControlRegion& region);

/// Validates and bundles the coefficients.  Refuses gamma <= 0, an empty or
/// out-of-range region, and gamma1 == 0 unless `allow_decoupled` is set.
SystemParams make_system_params(const Grid& grid, double gamma, double phibar, const ControlRegion& region,
                                std::vector<double> ubar, std::vector<double> ubar_x,
                                std::vector<double> f_s, bool allow_decoupled = false);

/// Same, computing ubar from f_s with solve_steady_burgers.
SystemParams make_system_params(const Grid& grid, double gamma, double phibar, const ControlRegion& region,
                                std::vector<double> f_s, bool allow_decoupled = false,
                                const SteadyOptions& options = {});

}  // namespace chb
