#include "chbctl/steady.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "chbctl/errors.hpp"

namespace chb {

CouplingConstants coupling_constants(double phibar) {
    CouplingConstants c;
    c.gamma1 = 4.0 * phibar * phibar * phibar - 4.0 * phibar;
    c.gamma2 = -(12.0 * phibar * phibar - 4.0);
    c.decoupled = c.gamma1 == 0.0;
    return c;
}

SteadyResult solve_steady_burgers(const Grid& grid, std::span<const double> f_s, double gamma,
                                  const SteadyOptions& options) {
    if (f_s.size() != grid.node_count()) throw ContractViolation("solve_steady_burgers: f_s size mismatch");
    if (!(gamma > 0.0)) throw ConfigError("solve_steady_burgers: gamma must be positive");
    if (!(options.tol > 0.0)) throw ConfigError("solve_steady_burgers: tol must be positive");

    const OperatorSet ops = assemble_operators(grid);
    const std::size_t ni = grid.interior_count();
    const std::vector<double> f(f_s.begin() + 1, f_s.end() - 1);

    BandLU lap(ni, 1, 1);
    ops.d2_dir.for_each([&](std::size_t i, std::size_t j, double v) { lap.add(i, j, -gamma * v); });
    lap.factorize();

    SteadyResult out;
    out.above_smallness_threshold = l2_norm(grid, f_s) > options.smallness_factor * gamma * gamma;

    std::vector<double> u(ni, 0.0), next(ni), ux(ni), diff(ni);
    double prev_norm = 0.0;
    bool converged = false;
    for (int it = 1; it <= options.maxit; ++it) {
        ops.d1_dir.apply(u, ux);
        for (std::size_t i = 0; i < ni; ++i) next[i] = f[i] - u[i] * ux[i];
        lap.solve(next);
        for (std::size_t i = 0; i < ni; ++i) diff[i] = next[i] - u[i];
        const double inc = l2_norm(grid, diff);
        const double norm = l2_norm(grid, next);
        out.increments.push_back(inc);
        out.iterations = it;
        if (!std::isfinite(norm) || (it > 1 && prev_norm > 0.0 && norm > 2.0 * prev_norm)) {
            std::ostringstream msg;
            msg << "steady Burgers: Picard iterates diverge at iteration " << it << " (||u|| = " << norm
                << "); ||f_s|| = " << l2_norm(grid, f_s) << " is too large for gamma = " << gamma;
            throw SmallnessViolated(msg.str());
        }
        u.swap(next);
        prev_norm = norm;
        if (inc <= options.tol) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "steady Burgers: no convergence in " << options.maxit << " Picard iterations; ||f_s|| = "
            << l2_norm(grid, f_s) << " violates the smallness requirement for gamma = " << gamma;
        throw SmallnessViolated(msg.str());
    }

    ops.d1_dir.apply(u, ux);
    const std::vector<double> uxx = ops.d2_dir.apply(u);
    std::vector<double> res(ni);
    for (std::size_t i = 0; i < ni; ++i) res[i] = -gamma * uxx[i] + u[i] * ux[i] - f[i];
    out.residual = l2_norm(grid, res);
    out.ubar = pad_dirichlet(u);
    out.ubar_x = derivative_one_sided(grid, out.ubar);
    return out;
}

std::vector<double> control_mask(const Grid& grid, const ControlRegion& region) {
    std::vector<double> mask(grid.node_count(), 0.0);
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = region.contains(grid.nodes[i]) ? 1.0 : 0.0;
    return mask;
}

SystemParams make_system_params(const Grid& grid, double gamma, double phibar, const ControlRegion& region,
                                std::vector<double> ubar, std::vector<double> ubar_x,
                                std::vector<double> f_s, bool allow_decoupled) {
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (!(region.a >= 0.0 && region.a < region.b && region.b <= 1.0)) {
        throw ConfigError("control region (a, b) must satisfy 0 <= a < b <= 1");
    }
    const CouplingConstants c = coupling_constants(phibar);
    if (c.decoupled && !allow_decoupled) {
        throw ConfigError("phibar = " + std::to_string(phibar) +
                          " gives gamma1 = 0: the velocity equation decouples from the controlled "
                          "concentration equation (phibar must avoid 0, 1, -1)");
    }
    const std::size_t nn = grid.node_count();
    if (ubar.size() != nn || ubar_x.size() != nn) throw ContractViolation("ubar fields must live on all nodes");
    if (f_s.empty()) f_s.assign(nn, 0.0);
    if (f_s.size() != nn) throw ContractViolation("f_s must live on all nodes");
    if (ubar.front() != 0.0 || ubar.back() != 0.0) throw ContractViolation("ubar must vanish at x = 0 and x = 1");

    SystemParams p;
    p.gamma = gamma;
    p.phibar = phibar;
    p.gamma1 = c.gamma1;
    p.gamma2 = c.gamma2;
    p.ubar = std::move(ubar);
    p.ubar_x = std::move(ubar_x);
    p.f_s = std::move(f_s);
    p.region = region;
    p.control_mask = control_mask(grid, region);
    return p;
}

SystemParams make_system_params(const Grid& grid, double gamma, double phibar, const ControlRegion& region,
                                std::vector<double> f_s, bool allow_decoupled, const SteadyOptions& options) {
    if (f_s.empty()) f_s.assign(grid.node_count(), 0.0);
    SteadyResult steady = solve_steady_burgers(grid, f_s, gamma, options);
    return make_system_params(grid, gamma, phibar, region, std::move(steady.ubar), std::move(steady.ubar_x),
                              std::move(f_s), allow_decoupled);
}

}  // namespace chb
