#include "chbctl/adjoint.hpp"

#include <cmath>
#include <string>

#include "chbctl/errors.hpp"

namespace chb {

AdjointTrajectory solve_adjoint(const Propagator& prop, const CoupledState& z_T, int steps, double t_end,
                                const Sources* forcing) {
    const Grid& grid = prop.grid();
    if (z_T.size() != prop.state_size() || z_T.w_size() != grid.interior_count()) {
        throw ContractViolation("solve_adjoint: terminal data does not match the propagator grid");
    }
    if (steps < 0) throw ContractViolation("solve_adjoint: negative step count");
    if (forcing != nullptr) {
        if ((!forcing->f1.empty() && forcing->f1.size() != static_cast<std::size_t>(steps)) ||
            (!forcing->f2.empty() && forcing->f2.size() != static_cast<std::size_t>(steps))) {
            throw ContractViolation("solve_adjoint: forcing has the wrong number of time samples");
        }
    }
    const std::size_t ni = grid.interior_count();
    const std::size_t nw = z_T.w_size();
    const std::size_t np = z_T.size() - nw;

    AdjointTrajectory out;
    out.dt = prop.dt();
    out.times.resize(steps + 1);
    out.states.resize(steps + 1);
    out.observations.resize(steps);
    out.states[steps] = z_T;
    out.states[steps].t = t_end;
    std::vector<double> rhs(prop.state_size());
    for (int k = steps - 1; k >= 0; --k) {
        const double t = t_end - (steps - k) * prop.dt();
        const CoupledState& z_next = out.states[k + 1];
        CoupledState zeta(nw, np, t);
        CoupledState z(nw, np, t);
        prop.adjoint_step(z_next.data(), zeta.data(), z.data());
        // Forcing enters as dt P^* g so the scheme stays second order for theta = 1/2.
        if (forcing != nullptr && !(forcing->f1.empty() && forcing->f2.empty())) {
            std::fill(rhs.begin(), rhs.end(), 0.0);
            if (!forcing->f1.empty()) {
                for (std::size_t i = 0; i < ni; ++i) rhs[i] = prop.dt() * forcing->f1[k][i];
            }
            if (!forcing->f2.empty()) {
                for (std::size_t i = 0; i < np; ++i) rhs[ni + i] = prop.dt() * forcing->f2[k][i];
            }
            prop.implicit_adjoint_solve(rhs, rhs);
            for (std::size_t i = 0; i < rhs.size(); ++i) z.data()[i] += rhs[i];
        }
        if (!z.all_finite()) {
            throw InstabilityError("solve_adjoint: non-finite state at step " + std::to_string(k), k);
        }
        out.observations[k] = std::move(zeta);
        out.states[k] = std::move(z);
    }
    for (int k = 0; k <= steps; ++k) out.times[k] = out.states[k].t;
    return out;
}

AdjointTrajectory solve_adjoint(const Propagator& prop, const CoupledState& z_T, double T) {
    return solve_adjoint(prop, z_T, prop.steps_for(T), T);
}

DualityReport duality_defect(const Propagator& prop, const CoupledState& y0, const CoupledState& z_T,
                             const ControlSignal* control, const Sources* sources, double T) {
    const Grid& grid = prop.grid();
    const int steps = prop.steps_for(T);
    const Trajectory fwd = solve_linear_forward(prop, y0, steps, control, sources);
    const AdjointTrajectory adj = solve_adjoint(prop, z_T, steps, y0.t + T);
    const auto& mask = prop.params().control_mask;

    DualityReport r;
    const double end_pair = inner(grid, fwd.terminal(), z_T);
    const double start_pair = inner(grid, y0, adj.initial());
    double acc = end_pair - start_pair;
    r.scale = std::abs(end_pair) + std::abs(start_pair);
    for (int k = 0; k < steps; ++k) {
        const CoupledState& zeta = adj.observations[k];
        double pk = 0.0;
        if (control != nullptr && control->steps() > 0) {
            std::vector<double> h(control->values[k]);
            for (std::size_t i = 0; i < h.size(); ++i) h[i] *= mask[i];
            pk += inner(grid, h, zeta.psi());
        }
        if (sources != nullptr && !sources->f1.empty()) pk += inner(grid, sources->f1[k], zeta.w());
        if (sources != nullptr && !sources->f2.empty()) pk += inner(grid, sources->f2[k], zeta.psi());
        acc -= prop.dt() * pk;
        r.scale += prop.dt() * std::abs(pk);
    }
    r.defect = std::abs(acc);
    return r;
}

}  // namespace chb
