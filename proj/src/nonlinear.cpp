#include <algorithm>
#include <cmath>
#include <sstream>

#include "chbctl/errors.hpp"
#include "chbctl/nonlinear.hpp"

namespace chb {

namespace {

double energy_sq(const Propagator& prop, std::span<const double> w, std::span<const double> psi) {
    const DiscreteNorms nw = discrete_norms(prop.grid(), prop.operators(), w, BoundaryKind::dirichlet);
    const DiscreteNorms np = discrete_norms(prop.grid(), prop.operators(), psi, BoundaryKind::neumann);
    return nw.l2 * nw.l2 + nw.h1_semi * nw.h1_semi + np.h2_1() * np.h2_1();
}

double trajectory_norm_impl(const Propagator& prop, const Trajectory& a, const Trajectory* b) {
    const Grid& grid = prop.grid();
    if (b != nullptr && b->states.size() != a.states.size()) {
        throw ContractViolation("trajectory distance: trajectories have different lengths");
    }
    double sup = 0.0, l2 = 0.0;
    for (std::size_t k = 0; k < a.states.size(); ++k) {
        CoupledState d = a.states[k];
        if (b != nullptr) axpy(-1.0, b->states[k], d);
        sup = std::max(sup, norm(grid, d));
        if (k + 1 < a.states.size()) l2 += prop.dt() * energy_sq(prop, d.w(), d.psi());
    }
    return sup + std::sqrt(l2);
}

Trajectory zero_trajectory(const Propagator& prop, int steps) {
    Trajectory t;
    t.dt = prop.dt();
    for (int k = 0; k <= steps; ++k) {
        t.states.push_back(CoupledState::zeros(prop.grid(), k * prop.dt()));
        t.times.push_back(k * prop.dt());
    }
    return t;
}

}  // namespace

double trajectory_norm(const Propagator& prop, const Trajectory& traj) {
    return trajectory_norm_impl(prop, traj, nullptr);
}

double trajectory_distance(const Propagator& prop, const Trajectory& a, const Trajectory& b) {
    return trajectory_norm_impl(prop, a, &b);
}

FactoredSources factor_nonlinear(const Propagator& prop, const Trajectory& traj) {
    FactoredSources fs;
    const std::size_t steps = traj.steps();
    fs.g1.reserve(steps);
    fs.g2.reserve(steps);
    fs.log_amplitude.reserve(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const CoupledState& y = traj.states[k];
        NonlinearTerms nl = eval_nonlinear(prop.grid(), prop.operators(), y.w(), y.psi(), prop.params().phibar);
        double peak = 0.0;
        for (double v : nl.n1) peak = std::max(peak, std::abs(v));
        for (double v : nl.n2) peak = std::max(peak, std::abs(v));
        if (peak > 0.0) {
            for (double& v : nl.n1) v /= peak;
            for (double& v : nl.n2) v /= peak;
            fs.log_amplitude.push_back(std::log(peak));
        } else {
            fs.log_amplitude.push_back(0.0);
        }
        fs.g1.push_back(std::move(nl.n1));
        fs.g2.push_back(std::move(nl.n2));
    }
    return fs;
}

FixedPointResult fixed_point_control(const Propagator& prop, const CoupledState& y0, const SourceWeights& weights,
                                     double T, const FixedPointOptions& options) {
    const Grid& grid = prop.grid();
    if (!(options.tol > 0.0) || options.maxit <= 0) throw ConfigError("fixed point: tol and maxit must be positive");
    const double y0_norm = norm(grid, y0);
    if (!std::isfinite(y0_norm)) throw ContractViolation("fixed point: initial data is not finite");
    if (y0_norm > options.radius) {
        std::ostringstream msg;
        msg << "fixed point: ||y0|| = " << y0_norm << " exceeds the radius " << options.radius;
        throw ConfigError(msg.str());
    }

    SourceTermSolver solver(prop, weights, T, options.source);
    FixedPointResult out;
    out.trajectory = zero_trajectory(prop, solver.total_steps());
    out.control = ControlSignal::zeros(solver.total_steps(), grid.node_count());
    if (y0_norm == 0.0) {
        out.converged = true;
        return out;
    }

    double prev_distance = 0.0;
    int expanding = 0;
    for (int j = 0; j < options.maxit; ++j) {
        auto diverged = [&](const char* what) {
            std::ostringstream msg;
            msg << "outside contraction regime: " << what << " at iteration " << j + 1 << " (||y0|| = " << y0_norm
                << ")";
            return NumericalError(msg.str());
        };
        const FactoredSources fs = factor_nonlinear(prop, out.trajectory);
        for (double a : fs.log_amplitude) {
            if (!std::isfinite(a)) throw diverged("nonlinear terms overflow");
        }
        SourceTermResult next;
        try {
            next = solver.solve(y0, fs);
        } catch (const InstabilityError&) {
            throw diverged("iterate diverged");
        }
        const double scale = trajectory_norm(prop, next.trajectory);
        const double distance = trajectory_distance(prop, next.trajectory, out.trajectory) / scale;
        if (!std::isfinite(distance)) throw diverged("iterate diverged");

        IterateRecord rec;
        rec.iter = j + 1;
        rec.distance = distance;
        rec.contraction_ratio = j == 0 ? 0.0 : distance / prev_distance;
        rec.terminal_norm = next.terminal_norm;
        out.history.push_back(rec);
        out.max_contraction_ratio = std::max(out.max_contraction_ratio, rec.contraction_ratio);
        out.iterations = j + 1;

        out.trajectory = std::move(next.trajectory);
        out.control = std::move(next.control);
        out.last_solve = std::move(next);

        if (distance <= options.tol) {
            out.converged = true;
            break;
        }
        expanding = (j > 0 && rec.contraction_ratio >= 1.0) ? expanding + 1 : 0;
        if (expanding >= 3) {
            std::ostringstream msg;
            msg << "outside contraction regime: contraction ratio >= 1 on three consecutive iterations (last "
                << rec.contraction_ratio << ", ||y0|| = " << y0_norm << ")";
            throw NumericalError(msg.str());
        }
        prev_distance = distance;
    }
    return out;
}

ClosedLoopReport verify_closed_loop(const Propagator& prop, const CoupledState& y0, const ControlSignal& control,
                                    double T, const Trajectory* reference) {
    ClosedLoopReport rep;
    CoupledState start = y0;
    start.t = 0.0;
    rep.trajectory = solve_nonlinear_forward(prop, start, T, control.steps() > 0 ? &control : nullptr);
    rep.terminal_norm = norm(prop.grid(), rep.trajectory.terminal());
    if (reference != nullptr) {
        const double scale = trajectory_norm(prop, *reference);
        const double d = trajectory_distance(prop, rep.trajectory, *reference);
        rep.trajectory_gap = scale > 0.0 ? d / scale : d;
    }
    return rep;
}

}  // namespace chb
