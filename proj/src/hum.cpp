#include "chbctl/hum.hpp"

#include <cmath>
#include <sstream>

#include "chbctl/errors.hpp"

namespace chb {

ControlProblem::ControlProblem(const Propagator& prop, int steps, double t0)
    : prop_(&prop), steps_(steps), t0_(t0) {
    if (steps <= 0) throw ContractViolation("ControlProblem: window needs at least one step");
}

ControlSignal ControlProblem::control_from(const CoupledState& z) const {
    const AdjointTrajectory adj = solve_adjoint(*prop_, z, steps_, t1());
    const auto& mask = prop_->params().control_mask;
    ControlSignal h;
    h.values.reserve(steps_);
    for (const auto& zeta : adj.observations) {
        std::vector<double> v(zeta.psi().begin(), zeta.psi().end());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] *= mask[i];
        h.values.push_back(std::move(v));
    }
    return h;
}

CoupledState ControlProblem::gramian_apply_matrix_free(const CoupledState& z) const {
    const ControlSignal h = control_from(z);
    CoupledState zero = CoupledState::zeros(prop_->grid(), t0_);
    return solve_linear_forward(*prop_, zero, steps_, &h, nullptr).terminal();
}

CoupledState ControlProblem::gramian_apply(const CoupledState& z) const {
    if (dense_.empty()) return gramian_apply_matrix_free(z);
    const std::size_t n = prop_->state_size();
    if (z.size() != n) throw ContractViolation("gramian_apply: size mismatch");
    CoupledState out = CoupledState::zeros(prop_->grid(), t1());
    auto zd = z.data();
    auto od = out.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = dense_.data() + i * n;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += row[j] * zd[j];
        od[i] = s;
    }
    return out;
}

double ControlProblem::observation_energy(const CoupledState& z) const {
    const ControlSignal h = control_from(z);
    double s = 0.0;
    for (const auto& v : h.values) s += prop_->dt() * inner(prop_->grid(), v, v);
    return s;
}

void ControlProblem::assemble_dense() {
    const std::size_t n = prop_->state_size();
    std::vector<double> m(n * n);
    CoupledState e = CoupledState::zeros(prop_->grid(), t1());
    for (std::size_t j = 0; j < n; ++j) {
        e.data()[j] = 1.0;
        const CoupledState col = gramian_apply_matrix_free(e);
        for (std::size_t i = 0; i < n; ++i) m[i * n + j] = col.data()[i];
        e.data()[j] = 0.0;
    }
    dense_ = std::move(m);
}

CoupledState ControlProblem::free_terminal(const CoupledState& y0, const Sources* sources) const {
    CoupledState start = y0;
    start.t = t0_;
    return solve_linear_forward(*prop_, start, steps_, nullptr, sources).terminal();
}

CoupledState ControlProblem::conjugate_gradient(const CoupledState& b, const HumOptions& options,
                                               HumResult& res) const {
    const Grid& grid = prop_->grid();
    const double eps = options.epsilon;
    const double bnorm = norm(grid, b);
    CoupledState x = CoupledState::zeros(grid, t1());
    res.cg_iterations = 0;
    res.cg_residual = 0.0;
    res.converged = true;
    if (!(bnorm > 0.0)) return x;
    auto true_residual = [&]() {
        CoupledState ax = gramian_apply(x);
        axpy(eps, x, ax);
        CoupledState tr = b;
        axpy(-1.0, ax, tr);
        return tr;
    };
    // The recursive residual drifts from the true one once the relative
    // residual nears round-off times the condition number, so CG is
    // restarted from the true residual a few times.
    constexpr int max_restarts = 8;
    CoupledState r = b;
    int it = 0;
    for (int restart = 0; restart <= max_restarts; ++restart) {
        CoupledState p = r;
        double rr = inner(grid, r, r);
        const int it_start = it;
        while (it < options.maxit && std::sqrt(rr) > options.cg_tol * bnorm) {
            CoupledState ap = gramian_apply(p);
            axpy(eps, p, ap);
            const double pap = inner(grid, p, ap);
            if (!(pap > 0.0)) break;
            const double alpha = rr / pap;
            axpy(alpha, p, x);
            axpy(-alpha, ap, r);
            const double rr_new = inner(grid, r, r);
            const double beta = rr_new / rr;
            rr = rr_new;
            for (std::size_t i = 0; i < p.size(); ++i) p.data()[i] = r.data()[i] + beta * p.data()[i];
            ++it;
        }
        r = true_residual();
        res.cg_residual = norm(grid, r) / bnorm;
        if (res.cg_residual <= options.cg_tol || it >= options.maxit || it == it_start) break;
    }
    res.cg_iterations = it;
    res.converged = res.cg_residual <= options.cg_tol;
    if (!res.converged && options.throw_on_stagnation) {
        std::ostringstream msg;
        msg << "HUM: conjugate gradient stagnated after " << it << " iterations, relative residual "
            << res.cg_residual << " > " << options.cg_tol;
        throw NumericalError(msg.str());
    }
    return x;
}

void ControlProblem::finish(HumResult& res, const CoupledState& y0, const Sources* sources) const {
    res.control = control_from(res.z_T_opt);
    CoupledState start = y0;
    start.t = t0_;
    res.trajectory = solve_linear_forward(*prop_, start, steps_, &res.control, sources);
    res.terminal_state = res.trajectory.terminal();
    res.control_cost = res.control.l2_norm(prop_->grid(), prop_->dt());
}

HumResult ControlProblem::solve(const CoupledState& y0, const HumOptions& options, const Sources* sources) const {
    if (!(options.epsilon > 0.0)) throw ConfigError("HUM: epsilon must be positive");
    if (!(options.cg_tol > 0.0) || options.maxit <= 0) throw ConfigError("HUM: cg_tol and maxit must be positive");
    HumResult res;
    CoupledState b = free_terminal(y0, sources);
    res.free_terminal_norm = norm(prop_->grid(), b);
    for (double& v : b.data()) v = -v;
    res.z_T_opt = conjugate_gradient(b, options, res);
    finish(res, y0, sources);
    return res;
}

HumResult ControlProblem::refine(const HumResult& prev, const CoupledState& y0, const HumOptions& options,
                                 const Sources* sources) const {
    if (!(options.epsilon > 0.0)) throw ConfigError("HUM: epsilon must be positive");
    HumResult res;
    res.free_terminal_norm = prev.free_terminal_norm;
    CoupledState b = prev.terminal_state;
    for (double& v : b.data()) v = -v;
    res.z_T_opt = conjugate_gradient(b, options, res);
    axpy(1.0, prev.z_T_opt, res.z_T_opt);
    res.cg_iterations += prev.cg_iterations;
    finish(res, y0, sources);
    return res;
}

double ControlProblem::functional(const CoupledState& z, const CoupledState& y0, double epsilon) const {
    const AdjointTrajectory adj = solve_adjoint(*prop_, z, steps_, t1());
    const auto& mask = prop_->params().control_mask;
    const Grid& grid = prop_->grid();
    double obs = 0.0;
    for (const auto& zeta : adj.observations) {
        auto v = zeta.psi();
        for (std::size_t i = 0; i < v.size(); ++i) obs += prop_->dt() * grid.quad_weights[i] * mask[i] * v[i] * v[i];
    }
    return 0.5 * obs + 0.5 * epsilon * inner(grid, z, z) + inner(grid, adj.initial(), y0);
}

CoupledState ControlProblem::functional_gradient(const CoupledState& z, const CoupledState& y0,
                                                 double epsilon) const {
    CoupledState g = gramian_apply(z);
    axpy(epsilon, z, g);
    axpy(1.0, free_terminal(y0), g);
    return g;
}

CoupledState gramian_apply(const Propagator& prop, const CoupledState& z_T, double T) {
    return ControlProblem(prop, prop.steps_for(T)).gramian_apply(z_T);
}

HumResult solve_null_control(const Propagator& prop, const CoupledState& y0, double T, const HumOptions& options) {
    return ControlProblem(prop, prop.steps_for(T)).solve(y0, options);
}

HumResult solve_null_control_padded(const Propagator& prop, const CoupledState& y0, double T, double T0,
                                    const HumOptions& options) {
    if (!(T0 > 0.0 && T0 <= T)) throw ConfigError("padded HUM: need 0 < T0 <= T");
    const int steps = prop.steps_for(T);
    HumResult res = ControlProblem(prop, prop.steps_for(T0)).solve(y0, options);
    const std::size_t nn = prop.grid().node_count();
    while (res.control.steps() < static_cast<std::size_t>(steps)) res.control.values.emplace_back(nn, 0.0);
    CoupledState start = y0;
    start.t = 0.0;
    res.trajectory = solve_linear_forward(prop, start, steps, &res.control, nullptr);
    res.terminal_state = res.trajectory.terminal();
    res.free_terminal_norm = norm(prop.grid(), solve_linear_forward(prop, start, steps).terminal());
    return res;
}

double observability_quotient(const Propagator& prop, const CoupledState& z_T, double T) {
    const Grid& grid = prop.grid();
    if (norm(grid, z_T) == 0.0) throw NumericalError("observability quotient: unobserved sample (z_T = 0)");
    ControlProblem problem(prop, prop.steps_for(T));
    const AdjointTrajectory adj = solve_adjoint(prop, z_T, problem.steps(), T);
    const double denom = problem.observation_energy(z_T);
    if (!(denom > 0.0)) throw NumericalError("observability quotient: unobserved sample (zero observation)");
    const double num = inner(grid, adj.initial(), adj.initial());
    return num / denom;
}

std::vector<SweepRow> control_cost_sweep(const Propagator& prop, const CoupledState& y0,
                                         const std::vector<double>& horizons, const HumOptions& options) {
    std::vector<SweepRow> rows;
    rows.reserve(horizons.size());
    for (double T : horizons) {
        if (!(T > 0.0)) throw ConfigError("control cost sweep: every horizon must be positive");
        const HumResult r = solve_null_control(prop, y0, T, options);
        rows.push_back({T, options.epsilon, r.control_cost, norm(prop.grid(), r.terminal_state), r.cg_iterations});
    }
    return rows;
}

CostFit fit_control_cost(const std::vector<SweepRow>& rows, int m) {
    if (rows.size() < 2) throw ConfigError("control cost fit needs at least two horizons");
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(rows.size());
    std::vector<double> xs, ys;
    for (const auto& r : rows) {
        if (!(r.control_cost > 0.0)) throw NumericalError("control cost fit: zero control cost");
        const double x = r.T + std::pow(r.T, -m);
        const double y = std::log(r.control_cost);
        xs.push_back(x);
        ys.push_back(y);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double det = n * sxx - sx * sx;
    if (!(std::abs(det) > 0.0)) throw NumericalError("control cost fit: horizons are degenerate");
    CostFit fit;
    fit.m = m;
    fit.M = (n * sxy - sx * sy) / det;
    fit.log_prefactor = (sy - fit.M * sx) / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - fit.log_prefactor - fit.M * xs[i];
        ss += e * e;
    }
    fit.rms_residual = std::sqrt(ss / n);
    return fit;
}

}  // namespace chb
