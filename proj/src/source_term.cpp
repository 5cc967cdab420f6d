#include "chbctl/source_term.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "chbctl/errors.hpp"

namespace chb {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();
constexpr double flush_log = -700.0;

// Running log(sum exp(x_i)).
struct LogSum {
    double value = neg_inf;
    void add(double x) {
        if (x == neg_inf) return;
        if (value == neg_inf) {
            value = x;
        } else if (x > value) {
            value = x + std::log1p(std::exp(value - x));
        } else {
            value = value + std::log1p(std::exp(x - value));
        }
    }
};

double safe_log(double x) { return x > 0.0 ? std::log(x) : neg_inf; }

double source_l2(const Grid& grid, const Sources& s, std::size_t k) {
    double acc = 0.0;
    if (!s.f1.empty()) acc += inner(grid, s.f1[k], s.f1[k]);
    if (!s.f2.empty()) acc += inner(grid, s.f2[k], s.f2[k]);
    return std::sqrt(acc);
}

double source_l1(const Propagator& prop, const Sources& s) {
    const std::size_t n = std::max(s.f1.size(), s.f2.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) acc += prop.dt() * source_l2(prop.grid(), s, k);
    return acc;
}

// Largest relative deviation between (a + b) and c along two trajectories.
double superposition_defect(const Grid& grid, const Trajectory& a, const Trajectory& b, const Trajectory& c) {
    double scale = 0.0, worst = 0.0;
    for (std::size_t j = 0; j < c.states.size(); ++j) {
        CoupledState d = a.states[j];
        axpy(1.0, b.states[j], d);
        axpy(-1.0, c.states[j], d);
        worst = std::max(worst, norm(grid, d));
        scale = std::max(scale, norm(grid, c.states[j]));
    }
    return scale > 0.0 ? worst / scale : worst;
}

}  // namespace

double SourceWeights::log_rho0(double t) const {
    if (t >= T_) return neg_inf;
    return -p_ * base_ / std::pow(T_ - t, m_);
}

double SourceWeights::log_rhoF(double t) const {
    if (t >= T_) return neg_inf;
    return -(1.0 + p_) * std::pow(q_, 2 * m_) * base_ / std::pow(T_ - t, m_);
}

double SourceWeights::log_ratio(double t) const {
    if (t >= T_) return neg_inf;
    return (-2.0 * p_ + (1.0 + p_) * std::pow(q_, 2 * m_)) * base_ / std::pow(T_ - t, m_);
}

double SourceWeights::q_upper(int m) { return std::pow(2.0, 1.0 / (2.0 * m)); }

double SourceWeights::p_lower(double q, int m) {
    const double q2m = std::pow(q, 2 * m);
    return q2m / (2.0 - q2m);
}

SourceWeights make_source_weights(double p, double q, double M, int m, double T) {
    std::ostringstream msg;
    if (m <= 3) {
        msg << "source weights: need m > 3, got m = " << m;
        throw ConfigError(msg.str());
    }
    if (!(q > 1.0)) {
        msg << "source weights: need q > 1, got q = " << q;
        throw ConfigError(msg.str());
    }
    if (!(q < SourceWeights::q_upper(m))) {
        msg << "source weights: need q < 2^(1/(2m)) = " << SourceWeights::q_upper(m) << ", got q = " << q;
        throw ConfigError(msg.str());
    }
    if (!(p > SourceWeights::p_lower(q, m))) {
        msg << "source weights: need p > q^(2m)/(2 - q^(2m)) = " << SourceWeights::p_lower(q, m) << ", got p = " << p;
        throw ConfigError(msg.str());
    }
    if (!(M > 0.0)) throw ConfigError("source weights: need M > 0");
    if (!(T > 0.0)) throw ConfigError("source weights: need T > 0");
    SourceWeights w;
    w.p_ = p;
    w.q_ = q;
    w.M_ = M;
    w.m_ = m;
    w.T_ = T;
    w.base_ = M / std::pow(q - 1.0, m);
    return w;
}

Schedule make_schedule(const SourceWeights& weights, int Kmax, double tail_tol) {
    if (Kmax < 2) throw ConfigError("schedule: Kmax must be at least 2");
    if (!(tail_tol > 0.0)) throw ConfigError("schedule: tail_tol must be positive");
    Schedule s;
    s.T = weights.T();
    s.q = weights.q();
    s.Kmax = Kmax;
    s.tail_tol = tail_tol;
    s.times.resize(Kmax + 1);
    for (int k = 0; k <= Kmax; ++k) s.times[k] = s.T - s.T / std::pow(s.q, k);
    for (int k = 1; k < Kmax; ++k) {
        const double lhs = weights.log_rho0(s.times[k + 1]);
        const double rhs = weights.log_rhoF(s.times[k - 1]) +
                           weights.M() / std::pow(s.times[k + 1] - s.times[k], weights.m());
        const double rel = std::abs(lhs - rhs) / std::abs(lhs);
        s.identity_defects.push_back(rel);
        if (!(rel <= 1e-12)) {
            std::ostringstream msg;
            msg << "schedule: weight identity fails at k = " << k << " (relative defect " << rel << ")";
            throw NumericalError(msg.str());
        }
    }
    return s;
}

double FactoredSources::log_factor(const Propagator& prop, const SourceWeights& w, int k) const {
    if (!log_amplitude.empty()) return log_amplitude[k];
    const double ls = log_scale.empty() ? 0.0 : log_scale[k];
    return w.log_rhoF((k + prop.theta()) * prop.dt()) + ls;
}

double FactoredSources::log_weighted_norm(const Propagator& prop, const SourceWeights& w, int k) const {
    const Grid& grid = prop.grid();
    double sq = 0.0;
    if (!g1.empty()) sq += inner(grid, g1[k], g1[k]);
    if (!g2.empty()) sq += inner(grid, g2[k], g2[k]);
    if (!(sq > 0.0)) return neg_inf;
    double rel = 0.0;
    if (!log_amplitude.empty()) {
        const double lr = w.log_rhoF((k + prop.theta()) * prop.dt());
        // f_k = 0 is the only value compatible with rho_F = 0
        if (lr == neg_inf) return neg_inf;
        rel = log_amplitude[k] - lr;
    } else if (!log_scale.empty()) {
        rel = log_scale[k];
    }
    return 0.5 * std::log(sq) + rel;
}

Sources FactoredSources::materialize(const Propagator& prop, const SourceWeights& w, int first, int count) const {
    Sources out;
    auto check = [&](std::size_t n, const char* what) {
        if (n != 0 && n < static_cast<std::size_t>(first + count)) {
            throw ContractViolation(std::string("factored sources: ") + what + " shorter than the step range");
        }
    };
    check(g1.size(), "g1");
    check(g2.size(), "g2");
    check(log_scale.size(), "log_scale");
    check(log_amplitude.size(), "log_amplitude");
    auto build = [&](const StepFields& g, StepFields& f) {
        if (g.empty()) return;
        f.reserve(count);
        for (int k = first; k < first + count; ++k) {
            const double L = log_factor(prop, w, k);
            std::vector<double> v(g[k].size(), 0.0);
            if (L != neg_inf) {
                for (std::size_t i = 0; i < v.size(); ++i) {
                    const double gi = g[k][i];
                    if (gi == 0.0) continue;
                    const double e = L + std::log(std::abs(gi));
                    if (e >= flush_log) v[i] = std::copysign(std::exp(e), gi);
                }
            }
            f.push_back(std::move(v));
        }
    };
    build(g1, out.f1);
    build(g2, out.f2);
    return out;
}

SourceTermSolver::SourceTermSolver(const Propagator& prop, const SourceWeights& weights, double T,
                                   SourceTermOptions options)
    : prop_(&prop),
      weights_(weights),
      options_(options),
      schedule_(make_schedule(weights, options.Kmax, options.tail_tol)),
      total_steps_(prop.steps_for(T)) {
    if (std::abs(T - weights.T()) > 1e-12 * T) throw ContractViolation("source term: horizon differs from the weights");
    // T_k snapped to the step grid; stop once consecutive points merge.
    for (double t : schedule_.times) {
        const int idx = static_cast<int>(std::lround(t / prop.dt()));
        if (idx >= total_steps_ || (!breaks_.empty() && idx <= breaks_.back())) break;
        breaks_.push_back(idx);
    }
}

ControlProblem& SourceTermSolver::problem(int first, int steps) {
    for (auto& [f, p] : problems_) {
        if (f == first && p->steps() == steps) return *p;
    }
    auto p = std::make_unique<ControlProblem>(*prop_, steps, first * prop_->dt());
    if (options_.cache_gramians) p->assemble_dense();
    problems_.emplace_back(first, std::move(p));
    return *problems_.back().second;
}

SourceTermResult SourceTermSolver::solve(const CoupledState& y0, const FactoredSources& sources) {
    const Grid& grid = prop_->grid();
    const double dt = prop_->dt();
    const bool any_source = !sources.empty();
    if (any_source) {
        if ((!sources.g1.empty() && sources.g1.size() != static_cast<std::size_t>(total_steps_)) ||
            (!sources.g2.empty() && sources.g2.size() != static_cast<std::size_t>(total_steps_))) {
            throw ContractViolation("source term: factored sources need one sample per step");
        }
    }

    SourceTermResult res;
    res.trajectory.dt = dt;
    CoupledState y = y0;
    y.t = 0.0;
    res.trajectory.states.push_back(y);
    double a_norm = norm(grid, y0);

    for (std::size_t k = 0; k < breaks_.size(); ++k) {
        const int first = breaks_[k];
        const double remaining = any_source && options_.adaptive_stop ? source_l1(*prop_, sources.materialize(*prop_, weights_, first,
                                                                                    total_steps_ - first))
                                            : 0.0;
        const bool last = k + 1 == breaks_.size() || static_cast<int>(k) == options_.Kmax ||
                          (options_.adaptive_stop && remaining <= options_.tail_tol);
        const int steps = last ? total_steps_ - first : breaks_[k + 1] - first;
        const Sources src = any_source ? sources.materialize(*prop_, weights_, first, steps) : Sources{};

        IntervalRecord rec;
        rec.k = static_cast<int>(k);
        rec.T_k = first * dt;
        rec.T_next = (first + steps) * dt;
        rec.first_step = first;
        rec.steps = steps;
        rec.a_norm = a_norm;
        rec.state_norm = norm(grid, y);
        rec.source_l1 = source_l1(*prop_, src);
        rec.final_direct = last;

        ControlProblem& cp = problem(first, steps);
        CoupledState start = y;
        start.t = first * dt;
        const CoupledState zero = CoupledState::zeros(grid, start.t);
        // Source-only response from zero data: a_{k+1}.
        const Trajectory source_only = solve_linear_forward(*prop_, zero, steps, nullptr, &src);
        HumResult hum = last ? cp.solve(start, options_.hum, &src) : cp.solve(start, options_.hum);
        if (last) {
            while (rec.refinements < options_.refine_passes &&
                   norm(grid, hum.terminal_state) > 10.0 * options_.tail_tol) {
                hum = cp.refine(hum, start, options_.hum, &src);
                ++rec.refinements;
            }
        }
        const Trajectory controlled = solve_linear_forward(*prop_, start, steps, &hum.control, nullptr);
        const Trajectory full = last ? hum.trajectory : solve_linear_forward(*prop_, start, steps, &hum.control, &src);
        rec.stitch_jump = superposition_defect(grid, controlled, source_only, full);
        rec.control_norm = hum.control.l2_norm(grid, dt);
        rec.cg_iterations = hum.cg_iterations;
        res.max_stitch_jump = std::max(res.max_stitch_jump, rec.stitch_jump);
        res.intervals.push_back(rec);

        for (auto& h : hum.control.values) res.control.values.push_back(std::move(h));
        for (std::size_t j = 1; j < full.states.size(); ++j) res.trajectory.states.push_back(full.states[j]);
        y = full.terminal();
        a_norm = norm(grid, source_only.terminal());
        if (last) break;
    }
    res.trajectory.times.reserve(res.trajectory.states.size());
    for (const auto& s : res.trajectory.states) res.trajectory.times.push_back(s.t);
    res.terminal_norm = norm(grid, res.trajectory.terminal());

    const Sources all = any_source ? sources.materialize(*prop_, weights_, 0, total_steps_) : Sources{};
    CoupledState start = y0;
    start.t = 0.0;
    res.resimulated_terminal_norm =
        norm(grid, solve_linear_forward(*prop_, start, total_steps_, &res.control, any_source ? &all : nullptr)
                       .terminal());
    return res;
}

SourceTermResult solve_with_source(const Propagator& prop, const CoupledState& y0, const FactoredSources& sources,
                                   const SourceWeights& weights, double T, const SourceTermOptions& options) {
    SourceTermSolver solver(prop, weights, T, options);
    return solver.solve(y0, sources);
}

bool WeightedNorms::bounded() const noexcept {
    auto ok = [](double x) { return !std::isnan(x) && x != std::numeric_limits<double>::infinity(); };
    return ok(log_y) && ok(log_v) && ok(log_f);
}

WeightedNorms weighted_norms(const Propagator& prop, const Trajectory& traj, const ControlSignal& control,
                             const FactoredSources& sources, const SourceWeights& weights) {
    const Grid& grid = prop.grid();
    const OperatorSet& ops = prop.operators();
    const double dt = prop.dt();
    const std::size_t n = traj.steps();
    WeightedNorms out;
    out.terminal_norm = norm(grid, traj.terminal());

    double sup = neg_inf;
    LogSum energy, ctrl, src;
    for (std::size_t k = 0; k < n; ++k) {
        const CoupledState& y = traj.states[k];
        const double lr = weights.log_rho0(traj.times[k]);
        sup = std::max(sup, safe_log(norm(grid, y)) - lr);
        const DiscreteNorms nw = discrete_norms(grid, ops, y.w(), BoundaryKind::dirichlet);
        const DiscreteNorms np = discrete_norms(grid, ops, y.psi(), BoundaryKind::neumann);
        const double e = nw.l2 * nw.l2 + nw.h1_semi * nw.h1_semi + np.h2_1() * np.h2_1();
        energy.add(safe_log(e) + std::log(dt) - 2.0 * lr);
        if (k < control.steps()) {
            const auto& h = control.values[k];
            ctrl.add(safe_log(inner(grid, h, h)) + std::log(dt) - 2.0 * lr);
        }
        if (!sources.empty()) src.add(sources.log_weighted_norm(prop, weights, static_cast<int>(k)) + std::log(dt));
    }
    LogSum y;
    y.add(sup);
    y.add(0.5 * energy.value);
    out.log_y = y.value;
    out.log_v = 0.5 * ctrl.value;
    out.log_f = src.value;
    if (!out.bounded()) throw NumericalError("unbounded weighted norm");
    return out;
}

}  // namespace chb
