#include "chbctl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <numbers>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "chbctl/carleman.hpp"
#include "chbctl/errors.hpp"
#include "chbctl/hum.hpp"
#include "chbctl/nonlinear.hpp"
#include "chbctl/source_term.hpp"
#include "chbctl/steady.hpp"

#ifndef CHBCTL_VERSION
#define CHBCTL_VERSION "unknown"
#endif

namespace chb {

namespace fs = std::filesystem;

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {"steady",    "simulate", "control", "source-term",
                                                   "nonlinear", "carleman", "sweep"};
    return names;
}

std::vector<double> profile_values(const std::string& spec, const std::vector<double>& xs, std::mt19937_64& rng) {
    std::istringstream in(spec);
    std::string kind;
    in >> kind;
    std::vector<double> out(xs.size(), 0.0);
    auto fail = [&](const std::string& why) -> void { throw ConfigError("profile '" + spec + "': " + why); };
    if (kind == "zero") return out;
    if (kind == "sine" || kind == "cosine") {
        double k = 0.0, amp = 0.0;
        if (!(in >> k >> amp)) fail("expected '" + kind + " k amp'");
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double arg = k * std::numbers::pi * xs[i];
            out[i] = amp * (kind == "sine" ? std::sin(arg) : std::cos(arg));
        }
        return out;
    }
    if (kind == "random") {
        double amp = 0.0;
        if (!(in >> amp)) fail("expected 'random amp'");
        std::normal_distribution<double> d(0.0, 1.0);
        double mx = 0.0;
        for (auto& v : out) {
            v = d(rng);
            mx = std::max(mx, std::abs(v));
        }
        for (auto& v : out) v *= mx > 0.0 ? amp / mx : 0.0;
        return out;
    }
    if (kind == "csv") {
        std::string path, column;
        if (!(in >> path)) fail("expected 'csv PATH [COLUMN]'");
        in >> column;
        const Table t = read_csv(path);
        const std::size_t j = column.empty() ? 0 : t.column(column);
        if (t.rows.size() != xs.size())
            fail(path + " has " + std::to_string(t.rows.size()) + " rows, need " + std::to_string(xs.size()));
        for (std::size_t i = 0; i < xs.size(); ++i) out[i] = t.rows[i][j];
        return out;
    }
    fail("unknown profile kind '" + kind + "'");
    return out;
}

namespace {

bool keep(std::size_t k, std::size_t last, int every) {
    return every <= 1 || k % static_cast<std::size_t>(every) == 0 || k == last;
}

}  // namespace

Table trajectory_table(const Grid& grid, const Trajectory& traj, int every) {
    Table t({"t", "x", "w", "psi"});
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        if (!keep(k, traj.states.size() - 1, every)) continue;
        const auto w = pad_dirichlet(traj.states[k].w());
        const auto psi = traj.states[k].psi();
        for (std::size_t i = 0; i < grid.node_count(); ++i) t.add_row({traj.times[k], grid.nodes[i], w[i], psi[i]});
    }
    return t;
}

Table adjoint_table(const Grid& grid, const AdjointTrajectory& adj, int every) {
    Table t({"t", "x", "sigma", "v"});
    for (std::size_t k = 0; k < adj.states.size(); ++k) {
        if (!keep(k, adj.states.size() - 1, every)) continue;
        const auto s = pad_dirichlet(adj.states[k].w());
        const auto v = adj.states[k].psi();
        for (std::size_t i = 0; i < grid.node_count(); ++i) t.add_row({adj.times[k], grid.nodes[i], s[i], v[i]});
    }
    return t;
}

Table control_table(const Grid& grid, const ControlSignal& control, double dt, double t0, int every) {
    Table t({"t", "x", "h"});
    for (std::size_t k = 0; k < control.steps(); ++k) {
        if (!keep(k, control.steps() - 1, every)) continue;
        for (std::size_t i = 0; i < grid.node_count(); ++i)
            t.add_row({t0 + static_cast<double>(k) * dt, grid.nodes[i], control.values[k][i]});
    }
    return t;
}

Table snapshot_table(const Grid& grid, const CoupledState& y) {
    Table t({"x", "w", "psi"});
    const auto w = pad_dirichlet(y.w());
    for (std::size_t i = 0; i < grid.node_count(); ++i) t.add_row({grid.nodes[i], w[i], y.psi()[i]});
    return t;
}

namespace {

// Everything a subcommand needs from the config, built in a fixed order so
// the random stream is consumed identically on every run.
struct Context {
    const Config& cfg;
    fs::path out;
    RunReport& report;
    std::mt19937_64 rng;

    Context(const Config& c, fs::path dir, RunReport& r) : cfg(c), out(std::move(dir)), report(r), rng(c.get_uint("run.seed")) {}

    void emit(const std::string& name, const Table& table) {
        write_csv(table, out / name);
        report.files.push_back(name);
    }
    void metric(const std::string& name, double v) { report.metrics[name] = v; }

    Grid grid() const { return make_grid(cfg.get_int("mesh.n")); }
    double T() const { return cfg.get_double("time.T"); }
    double dt() const { return cfg.get_double("time.dt"); }
    int every() const { return cfg.get_int("simulate.write_every"); }

    ControlRegion region() const { return {cfg.get_double("system.region_a"), cfg.get_double("system.region_b")}; }

    SteadyOptions steady_options() const {
        SteadyOptions o;
        o.tol = cfg.get_double("steady.tol");
        o.maxit = cfg.get_int("steady.maxit");
        o.smallness_factor = cfg.get_double("steady.smallness_factor");
        return o;
    }

    std::vector<double> forcing(const Grid& g) { return profile_values(cfg.get_string("system.f_s"), g.nodes, rng); }

    SystemParams params(const Grid& g) {
        return make_system_params(g, cfg.get_double("system.gamma"), cfg.get_double("system.phibar"), region(),
                                  forcing(g), cfg.get_bool("system.allow_decoupled"), steady_options());
    }

    Propagator propagator(const Grid& g) {
        const double theta = cfg.get_double("time.theta");
        if (theta != 1.0 && theta != 0.5) throw ConfigError("time.theta must be 1 or 0.5");
        if (!(dt() > 0.0)) throw ConfigError("time.dt must be positive");
        return Propagator(g, params(g), dt(), theta);
    }

    CoupledState initial(const Grid& g) {
        const auto w = profile_values(cfg.get_string("initial.w"), g.interior_nodes(), rng);
        const auto psi = profile_values(cfg.get_string("initial.psi"), g.nodes, rng);
        return CoupledState::from_fields(g, w, psi);
    }

    HumOptions hum() const {
        HumOptions o;
        o.epsilon = cfg.get_double("hum.epsilon");
        o.cg_tol = cfg.get_double("hum.cg_tol");
        o.maxit = cfg.get_int("hum.maxit");
        if (!(o.epsilon > 0.0)) throw ConfigError("hum.epsilon must be positive");
        return o;
    }

    SourceWeights weights(double T) const {
        return make_source_weights(cfg.get_double("source.p"), cfg.get_double("source.q"), cfg.get_double("source.M"),
                                   cfg.get_int("source.m"), T);
    }

    SourceTermOptions source_options() const {
        SourceTermOptions o;
        o.Kmax = cfg.get_int("source.Kmax");
        o.tail_tol = cfg.get_double("source.tail_tol");
        o.refine_passes = cfg.get_int("source.refine_passes");
        o.hum = hum();
        return o;
    }
};

void run_steady(Context& c) {
    const Grid g = c.grid();
    const auto fs = c.forcing(g);
    const double gamma = c.cfg.get_double("system.gamma");
    const SteadyResult r = solve_steady_burgers(g, fs, gamma, c.steady_options());
    Table t({"x", "f_s", "ubar", "ubar_x"});
    for (std::size_t i = 0; i < g.node_count(); ++i) t.add_row({g.nodes[i], fs[i], r.ubar[i], r.ubar_x[i]});
    c.emit("steady.csv", t);
    Table inc({"iter", "increment"});
    for (std::size_t j = 0; j < r.increments.size(); ++j) inc.add_row({static_cast<double>(j + 1), r.increments[j]});
    c.emit("steady_iterations.csv", inc);
    const CouplingConstants cc = coupling_constants(c.cfg.get_double("system.phibar"));
    c.metric("iterations", r.iterations);
    c.metric("residual", r.residual);
    c.metric("above_smallness_threshold", r.above_smallness_threshold);
    c.metric("gamma1", cc.gamma1);
    c.metric("gamma2", cc.gamma2);
    c.metric("decoupled", cc.decoupled);
}

void run_simulate(Context& c) {
    const Grid g = c.grid();
    const Propagator prop = c.propagator(g);
    const CoupledState y0 = c.initial(g);
    const std::string model = c.cfg.get_string("simulate.model");
    Trajectory traj;
    if (model == "linear")
        traj = solve_linear_forward(prop, y0, c.T());
    else if (model == "nonlinear")
        traj = solve_nonlinear_forward(prop, y0, c.T());
    else
        throw ConfigError("simulate.model must be linear or nonlinear, got '" + model + "'");
    c.emit("trajectory.csv", trajectory_table(g, traj, c.every()));
    Table e({"t", "w_l2", "psi_l2", "psi_xx_l2"});
    for (const auto& r : energy_report(prop, traj)) e.add_row({r.t, r.w_l2, r.psi_l2, r.psi_xx_l2});
    c.emit("energy.csv", e);
    c.emit("terminal.csv", snapshot_table(g, traj.terminal()));
    c.metric("initial_norm", norm(g, y0));
    c.metric("terminal_norm", norm(g, traj.terminal()));
    c.metric("mass_initial", mass(g, y0));
    c.metric("mass_final", mass(g, traj.terminal()));
}

void run_control(Context& c) {
    const Grid g = c.grid();
    const Propagator prop = c.propagator(g);
    const CoupledState y0 = c.initial(g);
    const HumOptions o = c.hum();
    const double T0 = c.cfg.get_double("hum.pad_T0");
    const HumResult r = T0 > 0.0 ? solve_null_control_padded(prop, y0, c.T(), T0, o)
                                 : solve_null_control(prop, y0, c.T(), o);
    CoupledState ez = r.z_T_opt;
    for (double& v : ez.data()) v *= o.epsilon;
    CoupledState id = r.terminal_state;
    axpy(1.0, ez, id);
    const double ez_norm = norm(g, ez);
    const double identity = ez_norm > 0.0 ? norm(g, id) / ez_norm : norm(g, id);
    const double terminal = norm(g, r.terminal_state);
    const double y0_norm = norm(g, y0);
    const double bound_ratio = y0_norm > 0.0 ? terminal / (std::sqrt(o.epsilon) * y0_norm) : 0.0;

    Table s({"epsilon", "cg_iters", "cg_residual", "converged", "control_cost", "terminal_norm",
             "free_terminal_norm", "identity_defect", "sqrt_eps_ratio"});
    s.add_row({o.epsilon, static_cast<double>(r.cg_iterations), r.cg_residual, r.converged ? 1.0 : 0.0,
               r.control_cost, terminal, r.free_terminal_norm, identity, bound_ratio});
    c.emit("hum.csv", s);
    c.emit("trajectory.csv", trajectory_table(g, r.trajectory, c.every()));
    c.emit("control.csv", control_table(g, r.control, prop.dt(), 0.0, c.every()));
    const int adj_steps = T0 > 0.0 ? prop.steps_for(T0) : prop.steps_for(c.T());
    const AdjointTrajectory adj = solve_adjoint(prop, r.z_T_opt, adj_steps, adj_steps * prop.dt());
    c.emit("adjoint.csv", adjoint_table(g, adj, c.every()));
    c.emit("terminal.csv", snapshot_table(g, r.terminal_state));
    c.metric("cg_iterations", r.cg_iterations);
    c.metric("cg_residual", r.cg_residual);
    c.metric("converged", r.converged);
    c.metric("control_cost", r.control_cost);
    c.metric("terminal_norm", terminal);
    c.metric("free_terminal_norm", r.free_terminal_norm);
    c.metric("identity_defect", identity);
    c.metric("sqrt_eps_ratio", bound_ratio);
}

void run_sweep(Context& c) {
    const Grid g = c.grid();
    const Propagator prop = c.propagator(g);
    const CoupledState y0 = c.initial(g);
    const auto horizons = c.cfg.get_list("sweep.horizons");
    const auto epsilons = c.cfg.get_list("sweep.epsilons");
    const int m = c.cfg.get_int("sweep.fit_m");
    HumOptions base = c.hum();
    for (double T : horizons) (void)prop.steps_for(T);

    struct Point {
        double T, eps;
    };
    std::vector<Point> points;
    for (double eps : epsilons)
        for (double T : horizons) points.push_back({T, eps});
    std::vector<SweepRow> rows(points.size());
    std::vector<double> w_terminal(points.size());

    // independent points share the immutable propagator; results land in
    // fixed slots so the output order does not depend on scheduling
    unsigned threads = static_cast<unsigned>(std::max(0, c.cfg.get_int("sweep.threads")));
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    for (std::size_t begin = 0; begin < points.size(); begin += threads) {
        std::vector<std::future<void>> jobs;
        for (std::size_t i = begin; i < std::min(points.size(), begin + threads); ++i) {
            jobs.push_back(std::async(std::launch::async, [&, i] {
                HumOptions o = base;
                o.epsilon = points[i].eps;
                const HumResult r = solve_null_control(prop, y0, points[i].T, o);
                rows[i] = {points[i].T, o.epsilon, r.control_cost, norm(g, r.terminal_state), r.cg_iterations};
                w_terminal[i] = l2_norm(g, r.terminal_state.w());
            }));
        }
        for (auto& j : jobs) j.get();
    }

    Table t({"T", "eps", "control_cost", "terminal_norm", "cg_iters", "fitted_M"});
    Table wt({"T", "eps", "w_terminal_norm"});
    for (std::size_t e = 0; e < epsilons.size(); ++e) {
        const std::vector<SweepRow> group(rows.begin() + e * horizons.size(), rows.begin() + (e + 1) * horizons.size());
        const double M = group.size() >= 2 ? fit_control_cost(group, m).M : NAN;
        for (std::size_t j = 0; j < group.size(); ++j) {
            const SweepRow& r = group[j];
            t.add_row({r.T, r.epsilon, r.control_cost, r.terminal_norm, static_cast<double>(r.cg_iterations), M});
            wt.add_row({r.T, r.epsilon, w_terminal[e * horizons.size() + j]});
        }
        if (e + 1 == epsilons.size()) c.metric("fitted_M", M);
    }
    c.emit("sweep.csv", t);
    c.emit("sweep_w_terminal.csv", wt);
    c.metric("points", static_cast<double>(points.size()));
}

FactoredSources profile_sources(Context& c, const Grid& g, int steps) {
    const auto g1 = profile_values(c.cfg.get_string("source.g1"), g.interior_nodes(), c.rng);
    const auto g2 = profile_values(c.cfg.get_string("source.g2"), g.nodes, c.rng);
    FactoredSources fs;
    fs.g1.assign(steps, g1);
    fs.g2.assign(steps, g2);
    return fs;
}

void run_source_term(Context& c) {
    const Grid g = c.grid();
    const Propagator prop = c.propagator(g);
    const CoupledState init = c.initial(g);
    const CoupledState y0 = c.cfg.get_bool("source.start_from_initial") ? init : CoupledState::zeros(g);
    const double T = c.T();
    const SourceWeights w = c.weights(T);
    const FactoredSources fs = profile_sources(c, g, prop.steps_for(T));
    const SourceTermOptions o = c.source_options();
    const Schedule sched = make_schedule(w, o.Kmax, o.tail_tol);
    const SourceTermResult r = solve_with_source(prop, y0, fs, w, T, o);

    Table s({"k", "T_k", "a_k_norm", "h_k_norm", "f_L1_norm"});
    for (const auto& rec : r.intervals)
        s.add_row({static_cast<double>(rec.k), rec.T_k, rec.a_norm, rec.control_norm, rec.source_l1});
    c.emit("schedule.csv", s);
    Table iv({"k", "T_k", "T_next", "state_norm", "stitch_jump", "cg_iters", "final_direct", "refinements"});
    for (const auto& rec : r.intervals)
        iv.add_row({static_cast<double>(rec.k), rec.T_k, rec.T_next, rec.state_norm, rec.stitch_jump,
                    static_cast<double>(rec.cg_iterations), rec.final_direct ? 1.0 : 0.0,
                    static_cast<double>(rec.refinements)});
    c.emit("intervals.csv", iv);
    Table wt({"t", "log_rho0", "log_rhoF", "log_ratio"});
    for (int i = 0; i < 1000; ++i) {
        const double t = T * i / 1000.0;
        wt.add_row({t, w.log_rho0(t), w.log_rhoF(t), w.log_ratio(t)});
    }
    c.emit("weights.csv", wt);
    Table id({"k", "T_k", "identity_defect"});
    for (std::size_t k = 0; k < sched.identity_defects.size(); ++k)
        id.add_row({static_cast<double>(k + 1), sched.times[k + 1], sched.identity_defects[k]});
    c.emit("schedule_identity.csv", id);
    c.emit("trajectory.csv", trajectory_table(g, r.trajectory, c.every()));
    c.emit("control.csv", control_table(g, r.control, prop.dt(), 0.0, c.every()));

    double gmax = 0.0;
    for (std::size_t k = 0; k < fs.g1.size(); ++k) {
        const CoupledState gk = CoupledState::from_fields(g, fs.g1[k], fs.g2[k]);
        gmax = std::max(gmax, norm(g, gk));
    }
    c.metric("terminal_norm", r.terminal_norm);
    c.metric("resimulated_terminal_norm", r.resimulated_terminal_norm);
    c.metric("max_stitch_jump", r.max_stitch_jump);
    c.metric("intervals", static_cast<double>(r.intervals.size()));
    c.metric("initial_scale", std::max(norm(g, y0), gmax));
    try {
        const WeightedNorms n = weighted_norms(prop, r.trajectory, r.control, fs, w);
        c.metric("log_Y_norm", n.log_y);
        c.metric("log_V_norm", n.log_v);
        c.metric("log_F_norm", n.log_f);
    } catch (const NumericalError&) {
        c.metric("weighted_norms_bounded", 0.0);
    }
}

void run_nonlinear(Context& c) {
    const Grid g = c.grid();
    const Propagator prop = c.propagator(g);
    CoupledState y0 = c.initial(g);
    const double target = c.cfg.get_double("nonlinear.y0_norm");
    const double n0 = norm(g, y0);
    if (n0 > 0.0)
        for (double& v : y0.data()) v *= target / n0;
    const double T = c.T();
    FixedPointOptions o;
    o.tol = c.cfg.get_double("nonlinear.tol");
    o.maxit = c.cfg.get_int("nonlinear.maxit");
    o.radius = c.cfg.get_double("nonlinear.radius");
    const SourceTermOptions so = c.source_options();
    o.source.Kmax = so.Kmax;
    o.source.tail_tol = so.tail_tol;
    o.source.refine_passes = so.refine_passes;
    o.source.hum = so.hum;
    const FixedPointResult r = fixed_point_control(prop, y0, c.weights(T), T, o);
    Table it({"iter", "distance", "contraction_ratio", "terminal_norm"});
    for (const auto& h : r.history)
        it.add_row({static_cast<double>(h.iter), h.distance, h.contraction_ratio, h.terminal_norm});
    c.emit("iterates.csv", it);
    const ClosedLoopReport cl = verify_closed_loop(prop, y0, r.control, T, &r.trajectory);
    const ClosedLoopReport open = verify_closed_loop(prop, y0, ControlSignal{}, T);
    c.emit("trajectory.csv", trajectory_table(g, cl.trajectory, c.every()));
    c.emit("control.csv", control_table(g, r.control, prop.dt(), 0.0, c.every()));
    c.metric("initial_norm", norm(g, y0));
    c.metric("converged", r.converged);
    c.metric("iterations", r.iterations);
    c.metric("max_contraction_ratio", r.max_contraction_ratio);
    c.metric("closed_loop_terminal_norm", cl.terminal_norm);
    c.metric("closed_loop_gap", cl.trajectory_gap);
    c.metric("uncontrolled_terminal_norm", open.terminal_norm);
}

void run_carleman(Context& c) {
    const Grid g = c.grid();
    CarlemanParams p;
    p.lambda = c.cfg.get_double("carleman.lambda");
    p.k = c.cfg.get_int("carleman.k");
    p.m = c.cfg.get_int("carleman.m");
    p.T = c.cfg.get_double("carleman.T");
    p.s = c.cfg.get_double("carleman.s");
    if (p.s <= 0.0) p.s = carleman_s_floor(c.cfg.get_double("carleman.mu0"), c.cfg.get_double("carleman.C"), p.m, p.T);
    validate(p);
    const Propagator prop = c.propagator(g);
    const ControlRegion O = prop.params().region;
    const AuxiliaryFunction nu = build_nu({c.cfg.get_double("carleman.O0_a"), c.cfg.get_double("carleman.O0_b")}, &O);
    const int samples = c.cfg.get_int("carleman.samples");
    if (samples < 1) throw ConfigError("carleman.samples must be positive");

    Table t({"sample_id", "s", "lambda", "lhs", "rhs", "ratio"});
    Table lt({"sample_id", "log_lhs", "log_rhs", "log_ratio"});
    std::normal_distribution<double> d(0.0, 1.0);
    double max_log = -INFINITY;
    for (int i = 0; i < samples; ++i) {
        CoupledState z = CoupledState::zeros(g);
        for (double& v : z.data()) v = d(c.rng);
        const CarlemanProbe pr = carleman_ratio(prop, nu, p, z);
        t.add_row({static_cast<double>(i), p.s, p.lambda, pr.lhs(), pr.rhs(), pr.ratio()});
        lt.add_row({static_cast<double>(i), pr.log_lhs, pr.log_rhs, pr.log_ratio});
        max_log = std::max(max_log, pr.log_ratio);
    }
    c.emit("carleman.csv", t);
    c.emit("carleman_log.csv", lt);
    Table nt({"x", "nu", "nu_x", "nu_xx"});
    for (double x : g.nodes) nt.add_row({x, nu.eval(x), nu.eval(x, 1), nu.eval(x, 2)});
    c.emit("nu.csv", nt);
    c.metric("s", p.s);
    c.metric("max_log_ratio", max_log);
    c.metric("max_ratio", std::exp(max_log));
    c.metric("nu_sup", nu.sup_norm());
    c.metric("weight_derivative_constant", weight_derivative_constant(nu, p, 3, 200, 200));
}

}  // namespace

RunReport run_experiment(const std::string& subcommand, const Config& config, const fs::path& out_dir) {
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), subcommand) == names.end())
        throw ConfigError("unknown subcommand '" + subcommand + "'");
    const auto unknown = config.unknown_keys(Config::defaults());
    if (!unknown.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + out_dir.string() + ": " + ec.message());

    RunReport report;
    report.subcommand = subcommand;
    Context c(config, out_dir, report);
    const auto start = std::chrono::steady_clock::now();
    if (subcommand == "steady") run_steady(c);
    else if (subcommand == "simulate") run_simulate(c);
    else if (subcommand == "control") run_control(c);
    else if (subcommand == "sweep") run_sweep(c);
    else if (subcommand == "source-term") run_source_term(c);
    else if (subcommand == "nonlinear") run_nonlinear(c);
    else run_carleman(c);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    nlohmann::ordered_json m;
    m["tool"] = "chbctl";
    m["version"] = CHBCTL_VERSION;
    m["subcommand"] = subcommand;
    m["seed"] = config.get_uint("run.seed");
    m["compiler"] = __VERSION__;
    m["wall_time_seconds"] = report.wall_seconds;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config.entries()) params[k] = v;
    m["parameters"] = params;
    nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
    for (const auto& [k, v] : report.metrics) {
        if (std::isfinite(v)) metrics[k] = v;
        else metrics[k] = format_double(v);
    }
    m["metrics"] = metrics;
    m["outputs"] = report.files;
    const fs::path mp = out_dir / "manifest.json";
    std::ofstream mo(mp);
    if (!mo) throw std::runtime_error("cannot open " + mp.string() + " for writing");
    mo << m.dump(2) << '\n';
    if (!mo) throw std::runtime_error("write to " + mp.string() + " failed");
    report.files.push_back("manifest.json");
    return report;
}

}  // namespace chb
