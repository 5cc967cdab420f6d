#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "chbctl/adjoint.hpp"
#include "chbctl/carleman.hpp"
#include "chbctl/config.hpp"
#include "chbctl/errors.hpp"
#include "chbctl/experiment.hpp"
#include "chbctl/hum.hpp"
#include "chbctl/nonlinear.hpp"
#include "chbctl/source_term.hpp"
#include "chbctl/steady.hpp"

namespace py = pybind11;
using namespace chb;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(std::span<const double> v) {
    Array a(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), a.mutable_data());
    return a;
}

std::vector<double> to_vector(const Array& a) {
    if (a.ndim() != 1) throw py::value_error("expected a 1-d array");
    return {a.data(), a.data() + a.size()};
}

// rows of padded w (zeros at both ends) or psi, one per stored time
template <class States>
Array stack(const Grid& g, const States& states, bool first) {
    const auto nn = static_cast<py::ssize_t>(g.node_count());
    Array out({static_cast<py::ssize_t>(states.size()), nn});
    auto r = out.mutable_unchecked<2>();
    for (std::size_t k = 0; k < states.size(); ++k) {
        const auto row = first ? pad_dirichlet(states[k].w()) : std::vector<double>(states[k].psi().begin(), states[k].psi().end());
        for (py::ssize_t i = 0; i < nn; ++i) r(static_cast<py::ssize_t>(k), i) = row[i];
    }
    return out;
}

ControlSignal control_from_array(const Array& h) {
    if (h.ndim() != 2) throw py::value_error("control must be a (steps, n+1) array");
    ControlSignal c;
    const auto r = h.unchecked<2>();
    c.values.resize(h.shape(0));
    for (py::ssize_t k = 0; k < h.shape(0); ++k) {
        c.values[k].resize(h.shape(1));
        for (py::ssize_t i = 0; i < h.shape(1); ++i) c.values[k][i] = r(k, i);
    }
    return c;
}

Array control_to_array(const ControlSignal& c) {
    const py::ssize_t cols = c.values.empty() ? 0 : static_cast<py::ssize_t>(c.values[0].size());
    Array out({static_cast<py::ssize_t>(c.steps()), cols});
    auto r = out.mutable_unchecked<2>();
    for (std::size_t k = 0; k < c.steps(); ++k)
        for (py::ssize_t i = 0; i < cols; ++i) r(static_cast<py::ssize_t>(k), i) = c.values[k][i];
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Null control of the linearized Cahn-Hilliard-Burgers system";

    auto base = py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);
    py::register_exception<SmallnessViolated>(m, "SmallnessViolated", PyExc_RuntimeError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const InstabilityError& e) {
            PyErr_SetString(PyExc_FloatingPointError,
                            (std::string(e.what()) + " (step " + std::to_string(e.step()) + ")").c_str());
        }
    });
    (void)base;

    py::class_<Grid>(m, "Grid")
        .def(py::init([](int n) { return make_grid(n); }), py::arg("n"))
        .def_readonly("n", &Grid::n)
        .def_readonly("dx", &Grid::dx)
        .def_property_readonly("nodes", [](const Grid& g) { return to_array(g.nodes); })
        .def_property_readonly("interior_nodes", [](const Grid& g) { return to_array(g.interior_nodes()); });

    py::class_<ControlRegion>(m, "ControlRegion")
        .def(py::init<double, double>(), py::arg("a") = 0.3, py::arg("b") = 0.7)
        .def_readwrite("a", &ControlRegion::a)
        .def_readwrite("b", &ControlRegion::b);

    m.def("coupling_constants", [](double phibar) {
        const CouplingConstants c = coupling_constants(phibar);
        return py::make_tuple(c.gamma1, c.gamma2, c.decoupled);
    }, py::arg("phibar"), "(gamma1, gamma2, decoupled)");

    m.def("solve_steady_burgers", [](const Grid& g, const Array& f_s, double gamma, double tol, int maxit) {
        SteadyOptions o;
        o.tol = tol;
        o.maxit = maxit;
        const SteadyResult r = solve_steady_burgers(g, to_vector(f_s), gamma, o);
        py::dict d;
        d["ubar"] = to_array(r.ubar);
        d["ubar_x"] = to_array(r.ubar_x);
        d["iterations"] = r.iterations;
        d["residual"] = r.residual;
        d["above_smallness_threshold"] = r.above_smallness_threshold;
        return d;
    }, py::arg("grid"), py::arg("f_s"), py::arg("gamma") = 1.0, py::arg("tol") = 1e-12, py::arg("maxit") = 500);

    py::class_<SystemParams>(m, "SystemParams")
        .def_readonly("gamma", &SystemParams::gamma)
        .def_readonly("phibar", &SystemParams::phibar)
        .def_readonly("gamma1", &SystemParams::gamma1)
        .def_readonly("gamma2", &SystemParams::gamma2)
        .def_property_readonly("ubar", [](const SystemParams& p) { return to_array(p.ubar); })
        .def_property_readonly("control_mask", [](const SystemParams& p) { return to_array(p.control_mask); });

    m.def("make_system_params", [](const Grid& g, double gamma, double phibar, const ControlRegion& O,
                                   const Array& f_s, bool allow_decoupled) {
        return make_system_params(g, gamma, phibar, O, to_vector(f_s), allow_decoupled);
    }, py::arg("grid"), py::arg("gamma") = 1.0, py::arg("phibar") = 0.5, py::arg("region") = ControlRegion{},
       py::arg("f_s"), py::arg("allow_decoupled") = false,
       "Bundles the coefficients, computing ubar from f_s with the steady solver.");

    py::class_<CoupledState>(m, "CoupledState")
        .def(py::init([](const Grid& g, const Array& w, const Array& psi) {
            return CoupledState::from_fields(g, to_vector(w), to_vector(psi));
        }), py::arg("grid"), py::arg("w"), py::arg("psi"), "w on the n-1 interior nodes, psi on all n+1 nodes")
        .def_static("zeros", [](const Grid& g) { return CoupledState::zeros(g); })
        .def_property_readonly("w", [](const CoupledState& s) { return to_array(s.w()); })
        .def_property_readonly("psi", [](const CoupledState& s) { return to_array(s.psi()); })
        .def_readwrite("t", &CoupledState::t);

    m.def("inner", py::overload_cast<const Grid&, const CoupledState&, const CoupledState&>(&inner));
    m.def("norm", py::overload_cast<const Grid&, const CoupledState&>(&norm));
    m.def("mass", &mass);

    py::class_<Propagator>(m, "Propagator")
        .def(py::init<const Grid&, const SystemParams&, double, double>(), py::arg("grid"), py::arg("params"),
             py::arg("dt") = 1e-3, py::arg("theta") = 1.0)
        .def_property_readonly("dt", &Propagator::dt)
        .def_property_readonly("theta", &Propagator::theta)
        .def("steps_for", &Propagator::steps_for);

    py::class_<Trajectory>(m, "Trajectory")
        .def_property_readonly("times", [](const Trajectory& t) { return to_array(t.times); })
        .def_property_readonly("terminal", [](const Trajectory& t) { return t.terminal(); })
        .def("w", [](const Trajectory& t, const Grid& g) { return stack(g, t.states, true); }, py::arg("grid"))
        .def("psi", [](const Trajectory& t, const Grid& g) { return stack(g, t.states, false); }, py::arg("grid"));

    py::class_<AdjointTrajectory>(m, "AdjointTrajectory")
        .def_property_readonly("times", [](const AdjointTrajectory& t) { return to_array(t.times); })
        .def_property_readonly("initial", [](const AdjointTrajectory& t) { return t.initial(); })
        .def("sigma", [](const AdjointTrajectory& t, const Grid& g) { return stack(g, t.states, true); })
        .def("v", [](const AdjointTrajectory& t, const Grid& g) { return stack(g, t.states, false); });

    m.def("solve_linear_forward", [](const Propagator& p, const CoupledState& y0, double T, std::optional<Array> h) {
        if (!h) return solve_linear_forward(p, y0, T);
        const ControlSignal c = control_from_array(*h);
        return solve_linear_forward(p, y0, T, &c);
    }, py::arg("prop"), py::arg("y0"), py::arg("T"), py::arg("control") = py::none());
    m.def("solve_nonlinear_forward", [](const Propagator& p, const CoupledState& y0, double T, std::optional<Array> h) {
        if (!h) return solve_nonlinear_forward(p, y0, T);
        const ControlSignal c = control_from_array(*h);
        return solve_nonlinear_forward(p, y0, T, &c);
    }, py::arg("prop"), py::arg("y0"), py::arg("T"), py::arg("control") = py::none());
    m.def("solve_adjoint", py::overload_cast<const Propagator&, const CoupledState&, double>(&solve_adjoint),
          py::arg("prop"), py::arg("z_T"), py::arg("T"));
    m.def("duality_defect", [](const Propagator& p, const CoupledState& y0, const CoupledState& zT, double T,
                               std::optional<Array> h) {
        std::optional<ControlSignal> c;
        if (h) c = control_from_array(*h);
        const DualityReport r = duality_defect(p, y0, zT, c ? &*c : nullptr, nullptr, T);
        return py::make_tuple(r.defect, r.relative());
    }, py::arg("prop"), py::arg("y0"), py::arg("z_T"), py::arg("T"), py::arg("control") = py::none(),
       "(absolute, relative) defect");

    py::class_<HumOptions>(m, "HumOptions")
        .def(py::init([](double epsilon, double cg_tol, int maxit) {
            HumOptions o;
            o.epsilon = epsilon;
            o.cg_tol = cg_tol;
            o.maxit = maxit;
            return o;
        }), py::arg("epsilon") = 1e-6, py::arg("cg_tol") = 1e-10, py::arg("maxit") = 500)
        .def_readwrite("epsilon", &HumOptions::epsilon)
        .def_readwrite("cg_tol", &HumOptions::cg_tol)
        .def_readwrite("maxit", &HumOptions::maxit);

    py::class_<HumResult>(m, "HumResult")
        .def_readonly("z_T_opt", &HumResult::z_T_opt)
        .def_readonly("terminal_state", &HumResult::terminal_state)
        .def_readonly("trajectory", &HumResult::trajectory)
        .def_readonly("cg_iterations", &HumResult::cg_iterations)
        .def_readonly("cg_residual", &HumResult::cg_residual)
        .def_readonly("converged", &HumResult::converged)
        .def_readonly("control_cost", &HumResult::control_cost)
        .def_readonly("free_terminal_norm", &HumResult::free_terminal_norm)
        .def_property_readonly("control", [](const HumResult& r) { return control_to_array(r.control); });

    m.def("solve_null_control", &solve_null_control, py::arg("prop"), py::arg("y0"), py::arg("T"),
          py::arg("options") = HumOptions{});
    m.def("gramian_apply", py::overload_cast<const Propagator&, const CoupledState&, double>(&gramian_apply));
    m.def("observability_quotient", &observability_quotient);
    m.def("control_cost_sweep", [](const Propagator& p, const CoupledState& y0, const std::vector<double>& Ts,
                                   const HumOptions& o, int m_fit) {
        const auto rows = control_cost_sweep(p, y0, Ts, o);
        py::list out;
        for (const auto& r : rows) {
            py::dict d;
            d["T"] = r.T;
            d["eps"] = r.epsilon;
            d["control_cost"] = r.control_cost;
            d["terminal_norm"] = r.terminal_norm;
            d["cg_iters"] = r.cg_iterations;
            out.append(d);
        }
        const double M = rows.size() >= 2 ? fit_control_cost(rows, m_fit).M : NAN;
        return py::make_tuple(out, M);
    }, py::arg("prop"), py::arg("y0"), py::arg("horizons"), py::arg("options") = HumOptions{}, py::arg("m") = 4,
       "(rows, fitted_M)");

    py::class_<SourceWeights>(m, "SourceWeights")
        .def_property_readonly("p", &SourceWeights::p)
        .def_property_readonly("q", &SourceWeights::q)
        .def_property_readonly("M", &SourceWeights::M)
        .def_property_readonly("m", &SourceWeights::m)
        .def("log_rho0", &SourceWeights::log_rho0)
        .def("log_rhoF", &SourceWeights::log_rhoF)
        .def("log_ratio", &SourceWeights::log_ratio)
        .def_static("q_upper", &SourceWeights::q_upper)
        .def_static("p_lower", &SourceWeights::p_lower);
    m.def("make_source_weights", &make_source_weights, py::arg("p") = 3.0, py::arg("q") = 1.05, py::arg("M") = 1.0,
          py::arg("m") = 4, py::arg("T") = 1.0);
    m.def("make_schedule", [](const SourceWeights& w, int Kmax, double tail_tol) {
        const Schedule s = make_schedule(w, Kmax, tail_tol);
        return py::make_tuple(s.times, s.identity_defects);
    }, py::arg("weights"), py::arg("Kmax") = 12, py::arg("tail_tol") = 1e-8, "(times, identity_defects)");

    m.def("eval_nonlinear", [](const Grid& g, const CoupledState& y, double phibar) {
        const NonlinearTerms n = eval_nonlinear(g, assemble_operators(g), y.w(), y.psi(), phibar);
        return py::make_tuple(to_array(n.n1), to_array(n.n2));
    }, py::arg("grid"), py::arg("y"), py::arg("phibar") = 0.5);

    m.def("fixed_point_control", [](const Propagator& p, const CoupledState& y0, const SourceWeights& w, double T) {
        const FixedPointResult r = fixed_point_control(p, y0, w, T);
        const ClosedLoopReport cl = verify_closed_loop(p, y0, r.control, T, &r.trajectory);
        py::dict d;
        d["converged"] = r.converged;
        d["iterations"] = r.iterations;
        d["max_contraction_ratio"] = r.max_contraction_ratio;
        d["closed_loop_terminal_norm"] = cl.terminal_norm;
        d["control"] = control_to_array(r.control);
        return d;
    }, py::arg("prop"), py::arg("y0"), py::arg("weights"), py::arg("T") = 1.0);

    py::class_<AuxiliaryFunction>(m, "AuxiliaryFunction")
        .def("__call__", [](const AuxiliaryFunction& nu, double x, int order) { return nu.eval(x, order); },
             py::arg("x"), py::arg("order") = 0)
        .def_property_readonly("sup_norm", &AuxiliaryFunction::sup_norm)
        .def_property_readonly("slope_floor", &AuxiliaryFunction::slope_floor);
    m.def("build_nu", [](const ControlRegion& O0, std::optional<ControlRegion> O) {
        return build_nu(O0, O ? &*O : nullptr);
    }, py::arg("O0"), py::arg("O") = py::none());

    py::class_<CarlemanParams>(m, "CarlemanParams")
        .def(py::init([](double s, double lambda, int k, int m, double T) {
            CarlemanParams p{s, lambda, k, m, T};
            validate(p);
            return p;
        }), py::arg("s"), py::arg("lambda_") = 2.0, py::arg("k") = 5, py::arg("m") = 4, py::arg("T") = 1.0)
        .def_readonly("s", &CarlemanParams::s)
        .def_readonly("lambda_", &CarlemanParams::lambda);
    m.def("carleman_s_floor", &carleman_s_floor, py::arg("mu0") = 1.0, py::arg("C") = 1.0, py::arg("m") = 4,
          py::arg("T") = 1.0);
    m.def("carleman_log_ratio", [](const Propagator& p, const AuxiliaryFunction& nu, const CarlemanParams& cp,
                                   const CoupledState& z) {
        const CarlemanProbe r = carleman_ratio(p, nu, cp, z);
        return py::make_tuple(r.log_lhs, r.log_rhs, r.log_ratio);
    }, "(log LHS, log RHS, log ratio)");

    m.def("default_config", [] { return Config::defaults().entries(); });
    m.def("run_experiment", [](const std::string& sub, const std::filesystem::path& out,
                               const std::map<std::string, std::string>& overrides) {
        std::vector<std::string> ov;
        for (const auto& [k, v] : overrides) ov.push_back(k + "=" + v);
        const RunReport r = run_experiment(sub, resolve_config(nullptr, ov), out);
        py::dict d;
        d["files"] = r.files;
        d["metrics"] = r.metrics;
        d["wall_seconds"] = r.wall_seconds;
        return d;
    }, py::arg("subcommand"), py::arg("out"), py::arg("overrides") = std::map<std::string, std::string>{});
}
