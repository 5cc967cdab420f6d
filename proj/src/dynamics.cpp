#include "chbctl/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "chbctl/errors.hpp"
#include "chbctl/nonlinear.hpp"

namespace chb {

CoupledState CoupledState::from_fields(const Grid& grid, std::span<const double> w, std::span<const double> psi,
                                       double t) {
    if (w.size() != grid.interior_count() || psi.size() != grid.node_count()) {
        throw ContractViolation("CoupledState: expected " + std::to_string(grid.interior_count()) + " w and " +
                                std::to_string(grid.node_count()) + " psi values");
    }
    CoupledState s = zeros(grid, t);
    std::copy(w.begin(), w.end(), s.w().begin());
    std::copy(psi.begin(), psi.end(), s.psi().begin());
    return s;
}

bool CoupledState::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double inner(const Grid& grid, const CoupledState& a, const CoupledState& b) {
    if (a.size() != b.size() || a.w_size() != grid.interior_count()) {
        throw ContractViolation("inner: states do not match the grid");
    }
    return inner(grid, a.w(), b.w()) + inner(grid, a.psi(), b.psi());
}

double norm(const Grid& grid, const CoupledState& a) { return std::sqrt(std::max(0.0, inner(grid, a, a))); }

void axpy(double alpha, const CoupledState& x, CoupledState& y) {
    if (x.size() != y.size()) throw ContractViolation("axpy: size mismatch");
    auto xd = x.data();
    auto yd = y.data();
    for (std::size_t i = 0; i < yd.size(); ++i) yd[i] += alpha * xd[i];
}

ControlSignal ControlSignal::zeros(std::size_t steps, std::size_t nodes) {
    return ControlSignal{StepFields(steps, std::vector<double>(nodes, 0.0))};
}

double ControlSignal::l2_norm(const Grid& grid, double dt) const {
    double s = 0.0;
    for (const auto& h : values) s += dt * inner(grid, h, h);
    return std::sqrt(s);
}

void ControlSignal::apply_mask(std::span<const double> mask) {
    for (auto& h : values) {
        if (h.size() != mask.size()) throw ContractViolation("ControlSignal: mask size mismatch");
        for (std::size_t i = 0; i < h.size(); ++i) h[i] *= mask[i];
    }
}

Propagator::Propagator(const Grid& grid, const SystemParams& params, double dt, double theta)
    : grid_(grid), params_(params), ops_(assemble_operators(grid)), dt_(dt), theta_(theta) {
    if (!(dt > 0.0)) throw ConfigError("propagator: dt must be positive");
    if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("propagator: theta must lie in [0, 1]");
    const std::size_t ni = grid_.interior_count();
    const std::size_t nn = grid_.node_count();
    if (params_.ubar.size() != nn || params_.ubar_x.size() != nn || params_.control_mask.size() != nn) {
        throw ContractViolation("propagator: parameter fields do not match the grid");
    }

    const std::vector<double> u_in(params_.ubar.begin() + 1, params_.ubar.end() - 1);
    const std::vector<double> ux_in(params_.ubar_x.begin() + 1, params_.ubar_x.end() - 1);
    a_ww_ = combine(params_.gamma, ops_.d2_dir, -1.0, ops_.d1_dir.row_scaled(u_in));
    for (std::size_t r = 0; r < ni; ++r) a_ww_.add(r, r, -ux_in[r]);
    a_wpsi_ = ops_.d1_neu_to_interior.scaled(params_.gamma1);
    a_pp_ = combine(-1.0, ops_.d4_neu, -params_.gamma2, ops_.d2_neu);
    a_pp_ = combine(1.0, a_pp_, -1.0, ops_.d1_neu.row_scaled(params_.ubar));

    weights_.assign(ni, grid_.dx);
    weights_.insert(weights_.end(), grid_.quad_weights.begin(), grid_.quad_weights.end());

    // Interleave psi_0, (w_1, psi_1), ..., (w_{n-1}, psi_{n-1}), psi_n.
    perm_.resize(ni + nn);
    for (std::size_t r = 0; r < ni; ++r) perm_[r] = 2 * r + 1;
    for (std::size_t i = 0; i < nn; ++i) perm_[ni + i] = (i + 1 < nn) ? 2 * i : 2 * i - 1;

    int kl = 0;
    int ku = 0;
    auto track = [&](std::size_t gi, std::size_t gj) {
        const auto d = static_cast<int>(gi) - static_cast<int>(gj);
        kl = std::max(kl, d);
        ku = std::max(ku, -d);
    };
    a_ww_.for_each([&](std::size_t i, std::size_t j, double) { track(perm_[i], perm_[j]); });
    a_wpsi_.for_each([&](std::size_t i, std::size_t j, double) { track(perm_[i], perm_[ni + j]); });
    a_pp_.for_each([&](std::size_t i, std::size_t j, double) { track(perm_[ni + i], perm_[ni + j]); });

    lu_ = BandLU(ni + nn, kl, ku);
    const double c = -theta_ * dt_;
    for (std::size_t k = 0; k < ni + nn; ++k) lu_.add(perm_[k], perm_[k], 1.0);
    a_ww_.for_each([&](std::size_t i, std::size_t j, double v) { lu_.add(perm_[i], perm_[j], c * v); });
    a_wpsi_.for_each([&](std::size_t i, std::size_t j, double v) { lu_.add(perm_[i], perm_[ni + j], c * v); });
    a_pp_.for_each([&](std::size_t i, std::size_t j, double v) { lu_.add(perm_[ni + i], perm_[ni + j], c * v); });
    lu_.factorize();
}

int Propagator::steps_for(double T) const {
    if (!(T > 0.0)) throw ContractViolation("horizon T must be positive");
    const double k = T / dt_;
    const double r = std::round(k);
    if (std::abs(k - r) > 1e-9 * std::max(1.0, k)) {
        throw ContractViolation("horizon T = " + std::to_string(T) + " is not a multiple of dt = " +
                                std::to_string(dt_));
    }
    return static_cast<int>(r);
}

void Propagator::apply_operator(std::span<const double> y, std::span<double> out) const {
    const std::size_t ni = grid_.interior_count();
    if (y.size() != state_size() || out.size() != state_size()) throw ContractViolation("apply_operator: size");
    const auto w = y.subspan(0, ni);
    const auto psi = y.subspan(ni);
    auto ow = out.subspan(0, ni);
    auto op = out.subspan(ni);
    a_ww_.apply(w, ow);
    std::vector<double> tmp(ni);
    a_wpsi_.apply(psi, tmp);
    for (std::size_t i = 0; i < ni; ++i) ow[i] += tmp[i];
    a_pp_.apply(psi, op);
}

void Propagator::apply_operator_adjoint(std::span<const double> y, std::span<double> out) const {
    const std::size_t ni = grid_.interior_count();
    const std::size_t nn = grid_.node_count();
    if (y.size() != state_size() || out.size() != state_size()) throw ContractViolation("apply_operator_adjoint: size");
    std::vector<double> wy(y.begin(), y.end());
    for (std::size_t k = 0; k < wy.size(); ++k) wy[k] *= weights_[k];
    auto ow = out.subspan(0, ni);
    auto op = out.subspan(ni);
    a_ww_.apply_transpose(std::span<const double>(wy).subspan(0, ni), ow);
    a_pp_.apply_transpose(std::span<const double>(wy).subspan(ni), op);
    std::vector<double> tmp(nn);
    a_wpsi_.apply_transpose(std::span<const double>(wy).subspan(0, ni), tmp);
    for (std::size_t i = 0; i < nn; ++i) op[i] += tmp[i];
    for (std::size_t k = 0; k < out.size(); ++k) out[k] /= weights_[k];
}

void Propagator::apply_extended(std::span<const long double> x, std::vector<long double>& out, bool transpose) const {
    const std::size_t ni = grid_.interior_count();
    out.assign(state_size(), 0.0L);
    if (!transpose) {
        a_ww_.for_each([&](std::size_t i, std::size_t j, double v) { out[i] += static_cast<long double>(v) * x[j]; });
        a_wpsi_.for_each([&](std::size_t i, std::size_t j, double v) { out[i] += static_cast<long double>(v) * x[ni + j]; });
        a_pp_.for_each([&](std::size_t i, std::size_t j, double v) { out[ni + i] += static_cast<long double>(v) * x[ni + j]; });
    } else {
        a_ww_.for_each([&](std::size_t i, std::size_t j, double v) { out[j] += static_cast<long double>(v) * x[i]; });
        a_wpsi_.for_each([&](std::size_t i, std::size_t j, double v) { out[ni + j] += static_cast<long double>(v) * x[i]; });
        a_pp_.for_each([&](std::size_t i, std::size_t j, double v) { out[ni + j] += static_cast<long double>(v) * x[ni + i]; });
    }
}

// A banded LU alone leaves an error of about eps ||M|| per solve (||M|| is
// ~1e5 at n = 64, dt = 1e-3), which accumulates into visible drift of
// conserved quantities.  One refinement pass with the residual accumulated
// in long double brings the solve to a few ulps.
void Propagator::solve_implicit(std::span<const long double> b, std::vector<long double>& x, bool transpose) const {
    const std::size_t n = state_size();
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[perm_[k]] = static_cast<double>(b[k]);
    lu_.solve(v, transpose);
    x.resize(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = v[perm_[k]];
    std::vector<long double> ax;
    apply_extended(x, ax, transpose);
    const long double c = static_cast<long double>(theta_) * dt_;
    for (std::size_t k = 0; k < n; ++k) v[perm_[k]] = static_cast<double>(b[k] - (x[k] - c * ax[k]));
    lu_.solve(v, transpose);
    for (std::size_t k = 0; k < n; ++k) x[k] += v[perm_[k]];
}

void Propagator::step(std::span<const double> y, std::span<const double> g, std::span<double> out) const {
    const std::size_t n = state_size();
    if (y.size() != n || out.size() != n || (!g.empty() && g.size() != n)) {
        throw ContractViolation("Propagator::step: size mismatch");
    }
    std::vector<long double> rhs(y.begin(), y.end());
    if (theta_ < 1.0) {
        std::vector<long double> ay;
        apply_extended(rhs, ay, false);
        const long double c = (1.0L - theta_) * dt_;
        for (std::size_t k = 0; k < n; ++k) rhs[k] += c * ay[k];
    }
    if (!g.empty()) {
        for (std::size_t k = 0; k < n; ++k) rhs[k] += static_cast<long double>(dt_) * g[k];
    }
    std::vector<long double> x;
    solve_implicit(rhs, x, false);
    std::copy(x.begin(), x.end(), out.begin());
}

void Propagator::adjoint_step(std::span<const double> z_next, std::span<double> zeta,
                              std::span<double> z_prev) const {
    const std::size_t n = state_size();
    if (z_next.size() != n || zeta.size() != n || z_prev.size() != n) {
        throw ContractViolation("Propagator::adjoint_step: size mismatch");
    }
    // zeta stays in long double until M_e^* is applied: for theta < 1 its
    // rounding error would be amplified by ||M_e|| ~ 1e5
    std::vector<long double> b(n), x;
    for (std::size_t k = 0; k < n; ++k) b[k] = static_cast<long double>(weights_[k]) * z_next[k];
    solve_implicit(b, x, /*transpose=*/true);
    for (std::size_t k = 0; k < n; ++k) zeta[k] = static_cast<double>(x[k] / weights_[k]);
    if (theta_ < 1.0) {
        std::vector<long double> az;
        apply_extended(x, az, true);
        const long double c = (1.0L - theta_) * dt_;
        for (std::size_t k = 0; k < n; ++k) z_prev[k] = static_cast<double>((x[k] + c * az[k]) / weights_[k]);
    } else {
        std::copy(zeta.begin(), zeta.end(), z_prev.begin());
    }
}

void Propagator::implicit_adjoint_solve(std::span<const double> v, std::span<double> out) const {
    const std::size_t n = state_size();
    if (v.size() != n || out.size() != n) throw ContractViolation("implicit_adjoint_solve: size mismatch");
    std::vector<long double> b(n), x;
    for (std::size_t k = 0; k < n; ++k) b[k] = static_cast<long double>(weights_[k]) * v[k];
    solve_implicit(b, x, /*transpose=*/true);
    for (std::size_t k = 0; k < n; ++k) out[k] = static_cast<double>(x[k] / weights_[k]);
}

namespace {

void check_state(const Propagator& prop, const CoupledState& y, const char* who) {
    if (y.size() != prop.state_size() || y.w_size() != prop.grid().interior_count()) {
        throw ContractViolation(std::string(who) + ": state does not match the grid");
    }
}

void check_step_fields(const StepFields& f, int steps, std::size_t width, const char* what) {
    if (f.empty()) return;
    if (f.size() != static_cast<std::size_t>(steps)) {
        throw ContractViolation(std::string(what) + ": expected " + std::to_string(steps) + " time samples, got " +
                                std::to_string(f.size()));
    }
    for (const auto& v : f) {
        if (v.size() != width) throw ContractViolation(std::string(what) + ": field size mismatch");
    }
}

// Assembles g_k = (f1, f2 + chi_O h) for step k.  Returns false when zero.
bool assemble_forcing(const Propagator& prop, int k, const ControlSignal* control, const Sources* sources,
                      std::vector<double>& g) {
    const std::size_t ni = prop.grid().interior_count();
    const std::size_t nn = prop.grid().node_count();
    bool any = false;
    std::fill(g.begin(), g.end(), 0.0);
    if (sources != nullptr && !sources->f1.empty()) {
        const auto& f1 = sources->f1[k];
        std::copy(f1.begin(), f1.end(), g.begin());
        any = true;
    }
    if (sources != nullptr && !sources->f2.empty()) {
        const auto& f2 = sources->f2[k];
        for (std::size_t i = 0; i < nn; ++i) g[ni + i] += f2[i];
        any = true;
    }
    if (control != nullptr && control->steps() > 0) {
        const auto& h = control->values[k];
        const auto& mask = prop.params().control_mask;
        for (std::size_t i = 0; i < nn; ++i) g[ni + i] += mask[i] * h[i];
        any = true;
    }
    return any;
}

Trajectory start_trajectory(const Propagator& prop, const CoupledState& y0, int steps) {
    Trajectory traj;
    traj.dt = prop.dt();
    traj.times.reserve(steps + 1);
    traj.states.reserve(steps + 1);
    traj.times.push_back(y0.t);
    traj.states.push_back(y0);
    return traj;
}

}  // namespace

Trajectory solve_linear_forward(const Propagator& prop, const CoupledState& y0, int steps,
                                const ControlSignal* control, const Sources* sources) {
    check_state(prop, y0, "solve_linear_forward");
    if (!y0.all_finite()) throw InstabilityError("solve_linear_forward: initial state is not finite", 0);
    if (steps < 0) throw ContractViolation("solve_linear_forward: negative step count");
    if (control != nullptr && control->steps() > 0) {
        check_step_fields(control->values, steps, prop.grid().node_count(), "control");
    }
    if (sources != nullptr) {
        check_step_fields(sources->f1, steps, prop.grid().interior_count(), "source f1");
        check_step_fields(sources->f2, steps, prop.grid().node_count(), "source f2");
    }
    Trajectory traj = start_trajectory(prop, y0, steps);
    std::vector<double> g(prop.state_size());
    for (int k = 0; k < steps; ++k) {
        const bool forced = assemble_forcing(prop, k, control, sources, g);
        CoupledState next(y0.w_size(), y0.size() - y0.w_size(), y0.t + (k + 1) * prop.dt());
        prop.step(traj.states.back().data(), forced ? std::span<const double>(g) : std::span<const double>{},
                  next.data());
        if (!next.all_finite()) {
            throw InstabilityError("solve_linear_forward: non-finite state at step " + std::to_string(k + 1), k + 1);
        }
        traj.times.push_back(next.t);
        traj.states.push_back(std::move(next));
    }
    return traj;
}

Trajectory solve_linear_forward(const Propagator& prop, const CoupledState& y0, double T,
                                const ControlSignal* control, const Sources* sources) {
    return solve_linear_forward(prop, y0, prop.steps_for(T), control, sources);
}

Trajectory solve_nonlinear_forward(const Propagator& prop, const CoupledState& y0, int steps,
                                   const ControlSignal* control) {
    check_state(prop, y0, "solve_nonlinear_forward");
    if (!y0.all_finite()) throw InstabilityError("solve_nonlinear_forward: initial state is not finite", 0);
    if (control != nullptr && control->steps() > 0) {
        check_step_fields(control->values, steps, prop.grid().node_count(), "control");
    }
    const std::size_t ni = prop.grid().interior_count();
    Trajectory traj = start_trajectory(prop, y0, steps);
    std::vector<double> g(prop.state_size());
    for (int k = 0; k < steps; ++k) {
        assemble_forcing(prop, k, control, nullptr, g);
        const CoupledState& y = traj.states.back();
        const NonlinearTerms nl = eval_nonlinear(prop.grid(), prop.operators(), y.w(), y.psi(), prop.params().phibar);
        for (std::size_t i = 0; i < ni; ++i) g[i] += nl.n1[i];
        for (std::size_t i = 0; i < nl.n2.size(); ++i) g[ni + i] += nl.n2[i];
        CoupledState next(y0.w_size(), y0.size() - y0.w_size(), y0.t + (k + 1) * prop.dt());
        prop.step(y.data(), g, next.data());
        if (!next.all_finite()) {
            throw InstabilityError("solve_nonlinear_forward: blow-up at step " + std::to_string(k + 1), k + 1);
        }
        traj.times.push_back(next.t);
        traj.states.push_back(std::move(next));
    }
    return traj;
}

Trajectory solve_nonlinear_forward(const Propagator& prop, const CoupledState& y0, double T,
                                   const ControlSignal* control) {
    return solve_nonlinear_forward(prop, y0, prop.steps_for(T), control);
}

std::vector<EnergyRecord> energy_report(const Propagator& prop, const Trajectory& traj) {
    std::vector<EnergyRecord> out;
    out.reserve(traj.states.size());
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        const CoupledState& y = traj.states[k];
        const DiscreteNorms pn = discrete_norms(prop.grid(), prop.operators(), y.psi(), BoundaryKind::neumann);
        out.push_back({traj.times[k], l2_norm(prop.grid(), y.w()), pn.l2, pn.h2_semi});
    }
    return out;
}

double mass(const Grid& grid, const CoupledState& y) {
    double m = 0.0;
    auto psi = y.psi();
    for (std::size_t i = 0; i < psi.size(); ++i) m += grid.quad_weights[i] * psi[i];
    return m;
}

}  // namespace chb
