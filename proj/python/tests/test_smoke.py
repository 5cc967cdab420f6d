import json
import math

import numpy as np
import pytest

import chbctl


@pytest.fixture(scope="module")
def setup():
    g = chbctl.Grid(32)
    f_s = 0.1 * np.sin(np.pi * g.nodes)
    p = chbctl.make_system_params(g, f_s=f_s)
    prop = chbctl.Propagator(g, p, dt=1e-2, theta=1.0)
    y0 = chbctl.CoupledState(g, 0.1 * np.sin(np.pi * g.interior_nodes), 0.1 * np.cos(np.pi * g.nodes))
    return g, p, prop, y0


def test_grid_and_coupling():
    g = chbctl.Grid(16)
    assert g.nodes.shape == (17,)
    assert g.dx == pytest.approx(1 / 16)
    g1, g2, decoupled = chbctl.coupling_constants(1.0)
    assert decoupled and g1 == 0.0
    with pytest.raises(chbctl.ConfigError):
        chbctl.Grid(4)


def test_steady_zero_forcing():
    g = chbctl.Grid(32)
    r = chbctl.solve_steady_burgers(g, np.zeros(33))
    assert np.all(r["ubar"] == 0.0)


def test_forward_and_duality(setup):
    g, _, prop, y0 = setup
    traj = chbctl.solve_linear_forward(prop, y0, 0.5)
    assert traj.w(g).shape == (51, 33)
    zT = chbctl.CoupledState(g, np.cos(np.pi * g.interior_nodes), np.sin(2 * np.pi * g.nodes))
    _, rel = chbctl.duality_defect(prop, y0, zT, 0.5)
    assert rel <= 1e-10


def test_hum_drives_state_down(setup):
    g, _, prop, y0 = setup
    r = chbctl.solve_null_control(prop, y0, 0.5, chbctl.HumOptions(epsilon=1e-6))
    assert r.converged
    assert chbctl.norm(g, r.terminal_state) < 0.2 * r.free_terminal_norm
    assert r.control.shape[0] == 50


def test_source_weights():
    w = chbctl.make_source_weights()
    assert w.log_ratio(0.5) <= 0.0
    times, defects = chbctl.make_schedule(w)
    assert np.all(np.diff(times) > 0)
    assert max(defects) <= 1e-12
    with pytest.raises(chbctl.ConfigError):
        chbctl.make_source_weights(q=1.2)


def test_nonlinear_terms_start_at_second_order(setup):
    g, _, _, y0 = setup

    def scaled(t):
        y = chbctl.CoupledState(g, t * y0.w, t * y0.psi)
        return [n / t**2 for n in chbctl.eval_nonlinear(g, y)]

    zero = chbctl.eval_nonlinear(g, chbctl.CoupledState.zeros(g))
    for z, a, b in zip(zero, scaled(1e-4), scaled(1e-5)):
        assert np.all(z == 0.0)
        assert np.max(np.abs(a - b)) <= 1e-2 * np.max(np.abs(b))


def test_carleman_nu():
    nu = chbctl.build_nu(chbctl.ControlRegion(0.4, 0.6))
    assert nu(0.0) == pytest.approx(nu(1.0))
    assert nu.sup_norm > 0
    assert math.isfinite(chbctl.carleman_s_floor())


def test_run_experiment(tmp_path):
    r = chbctl.run_experiment("steady", tmp_path, {"mesh.n": "32", "system.f_s": "zero"})
    assert r["metrics"]["iterations"] == 1
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["subcommand"] == "steady"
    with pytest.raises(chbctl.ConfigError):
        chbctl.run_experiment("steady", tmp_path, {"mesh.bogus": "1"})
