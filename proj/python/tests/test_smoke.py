import json
import math
import os

import numpy as np
import pytest

import affext

SCENARIOS = os.environ.get(
    "AFFEXT_SCENARIO_DIR", os.path.join(os.path.dirname(__file__), "..", "..", "scenarios")
)

HEISENBERG = "X1 = (1, 0, -x2/2); X2 = (0, 1, x1/2)"


def test_identity_endpoint():
    F = affext.parse_fields("X1 = (1, 0); X2 = (0, 1)", 2, 2)
    u = affext.ControlPath.constant(1.0, 16, np.array([0.5, -1.0]))
    assert np.allclose(affext.endpoint(F, u, np.zeros(2), 1.0), [0.5, -1.0])
    traj = affext.integrate(F, u, np.zeros(2), 1.0)
    assert traj.states.shape == (len(traj.times), 2)


def test_duality():
    F = affext.parse_fields(HEISENBERG, 3, 2)
    t = np.linspace(0.0, 1.0, 33)
    u = affext.ControlPath(1.0, np.column_stack([np.cos(t), np.sin(3 * t)]))
    v = affext.ControlPath(1.0, np.column_stack([t**2, 1 - t]))
    x0 = np.array([0.1, -0.2, 0.3])
    lam = np.array([1.0, 2.0, -0.5])
    lhs = lam @ affext.apply_dE(F, u, x0, 1.0, v)
    rhs = affext.inner_product(affext.adjoint_dE(F, u, x0, 1.0, lam), v)
    assert abs(lhs - rhs) < 1e-8 * (1 + np.linalg.norm(lam))


def test_lie_rank():
    F = affext.parse_fields(HEISENBERG, 3, 2)
    r = affext.lie_rank(F, np.zeros(3))
    assert (r.rank, r.depth, r.full_rank) == (3, 2, True)


def test_singularity():
    F = affext.parse_fields("X1 = (1, 0, x2^2/2); X2 = (0, 1, 0)", 3, 2)
    rep = affext.singularity_report(F, affext.ControlPath.constant(1.0, 32, np.array([1.0, 0.0])), np.zeros(3), 1.0)
    assert rep.singular
    assert abs(abs(rep.abnormal_candidate[2]) - 1.0) < 1e-8


def test_straight_line():
    F = affext.parse_fields("X1 = (1, 0); X2 = (0, 1)", 2, 2)
    L = affext.parse_lagrangian("(u1^2 + u2^2)/2", 2, 2)
    s = affext.shoot_extremal(F, L, np.zeros(2), np.array([1.0, 0.0]), 1.0, np.zeros(2))
    assert abs(s.phi - 0.5) < 1e-8
    assert np.allclose(s.u.values, [[1.0, 0.0]] * (s.u.intervals + 1), atol=1e-8)
    assert s.endpoint_gap < 1e-8


def test_heisenberg_multi_start():
    F = affext.parse_fields(HEISENBERG, 3, 2)
    L = affext.parse_lagrangian("(u1^2 + u2^2)/2", 3, 2)
    opts = affext.ShootOptions()
    opts.integrator.substeps = 8
    sols = affext.multi_start(F, L, np.zeros(3), np.array([0.0, 0.0, 1 / (4 * math.pi)]), 1.0, seeds=10, options=opts)
    assert sols
    assert min(s.phi for s in sols) == pytest.approx(0.5, abs=1e-6)
    assert all(s.hamiltonian_drift < 1e-6 for s in sols)


def test_errors():
    with pytest.raises(affext.ParseError):
        affext.parse_fields("X1 = (1, 0", 2, 1)
    with pytest.raises(affext.Error):
        affext.parse_lagrangian("u3^2", 2, 2)


def test_cli_gl_values():
    code, out, _ = affext.run_cli(["gl-values", "--scenario", os.path.join(SCENARIOS, "gl.scn"), "--json"])
    assert code == 0
    rep = json.loads(out)
    assert rep["phi_zero"] == pytest.approx(4.0, abs=1e-6)
    assert rep["phi_plus"] == pytest.approx(16 / 15, abs=1e-6)
    assert affext.run_cli(["nope"])[0] == 1
