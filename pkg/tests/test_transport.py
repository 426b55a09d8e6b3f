import numpy as np
import pytest
from hypothesis import given, strategies as st

from raceway2d.biology import BioParams
from raceway2d.geometry import build_grid
from raceway2d.kinetic import MultilayerSolver
from raceway2d.state import HydroState, PhysParams
from raceway2d.transport import balance_transport, measure_transport, run_biology


def shear_flow():
    grid = build_grid(2.0, 10, 3)
    solver = MultilayerSolver(grid, PhysParams(viscosity=1e-3, friction=1e-2))
    s = HydroState.at_rest(3, np.full(10, 0.3))
    s.u[:] = np.array([0.1, 0.2, 0.3])[:, None]
    return grid, solver, s


def test_measured_operator_matches_direct_transport():
    grid, solver, s = shear_flow()
    A, _ = measure_transport(solver, s, 3.0)
    rng = np.random.default_rng(0)
    C0 = rng.uniform(0.5, 2.0, size=(1, 3, 10))
    probe = s.copy()
    probe.C = C0.copy()
    direct = solver.run(probe, s.t + 3.0).C
    np.testing.assert_allclose(A @ C0.ravel(), direct.ravel(), rtol=1e-12)


def test_measured_operator_is_non_negative_and_preserves_constants():
    grid, solver, s = shear_flow()
    A, end = measure_transport(solver, s, 3.0)
    assert A.min() >= 0.0
    np.testing.assert_allclose(A.sum(axis=1), 1.0, rtol=1e-12)
    assert end.C.shape == s.C.shape


@given(st.integers(2, 12), st.integers(0, 1000))
def test_balancing(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.1, 1.0, (n, n))
    v = rng.uniform(0.5, 2.0, n)
    B = balance_transport(A, v)
    np.testing.assert_allclose(B.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(v @ B, v, rtol=1e-12)
    assert B.min() >= 0


def test_identity_operator_is_pure_reaction():
    h = np.full((2, 3), 0.25)
    C0 = np.stack([np.full((2, 3), 20.0), np.full((2, 3), 2.0), np.full((2, 3), 5.0)])
    bio = BioParams(respiration=0.0)
    res = run_biology(np.eye(6), C0, h, 86400.0, 60.0, bio, reaction_dt=10.0)
    N = res.mean_C[:, 1] + res.mean_C[:, 2]
    np.testing.assert_allclose(N, 7.0, rtol=1e-12)
    assert res.mean_C[-1, 0] > 20.0
    assert res.times[-1] == pytest.approx(86400.0)
    # identical columns stay identical
    np.testing.assert_allclose(res.C[:, :, 0], res.C[:, :, 2], rtol=1e-14)
