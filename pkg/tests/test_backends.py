"""The numba kernels and their NumPy fallbacks must agree numerically."""

import os
import subprocess
import sys

import numpy as np
import pytest

from aggdiff import _accel

needs_numba = pytest.mark.skipif(
    not _accel.NUMBA_ENABLED, reason="numba backend not active"
)


def _random_state(seed, n=200):
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.0, 1.0, n)
    v = rng.uniform(-0.5, 0.5, n)
    area = rng.uniform(0.5, 1.5, n + 1)
    vol = rng.uniform(0.5, 1.5, n)
    return u, v, area, vol


@needs_numba
@pytest.mark.parametrize("diffusion", [True, False])
def test_explicit_update_matches_numpy(diffusion):
    u, v, area, vol = _random_state(0)
    args = (u, v, area, vol, 0.01, 0.05, 1e-4, diffusion)
    u_nb, flux_nb = _accel.explicit_update(*args)
    u_np, flux_np = _accel._explicit_update_np(*args)
    np.testing.assert_allclose(u_nb, u_np, rtol=1e-13, atol=1e-15)
    assert flux_nb == pytest.approx(flux_np, rel=1e-13)


@needs_numba
def test_thomas_matches_scipy():
    rng = np.random.default_rng(1)
    n = 50
    sub = np.concatenate([[0.0], rng.uniform(-0.4, -0.1, n - 1)])
    sup = np.concatenate([rng.uniform(-0.4, -0.1, n - 1), [0.0]])
    diag = 1.0 + rng.uniform(1.0, 2.0, n)
    rhs = rng.uniform(-1.0, 1.0, n)
    x_nb = _accel.thomas_solve(sub, diag, sup, rhs)
    x_np = _accel._thomas_np(sub, diag, sup, rhs)
    np.testing.assert_allclose(x_nb, x_np, rtol=1e-12, atol=1e-14)


@needs_numba
def test_matrix_builds_match_numpy():
    rng = np.random.default_rng(2)
    r = np.sort(rng.uniform(0.01, 2.0, 60))
    s_nodes = np.linspace(1e-3, 5.0, 200)
    kp_nodes = -np.exp(-s_nodes) * (1.0 + 0.1 * np.sin(s_nodes))
    for kind in (0, 1, 2, 3):
        w_nb = _accel.build_matrix_1d(r, kind, s_nodes, kp_nodes)
        w_np = _accel._build_matrix_1d_np(r, kind, s_nodes, kp_nodes)
        np.testing.assert_allclose(w_nb, w_np, rtol=1e-13, atol=1e-15)
    theta = np.linspace(0.01, np.pi - 0.01, 48)
    cos_t = np.cos(theta)
    wts = np.sin(theta) ** 1
    wsum = float(np.sum(wts))
    for kind in (0, 1, 3):
        w_nb = _accel.build_matrix_nd(r, kind, s_nodes, kp_nodes, cos_t, wts, wsum)
        w_np = _accel._build_matrix_nd_np(r, kind, s_nodes, kp_nodes, cos_t, wts, wsum)
        np.testing.assert_allclose(w_nb, w_np, rtol=1e-12, atol=1e-14)


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, AGGDIFF_NUMBA="0")
    out = subprocess.run(
        [sys.executable, "-c", "import aggdiff; print(aggdiff.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"


def test_backend_reports_current_choice():
    assert _accel.BACKEND in ("numba", "numpy")
    assert _accel.BACKEND == ("numba" if _accel.NUMBA_ENABLED else "numpy")
