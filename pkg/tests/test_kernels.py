import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isac_track import _kernels_py, kernels

try:
    from isac_track import _kernels as _kernels_c
except ImportError:  # pragma: no cover - the compiled extension is optional
    _kernels_c = None

needs_c = pytest.mark.skipif(_kernels_c is None, reason="compiled extension not built")


def _instance(rng, m=3, k=2):
    a = rng.uniform(0.01, 1.0, (m, 4))
    b = rng.uniform(0, 1e-3, (m, 4))
    nstar = rng.uniform(10, 60, m)
    alpha = rng.uniform(1e8, 1e10, k)
    gamma = rng.uniform(1e5, 1e7, k)
    lb = np.concatenate([np.full(m, 5.0), np.full(k, 2.0), np.zeros(k)])
    ub = np.concatenate([np.full(m, 64.0), np.full(k, 128.0), np.full(k, 50.0)])
    x0 = rng.uniform(lb, ub)
    return x0, lb, ub, a, b, nstar, alpha, gamma


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


@needs_c
@settings(max_examples=30)
@given(st.integers(0, 2**31))
def test_backends_agree(seed):
    rng = np.random.default_rng(seed)
    x0, lb, ub, a, b, nstar, alpha, gamma = _instance(rng)
    args = (x0, lb, ub, a, b, nstar, alpha, gamma, 1.44e6 / np.log(2), 0.5, 150.0, 60.0)
    xp, fp, ip, rp = _kernels_py.psg_solve(*args, max_iter=400)
    xc, fc, ic, rc = _kernels_c.psg_solve(*args, max_iter=400)
    # summation order differs, so iterates drift at round-off level along the nonsmooth path
    assert abs(ip - ic) <= 40
    assert np.allclose(xp, xc, rtol=1e-6, atol=1e-9)
    assert fc == pytest.approx(fp, rel=1e-9)
    v = _kernels_py.penalized_value(x0, a, b, nstar, alpha, gamma, 1e6, 0.5, 3)
    assert _kernels_c.penalized_value(x0, a, b, nstar, alpha, gamma, 1e6, 0.5, 3) == pytest.approx(v, rel=1e-12)


@given(st.integers(0, 2**31))
def test_projection_feasible(seed):
    rng = np.random.default_rng(seed)
    x0, lb, ub, *_ = _instance(rng)
    x = rng.uniform(-100, 300, x0.size)
    y = kernels.project(x, lb, ub, np.maximum(ub - lb, 1e-12), 3, 2, 150.0, 60.0)
    assert np.all(y >= lb - 1e-9) and np.all(y <= ub + 1e-9)
    assert y[:5].sum() <= 150.0 * (1 + 1e-9) and y[5:].sum() <= 60.0 * (1 + 1e-9)


def test_psg_does_not_increase_value(rng):
    for _ in range(20):
        x0, lb, ub, a, b, nstar, alpha, gamma = _instance(rng)
        x0 = kernels.project(x0, lb, ub, ub - lb, 3, 2, 150.0, 60.0)
        theta = 1e6
        f0 = kernels.penalized_value(x0, a, b, nstar, alpha, gamma, theta, 0.5, 3)
        x, f, _, _ = kernels.psg_solve(x0, lb, ub, a, b, nstar, alpha, gamma, theta, 0.5,
                                       150.0, 60.0)
        assert f <= f0 + 1e-12


def test_pure_python_fallback_selected_by_env():
    env = dict(os.environ, ISAC_TRACK_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from isac_track import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
