"""Compiled and pure-Python kernels must solve the same problems."""
import numpy as np
import pytest

from hetdecomp import _kernels
from hetdecomp._kernels import _cd_py, _logit_py

compiled = pytest.mark.skipif(_kernels.BACKEND != "cython", reason="extension not built")


def _lasso_problem(rng, n=120, p=15):
    x = np.asfortranarray(rng.standard_normal((n, p)))
    beta = np.zeros(p)
    beta[:3] = (2.0, -1.5, 1.0)
    y = x @ beta + rng.standard_normal(n)
    return x, y - y.mean()


def _logit_problem(rng, n=300, p=6, k=3):
    x = rng.standard_normal((n, p))
    xa = np.ascontiguousarray(np.hstack([np.ones((n, 1)), x]))
    t = rng.integers(0, k, n).astype(np.int64)
    L = np.linalg.norm(xa, 2) ** 2 * 0.5 / n
    return xa, t, 1.0 / L, k


def test_backend_name_is_known():
    assert _kernels.BACKEND in ("cython", "python")


@compiled
@pytest.mark.parametrize("lam", [0.01, 0.1, 0.5])
def test_lasso_backends_agree(rng, lam):
    from hetdecomp._kernels import _cd

    x, y = _lasso_problem(rng)
    b_c = np.zeros(x.shape[1])
    b_p = np.zeros(x.shape[1])
    _cd.lasso_cd(x, y, b_c, lam, 1e-12, 100_000)
    _cd_py.lasso_cd(x, y, b_p, lam, 1e-12, 100_000)
    np.testing.assert_allclose(b_c, b_p, atol=1e-10)


@compiled
@pytest.mark.parametrize("lam", [0.0, 0.005, 0.05])
def test_fista_backends_agree(rng, lam):
    from hetdecomp._kernels import _logit

    xa, t, step, k = _logit_problem(rng)
    th_c = np.zeros((xa.shape[1], k - 1))
    th_p = np.zeros((xa.shape[1], k - 1))
    it_c, _ = _logit.logit_fista(xa, t, th_c, lam, step, 1e-10, 50_000, np.empty(0))
    it_p, _ = _logit_py.logit_fista(xa, t, th_p, lam, step, 1e-10, 50_000, np.empty(0))
    assert it_c > 0 and it_p > 0
    onehot = np.eye(k)[t]
    obj_c = _logit_py._objective(xa, onehot, th_c, lam)
    obj_p = _logit_py._objective(xa, onehot, th_p, lam)
    assert abs(obj_c - obj_p) <= 1e-12
    np.testing.assert_allclose(th_c, th_p, atol=1e-6)


@pytest.mark.parametrize("impl", ["python", "compiled"])
def test_fista_trace_is_monotone(rng, impl):
    if impl == "compiled":
        if _kernels.BACKEND != "cython":
            pytest.skip("extension not built")
        from hetdecomp._kernels._logit import logit_fista
    else:
        logit_fista = _logit_py.logit_fista
    xa, t, step, k = _logit_problem(rng)
    theta = np.zeros((xa.shape[1], k - 1))
    trace = np.empty(5001)
    it, n_trace = logit_fista(xa, t, theta, 0.01, step, 1e-9, 5000, trace)
    assert it > 0
    assert np.all(np.diff(trace[:n_trace]) <= 0)


def test_fista_reports_nonconvergence(rng):
    xa, t, step, k = _logit_problem(rng)
    theta = np.zeros((xa.shape[1], k - 1))
    it, _ = _kernels.logit_fista(xa, t, theta, 0.001, step, 1e-14, 3, np.empty(0))
    assert it == -1
