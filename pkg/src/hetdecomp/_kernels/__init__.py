"""Hot numerical kernels: lasso coordinate descent and l1 multinomial-logit FISTA.

The compiled Cython build is used when importable; set
``HETDECOMP_PURE_PYTHON=1`` to force the pure-Python fallback.
"""
import os

from . import _cd_py, _logit_py

if os.environ.get("HETDECOMP_PURE_PYTHON"):
    lasso_cd = _cd_py.lasso_cd
    logit_fista = _logit_py.logit_fista
    BACKEND = "python"
else:
    try:
        from ._cd import lasso_cd
        from ._logit import logit_fista
        BACKEND = "cython"
    except ImportError:  # extension not built
        lasso_cd = _cd_py.lasso_cd
        logit_fista = _logit_py.logit_fista
        BACKEND = "python"

__all__ = ["lasso_cd", "logit_fista", "BACKEND"]
