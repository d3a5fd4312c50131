"""Series (best linear predictor) regression of pseudo-outcomes on a basis of Z.

``beta = (sum b_i b_i')^{-1} sum b_i psi_i`` with sandwich variance
``Omega = Q^{-1} Sigma Q^{-1}``. For rATE and Delta, ``Sigma`` includes the
correction for estimating the treatment shares ``pi``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy import stats

from .data import ObservationTable
from .scores import PARAMETERS, ScoreSet

BASIS_KINDS = ("intercept", "group_dummies", "polynomial", "bspline")
EIGEN_FLOOR = 1e-10


class SingularDesignError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class BasisSpec:
    """Basis for the heterogeneity variables.

    ``column`` indexes the table's heterogeneity columns (``table.z``).
    B-spline knots are given explicitly (``knots``) or as a count placed
    at empirical quantiles (``n_knots``); boundary knots sit at the data
    min and max.
    """

    kind: str = "intercept"
    column: int = 0
    degree: int = 1
    order: int = 4
    knots: tuple | None = None
    n_knots: int = 0

    def __post_init__(self):
        if self.kind not in BASIS_KINDS:
            raise ValueError(f"unknown basis kind {self.kind!r}; choose from {BASIS_KINDS}")
        if self.kind == "bspline" and self.order < 1:
            raise ValueError("B-spline order must be at least 1")
        if self.kind == "polynomial" and self.degree < 0:
            raise ValueError("polynomial degree must be nonnegative")
        if self.knots is not None:
            object.__setattr__(self, "knots", tuple(float(k) for k in self.knots))

    def resolve(self, z) -> "Basis":
        z = _as_2d(z)
        if self.kind == "intercept":
            return Basis(self, ())
        col = z[:, self.column]
        if self.kind == "group_dummies":
            return Basis(self, tuple(np.unique(col).tolist()))
        if self.kind == "polynomial":
            return Basis(self, ())
        lo, hi = float(col.min()), float(col.max())
        if not hi > lo:
            raise ValueError("B-spline basis needs a nondegenerate data range")
        if self.knots is not None:
            interior = np.asarray(self.knots, dtype=np.float64)
        elif self.n_knots:
            interior = np.unique(np.quantile(col, np.arange(1, self.n_knots + 1) / (self.n_knots + 1)))
        else:
            interior = np.zeros(0)
        if np.any(interior <= lo) or np.any(interior >= hi):
            raise ValueError("interior knots must lie strictly inside the data range")
        return Basis(self, (lo, hi, *np.sort(interior).tolist()))


@dataclass(frozen=True)
class Basis:
    """A basis resolved against data (group levels or knot locations fixed)."""

    spec: BasisSpec
    state: tuple = ()

    @property
    def k(self) -> int:
        s = self.spec
        if s.kind == "intercept":
            return 1
        if s.kind == "group_dummies":
            return len(self.state)
        if s.kind == "polynomial":
            return -1  # depends on the number of z columns; see design()
        return len(self.state) - 2 + s.order

    def column_names(self, z_names=None) -> list[str]:
        s = self.spec
        if s.kind == "intercept":
            return ["const"]
        if s.kind == "group_dummies":
            name = z_names[s.column] if z_names else f"z{s.column}"
            return [f"{name}={_fmt(v)}" for v in self.state]
        if s.kind == "polynomial":
            names = ["const"]
            for j, nm in enumerate(z_names or []):
                names += [nm if d == 1 else f"{nm}^{d}" for d in range(1, s.degree + 1)]
            return names
        return [f"B{j}" for j in range(self.k)]

    def design(self, z) -> np.ndarray:
        z = _as_2d(z)
        s = self.spec
        n = z.shape[0]
        if s.kind == "intercept":
            return np.ones((n, 1))
        if s.kind == "group_dummies":
            col = z[:, s.column]
            levels = np.asarray(self.state)
            out = (col[:, None] == levels[None, :]).astype(np.float64)
            unknown = out.sum(axis=1) == 0
            if np.any(unknown):
                raise ValueError(f"values {np.unique(col[unknown]).tolist()} are not known groups")
            return out
        if s.kind == "polynomial":
            cols = [np.ones(n)]
            for j in range(z.shape[1]):
                cols += [z[:, j] ** d for d in range(1, s.degree + 1)]
            return np.column_stack(cols)
        lo, hi = self.state[0], self.state[1]
        interior = np.asarray(self.state[2:], dtype=np.float64)
        knots = np.concatenate([np.full(s.order, lo), interior, np.full(s.order, hi)])
        return bspline_design(z[:, s.column], knots, s.order)


def _fmt(v):
    return str(int(v)) if float(v).is_integer() else repr(v)


def _as_2d(z):
    z = np.asarray(z, dtype=np.float64)
    return z.reshape(-1, 1) if z.ndim == 1 else z


def bspline_design(x, knots, order) -> np.ndarray:
    """B-spline basis of the given order by the Cox-de Boor recursion.

    ``knots`` is the full (clamped) knot vector. Points outside the
    boundary knots are clamped to them; the right boundary belongs to the
    last nondegenerate interval so the basis is a partition of unity on
    the closed range.
    """
    x = np.clip(np.asarray(x, dtype=np.float64), knots[0], knots[-1])
    knots = np.asarray(knots, dtype=np.float64)
    n_int = knots.size - 1
    basis = np.zeros((x.size, n_int))
    for i in range(n_int):
        if knots[i + 1] > knots[i]:
            basis[:, i] = (knots[i] <= x) & (x < knots[i + 1])
    last = np.flatnonzero(knots[1:] > knots[:-1])[-1]
    basis[x == knots[-1], last] = 1.0
    for k in range(2, order + 1):
        nxt = np.zeros((x.size, n_int - k + 1))
        for i in range(n_int - k + 1):
            left_den = knots[i + k - 1] - knots[i]
            right_den = knots[i + k] - knots[i + 1]
            term = np.zeros(x.size)
            if left_den > 0:
                term += (x - knots[i]) / left_den * basis[:, i]
            if right_den > 0:
                term += (knots[i + k] - x) / right_den * basis[:, i + 1]
            nxt[:, i] = term
        basis = nxt
    return basis


def build_basis(table: ObservationTable, spec: BasisSpec):
    """Design matrix ``b(Z_i)`` for every row, and the resolved basis."""
    basis = spec.resolve(table.z)
    return basis.design(table.z), basis


@dataclass(frozen=True, eq=False)
class BlpFit:
    """Least-squares projection of one pseudo-outcome on a basis."""

    label: str
    beta: np.ndarray
    Q: np.ndarray
    Sigma: np.ndarray | None
    Omega: np.ndarray | None
    n: int
    basis: Basis | None
    residuals: np.ndarray = field(repr=False, default=None)
    names: tuple = ()

    @property
    def k(self) -> int:
        return self.beta.size

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.Omega) / self.n)

    def row(self, z0) -> np.ndarray:
        if self.basis is None:
            raise ValueError("fit has no basis; pass basis rows directly")
        return self.basis.design(np.atleast_1d(z0).reshape(-1, 1) if np.ndim(z0) <= 1 else z0)

    def predict(self, z0) -> np.ndarray:
        return self.row(z0) @ self.beta


def _eigen_inverse(Q, names=None):
    Q = 0.5 * (Q + Q.T)
    evals, evecs = np.linalg.eigh(Q)
    top = max(evals[-1], 0.0)
    small = evals <= EIGEN_FLOOR * top if top > 0 else np.ones_like(evals, dtype=bool)
    if np.any(small):
        v = evecs[:, small]
        load = np.abs(v).max(axis=1)
        cols = np.flatnonzero(load > 1e-3)
        labels = [names[c] for c in cols] if names else cols.tolist()
        raise SingularDesignError(f"basis design is (near) singular; offending columns: {labels}")
    return (evecs / evals) @ evecs.T


def fit_blp(pseudo, design, weights=None, label="", basis=None, names=()) -> BlpFit:
    """Least squares of ``pseudo`` on ``design`` (no variance yet)."""
    b = np.asarray(design, dtype=np.float64)
    y = np.asarray(pseudo, dtype=np.float64)
    n, k = b.shape
    if k > n:
        raise SingularDesignError(f"basis has k={k} columns for n={n} rows")
    if weights is None:
        Q = b.T @ b / n
        cross = b.T @ y / n
    else:
        Q = (b * weights[:, None]).T @ b
        cross = (b * weights[:, None]).T @ y
    Qinv = _eigen_inverse(Q, list(names) if names else None)
    beta = Qinv @ cross
    return BlpFit(label, beta, Q, None, None, n, basis, y - b @ beta, tuple(names))


def pi_correction(scores: ScoreSet, design, table: ObservationTable) -> np.ndarray:
    """Per-row k-vectors ``a_i`` for the treatment-share estimation error.

    ``a_i = sum_{t>0} E_n[b (psi_t - psi_0)] (D_t (1 - pi_0) + D_0 pi_t) / (1 - pi_0)^2``
    """
    pi = scores.pi_hat
    treated = 1.0 - pi[0]
    if not treated > 0:
        raise ValueError("pi_0 = 1: no treated units")
    contrast = scores.psi_t[:, 1:] - scores.psi_t[:, [0]]
    gamma = np.stack([table.mean(design * contrast[:, [j]]) for j in range(contrast.shape[1])])
    dt = table.indicators()
    coef = (dt[:, 1:] * treated + dt[:, [0]] * pi[None, 1:]) / treated ** 2
    return coef @ gamma


def variance(fit: BlpFit, scores: ScoreSet, design, table: ObservationTable) -> BlpFit:
    """Attach ``Sigma`` and ``Omega = Q^-1 Sigma Q^-1`` to ``fit``.

    nATE uses the plain heteroskedasticity-robust ``E_n[b b' e^2]``;
    rATE adds and Delta subtracts the centered share correction ``a_i``.
    """
    b = np.asarray(design, dtype=np.float64)
    be = b * fit.residuals[:, None]
    if fit.label == "nATE":
        s = be
    elif fit.label in ("rATE", "Delta"):
        a = pi_correction(scores, b, table)
        a = a - table.mean(a)
        s = be + a if fit.label == "rATE" else be - a
    else:
        raise ValueError(f"unknown parameter label {fit.label!r}")
    if table.weights is None:
        Sigma = s.T @ s / s.shape[0]
    else:
        Sigma = (s * table.weights[:, None]).T @ s
    Qinv = _eigen_inverse(fit.Q)
    Omega = Qinv @ Sigma @ Qinv
    Omega = 0.5 * (Omega + Omega.T)
    return replace(fit, Sigma=Sigma, Omega=Omega)


def estimate_blp(scores: ScoreSet, table: ObservationTable, spec_or_basis, label: str) -> BlpFit:
    """Fit and attach variance for one decomposition parameter."""
    if label not in PARAMETERS:
        raise ValueError(f"unknown parameter label {label!r}")
    basis = spec_or_basis if isinstance(spec_or_basis, Basis) else spec_or_basis.resolve(table.z)
    design = basis.design(table.z)
    z_names = [table.column_names[c] for c in table.z_cols]
    names = basis.column_names(z_names)
    if len(names) != design.shape[1]:
        names = [f"b{j}" for j in range(design.shape[1])]
    fit = fit_blp(scores[label], design, table.weights, label, basis, names)
    return variance(fit, scores, design, table)


def estimate_all(scores: ScoreSet, table: ObservationTable, spec_or_basis) -> dict:
    basis = spec_or_basis if isinstance(spec_or_basis, Basis) else spec_or_basis.resolve(table.z)
    return {label: estimate_blp(scores, table, basis, label) for label in PARAMETERS}


def normal_quantile(level: float) -> float:
    if not 0 < level < 1:
        raise ValueError("confidence level must lie in (0, 1)")
    return float(stats.norm.ppf(0.5 + level / 2))


def confidence_interval(fit: BlpFit, z0=None, level: float = 0.95, row=None):
    """Pointwise interval ``b(z0)'beta +/- q sqrt(b(z0)' Omega b(z0) / n)``.

    Pass ``row`` to use a basis row (or contrast vector) directly.
    Returns ``(lo, hi)`` arrays, one entry per evaluation point.
    """
    q = normal_quantile(level)
    b = np.atleast_2d(np.asarray(row, dtype=np.float64)) if row is not None else fit.row(z0)
    center = b @ fit.beta
    half = q * np.sqrt(np.einsum("ij,jk,ik->i", b, fit.Omega, b) / fit.n)
    return center - half, center + half


def coefficient_ci(fit: BlpFit, j: int, level: float = 0.95):
    e = np.zeros(fit.k)
    e[j] = 1.0
    lo, hi = confidence_interval(fit, row=e, level=level)
    return float(lo[0]), float(hi[0])


@dataclass(frozen=True)
class WaldResult:
    statistic: float
    df: int
    pvalue: float


def wald_test(fit: BlpFit, R, r=None) -> WaldResult:
    """``W = n (R beta - r)' (R Omega R')^{-1} (R beta - r)`` against chi-square(q)."""
    R = np.atleast_2d(np.asarray(R, dtype=np.float64))
    q = R.shape[0]
    r = np.zeros(q) if r is None else np.atleast_1d(np.asarray(r, dtype=np.float64))
    if np.linalg.matrix_rank(R) < q:
        raise ValueError("contrast matrix R must have full row rank")
    V = R @ fit.Omega @ R.T
    evals = np.linalg.eigvalsh(0.5 * (V + V.T))
    if evals[0] <= EIGEN_FLOOR * max(evals[-1], 1e-300):
        raise np.linalg.LinAlgError("R Omega R' is singular")
    diff = R @ fit.beta - r
    W = float(fit.n * diff @ np.linalg.solve(V, diff))
    return WaldResult(W, q, float(stats.chi2.sf(W, q)))


def homogeneity_contrast(fit: BlpFit) -> np.ndarray | None:
    """Contrast whose null is "the projected function is constant in z".

    For bases that sum to one (group dummies, B-splines) that is equality
    of all coefficients; for polynomials, zero non-constant terms.
    """
    k = fit.k
    if k < 2:
        return None
    kind = fit.basis.spec.kind if fit.basis is not None else None
    if kind == "polynomial":
        return np.eye(k)[1:]
    R = np.zeros((k - 1, k))
    R[:, 0] = -1.0
    R[np.arange(k - 1), np.arange(1, k)] = 1.0
    return R


def loocv_mse(pseudo, design) -> float:
    """Leave-one-out MSE from the hat-matrix shortcut ``e_i / (1 - h_ii)``."""
    b = np.asarray(design, dtype=np.float64)
    y = np.asarray(pseudo, dtype=np.float64)
    gram = b.T @ b
    Ginv = _eigen_inverse(gram / b.shape[0]) / b.shape[0]
    h = np.einsum("ij,jk,ik->i", b, Ginv, b)
    if np.any(h >= 1 - 1e-10):
        return np.inf
    resid = y - b @ (Ginv @ (b.T @ y))
    return float(np.mean((resid / (1 - h)) ** 2))


def default_candidates() -> list[BasisSpec]:
    return [BasisSpec("bspline", order=m, n_knots=kn) for m in (2, 3, 4) for kn in (0, 1, 2, 3)]


@dataclass(frozen=True)
class BasisSelection:
    per_parameter: dict
    common: Basis
    scores: dict


def loocv_select_basis(pseudo: dict, table: ObservationTable, candidates=None) -> BasisSelection:
    """Choose a basis per parameter by leave-one-out CV, then the most flexible winner for all.

    Candidates that cannot be fit (singular design, leverage 1) are
    disqualified. Among equal LOOCV scores the earlier candidate wins.
    The common basis is the winner with the most columns, so the three
    fitted curves stay additive.
    """
    candidates = list(candidates or default_candidates())
    if not candidates:
        raise ValueError("need at least one candidate basis")
    resolved = []
    for spec in candidates:
        try:
            basis = spec.resolve(table.z)
            resolved.append((basis, basis.design(table.z)))
        except ValueError:
            resolved.append((None, None))
    per, cv = {}, {}
    for label, values in pseudo.items():
        scores = []
        for basis, design in resolved:
            if basis is None:
                scores.append(np.inf)
                continue
            try:
                scores.append(loocv_mse(values, design))
            except SingularDesignError:
                scores.append(np.inf)
        scores = np.asarray(scores)
        if not np.isfinite(scores).any():
            raise ValueError(f"no candidate basis is fittable for {label}")
        best = int(np.flatnonzero(scores == scores.min())[0])
        per[label] = resolved[best][0]
        cv[label] = scores
    winners = list(per.values())
    ks = [resolved[[b for b, _ in resolved].index(w)][1].shape[1] for w in winners]
    common = winners[int(np.argmax(ks))]
    return BasisSelection(per, common, cv)


def fit_report(fits: dict, level: float = 0.95) -> dict:
    """JSON-ready report: coefficients, standard errors, intervals, Wald tests."""
    out = {}
    for label, fit in fits.items():
        cis = [coefficient_ci(fit, j, level) for j in range(fit.k)]
        block = {
            "basis": _basis_dict(fit.basis),
            "columns": list(fit.names),
            "beta": fit.beta.tolist(),
            "se": fit.se.tolist(),
            "ci": [list(c) for c in cis],
            "level": level,
            "n": fit.n,
            "wald": {},
        }
        R = homogeneity_contrast(fit)
        if R is not None:
            block["wald"]["homogeneity"] = _wald_dict(fit, R)
        block["wald"]["zero"] = _wald_dict(fit, np.eye(fit.k))
        out[label] = block
    return out


def _wald_dict(fit, R):
    try:
        w = wald_test(fit, R)
    except np.linalg.LinAlgError:
        return {"statistic": None, "df": int(np.atleast_2d(R).shape[0]), "pvalue": None}
    return {"statistic": w.statistic, "df": w.df, "pvalue": w.pvalue}


def _basis_dict(basis):
    if basis is None:
        return None
    s = basis.spec
    d = {"kind": s.kind, "column": s.column}
    if s.kind == "polynomial":
        d["degree"] = s.degree
    if s.kind == "bspline":
        d["order"] = s.order
        d["boundary"] = list(basis.state[:2])
        d["knots"] = list(basis.state[2:])
    if s.kind == "group_dummies":
        d["levels"] = list(basis.state)
    return d


def curve_frame(fits: dict, z_grid, level: float = 0.95) -> pd.DataFrame:
    """Fitted curves and pointwise intervals over ``z_grid`` (plot-ready)."""
    z_grid = np.asarray(z_grid, dtype=np.float64)
    df = pd.DataFrame({"z": z_grid})
    for label, fit in fits.items():
        lo, hi = confidence_interval(fit, z_grid, level)
        df[label] = fit.predict(z_grid)
        df[f"{label}_lo"] = lo
        df[f"{label}_hi"] = hi
    return df
