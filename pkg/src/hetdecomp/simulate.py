"""Monte Carlo coverage study for the decomposition under a multinomial-logit design.

Confounders are uniform on ``[-1, 1]^p``; treatment follows a multinomial
logit in the first confounder; only treatment 1 shifts the outcome (by
``tau``). The projection target is the line ``alpha + beta * x1``.
"""
from __future__ import annotations

import math
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from .blp import BasisSpec, coefficient_ci, estimate_all, wald_test
from .crossfit import cross_fit, make_folds, oracle_nuisances
from .data import ObservationTable
from .learners import LearnerConfig
from .scores import PARAMETERS, compute_scores

MODES = ("oracle", "parametric", "dml")
COEFFICIENTS = ("alpha", "beta")


@dataclass(frozen=True)
class McDesign:
    n: int = 1000
    p: int = 10
    J: int = 2
    tau: float = 10.0
    beta: tuple | None = None  # logit slopes for t = 1..J; default (1, 0, ..., 0)
    reps: int = 1000
    K: int = 2
    mode: str = "parametric"
    seed: int = 0
    level: float = 0.95
    threads: int = 1
    cv_folds: int = 5

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; valid modes: {', '.join(MODES)}")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.n < 2 or self.p < 1 or self.J < 1:
            raise ValueError("need n >= 2, p >= 1 and J >= 1")
        if self.K < 2:
            raise ValueError("K must be at least 2")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        beta = self.beta
        if beta is None:
            beta = (1.0,) + (0.0,) * (self.J - 1)
        beta = tuple(float(b) for b in beta)
        if len(beta) != self.J:
            raise ValueError(f"beta needs J={self.J} entries")
        object.__setattr__(self, "beta", beta)

    def slopes(self) -> np.ndarray:
        return np.asarray(self.beta)


def propensities(x1, slopes) -> np.ndarray:
    """``P(T = t | x1)`` for ``t = 0..J`` under the logit with control as base."""
    x1 = np.asarray(x1, dtype=np.float64)
    eta = np.column_stack([np.zeros_like(x1)] + [x1 * b for b in slopes])
    eta -= eta.max(axis=1, keepdims=True)
    w = np.exp(eta)
    return w / w.sum(axis=1, keepdims=True)


def outcome_means(design: McDesign, n: int) -> np.ndarray:
    mu = np.zeros((n, design.J + 1))
    mu[:, 1] = design.tau
    return mu


def generate_dataset(design: McDesign, rng) -> ObservationTable:
    """One simulated sample; ``rng`` is anything ``np.random.default_rng`` accepts."""
    rng = np.random.default_rng(rng)
    n, p = design.n, design.p
    x = rng.uniform(-1.0, 1.0, size=(n, p))
    u = rng.standard_normal(n)
    e = propensities(x[:, 0], design.slopes())
    cum = np.cumsum(e, axis=1)
    draw = rng.uniform(size=n)
    t = np.minimum((draw[:, None] > cum).sum(axis=1), design.J)
    y = u + design.tau * (t == 1)
    names = tuple(f"x{j + 1}" for j in range(p))
    return ObservationTable.from_arrays(y, t, x, z_cols=(0,), column_names=names,
                                        treatment_labels=tuple(str(v) for v in range(design.J + 1)))


def adaptive_simpson(f, a, b, tol=1e-9, max_depth=50) -> float:
    """Adaptive Simpson quadrature with absolute tolerance ``tol``."""

    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        diff = left + right - whole
        if abs(diff) <= 15.0 * tol:
            return left + right + diff / 15.0
        if depth <= 0:
            raise ArithmeticError(f"adaptive Simpson did not converge on [{a}, {b}]")
        return (recurse(a, m, fa, flm, fm, left, tol / 2, depth - 1)
                + recurse(m, b, fm, frm, fb, right, tol / 2, depth - 1))

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def population_shares(design: McDesign, tol=1e-10) -> np.ndarray:
    slopes = design.slopes()
    return np.array([
        adaptive_simpson(lambda v, j=j: propensities(np.array([v]), slopes)[0, j], -1.0, 1.0, tol) / 2.0
        for j in range(design.J + 1)
    ])


def true_blp_params(design: McDesign, tol=1e-9) -> dict:
    """Population ``(alpha, beta)`` of the line ``alpha + beta x1`` for each parameter.

    With ``X1 ~ U[-1, 1]``: ``alpha = E[g(X1)]`` and ``beta = 3 E[g(X1) X1]``.
    """
    slopes = design.slopes()
    pi = population_shares(design)
    share_ratio = pi[1] / (1.0 - pi[0])

    def natural(v):
        e = propensities(np.array([v]), slopes)[0]
        return design.tau * e[1] / (1.0 - e[0])

    mean_n = adaptive_simpson(natural, -1.0, 1.0, tol) / 2.0
    slope_n = 3.0 * adaptive_simpson(lambda v: natural(v) * v, -1.0, 1.0, tol) / 2.0
    r_alpha = design.tau * share_ratio
    return {
        "rATE": (r_alpha, 0.0),
        "nATE": (mean_n, slope_n),
        "Delta": (mean_n - r_alpha, slope_n),
    }


def learner_config(design: McDesign) -> LearnerConfig:
    if design.mode == "parametric":
        return LearnerConfig(outcome="ols", propensity="logit", propensity_columns=(0,))
    return LearnerConfig(outcome="lasso", propensity="logit_l1", cv_folds=design.cv_folds)


@dataclass(frozen=True)
class RepOutcome:
    index: int
    ok: bool
    hits: dict = field(default_factory=dict)  # (label, coef) -> bool
    widths: dict = field(default_factory=dict)
    estimates: dict = field(default_factory=dict)
    slope_zero_rejected: bool = False
    error: str = ""


def run_rep(design: McDesign, index: int, seed_seq, truth: dict) -> RepOutcome:
    """One replication: draw a sample, then record CI hits against the truth."""
    data_seq, fold_seq = seed_seq.spawn(2)
    try:
        table = generate_dataset(design, data_seq)
        if design.mode == "oracle":
            nuis = oracle_nuisances(table, outcome_means(design, table.n),
                                    propensities(table.x[:, 0], design.slopes()))
        else:
            plan = None
            if design.mode == "dml":
                plan = make_folds(table.n, design.K, np.random.default_rng(fold_seq), stratify_by=table.t)
            nuis = cross_fit(table, plan, learner_config(design))
        scores = compute_scores(nuis, table)
        fits = estimate_all(scores, table, BasisSpec("polynomial", degree=1))
        hits, widths, est = {}, {}, {}
        for label in PARAMETERS:
            for j, coef in enumerate(COEFFICIENTS):
                lo, hi = coefficient_ci(fits[label], j, design.level)
                hits[(label, coef)] = bool(lo <= truth[label][j] <= hi)
                widths[(label, coef)] = hi - lo
                est[(label, coef)] = float(fits[label].beta[j])
        wald = wald_test(fits["rATE"], [[0.0, 1.0]], [truth["rATE"][1]])
        return RepOutcome(index, True, hits, widths, est, bool(wald.pvalue < 1 - design.level))
    except Exception as exc:  # noqa: BLE001 - rep failures are counted, not raised
        msg = f"{type(exc).__name__}: {exc}"
        if os.environ.get("HETDECOMP_DEBUG"):
            msg += "\n" + traceback.format_exc()
        return RepOutcome(index, False, error=msg)


def _run_chunk(args):
    design, indices, seqs, truth = args
    return [run_rep(design, i, s, truth) for i, s in zip(indices, seqs)]


@dataclass(frozen=True)
class McResult:
    design: McDesign
    truth: dict
    coverage: dict
    mean_width: dict
    mean_estimate: dict
    reps_ok: int
    failures: int
    failure_messages: tuple
    wald_rejection_rate: float
    runtime: float = field(compare=False, default=0.0)

    @property
    def failure_rate(self) -> float:
        return self.failures / self.design.reps

    def table(self) -> pd.DataFrame:
        """Coverage laid out with coefficients as rows and parameters as columns."""
        rows = []
        for coef in COEFFICIENTS:
            row = {"p": self.design.p, "coefficient": coef}
            for label in ("rATE", "nATE", "Delta"):
                row[label] = self.coverage[(label, coef)]
            rows.append(row)
        return pd.DataFrame(rows)

    def to_dict(self) -> dict:
        """Report payload; deterministic given the design (runtime excluded)."""
        def nested(d):
            return {label: {c: d[(label, c)] for c in COEFFICIENTS} for label in ("rATE", "nATE", "Delta")}

        design = asdict(self.design)
        design["beta"] = list(design["beta"])
        design.pop("threads")
        return {
            "design": design,
            "truth": {k: {"alpha": v[0], "beta": v[1]} for k, v in self.truth.items()},
            "coverage": nested(self.coverage),
            "mean_ci_width": nested(self.mean_width),
            "mean_estimate": nested(self.mean_estimate),
            "reps_ok": self.reps_ok,
            "failures": self.failures,
            "failure_messages": sorted(set(self.failure_messages)),
            "rate_slope_wald_rejection": self.wald_rejection_rate,
        }


def rep_seeds(design: McDesign):
    return np.random.SeedSequence(design.seed).spawn(design.reps)


def run_study(design: McDesign, progress=None) -> McResult:
    """Run all replications (in worker processes when ``threads > 1``) and aggregate.

    Each replication draws from its own child of ``SeedSequence(seed)``, so
    results do not depend on the number of workers or execution order.
    """
    start = time.perf_counter()
    truth = true_blp_params(design)
    seqs = rep_seeds(design)
    indices = list(range(design.reps))
    if design.threads == 1:
        outcomes = []
        for i, s in zip(indices, seqs):
            outcomes.append(run_rep(design, i, s, truth))
            if progress is not None:
                progress(i + 1, design.reps)
    else:
        size = math.ceil(design.reps / (4 * design.threads))
        chunks = [(design, indices[a:a + size], seqs[a:a + size], truth)
                  for a in range(0, design.reps, size)]
        with ProcessPoolExecutor(max_workers=design.threads) as pool:
            outcomes = [o for chunk in pool.map(_run_chunk, chunks) for o in chunk]
    return summarize(design, truth, outcomes, time.perf_counter() - start)


def summarize(design: McDesign, truth: dict, outcomes, runtime=0.0) -> McResult:
    outcomes = sorted(outcomes, key=lambda o: o.index)
    good = [o for o in outcomes if o.ok]
    keys = [(label, c) for label in PARAMETERS for c in COEFFICIENTS]
    nan = float("nan")
    if good:
        coverage = {k: sum(o.hits[k] for o in good) / len(good) for k in keys}
        width = {k: float(np.mean([o.widths[k] for o in good])) for k in keys}
        est = {k: float(np.mean([o.estimates[k] for o in good])) for k in keys}
        wald = sum(o.slope_zero_rejected for o in good) / len(good)
    else:
        coverage = width = est = {k: nan for k in keys}
        wald = nan
    failures = [o.error for o in outcomes if not o.ok]
    return McResult(design, truth, coverage, width, est, len(good), len(failures), tuple(failures),
                    wald, runtime)
