"""Post-estimation diagnostics for overlap and internal consistency."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .crossfit import CrossFittedNuisances
from .data import ObservationTable
from .scores import ScoreSet

QUANTILE_LEVELS = (0.0, 0.01, 0.05, 0.25, 0.5)
QUANTILE_NAMES = ("min", "q01", "q05", "q25", "q50")
OVERLAP_THRESHOLD = 0.05
IDENTITY_RTOL = 1e-10


@dataclass(frozen=True)
class OverlapReport:
    labels: tuple
    quantiles: np.ndarray  # (J + 1) x 5
    clip_count: int
    clip_by_treatment: tuple
    threshold: float
    flags: tuple

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "clip_count": self.clip_count,
            "clip_by_treatment": dict(zip(self.labels, self.clip_by_treatment)) if self.clip_by_treatment else {},
            "rescaled_propensity_quantiles": {
                lab: dict(zip(QUANTILE_NAMES, row.tolist())) for lab, row in zip(self.labels, self.quantiles)
            },
            "flags": list(self.flags),
        }

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.quantiles, columns=list(QUANTILE_NAMES))
        df.insert(0, "treatment", list(self.labels))
        return df

    def to_text(self) -> str:
        lines = [f"overlap: e_t(x)/pi_t quantiles (flag if q01 < {self.threshold:g})"]
        lines.append("treatment " + " ".join(f"{q:>10s}" for q in QUANTILE_NAMES))
        for lab, row in zip(self.labels, self.quantiles):
            lines.append(f"{lab:<9s} " + " ".join(f"{v:10.4f}" for v in row))
        lines.append(f"clipped propensities: {self.clip_count}")
        lines += [f"FLAG: {f}" for f in self.flags] or ["no flags"]
        return "\n".join(lines)


def overlap_report(nuis: CrossFittedNuisances, labels=None,
                   threshold: float = OVERLAP_THRESHOLD) -> OverlapReport:
    """Quantiles of the re-scaled propensities ``e_t(X_i) / pi_t`` per treatment.

    A treatment is flagged when its 1% quantile falls below ``threshold``
    or when any of its propensities were floored.
    """
    k = nuis.e_hat.shape[1]
    labels = tuple(str(v) for v in (labels or range(k)))
    pi = nuis.pi_hat
    rescaled = nuis.e_hat / np.where(pi > 0, pi, np.nan)[None, :]
    qs = np.quantile(rescaled, QUANTILE_LEVELS, axis=0).T
    clips = nuis.clip_by_treatment or (0,) * k
    flags = []
    for j in range(k):
        if pi[j] <= 0:
            flags.append(f"treatment {labels[j]}: zero share")
        elif qs[j, 1] < threshold:
            flags.append(f"treatment {labels[j]}: 1% quantile of e/pi is {qs[j, 1]:.4g} < {threshold:g}")
        if clips[j]:
            flags.append(f"treatment {labels[j]}: {clips[j]} propensities floored")
    return OverlapReport(labels, qs, int(nuis.clip_count), tuple(int(c) for c in clips), threshold,
                         tuple(flags))


@dataclass(frozen=True)
class ApoTable:
    labels: tuple
    mean: np.ndarray
    se: np.ndarray
    diff: np.ndarray  # APO(t) - APO(0)
    diff_se: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"treatment": list(self.labels), "apo": self.mean, "se": self.se,
                             "diff_vs_control": self.diff, "diff_se": self.diff_se})

    def to_dict(self) -> dict:
        return {lab: {"apo": float(m), "se": float(s), "diff_vs_control": float(d), "diff_se": float(ds)}
                for lab, m, s, d, ds in zip(self.labels, self.mean, self.se, self.diff, self.diff_se)}

    def to_text(self) -> str:
        lines = ["average potential outcomes", f"{'treatment':<10s}{'apo':>12s}{'se':>12s}{'vs ctrl':>12s}{'se':>12s}"]
        for lab, m, s, d, ds in zip(self.labels, self.mean, self.se, self.diff, self.diff_se):
            lines.append(f"{lab:<10s}{m:12.4f}{s:12.4f}{d:12.4f}{ds:12.4f}")
        return "\n".join(lines)


def _mean_se(values, table):
    if table is not None and table.weights is not None:
        w = table.weights
        m = w @ values
        var = w @ (values - m) ** 2
        return m, np.sqrt(var / values.shape[0])
    n = values.shape[0]
    m = values.mean(axis=0)
    sd = values.std(axis=0, ddof=1) if n > 1 else np.zeros_like(m)
    return m, sd / np.sqrt(n)


def apo_table(scores: ScoreSet, labels=None, table: ObservationTable | None = None) -> ApoTable:
    """Mean and standard error of each treatment's AIPW score, plus contrasts with control.

    With a weighted (population) table the means are weighted.
    """
    psi = scores.psi_t
    labels = tuple(str(v) for v in (labels or range(psi.shape[1])))
    mean, se = _mean_se(psi, table)
    dmean, dse = _mean_se(psi - psi[:, [0]], table)
    return ApoTable(labels, mean, se, dmean, dse)


@dataclass(frozen=True)
class IdentityAudit:
    max_deviation: float
    scale: float
    rtol: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.rtol * max(self.scale, 1.0)

    def to_dict(self) -> dict:
        return {"max_deviation": self.max_deviation, "scale": self.scale, "rtol": self.rtol,
                "passed": self.passed}


def identity_audit(fits: dict, rtol: float = IDENTITY_RTOL) -> IdentityAudit:
    """Check ``beta(nATE) = beta(rATE) + beta(Delta)`` coefficient by coefficient."""
    n_, r_, d_ = fits["nATE"], fits["rATE"], fits["Delta"]
    if not (n_.basis == r_.basis == d_.basis) or not (n_.k == r_.k == d_.k):
        raise ValueError("identity audit needs the three fits on a common basis")
    dev = n_.beta - r_.beta - d_.beta
    return IdentityAudit(float(np.max(np.abs(dev))), float(np.max(np.abs(n_.beta))), rtol)


def score_additivity(scores: ScoreSet) -> float:
    """Largest row-wise ``|nATE - rATE - Delta|`` relative to the pseudo-outcome scale."""
    dev = scores["nATE"] - scores["rATE"] - scores["Delta"]
    scale = max(float(np.max(np.abs(scores["nATE"]))), 1.0)
    return float(np.max(np.abs(dev))) / scale


def diagnostics_dict(overlap: OverlapReport, apo: ApoTable, audit: IdentityAudit | None = None) -> dict:
    out = {"overlap": overlap.to_dict(), "apo": apo.to_dict()}
    if audit is not None:
        out["identity_audit"] = audit.to_dict()
    return out


def dumps(obj) -> str:
    """Canonical JSON (sorted keys, fixed float repr) so reruns are byte-identical."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"
