"""Observational data container and CSV ingestion.

An :class:`ObservationTable` holds the outcome ``y``, the effective
treatment code ``t`` in ``0..J``, the derived binary indicator
``d = 1[t != 0]``, the confounder matrix ``x`` and the selection of
heterogeneity columns ``z_cols``. Tables may carry population weights,
which turns every downstream sample average into an exact weighted sum
over a finite population.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd


class DataError(ValueError):
    """Raised when input data violates the table contract."""


@dataclass(frozen=True)
class ColumnSpec:
    """Which CSV columns play which role."""

    outcome_column: str
    treatment_column: str
    control_label: object
    confounder_columns: tuple[str, ...]
    heterogeneity_columns: tuple[str, ...] = ()
    weight_column: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "confounder_columns", tuple(self.confounder_columns))
        object.__setattr__(self, "heterogeneity_columns", tuple(self.heterogeneity_columns))
        missing = [c for c in self.heterogeneity_columns if c not in self.confounder_columns]
        if missing:
            raise DataError(
                f"heterogeneity columns must be confounders; not in confounder_columns: {missing}"
            )
        if len(set(self.confounder_columns)) != len(self.confounder_columns):
            raise DataError("duplicate confounder columns")


@dataclass(frozen=True, eq=False)
class ObservationTable:
    """Immutable observational sample (or weighted finite population).

    Use :meth:`from_arrays` to build one; it derives ``d`` and remaps
    treatment codes. Direct construction validates every invariant and
    raises :class:`DataError` instead of repairing anything.
    """

    y: np.ndarray
    t: np.ndarray
    d: np.ndarray
    x: np.ndarray
    z_cols: tuple[int, ...] = ()
    treatment_labels: tuple = ()
    column_names: tuple[str, ...] = ()
    weights: np.ndarray | None = None
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        y = np.array(self.y, dtype=np.float64)
        t = np.asarray(self.t)
        if not np.issubdtype(t.dtype, np.integer):
            if np.any(t != np.round(t)):
                raise DataError("treatment codes must be integers")
            t = t.astype(np.int64)
        t = t.astype(np.int64)
        d = np.asarray(self.d).astype(np.int64)
        x = np.array(self.x, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        n = y.shape[0]
        if n == 0:
            raise DataError("empty table")
        if y.ndim != 1 or t.shape != (n,) or d.shape != (n,) or x.shape[0] != n:
            raise DataError("y, t, d and x must have matching numbers of rows")
        if not np.all(np.isfinite(y)):
            raise DataError("non-finite values in outcome")
        if not np.all(np.isfinite(x)):
            raise DataError("non-finite values in confounders")
        if t.min() < 0:
            raise DataError("treatment codes must be nonnegative")
        if np.any(d != (t != 0)):
            bad = np.flatnonzero(d != (t != 0))[:5].tolist()
            raise DataError(f"binary indicator inconsistent with treatment at rows {bad}")
        n_levels = int(t.max()) + 1
        counts = np.bincount(t, minlength=n_levels)
        if np.any(counts == 0):
            raise DataError(
                f"treatment codes are not contiguous; empty levels {np.flatnonzero(counts == 0).tolist()}"
            )
        z_cols = tuple(int(c) for c in self.z_cols)
        if len(set(z_cols)) != len(z_cols):
            raise DataError("duplicate heterogeneity columns")
        if any(c < 0 or c >= x.shape[1] for c in z_cols):
            raise DataError("heterogeneity column index out of range")
        labels = tuple(self.treatment_labels) or tuple(range(n_levels))
        if len(labels) != n_levels:
            raise DataError("one treatment label required per treatment code")
        names = tuple(self.column_names) or tuple(f"x{j + 1}" for j in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise DataError("one column name required per confounder")
        w = self.weights
        if w is not None:
            w = _check_weights(w, n).copy()
        for arr in (y, t, d, x) + ((w,) if w is not None else ()):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z_cols", z_cols)
        object.__setattr__(self, "treatment_labels", labels)
        object.__setattr__(self, "column_names", names)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_arrays(cls, y, t, x, z_cols=(), treatment_labels=None, column_names=None,
                    weights=None):
        """Build a table from raw arrays, deriving ``d`` from ``t``.

        Treatment codes that skip a level are re-coded to ``0..J`` (code 0
        must be present and stays the control) and a warning is recorded.
        """
        t = np.asarray(t)
        if t.size and not np.issubdtype(t.dtype, np.integer):
            if np.any(t != np.round(t)):
                raise DataError("treatment codes must be integers")
            t = t.astype(np.int64)
        notes = []
        levels = np.unique(t)
        labels = list(treatment_labels) if treatment_labels is not None else None
        if t.size and (levels[0] != 0 or levels[-1] != len(levels) - 1):
            if levels[0] != 0:
                raise DataError("control level 0 does not occur in the data")
            msg = (f"treatment levels {sorted(set(range(int(levels[-1]) + 1)) - set(levels.tolist()))} "
                   f"have no rows; J re-derived as {len(levels) - 1}")
            warnings.warn(msg, stacklevel=2)
            notes.append(msg)
            t = np.searchsorted(levels, t)
            if labels is not None:
                labels = [labels[int(v)] for v in levels]
        d = (t != 0).astype(np.int64)
        return cls(y=y, t=t, d=d, x=x, z_cols=tuple(z_cols),
                   treatment_labels=tuple(labels) if labels is not None else (),
                   column_names=tuple(column_names) if column_names is not None else (),
                   weights=weights, notes=tuple(notes))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def J(self) -> int:
        return len(self.treatment_labels) - 1

    @property
    def n_treatments(self) -> int:
        return len(self.treatment_labels)

    @property
    def z(self) -> np.ndarray:
        return self.x[:, list(self.z_cols)]

    def indicators(self) -> np.ndarray:
        """One-hot matrix ``D[i, t] = 1[t_i = t]``, shape ``(n, J + 1)``."""
        out = np.zeros((self.n, self.n_treatments))
        out[np.arange(self.n), self.t] = 1.0
        return out

    def mean(self, values, axis=0):
        """Sample average, or population-weighted sum when weights are set."""
        values = np.asarray(values, dtype=np.float64)
        if self.weights is None:
            return values.mean(axis=axis)
        return np.tensordot(self.weights, values, axes=([0], [axis]))

    def take(self, rows) -> "ObservationTable":
        """Row subset (or permutation); weights are renormalized."""
        rows = np.asarray(rows)
        w = None
        if self.weights is not None:
            w = self.weights[rows]
            w = w / w.sum()
        return ObservationTable(y=self.y[rows], t=self.t[rows], d=self.d[rows], x=self.x[rows],
                                z_cols=self.z_cols, treatment_labels=self.treatment_labels,
                                column_names=self.column_names, weights=w, notes=self.notes)

    def with_weights(self, weights) -> "ObservationTable":
        return enumerate_population(self, weights)


def _check_weights(weights, n):
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise DataError("one weight per row required")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise DataError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise DataError("weights sum to zero")
    if abs(total - 1.0) > 1e-9:
        raise DataError(f"weights must sum to 1 (got {total!r})")
    return w / total


def enumerate_population(table: ObservationTable, weights) -> ObservationTable:
    """View ``table`` as a finite population with the given row probabilities.

    Every downstream average becomes ``sum_i w_i * value_i``, so population
    moments are computed exactly rather than estimated.
    """
    w = _check_weights(weights, table.n)
    return ObservationTable(y=table.y, t=table.t, d=table.d, x=table.x, z_cols=table.z_cols,
                            treatment_labels=table.treatment_labels,
                            column_names=table.column_names, weights=w, notes=table.notes)


def toy_population() -> ObservationTable:
    """The two-group, three-treatment toy population as a 6-cell weighted table.

    Potential outcomes are ``Y(0)=0, Y(1)=-1, Y(2)=1`` in both groups;
    ``P(T=1|X=0)=1/8, P(T=2|X=0)=3/8`` and the reverse for ``X=1``; control
    probability 1/2 in both groups; ``P(X=1)=1/2``.
    """
    potential = np.array([0.0, -1.0, 1.0])
    assign = {0: (0.5, 1 / 8, 3 / 8), 1: (0.5, 3 / 8, 1 / 8)}
    xs, ts, ys, ws = [], [], [], []
    for xv in (0, 1):
        for tv in range(3):
            xs.append(float(xv))
            ts.append(tv)
            ys.append(potential[tv])
            ws.append(0.5 * assign[xv][tv])
    return ObservationTable.from_arrays(ys, ts, np.array(xs).reshape(-1, 1), z_cols=(0,),
                                        treatment_labels=(0, 1, 2), column_names=("x",),
                                        weights=np.array(ws))


def toy_nuisances(table: ObservationTable):
    """True ``(mu, e)`` matrices of the toy population at the table's rows."""
    x = table.x[:, 0]
    mu = np.tile([0.0, -1.0, 1.0], (table.n, 1))
    e = np.where(x[:, None] == 0, [0.5, 1 / 8, 3 / 8], [0.5, 3 / 8, 1 / 8])
    return mu, e


def load_table(path, spec: ColumnSpec) -> ObservationTable:
    """Read a CSV file into an :class:`ObservationTable`.

    The control label maps to code 0; remaining treatment labels are
    coded ``1..J`` in sorted order. Rows with a missing value in any used
    column are rejected.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    df = pd.read_csv(path, float_precision="round_trip", keep_default_na=True)
    if df.shape[0] == 0:
        raise DataError(f"empty table: {path}")
    used = [spec.outcome_column, spec.treatment_column, *spec.confounder_columns]
    if spec.weight_column:
        used.append(spec.weight_column)
    missing = [c for c in used if c not in df.columns]
    if missing:
        raise DataError(f"missing column(s) in {path.name}: {', '.join(missing)}")
    na_rows = df[used].isna().any(axis=1)
    if na_rows.any():
        raise DataError(f"missing values in used columns at rows {np.flatnonzero(na_rows)[:5].tolist()}")

    numeric_cols = [spec.outcome_column, *spec.confounder_columns]
    if spec.weight_column:
        numeric_cols.append(spec.weight_column)
    for col in numeric_cols:
        conv = pd.to_numeric(df[col], errors="coerce")
        if conv.isna().any():
            row = int(np.flatnonzero(conv.isna())[0])
            raise DataError(f"non-numeric value {df[col].iloc[row]!r} in column {col!r} (row {row})")
        df[col] = conv.astype(np.float64)

    raw_t = df[spec.treatment_column]
    labels = _treatment_labels(raw_t, spec.control_label)
    code = {lab: k for k, lab in enumerate(labels)}
    t = np.array([code[_norm_label(v)] for v in raw_t], dtype=np.int64)

    z_cols = tuple(spec.confounder_columns.index(c) for c in spec.heterogeneity_columns)
    weights = df[spec.weight_column].to_numpy() if spec.weight_column else None
    if weights is not None:
        weights = weights / weights.sum()
    return ObservationTable.from_arrays(
        y=df[spec.outcome_column].to_numpy(dtype=np.float64), t=t,
        x=df[list(spec.confounder_columns)].to_numpy(dtype=np.float64),
        z_cols=z_cols, treatment_labels=labels, column_names=spec.confounder_columns,
        weights=weights,
    )


def _norm_label(v):
    # CSV readers hand back 1 and 1.0 and "1" for what users consider one label
    if isinstance(v, (float, np.floating)) and float(v).is_integer():
        return str(int(v))
    return str(v)


def _treatment_labels(raw, control_label) -> tuple[str, ...]:
    observed = sorted({_norm_label(v) for v in raw}, key=_label_sort_key)
    control = _norm_label(control_label)
    if control not in observed:
        raise DataError(f"control label {control_label!r} does not occur in the treatment column")
    return (control, *[v for v in observed if v != control])


def _label_sort_key(v: str):
    try:
        return (0, float(v), v)
    except ValueError:
        return (1, 0.0, v)


def write_table(table: ObservationTable, path, spec: ColumnSpec | None = None):
    """Write ``table`` to CSV so that :func:`load_table` reproduces it bit-exactly."""
    outcome = spec.outcome_column if spec else "y"
    treatment = spec.treatment_column if spec else "t"
    cols = spec.confounder_columns if spec else table.column_names
    df = pd.DataFrame({outcome: table.y,
                       treatment: [table.treatment_labels[k] for k in table.t]})
    for j, c in enumerate(cols):
        df[c] = table.x[:, j]
    if table.weights is not None:
        df[spec.weight_column if spec and spec.weight_column else "weight"] = table.weights
    df.to_csv(path, index=False, float_format=None)
    return Path(path)


def column_spec_for(table: ObservationTable, weight_column: str | None = None) -> ColumnSpec:
    """The :class:`ColumnSpec` that :func:`write_table` output can be reloaded with."""
    return ColumnSpec(outcome_column="y", treatment_column="t",
                      control_label=table.treatment_labels[0],
                      confounder_columns=table.column_names,
                      heterogeneity_columns=tuple(table.column_names[c] for c in table.z_cols),
                      weight_column=weight_column)
