"""YAML run configuration with strict key checking."""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from .blp import BASIS_KINDS, BasisSpec
from .data import ColumnSpec
from .learners import LearnerConfig
from .simulate import McDesign

SCHEMA_VERSION = "1.0"


class ConfigError(ValueError):
    pass


def _check_keys(section: str, raw: dict, allowed) -> None:
    if not isinstance(raw, dict):
        raise ConfigError(f"section {section!r} must be a mapping")
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {section!r}: {', '.join(unknown)}; "
                          f"allowed: {', '.join(sorted(allowed))}")


@dataclass(frozen=True)
class DataSection:
    path: str
    outcome: str
    treatment: str
    control: object
    confounders: tuple
    heterogeneity: tuple = ()
    weight: str | None = None

    def column_spec(self) -> ColumnSpec:
        return ColumnSpec(self.outcome, self.treatment, self.control, self.confounders,
                          self.heterogeneity, self.weight)


@dataclass(frozen=True)
class OracleSection:
    """Column names holding known nuisances, keyed by treatment label."""

    mu: dict
    e: dict


@dataclass(frozen=True)
class CrossfitSection:
    folds: int = 2
    stratified: bool = True
    floor: float = 1e-6


@dataclass(frozen=True)
class BasisSection:
    kind: str = "loocv"
    column: str | None = None
    degree: int = 1
    order: int = 4
    knots: tuple | None = None
    n_knots: int = 0
    level: float = 0.95
    grid_points: int = 50


@dataclass(frozen=True)
class OutputSection:
    pseudo_outcomes: bool = True
    nuisances: bool = False


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    data: DataSection | None = None
    oracle: OracleSection | None = None
    learners: LearnerConfig = field(default_factory=LearnerConfig)
    crossfit: CrossfitSection = field(default_factory=CrossfitSection)
    basis: BasisSection = field(default_factory=BasisSection)
    overlap_threshold: float = 0.05
    output: OutputSection = field(default_factory=OutputSection)
    simulate: McDesign | None = None

    def basis_spec(self, heterogeneity: tuple):
        """``BasisSpec`` for the configured kind, or the string ``"loocv"``."""
        b = self.basis
        if b.kind == "loocv":
            return "loocv"
        column = 0
        if b.column is not None:
            if b.column not in heterogeneity:
                raise ConfigError(f"basis column {b.column!r} is not a heterogeneity column")
            column = heterogeneity.index(b.column)
        return BasisSpec(b.kind, column=column, degree=b.degree, order=b.order, knots=b.knots,
                         n_knots=b.n_knots)


_TOP = {"schema_version", "seed", "data", "oracle", "learners", "crossfit", "basis",
        "diagnostics", "output", "simulate"}


def _build(section, cls, raw, convert=None):
    allowed = [f.name for f in fields(cls)]
    _check_keys(section, raw, allowed)
    kwargs = dict(raw)
    for k, fn in (convert or {}).items():
        if k in kwargs and kwargs[k] is not None:
            kwargs[k] = fn(kwargs[k])
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"section {section!r}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"section {section!r}: {exc}") from None


def parse_config(raw: dict, base_dir: Path | None = None) -> RunConfig:
    """Validate a parsed YAML mapping into a :class:`RunConfig`."""
    if raw is None:
        raw = {}
    _check_keys("top level", raw, _TOP)
    version = str(raw.get("schema_version", SCHEMA_VERSION))
    if version.split(".")[0] != SCHEMA_VERSION.split(".")[0]:
        raise ConfigError(f"unsupported schema_version {version}; this build reads {SCHEMA_VERSION}")
    kw = {}
    if "seed" in raw:
        kw["seed"] = int(raw["seed"])
    data = raw.get("data")
    if data is not None:
        data = _build("data", DataSection, data,
                      convert={"confounders": tuple, "heterogeneity": tuple})
        if base_dir is not None and not Path(data.path).is_absolute():
            data = DataSection(**{**data.__dict__, "path": str(base_dir / data.path)})
        kw["data"] = data
    if raw.get("oracle") is not None:
        oracle = _build("oracle", OracleSection, raw["oracle"])
        for name in ("mu", "e"):
            if not isinstance(getattr(oracle, name), dict):
                raise ConfigError(f"oracle.{name} must map treatment labels to column names")
        kw["oracle"] = OracleSection({str(k): v for k, v in oracle.mu.items()},
                                     {str(k): v for k, v in oracle.e.items()})
    if raw.get("learners") is not None:
        if "seed" in raw["learners"]:
            raise ConfigError("learner seeds derive from the top-level 'seed'; remove learners.seed")
        kw["learners"] = _build("learners", LearnerConfig, raw["learners"],
                                convert={"grid": tuple, "propensity_columns": tuple,
                                         "outcome_columns": tuple})
    if raw.get("crossfit") is not None:
        kw["crossfit"] = _build("crossfit", CrossfitSection, raw["crossfit"])
        if kw["crossfit"].folds == 1 or kw["crossfit"].folds < 0:
            raise ConfigError("crossfit.folds must be 0 (no cross-fitting) or at least 2")
    if raw.get("basis") is not None:
        basis = _build("basis", BasisSection, raw["basis"], convert={"knots": tuple})
        if basis.kind not in (*BASIS_KINDS, "loocv"):
            raise ConfigError(f"basis.kind must be one of {', '.join((*BASIS_KINDS, 'loocv'))}")
        if not 0 < basis.level < 1:
            raise ConfigError("basis.level must lie in (0, 1)")
        kw["basis"] = basis
    if raw.get("diagnostics") is not None:
        diag = raw["diagnostics"]
        _check_keys("diagnostics", diag, ["overlap_threshold"])
        kw["overlap_threshold"] = float(diag.get("overlap_threshold", 0.05))
    if raw.get("output") is not None:
        kw["output"] = _build("output", OutputSection, raw["output"])
    if raw.get("simulate") is not None:
        sim = dict(raw["simulate"])
        if "seed" in sim:
            raise ConfigError("set the simulation seed with the top-level 'seed' key or --seed")
        sim.setdefault("seed", kw.get("seed", 0))
        kw["simulate"] = _build("simulate", McDesign, sim,
                                convert={"beta": tuple})
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    return parse_config(raw, base_dir=path.parent)
