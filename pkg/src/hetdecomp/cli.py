"""Command-line interface: ``hetdecomp {fit,simulate,diagnose}``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .blp import curve_frame, fit_report
from .config import SCHEMA_VERSION, ConfigError, RunConfig, load_config
from .crossfit import oracle_nuisances
from .data import load_table
from .diagnostics import apo_table, diagnostics_dict, dumps, overlap_report
from .pipeline import STREAM_LEARNERS, decompose, estimate_nuisances, substream_seed
from .scores import compute_scores
from .simulate import MODES, run_study

FORMATS = ("json", "csv", "text")


class UsageError(ValueError):
    pass


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML run configuration")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out-dir", default="hetdecomp-out", help="directory for reports")
    common.add_argument("--format", choices=FORMATS, default="json", help="report format")
    common.add_argument("--threads", type=int, default=None, help="worker cap for parallel stages")
    parser = argparse.ArgumentParser(prog="hetdecomp", description="Decompose treatment effect "
                                     "heterogeneity into composition and effect components.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("fit", parents=[common], help="estimate the decomposition on a dataset")
    sub.add_parser("simulate", parents=[common], help="run the Monte Carlo coverage study")
    sub.add_parser("diagnose", parents=[common], help="overlap and potential-outcome diagnostics")
    return parser


def _with_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
        if cfg.simulate is not None:
            cfg = replace(cfg, simulate=replace(cfg.simulate, seed=args.seed))
    if args.threads is not None and cfg.simulate is not None:
        cfg = replace(cfg, simulate=replace(cfg.simulate, threads=args.threads))
    return cfg


def _load_data(cfg: RunConfig):
    if cfg.data is None:
        raise ConfigError("this command needs a 'data' section")
    return load_table(cfg.data.path, cfg.data.column_spec())


def _oracle_arrays(cfg: RunConfig, table):
    df = pd.read_csv(cfg.data.path, float_precision="round_trip")
    out = []
    for name in ("mu", "e"):
        mapping = getattr(cfg.oracle, name)
        cols = []
        for label in table.treatment_labels:
            if label not in mapping:
                raise ConfigError(f"oracle.{name} has no column for treatment {label!r}")
            if mapping[label] not in df.columns:
                raise ConfigError(f"oracle column {mapping[label]!r} not found in data")
            cols.append(mapping[label])
        out.append(df[cols].to_numpy(dtype=np.float64))
    return out


def _nuisances(cfg: RunConfig, table):
    if cfg.oracle is not None:
        mu, e = _oracle_arrays(cfg, table)
        return oracle_nuisances(table, mu, e)
    learners = cfg.learners
    names = cfg.data.confounders
    cols = {}
    for key in ("propensity_columns", "outcome_columns"):
        sel = getattr(learners, key)
        if sel is not None:
            missing = [c for c in sel if c not in names]
            if missing:
                raise ConfigError(f"learners.{key} names unknown confounders: {missing}")
            cols[key] = tuple(names.index(c) for c in sel)
    learners = replace(learners, seed=substream_seed(cfg.seed, STREAM_LEARNERS), **cols)
    return estimate_nuisances(table, learners, cfg.crossfit.folds, cfg.seed,
                              cfg.crossfit.stratified, cfg.crossfit.floor)


def _write(path: Path, text: str):
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def _frame_csv(df: pd.DataFrame) -> str:
    return df.to_csv(index=False, lineterminator="\n")


def cmd_fit(cfg: RunConfig, out: Path, fmt: str) -> list[Path]:
    table = _load_data(cfg)
    nuis = _nuisances(cfg, table)
    basis = cfg.basis_spec(cfg.data.heterogeneity)
    result = decompose(table, nuis, basis, overlap_threshold=cfg.overlap_threshold)
    level = cfg.basis.level
    params = fit_report(result.fits, level)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "fit",
        "n": table.n,
        "treatments": list(table.treatment_labels),
        "pi_hat": nuis.pi_hat.tolist(),
        "nuisances": "oracle" if cfg.oracle is not None else {
            "outcome": cfg.learners.outcome, "propensity": cfg.learners.propensity,
            "folds": cfg.crossfit.folds},
        "parameters": params,
        "identity_audit": result.audit.to_dict(),
        "notes": list(table.notes),
    }
    if result.selection is not None:
        report["basis_selection"] = {
            label: [None if not np.isfinite(v) else float(v) for v in scores]
            for label, scores in result.selection.scores.items()
        }
    written = []
    if fmt == "json":
        written.append(_write(out / "report.json", dumps(report)))
    elif fmt == "csv":
        rows = []
        for label, block in params.items():
            for name, b, s, ci in zip(block["columns"], block["beta"], block["se"], block["ci"]):
                rows.append({"parameter": label, "term": name, "beta": b, "se": s,
                             "ci_lo": ci[0], "ci_hi": ci[1]})
        written.append(_write(out / "report.csv", _frame_csv(pd.DataFrame(rows))))
        wrows = [{"parameter": label, "test": test, **w}
                 for label, block in params.items() for test, w in block["wald"].items()]
        written.append(_write(out / "wald.csv", _frame_csv(pd.DataFrame(wrows))))
    else:
        written.append(_write(out / "report.txt", _fit_text(report)))
    diag = diagnostics_dict(result.overlap, result.apo, result.audit)
    written += _write_diagnostics(diag, result.overlap, result.apo, out, fmt)
    fit0 = result.fits["nATE"]
    z = table.z[:, fit0.basis.spec.column] if fit0.basis.spec.kind != "intercept" else None
    if z is not None:
        if fit0.basis.spec.kind == "group_dummies":
            grid = np.asarray(fit0.basis.state, dtype=np.float64)
        else:
            grid = np.linspace(z.min(), z.max(), cfg.basis.grid_points)
        written.append(_write(out / "curves.csv", _frame_csv(curve_frame(result.fits, grid, level))))
    if cfg.output.pseudo_outcomes:
        written.append(_write(out / "pseudo_outcomes.csv", _frame_csv(result.scores.to_frame())))
    if cfg.output.nuisances:
        written.append(_write(out / "nuisances.csv",
                              _frame_csv(nuis.to_frame(list(table.treatment_labels)))))
    return written


def _fit_text(report) -> str:
    lines = [f"decomposition report (schema {report['schema_version']})",
             f"n = {report['n']}; treatments: {', '.join(report['treatments'])}",
             "pi_hat: " + ", ".join(f"{v:.4f}" for v in report["pi_hat"]), ""]
    for label, block in report["parameters"].items():
        lines.append(f"[{label}]  basis: {block['basis']['kind']}")
        lines.append(f"  {'term':<14s}{'beta':>12s}{'se':>12s}{'ci_lo':>12s}{'ci_hi':>12s}")
        for name, b, s, ci in zip(block["columns"], block["beta"], block["se"], block["ci"]):
            lines.append(f"  {name:<14s}{b:12.6f}{s:12.6f}{ci[0]:12.6f}{ci[1]:12.6f}")
        for test, w in block["wald"].items():
            stat = "nan" if w["statistic"] is None else f"{w['statistic']:.4f}"
            pv = "nan" if w["pvalue"] is None else f"{w['pvalue']:.4g}"
            lines.append(f"  wald {test}: W = {stat}, df = {w['df']}, p = {pv}")
        lines.append("")
    audit = report["identity_audit"]
    lines.append(f"identity audit: max |nATE - rATE - Delta| = {audit['max_deviation']:.3e} "
                 f"({'pass' if audit['passed'] else 'FAIL'})")
    return "\n".join(lines) + "\n"


def _write_diagnostics(diag, overlap, apo, out: Path, fmt: str) -> list[Path]:
    written = [_write(out / "overlap_quantiles.csv", _frame_csv(overlap.to_frame()))]
    if fmt == "json":
        written.append(_write(out / "diagnostics.json",
                              dumps({"schema_version": SCHEMA_VERSION, **diag})))
    elif fmt == "csv":
        written.append(_write(out / "apo.csv", _frame_csv(apo.to_frame())))
    else:
        text = overlap.to_text() + "\n\n" + apo.to_text() + "\n"
        if "identity_audit" in diag:
            a = diag["identity_audit"]
            text += f"\nidentity audit: {a['max_deviation']:.3e} ({'pass' if a['passed'] else 'FAIL'})\n"
        written.append(_write(out / "diagnostics.txt", text))
    return written


def cmd_diagnose(cfg: RunConfig, out: Path, fmt: str) -> list[Path]:
    table = _load_data(cfg)
    nuis = _nuisances(cfg, table)
    scores = compute_scores(nuis, table)
    overlap = overlap_report(nuis, table.treatment_labels, cfg.overlap_threshold)
    apo = apo_table(scores, table.treatment_labels, table)
    return _write_diagnostics(diagnostics_dict(overlap, apo), overlap, apo, out, fmt)


def cmd_simulate(cfg: RunConfig, out: Path, fmt: str) -> list[Path]:
    design = cfg.simulate
    if design is None:
        raise ConfigError(f"this command needs a 'simulate' section (mode one of {', '.join(MODES)})")
    result = run_study(design)
    print(f"simulate: {result.reps_ok}/{design.reps} reps ok in {result.runtime:.1f}s",
          file=sys.stderr)
    payload = {"schema_version": SCHEMA_VERSION, "command": "simulate", **result.to_dict()}
    if fmt == "json":
        return [_write(out / "coverage.json", dumps(payload))]
    if fmt == "csv":
        return [_write(out / "coverage.csv", _frame_csv(result.table()))]
    lines = [f"coverage (nominal {design.level:g}), mode={design.mode}, n={design.n}, p={design.p}, "
             f"reps ok {result.reps_ok}/{design.reps}",
             f"{'':6s}{'':8s}{'rATE':>10s}{'nATE':>10s}{'Delta':>10s}"]
    for _, row in result.table().iterrows():
        lines.append(f"p={row['p']:<4d}{row['coefficient']:<8s}{row['rATE']:10.4f}{row['nATE']:10.4f}"
                     f"{row['Delta']:10.4f}")
    lines.append(f"rATE slope Wald rejection rate: {result.wald_rejection_rate:.4f}")
    return [_write(out / "coverage.txt", "\n".join(lines) + "\n")]


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "diagnose": cmd_diagnose}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be at least 1")
        cfg = _with_overrides(load_config(args.config), args)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = COMMANDS[args.command](cfg, out, args.format)
    except Exception as exc:  # noqa: BLE001 - every failure becomes exit code 1
        err = {"status": "error", "command": args.command, "type": type(exc).__name__,
               "message": str(exc)}
        print(json.dumps(err), file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
