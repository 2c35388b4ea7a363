"""Command line front end.

Five subcommands: train (learn a shape matrix and fit a model), reduce
(eigen-decompose it into a reduction plan), eval (per-p error tables),
bench (the full experiment grid), synth (write a generated dataset to
CSV). Configuration is a flat JSON file whose keys mirror RunConfig;
command line flags override file values. Every output lands under one
directory, written atomically, and is listed in manifest.json with a
content hash.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical
failure, 5 partial bench failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import (
    Dataset,
    DegenerateFeatureError,
    EmptyDataError,
    MissingTargetError,
    RNG_ID,
    aggregate_by_window,
    drop_features,
    gen_f1,
    gen_f2,
    load_csv,
    scale_minmax,
    split_80_20,
    write_csv,
)
from .fuse import (
    AbsoluteThreshold,
    FixedCount,
    PlanFormatError,
    RelativeThreshold,
    decompose_theta,
    load_plan,
    make_plan,
    rank_features_diagonal,
    save_plan,
    write_ranking_csv,
    write_spectrum_csv,
)
from .kernels import ShapeMatrix
from .numerics import SingularSystemError
from .plots import render_error_curves, render_spectrum, render_trace
from .regressor import ModelFormatError, fit, load_model, metrics, predict, save_model
from .twolayer import (
    OptimizationDivergedError,
    OptimizerConfig,
    optimize_sigma,
    write_trace,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
EXIT_PARTIAL = 5

FAMILIES = ("ga", "m2", "m0")
MODES = ("isotropic", "diagonal", "full")
RULE_NAMES = ("absolute_threshold", "relative_threshold", "fixed_count")
ALPHAS = (-2, -1, 0, 1, 2)


class ConfigError(ValueError):
    """Bad config file or flag values."""


@dataclass(frozen=True)
class RunConfig:
    """One flat bundle of every pipeline setting.

    `dataset` is the only field without a usable default: "f1", "f2",
    or a CSV path. Defaults are desk scale: n=5000, a seeded
    1200-point subsample for the shape-matrix optimization, full-train
    final fits.
    """

    dataset: str | None = None
    target: str = "target"
    n: int = 5000
    d: int | None = None
    alpha: int = 0
    aggregate_time_feature: str | None = None
    aggregate_window: float | None = None
    drop_features: str = ""
    family: str = "m2"
    mode: str = "diagonal"
    max_iters: int = 200
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int | None = None
    opt_ridge_lambda: float = 1e-8
    opt_subsample: int | None = 1200
    init_scale: float | None = None
    tol_rel_loss: float = 1e-6
    patience: int = 200
    seed: int = 0
    rule: str = "relative_threshold"
    rule_value: float = 1e-4
    ridge_lambda: float = 1e-6
    p_max: int = 10
    outdir: str = "kf_out"


CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(RunConfig))


@dataclass
class RunReport:
    """What one evaluated run produced, serialized as JSON."""

    config: dict
    table: list
    baseline: dict
    spectrum_file: str | None = None
    ranking_file: str | None = None
    timings: dict = dataclasses.field(default_factory=dict)
    rng: str = RNG_ID


# ---------------------------------------------------------------- config

def load_config_file(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a flat JSON object")
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    return raw


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def _check_int(values, key, minimum=None, optional=False):
    v = values.get(key)
    if v is None:
        _require(optional, f"{key} must be set")
        return
    _require(isinstance(v, int) and not isinstance(v, bool), f"{key} must be an integer")
    if minimum is not None:
        _require(v >= minimum, f"{key} must be >= {minimum}")


def _check_float(values, key, minimum=None, optional=False):
    v = values.get(key)
    if v is None:
        _require(optional, f"{key} must be set")
        return
    _require(isinstance(v, (int, float)) and not isinstance(v, bool),
             f"{key} must be a number")
    if minimum is not None:
        _require(v >= minimum, f"{key} must be >= {minimum}")


def resolve_config(file_values: dict, overrides: dict, need_data=True) -> RunConfig:
    """Defaults, then config file, then explicit flags."""
    merged = dict(file_values)
    for key, val in overrides.items():
        if val is not None:
            merged[key] = val
    unknown = sorted(set(merged) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    cfg = RunConfig(**merged)
    validate_config(cfg, need_data=need_data)
    return cfg


def validate_config(cfg: RunConfig, need_data=True) -> None:
    values = dataclasses.asdict(cfg)
    _require(cfg.dataset is not None or not need_data,
             "a data source is required: dataset = f1 | f2 | path to CSV")
    _require(cfg.family in FAMILIES, f"family must be one of {FAMILIES}")
    _require(cfg.mode in MODES, f"mode must be one of {MODES}")
    _require(cfg.rule in RULE_NAMES, f"rule must be one of {RULE_NAMES}")
    _check_int(values, "n", minimum=2)
    _check_int(values, "d", minimum=1, optional=True)
    _check_int(values, "seed")
    _check_int(values, "max_iters", minimum=1)
    _check_int(values, "patience", minimum=1)
    _check_int(values, "p_max", minimum=1)
    _check_int(values, "batch_size", minimum=2, optional=True)
    _check_int(values, "opt_subsample", minimum=2, optional=True)
    _check_float(values, "learning_rate", minimum=0.0)
    _check_float(values, "ridge_lambda", minimum=0.0)
    _check_float(values, "opt_ridge_lambda", minimum=0.0)
    _check_float(values, "rule_value")
    _check_float(values, "aggregate_window", optional=True)
    if cfg.dataset == "f2":
        _require(cfg.alpha in ALPHAS, f"alpha must be one of {list(ALPHAS)}")
    if cfg.rule == "fixed_count":
        _require(float(cfg.rule_value).is_integer() and cfg.rule_value >= 1,
                 "rule_value must be a positive integer for fixed_count")


def reduction_rule(cfg: RunConfig):
    if cfg.rule == "absolute_threshold":
        return AbsoluteThreshold(float(cfg.rule_value))
    if cfg.rule == "relative_threshold":
        return RelativeThreshold(float(cfg.rule_value))
    return FixedCount(int(cfg.rule_value))


def build_dataset(cfg: RunConfig) -> Dataset:
    """Synthetic suites as generated; CSV loaded, optionally aggregated
    over a time window, then min-max scaled to the unit cube."""
    if cfg.dataset == "f1":
        try:
            return gen_f1(cfg.n, d=cfg.d if cfg.d is not None else 35, seed=cfg.seed)
        except ValueError as exc:
            raise ConfigError(str(exc))
    if cfg.dataset == "f2":
        try:
            return gen_f2(cfg.n, alpha=cfg.alpha,
                          d=cfg.d if cfg.d is not None else 15, seed=cfg.seed)
        except ValueError as exc:
            raise ConfigError(str(exc))
    ds = load_csv(cfg.dataset, cfg.target)
    if cfg.aggregate_time_feature:
        if cfg.aggregate_window is None:
            raise ConfigError("aggregate_window is required with aggregate_time_feature")
        ds = aggregate_by_window(ds, cfg.aggregate_time_feature, cfg.aggregate_window)
    if cfg.drop_features:
        names = [s.strip() for s in cfg.drop_features.split(",") if s.strip()]
        ds = drop_features(ds, names)
    return scale_minmax(ds)


# ------------------------------------------------------------- artifacts

def _atomic(writer, path: Path) -> None:
    """Write through a sibling temp file, then rename into place."""
    tmp = path.with_name(path.name + ".tmp")
    writer(tmp)
    os.replace(tmp, path)


def _atomic_json(obj, path: Path) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    _atomic(lambda p: p.write_text(text, encoding="utf-8"), path)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_metrics_csv(rows: list, baseline: dict, path: Path) -> None:
    lines = ["p,rmse,rmsre"]
    for row in rows:
        lines.append(f"{row['p']},{_fmt(row['rmse'])},{_fmt(row['rmsre'])}")
    lines.append(f"all,{_fmt(baseline['rmse'])},{_fmt(baseline['rmsre'])}")
    text = "\n".join(lines) + "\n"
    _atomic(lambda p: p.write_text(text, encoding="utf-8"), path)


def write_manifest(outdir: Path) -> None:
    rows = []
    for p in sorted(outdir.rglob("*")):
        if not p.is_file() or p.name == "manifest.json" or p.suffix == ".tmp":
            continue
        blob = p.read_bytes()
        rows.append({"path": p.relative_to(outdir).as_posix(),
                     "bytes": len(blob),
                     "sha256": hashlib.sha256(blob).hexdigest()})
    _atomic_json({"artifacts": rows}, outdir / "manifest.json")


# ---------------------------------------------------------------- stages

def _optimizer_config(cfg: RunConfig) -> OptimizerConfig:
    return OptimizerConfig(
        mode=cfg.mode,
        max_iters=cfg.max_iters,
        learning_rate=cfg.learning_rate,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        adam_eps=cfg.adam_eps,
        batch_size=cfg.batch_size,
        ridge_lambda=cfg.opt_ridge_lambda,
        seed=cfg.seed,
        init_scale=cfg.init_scale,
        tol_rel_loss=cfg.tol_rel_loss,
        patience=cfg.patience,
    )


def _opt_subset(train: Dataset, cfg: RunConfig):
    n = train.X.shape[0]
    if cfg.opt_subsample is None or cfg.opt_subsample >= n:
        return train.X, train.f
    rng = np.random.default_rng(cfg.seed)
    idx = np.sort(rng.choice(n, size=cfg.opt_subsample, replace=False))
    return train.X[idx], train.f[idx]


def _train_stage(cfg: RunConfig):
    timings = {}
    t0 = time.perf_counter()
    ds = build_dataset(cfg)
    sp = split_80_20(ds, seed=cfg.seed)
    timings["data_s"] = time.perf_counter() - t0

    Xop, fop = _opt_subset(sp.train, cfg)
    t0 = time.perf_counter()
    sigma, trace = optimize_sigma(cfg.family, Xop, fop, _optimizer_config(cfg))
    timings["optimize_s"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    model = fit(cfg.family, sigma, sp.train.X, sp.train.f,
                ridge_lambda=cfg.ridge_lambda)
    timings["fit_s"] = time.perf_counter() - t0
    return ds, sp, sigma, trace, model, timings


def _full_map(spectrum) -> np.ndarray:
    scale = np.sqrt(np.maximum(spectrum.values, 0.0))
    return scale[:, None] * spectrum.vectors.T


def _eval_stage(cfg: RunConfig, family: str, spectrum, sp):
    """Per-p unit-shape refits on mapped features, plus the raw baseline."""
    Xtr, ftr = sp.train.X, sp.train.f
    Xte, fte = sp.test.X, sp.test.f
    d = Xtr.shape[1]
    if spectrum.values.size != d:
        raise ConfigError(
            f"plan dimension {spectrum.values.size} does not match data dimension {d}")
    M = _full_map(spectrum)
    t0 = time.perf_counter()
    rows = []
    for p in range(1, min(d, cfg.p_max) + 1):
        Mp = M[:p]
        unit = ShapeMatrix.isotropic(1.0, p)
        model_p = fit(family, unit, Xtr @ Mp.T, ftr, ridge_lambda=cfg.ridge_lambda)
        m = metrics(fte, predict(model_p, Xte @ Mp.T))
        rows.append({"p": p, "rmse": m.rmse, "rmsre": m.rmsre})
    unit = ShapeMatrix.isotropic(1.0, d)
    base_model = fit(family, unit, Xtr, ftr, ridge_lambda=cfg.ridge_lambda)
    bm = metrics(fte, predict(base_model, Xte))
    baseline = {"p": "all", "rmse": bm.rmse, "rmsre": bm.rmsre}
    return rows, baseline, {"eval_s": time.perf_counter() - t0}


def _render_eval_figures(rows, baseline, outdir: Path) -> None:
    ps = [r["p"] for r in rows]
    _atomic(lambda p: render_error_curves(ps, [r["rmse"] for r in rows],
                                          baseline["rmse"], p, ylabel="RMSE"),
            outdir / "errors_rmse.png")
    if baseline["rmsre"] is not None and all(r["rmsre"] is not None for r in rows):
        _atomic(lambda p: render_error_curves(ps, [r["rmsre"] for r in rows],
                                              baseline["rmsre"], p, ylabel="RMSRE"),
                outdir / "errors_rmsre.png")


# -------------------------------------------------------------- commands

def cmd_train(cfg: RunConfig) -> int:
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    _, _, _, trace, model, timings = _train_stage(cfg)
    _atomic(lambda p: save_model(model, p), outdir / "model.json")
    _atomic(lambda p: write_trace(trace, p), outdir / "trace.csv")
    losses = [r.loss for r in trace.records]
    grads = [r.grad_norm for r in trace.records]
    _atomic(lambda p: render_trace(losses, grads, p), outdir / "trace.png")
    echo = {"config": dataclasses.asdict(cfg), "rng": RNG_ID,
            "iterations_run": trace.iterations_run,
            "best_loss": trace.best_loss, "converged": trace.converged,
            "timings": timings}
    _atomic_json(echo, outdir / "config.json")
    write_manifest(outdir)
    return EXIT_OK


def cmd_reduce(model_path: str, cfg: RunConfig) -> int:
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    model = load_model(model_path)
    spectrum = decompose_theta(model.sigma)
    plan = make_plan(spectrum, reduction_rule(cfg))
    _atomic(lambda p: save_plan(plan, p), outdir / "plan.json")
    _atomic(lambda p: write_spectrum_csv(plan, p), outdir / "spectrum.csv")
    _atomic(lambda p: render_spectrum(spectrum.values, p, retained=plan.p),
            outdir / "spectrum.png")
    if model.sigma.mode != "full":
        ranking = rank_features_diagonal(model.sigma)
        _atomic(lambda p: write_ranking_csv(ranking, p), outdir / "ranking.csv")
    write_manifest(outdir)
    return EXIT_OK


def cmd_eval(model_path: str, plan_path: str, cfg: RunConfig) -> int:
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    model = load_model(model_path)
    plan = load_plan(plan_path)
    ds = build_dataset(cfg)
    sp = split_80_20(ds, seed=cfg.seed)
    rows, baseline, timings = _eval_stage(cfg, model.family, plan.spectrum, sp)
    write_metrics_csv(rows, baseline, outdir / "metrics.csv")
    _render_eval_figures(rows, baseline, outdir)
    report = RunReport(config=dataclasses.asdict(cfg), table=rows,
                       baseline=baseline, timings=timings)
    _atomic_json(dataclasses.asdict(report), outdir / "eval_report.json")
    write_manifest(outdir)
    return EXIT_OK


def cmd_synth(cfg: RunConfig) -> int:
    if cfg.dataset not in ("f1", "f2"):
        raise ConfigError("synth requires a synthetic dataset: f1 or f2")
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    ds = build_dataset(cfg)
    _atomic(lambda p: write_csv(ds, p), outdir / "dataset.csv")
    write_manifest(outdir)
    return EXIT_OK


def run_cell(cfg: RunConfig, cell_dir) -> dict:
    """One bench cell: train, reduce, evaluate, render, summarize.

    Returns the summary row. Raises on failure; bench records it.
    """
    cell_dir = Path(cell_dir)
    cell_dir.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()
    ds, sp, sigma, trace, model, timings = _train_stage(cfg)

    spectrum = decompose_theta(sigma)
    plan = make_plan(spectrum, reduction_rule(cfg))
    rows, baseline, eval_timings = _eval_stage(cfg, cfg.family, spectrum, sp)
    timings.update(eval_timings)

    _atomic(lambda p: save_model(model, p), cell_dir / "model.json")
    _atomic(lambda p: write_trace(trace, p), cell_dir / "trace.csv")
    _atomic(lambda p: save_plan(plan, p), cell_dir / "plan.json")
    _atomic(lambda p: write_spectrum_csv(plan, p), cell_dir / "spectrum.csv")
    if cfg.mode != "full":
        ranking = rank_features_diagonal(sigma)
        _atomic(lambda p: write_ranking_csv(ranking, p, ds.feature_names),
                cell_dir / "ranking.csv")
    write_metrics_csv(rows, baseline, cell_dir / "metrics.csv")

    losses = [r.loss for r in trace.records]
    grads = [r.grad_norm for r in trace.records]
    _atomic(lambda p: render_trace(losses, grads, p), cell_dir / "trace.png")
    _atomic(lambda p: render_spectrum(spectrum.values, p, retained=plan.p),
            cell_dir / "spectrum.png")
    _render_eval_figures(rows, baseline, cell_dir)

    report = RunReport(config=dataclasses.asdict(cfg), table=rows,
                       baseline=baseline, spectrum_file="spectrum.csv",
                       ranking_file=None if cfg.mode == "full" else "ranking.csv",
                       timings=timings)
    _atomic_json(dataclasses.asdict(report), cell_dir / "cell_report.json")

    lam = spectrum.values
    by_p = {r["p"]: r for r in rows}
    rmses = [(r["rmse"], r["p"]) for r in rows]
    best_rmse, best_p = min(rmses)
    rmsres = [r["rmsre"] for r in rows if r["rmsre"] is not None]
    row = {
        "family": cfg.family, "mode": cfg.mode, "n": cfg.n,
        "status": "ok", "error": "",
        "iters": trace.iterations_run, "p_retained": plan.p,
        "lam1": float(lam[0]),
        "lam2": float(lam[1]) if lam.size > 1 else None,
        "lam_ratio": float(lam[0] / lam[1]) if lam.size > 1 and lam[1] > 0 else None,
        "base_rmse": baseline["rmse"], "base_rmsre": baseline["rmsre"],
        "best_p": best_p, "best_rmse": best_rmse,
        "best_rmsre": min(rmsres) if rmsres else None,
        "seconds": time.perf_counter() - t_start,
        "_table": rows, "_baseline": baseline,
    }
    for p in (1, 3, 5, 10):
        r = by_p.get(p)
        row[f"rmse_p{p}"] = r["rmse"] if r else None
        row[f"rmsre_p{p}"] = r["rmsre"] if r else None
    return row


SUMMARY_COLUMNS = (
    "suite", "alpha", "family", "mode", "status", "error", "n", "iters",
    "p_retained", "lam1", "lam2", "lam_ratio", "base_rmse", "base_rmsre",
    "best_p", "best_rmse", "best_rmsre",
    "rmse_p1", "rmse_p3", "rmse_p5", "rmse_p10",
    "rmsre_p1", "rmsre_p3", "rmsre_p5", "rmsre_p10", "seconds",
)


def _cell_name(suite: str, alpha, family: str, mode: str) -> str:
    mid = f"a{alpha:+d}_" if alpha is not None else ""
    return f"{suite}_{mid}{family}_{mode}"


def iter_cells(suite: str, families, modes, alphas):
    suites = ("f1", "f2") if suite == "all" else (suite,)
    for s in suites:
        for alpha in (alphas if s == "f2" else (None,)):
            for family in families:
                for mode in modes:
                    yield s, alpha, family, mode


def _summary_figures(rows: list, outdir: Path) -> None:
    """Red baseline vs green diagonal vs blue full, per suite/alpha/family."""
    fig_dir = outdir / "figures"
    groups = {}
    for row in rows:
        if row["status"] != "ok":
            continue
        groups.setdefault((row["suite"], row["alpha"], row["family"]), {})[
            row["mode"]] = row
    for (suite, alpha, family), modes in sorted(groups.items(),
                                                key=lambda kv: str(kv[0])):
        if "full" not in modes:
            continue
        full = modes["full"]
        metric = "rmsre" if full["_baseline"]["rmsre"] is not None else "rmse"
        ps = [r["p"] for r in full["_table"]]
        curve = [r[metric] for r in full["_table"]]
        diag = None
        if "diagonal" in modes:
            by_p = {r["p"]: r[metric] for r in modes["diagonal"]["_table"]}
            diag = [by_p.get(p) for p in ps]
            if any(v is None for v in diag):
                diag = None
        fig_dir.mkdir(parents=True, exist_ok=True)
        name = _cell_name(suite, alpha, family, "compare") + ".png"
        _atomic(lambda p: render_error_curves(
            ps, curve, full["_baseline"][metric], p, ylabel=metric.upper(),
            diagonal_curve=diag, title=_cell_name(suite, alpha, family, "")[:-1]),
            fig_dir / name)


def cmd_bench(cfg: RunConfig, suite: str, families, modes, alphas) -> int:
    outdir = Path(cfg.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    summary_rows = []
    for s, alpha, family, mode in iter_cells(suite, families, modes, alphas):
        cell_cfg = dataclasses.replace(
            cfg, dataset=s, alpha=alpha if alpha is not None else 0,
            family=family, mode=mode, d=None)
        name = _cell_name(s, alpha, family, mode)
        try:
            row = run_cell(cell_cfg, outdir / "cells" / name)
        except Exception as exc:  # cell failures are data, not fatal
            row = {c: None for c in SUMMARY_COLUMNS}
            row.update(status="failed",
                       error=f"{type(exc).__name__}: {exc}",
                       family=family, mode=mode, n=cfg.n)
        row.update(suite=s, alpha=alpha)
        summary_rows.append(row)
        state = row["status"]
        print(f"[bench] {name}: {state}"
              + (f" ({row['error']})" if state == "failed" else ""),
              file=sys.stderr)

    lines = [",".join(SUMMARY_COLUMNS)]
    for row in summary_rows:
        lines.append(",".join(_csv_field(row.get(c)) for c in SUMMARY_COLUMNS))
    text = "\n".join(lines) + "\n"
    _atomic(lambda p: p.write_text(text, encoding="utf-8"), outdir / "summary.csv")

    _summary_figures(summary_rows, outdir)
    write_manifest(outdir)

    failures = sum(1 for r in summary_rows if r["status"] != "ok")
    if failures == 0:
        return EXIT_OK
    return EXIT_NUMERIC if failures == len(summary_rows) else EXIT_PARTIAL


def _csv_field(value) -> str:
    text = _fmt(value)
    if "," in text or '"' in text or "\n" in text:
        return '"' + text.replace('"', '""') + '"'
    return text


# ------------------------------------------------------------ arg parsing

def _add_common(p: argparse.ArgumentParser, *, data=False, optimizer=False,
                fitting=False, rule=False):
    p.add_argument("--config", help="flat JSON config file")
    p.add_argument("--out", dest="outdir", help="output directory")
    p.add_argument("--seed", type=int)
    if data:
        p.add_argument("--dataset", help="f1 | f2 | CSV path")
        p.add_argument("--target", help="target column for CSV data")
        p.add_argument("--n", type=int)
        p.add_argument("--d", type=int)
        p.add_argument("--alpha", type=int)
        p.add_argument("--aggregate-time-feature", dest="aggregate_time_feature")
        p.add_argument("--aggregate-window", dest="aggregate_window", type=float)
        p.add_argument("--drop-features", dest="drop_features",
                       help="comma separated feature names to drop")
    if optimizer:
        p.add_argument("--family", choices=FAMILIES)
        p.add_argument("--mode", choices=MODES)
        p.add_argument("--max-iters", dest="max_iters", type=int)
        p.add_argument("--learning-rate", dest="learning_rate", type=float)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--opt-ridge-lambda", dest="opt_ridge_lambda", type=float)
        p.add_argument("--opt-subsample", dest="opt_subsample", type=int)
        p.add_argument("--init-scale", dest="init_scale", type=float)
        p.add_argument("--tol-rel-loss", dest="tol_rel_loss", type=float)
        p.add_argument("--patience", type=int)
    if fitting:
        p.add_argument("--ridge-lambda", dest="ridge_lambda", type=float)
        p.add_argument("--p-max", dest="p_max", type=int)
    if rule:
        p.add_argument("--rule", choices=RULE_NAMES)
        p.add_argument("--rule-value", dest="rule_value", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernelfuse",
        description="Learn a kernel shape matrix, reduce features along its "
                    "eigenvectors, and evaluate the reduced models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="optimize the shape matrix and fit a model")
    _add_common(p, data=True, optimizer=True, fitting=True)

    p = sub.add_parser("reduce", help="eigen-decompose a model into a plan")
    _add_common(p, rule=True)
    p.add_argument("--model", required=True, help="model.json from train")

    p = sub.add_parser("eval", help="per-p metrics for a model and plan")
    _add_common(p, data=True, fitting=True)
    p.add_argument("--model", required=True)
    p.add_argument("--plan", required=True)

    p = sub.add_parser("bench", help="run the full experiment grid")
    _add_common(p, data=False, optimizer=True, fitting=True, rule=True)
    p.add_argument("--suite", choices=("f1", "f2", "all"), default="all")
    p.add_argument("--n", type=int)
    p.add_argument("--kernels", default=",".join(FAMILIES),
                   help="comma separated kernel families")
    p.add_argument("--modes", default="diagonal,full")
    p.add_argument("--alphas", default="-2,-1,0,1,2")

    p = sub.add_parser("synth", help="write a generated dataset to CSV")
    _add_common(p, data=True)
    return parser


def _overrides_from(args: argparse.Namespace) -> dict:
    return {k: getattr(args, k) for k in CONFIG_KEYS if hasattr(args, k)}


def _config_from(args: argparse.Namespace, need_data=True) -> RunConfig:
    file_values = load_config_file(args.config) if args.config else {}
    return resolve_config(file_values, _overrides_from(args), need_data=need_data)


def _parse_list(text: str, allowed, label: str):
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise ConfigError(f"{label} must not be empty")
    bad = [s for s in items if s not in allowed]
    if bad:
        raise ConfigError(f"invalid {label}: {', '.join(bad)}")
    return items


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(_config_from(args))
        if args.command == "reduce":
            return cmd_reduce(args.model, _config_from(args, need_data=False))
        if args.command == "eval":
            return cmd_eval(args.model, args.plan, _config_from(args))
        if args.command == "synth":
            return cmd_synth(_config_from(args))
        if args.seed is None:
            raise ConfigError("--seed is required for bench")
        cfg = _config_from(args, need_data=False)
        families = _parse_list(args.kernels, FAMILIES, "kernel family")
        modes = _parse_list(args.modes, ("diagonal", "full"), "mode")
        try:
            alphas = tuple(int(s) for s in args.alphas.split(",") if s.strip())
        except ValueError:
            raise ConfigError(f"invalid alphas: {args.alphas}")
        bad = [a for a in alphas if a not in ALPHAS]
        if bad or not alphas:
            raise ConfigError(f"alphas must be within {list(ALPHAS)}")
        return cmd_bench(cfg, args.suite, families, modes, alphas)
    except ConfigError as exc:
        print(f"config error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, MissingTargetError, EmptyDataError,
            DegenerateFeatureError, ModelFormatError, PlanFormatError) as exc:
        print(f"data error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SingularSystemError, OptimizationDivergedError,
            FloatingPointError) as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
