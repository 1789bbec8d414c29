"""Command-line orchestration: search, eval, sweep, synth, validate.

Config handling: a JSON config file supplies any of the keys in ``DEFAULTS``;
individual flags override file values, which override built-in defaults.
Exit codes: 0 ok, 1 validation failure, 2 numerical failure.  Artifacts are
deterministic for a given config+seed and carry a provenance block.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import FeaturePool, load_pool, load_target, read_embeddings
from .errors import NumericalError, ProxyRankError, ValidationError
from .rankeval import AccuracyTable, kendall_tau_b, proxy_quality, reid_eval, spearman
from .search import (
    SearchParams,
    proxy_from_jsonl,
    proxy_records_jsonl,
    proxy_summary,
    search_proxy,
)
from .stats import fid, scalar_variance, summarize
from .synthbench import SynthSpec, TrendGrid, gen_world, run_trend, trend_csv
from . import synthbench

__all__ = ["main", "build_config", "DEFAULTS"]

DEFAULTS: dict = {
    "pool_manifests": [],
    "pool_embeddings": [],
    "target_manifest": None,
    "target_embeddings": None,
    "accuracy": None,
    "proxy": None,
    "models_dir": None,
    "proxy_column": None,
    "reference_column": None,
    "lambda": 0.6,
    "k": 20,
    "n_ids": 500,
    "seed": 0,
    "camera_aware": False,
    "jobs": 1,
    "out": None,
    "lambda_grid": [0.0, 0.25, 0.5, 0.6, 0.75, 1.0],
    "k_grid": None,
    "n_grid": None,
    "n_random": 20,
    "synth": None,
}

# Fields that steer execution or addressing but not the semantics of results;
# they stay out of the provenance hash so e.g. --jobs cannot perturb artifacts.
_NON_SEMANTIC = {"out", "jobs"}


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems as validation errors."""

    def error(self, message):
        raise ValidationError(f"usage: {message}")


def _comma_floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ValidationError(f"expected a comma-separated float list, got '{text}'")


def _comma_ints(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ValidationError(f"expected a comma-separated int list, got '{text}'")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--lambda", dest="lam", type=float, default=None,
                        help="FID weight in the sampling score, in [0, 1]")
    parser.add_argument("--k", type=int, default=None, help="cluster count")
    parser.add_argument("--n-ids", type=int, default=None,
                        help="identities to draw per search pass")
    parser.add_argument("--camera-aware", action="store_const", const=True, default=None)
    parser.add_argument("--jobs", type=int, default=None, help="parallel sweep cells")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--pool-manifest", action="append", default=None,
                        help="pool manifest CSV (repeatable, paired with --pool-embeddings)")
    parser.add_argument("--pool-embeddings", action="append", default=None,
                        help="pool EMB1 file (repeatable)")
    parser.add_argument("--target-manifest", default=None)
    parser.add_argument("--target-embeddings", default=None)
    parser.add_argument("--accuracy", default=None, help="accuracy table CSV")
    parser.add_argument("--proxy", default=None, help="proxy JSONL from a search run")
    parser.add_argument("--models-dir", default=None,
                        help="directory of per-model EMB1 files aligned to the proxy")
    parser.add_argument("--proxy-column", default=None)
    parser.add_argument("--reference-column", default=None)
    parser.add_argument("--lambda-grid", type=_comma_floats, default=None)
    parser.add_argument("--k-grid", type=_comma_ints, default=None)
    parser.add_argument("--n-grid", type=_comma_ints, default=None)
    parser.add_argument("--n-random", type=int, default=None,
                        help="random proxies per synthetic trend run")
    parser.add_argument("--synth", action="store_const", const={}, default=None,
                        help="use a generated synthetic world as pool/target")


_FLAG_KEYS = {
    "seed": "seed",
    "lam": "lambda",
    "k": "k",
    "n_ids": "n_ids",
    "camera_aware": "camera_aware",
    "jobs": "jobs",
    "out": "out",
    "pool_manifest": "pool_manifests",
    "pool_embeddings": "pool_embeddings",
    "target_manifest": "target_manifest",
    "target_embeddings": "target_embeddings",
    "accuracy": "accuracy",
    "proxy": "proxy",
    "models_dir": "models_dir",
    "proxy_column": "proxy_column",
    "reference_column": "reference_column",
    "lambda_grid": "lambda_grid",
    "k_grid": "k_grid",
    "n_grid": "n_grid",
    "n_random": "n_random",
    "synth": "synth",
}


def build_config(args: argparse.Namespace) -> tuple[dict, set]:
    """Merges defaults, config file, and flags; returns (config, explicit keys)."""
    cfg = dict(DEFAULTS)
    explicit: set[str] = set()
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise ValidationError(f"config file not found: {path}")
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file is not valid JSON: {path}: {exc}")
        if not isinstance(loaded, dict):
            raise ValidationError(f"config file must hold a JSON object: {path}")
        unknown = sorted(set(loaded) - set(DEFAULTS))
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(loaded)
        explicit.update(loaded)
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            cfg[key] = value
            explicit.add(key)
    return cfg, explicit


def _provenance(cfg: dict) -> dict:
    semantic = {k: v for k, v in cfg.items() if k not in _NON_SEMANTIC}
    blob = json.dumps(semantic, sort_keys=True, separators=(",", ":"))
    return {
        "config_hash": hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16],
        "seed": cfg["seed"],
        "tool_version": __version__,
    }


def _log_time(step: str, started: float) -> None:
    sys.stderr.write(f"[time] {step}: {time.perf_counter() - started:.3f} s\n")


def _out_dir(cfg: dict, required: bool) -> Path | None:
    if cfg.get("out") is None:
        if required:
            raise ValidationError("--out is required for this command")
        return None
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _search_params(cfg: dict, lam=None, k=None, n_ids=None, seed=None) -> SearchParams:
    return SearchParams(
        lam=cfg["lambda"] if lam is None else lam,
        k=cfg["k"] if k is None else k,
        n_identities=cfg["n_ids"] if n_ids is None else n_ids,
        seed=cfg["seed"] if seed is None else seed,
        camera_aware=bool(cfg["camera_aware"]),
    )


def _synth_spec(cfg: dict) -> SynthSpec:
    opts = dict(cfg["synth"] or {})
    opts.pop("seed", None)  # the top-level seed governs generation
    try:
        return SynthSpec(seed=cfg["seed"], **opts)
    except TypeError as exc:
        raise ValidationError(f"bad synth spec: {exc}")


def _default_n_ids(cfg: dict, explicit: set) -> int:
    """Synthetic worlds are small; shrink the draw unless the user chose one."""
    if "n_ids" in explicit or cfg["synth"] is None:
        return cfg["n_ids"]
    return 40


def _load_world_or_files(cfg: dict, explicit: set):
    """Returns (pool, target, accuracy table or None, world or None)."""
    if cfg["synth"] is not None:
        world = gen_world(_synth_spec(cfg))
        return world.pool, world.target, world.accuracy, world
    if not cfg["pool_manifests"] or not cfg["pool_embeddings"]:
        raise ValidationError("need pool manifests and embeddings (or --synth)")
    if not cfg["target_manifest"] or not cfg["target_embeddings"]:
        raise ValidationError("need a target manifest and embeddings (or --synth)")
    pool = load_pool(cfg["pool_manifests"], cfg["pool_embeddings"])
    target = load_target(cfg["target_manifest"], cfg["target_embeddings"])
    table = AccuracyTable.read_csv(cfg["accuracy"]) if cfg["accuracy"] else None
    return pool, target, table, None


def _composition_column(table: AccuracyTable, records) -> np.ndarray:
    """Accuracy of each model on a proxy, weighting dataset columns by the
    proxy's image composition."""
    counts: dict[str, int] = {}
    for rec in records:
        counts[rec.dataset_name] = counts.get(rec.dataset_name, 0) + 1
    missing = sorted(set(counts) - set(table.dataset_ids))
    if missing:
        raise ValidationError(f"accuracy table lacks dataset columns: {', '.join(missing)}")
    total = sum(counts.values())
    column = np.zeros(len(table.model_ids))
    for name, count in counts.items():
        column = column + (count / total) * table.column(name)
    return column


def cmd_search(cfg: dict, explicit: set) -> int:
    out = _out_dir(cfg, required=True)
    started = time.perf_counter()
    pool, target, _, _ = _load_world_or_files(cfg, explicit)
    _log_time("load", started)

    started = time.perf_counter()
    params = _search_params(cfg, n_ids=_default_n_ids(cfg, explicit))
    proxy = search_proxy(pool, target, params)
    _log_time("search", started)

    started = time.perf_counter()
    (out / "proxy.jsonl").write_text(proxy_records_jsonl(proxy), encoding="utf-8")
    summary = proxy_summary(proxy)
    summary["provenance"] = _provenance(cfg)
    _write_json(out / "search_summary.json", summary)
    _log_time("write", started)
    return 0


def _eval_embedding_mode(cfg: dict) -> dict:
    if not cfg["proxy"]:
        raise ValidationError("embedding mode needs --proxy (JSONL from a search run)")
    if not cfg["accuracy"] or not cfg["reference_column"]:
        raise ValidationError("embedding mode needs --accuracy and --reference-column")
    proxy_path = Path(cfg["proxy"])
    if not proxy_path.is_file():
        raise ValidationError(f"proxy file not found: {proxy_path}")
    proxy = proxy_from_jsonl(proxy_path.read_text(encoding="utf-8"))
    table = AccuracyTable.read_csv(cfg["accuracy"])

    models_dir = Path(cfg["models_dir"])
    if not models_dir.is_dir():
        raise ValidationError(f"models directory not found: {models_dir}")
    model_files = sorted(models_dir.glob("*.emb1"))
    if not model_files:
        raise ValidationError(f"no .emb1 model files in {models_dir}")

    per_model = {}
    scores = []
    reference = []
    for path in model_files:
        model_id = path.stem
        if model_id not in table.model_ids:
            raise ValidationError(f"model '{model_id}' missing from accuracy table")
        result = reid_eval(read_embeddings(path), proxy)
        per_model[model_id] = {
            "map": result.map,
            "rank_k": {str(k): v for k, v in result.rank_k.items()},
            "n_queries": result.n_queries,
        }
        scores.append(result.map)
        row = table.model_ids.index(model_id)
        reference.append(float(table.column(cfg["reference_column"])[row]))

    pair = AccuracyTable(
        model_ids=tuple(p.stem for p in model_files),
        dataset_ids=("proxy", "reference"),
        values=np.column_stack([scores, reference]),
    )
    report = proxy_quality(pair, "proxy", "reference", seed=cfg["seed"])
    return {"mode": "embedding", "per_model": per_model, "report": report.to_dict()}


def cmd_eval(cfg: dict, explicit: set) -> int:
    started = time.perf_counter()
    if cfg["models_dir"]:
        payload = _eval_embedding_mode(cfg)
    else:
        if not cfg["accuracy"]:
            raise ValidationError("table mode needs --accuracy")
        if not cfg["proxy_column"] or not cfg["reference_column"]:
            raise ValidationError("table mode needs --proxy-column and --reference-column")
        table = AccuracyTable.read_csv(cfg["accuracy"])
        report = proxy_quality(
            table, cfg["proxy_column"], cfg["reference_column"], seed=cfg["seed"]
        )
        payload = {"mode": "table", "report": report.to_dict()}
    payload["provenance"] = _provenance(cfg)
    _log_time("eval", started)

    out = _out_dir(cfg, required=False)
    if out is not None:
        _write_json(out / "eval_report.json", payload)
    else:
        sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return 0


def _sweep_cell(pool, target, target_summary, target_variance, table, reference, cfg, lam, k, n):
    params = _search_params(cfg, lam=lam, k=k, n_ids=n)
    proxy = search_proxy(pool, target, params)
    column = _composition_column(table, proxy.records)
    rows = [rec.row_index for rec in proxy.records]
    features = pool.matrix[rows]
    return {
        "rho": spearman(column, reference),
        "tau": kendall_tau_b(column, reference),
        "fid": fid(summarize(features), target_summary),
        "v_gap": abs(scalar_variance(features) - target_variance),
    }


def cmd_sweep(cfg: dict, explicit: set) -> int:
    out = _out_dir(cfg, required=True)
    started = time.perf_counter()
    pool, target, table, world = _load_world_or_files(cfg, explicit)
    if table is None:
        raise ValidationError("sweep needs an accuracy table (or --synth)")
    if world is not None:
        reference_name = world.target_domain
    else:
        if not cfg["reference_column"]:
            raise ValidationError("sweep over files needs --reference-column")
        reference_name = cfg["reference_column"]
    reference = table.column(reference_name)
    target_summary = summarize(target.matrix)
    target_variance = scalar_variance(target.matrix)
    _log_time("load", started)

    lambdas = list(cfg["lambda_grid"])
    ks = list(cfg["k_grid"]) if cfg["k_grid"] else [cfg["k"]]
    ns = list(cfg["n_grid"]) if cfg["n_grid"] else [_default_n_ids(cfg, explicit)]
    if not lambdas or not ks or not ns:
        raise ValidationError("sweep grids must be nonempty")
    cells = [(lam, k, n) for lam in lambdas for k in ks for n in ns]

    def run_cell(cell):
        lam, k, n = cell
        try:
            return _sweep_cell(
                pool, target, target_summary, target_variance, table, reference, cfg, lam, k, n
            )
        except ProxyRankError as exc:
            return {"error": str(exc)}

    started = time.perf_counter()
    jobs = max(int(cfg["jobs"]), 1)
    if jobs == 1:
        results = [run_cell(cell) for cell in cells]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool_exec:
            results = list(pool_exec.map(run_cell, cells))
    _log_time("sweep", started)

    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["lambda", "k", "n", "rho", "tau", "fid", "v_gap", "status"])
    n_ok = 0
    for (lam, k, n), result in zip(cells, results):
        if "error" in result:
            writer.writerow([repr(lam), k, n, "", "", "", "", f"error: {result['error']}"])
        else:
            n_ok += 1
            writer.writerow(
                [repr(lam), k, n, repr(result["rho"]), repr(result["tau"]),
                 repr(result["fid"]), repr(result["v_gap"]), "ok"]
            )
    (out / "sweep.csv").write_text(buffer.getvalue(), encoding="utf-8")

    best = None
    for (lam, k, n), result in zip(cells, results):
        if "error" not in result and (best is None or result["rho"] > best["rho"]):
            best = {"lambda": lam, "k": k, "n": n, "rho": result["rho"]}
    _write_json(
        out / "sweep_summary.json",
        {
            "cells": len(cells),
            "ok": n_ok,
            "failed": len(cells) - n_ok,
            "best": best,
            "provenance": _provenance(cfg),
        },
    )
    if n_ok == 0:
        raise ValidationError("every sweep cell failed")
    return 0


def cmd_synth(cfg: dict, explicit: set) -> int:
    out = _out_dir(cfg, required=True)
    started = time.perf_counter()
    spec = _synth_spec({**cfg, "synth": cfg["synth"] or {}})
    world = gen_world(spec)
    _log_time("gen_world", started)

    started = time.perf_counter()
    grid = TrendGrid(
        lambdas=tuple(cfg["lambda_grid"]),
        k=cfg["k"],
        n_identities=_default_n_ids(cfg, explicit),
        n_random=cfg["n_random"],
        seed=cfg["seed"],
    )
    report = run_trend(world, grid)
    _log_time("run_trend", started)

    started = time.perf_counter()
    (out / "trend.csv").write_text(trend_csv(report), encoding="utf-8")
    _write_json(
        out / "trend_summary.json",
        {"spec": asdict(spec), "summary": report.summary, "provenance": _provenance(cfg)},
    )
    synthbench.write_world(world, out / "world")
    _log_time("write", started)
    return 0


def _pool_report(pool: FeaturePool) -> dict:
    cameras = sorted({rec.camera_id for rec in pool.records if rec.camera_id is not None})
    return {
        "rows": pool.n_rows,
        "dims": pool.dims,
        "datasets": sorted(pool.datasets),
        "identities": len(pool.identity_order()),
        "cameras": cameras,
    }


def cmd_validate(cfg: dict, explicit: set) -> int:
    report: dict = {"status": "ok"}
    checked = False
    if cfg["pool_manifests"] or cfg["pool_embeddings"]:
        pool = load_pool(cfg["pool_manifests"], cfg["pool_embeddings"])
        report["pool"] = _pool_report(pool)
        checked = True
    if cfg["target_manifest"] or cfg["target_embeddings"]:
        if not cfg["target_manifest"] or not cfg["target_embeddings"]:
            raise ValidationError("target validation needs both manifest and embeddings")
        target = load_target(cfg["target_manifest"], cfg["target_embeddings"])
        report["target"] = _pool_report(target)
        checked = True
    if cfg["accuracy"]:
        table = AccuracyTable.read_csv(cfg["accuracy"])
        report["accuracy"] = {
            "models": len(table.model_ids),
            "datasets": list(table.dataset_ids),
        }
        checked = True
    if not checked:
        raise ValidationError("nothing to validate: give pool, target, or accuracy paths")
    report["provenance"] = _provenance(cfg)
    sys.stdout.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    out = _out_dir(cfg, required=False)
    if out is not None:
        _write_json(out / "validate.json", report)
    return 0


_COMMANDS = {
    "search": cmd_search,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
    "validate": cmd_validate,
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="proxyrank", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="{search,eval,sweep,synth,validate}")
    for name, help_text in [
        ("search", "search a labeled proxy set for an unlabeled target"),
        ("eval", "score a proxy's model ranking against a reference"),
        ("sweep", "grid-search lambda/k/n and report per-cell quality"),
        ("synth", "generate a synthetic world and run the trend report"),
        ("validate", "check embedding/manifest/accuracy files"),
    ]:
        _add_common(sub.add_parser(name, help=help_text))
    return parser


def main(argv=None) -> int:
    out_hint = None
    try:
        parser = _build_parser()
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise ValidationError("a subcommand is required: search, eval, sweep, synth, validate")
        cfg, explicit = build_config(args)
        out_hint = cfg.get("out")
        return _COMMANDS[args.command](cfg, explicit)
    except ValidationError as exc:
        return _emit_failure(exc, exc.report, out_hint, 1)
    except NumericalError as exc:
        return _emit_failure(exc, {"error": str(exc)}, out_hint, 2)


def _emit_failure(exc: Exception, report: dict, out_hint, code: int) -> int:
    sys.stderr.write(f"error: {exc}\n")
    payload = dict(report or {"error": str(exc)})
    payload["exit_code"] = code
    if out_hint:
        try:
            out = Path(out_hint)
            out.mkdir(parents=True, exist_ok=True)
            _write_json(out / "error.json", payload)
        except OSError:
            pass
    return code


if __name__ == "__main__":
    sys.exit(main())
