"""Command line front end.

Subcommands:

* ``generate``: write a synthetic stream to ``dataset.jsonl``.
* ``filter``: run one method over a stream; write per-step records, a
  summary, and optionally a beam snapshot.
* ``compare``: run several methods over seeded streams at one budget;
  write raw and aggregated CSV tables.
* ``sweep``: like ``compare`` but across a list of budgets.
* ``verify-theorem``: measure truncation loss against its bound on a grid
  of random instances; write a JSON report.
* ``forecast``: emit a multi-horizon forecast from a snapshot or a freshly
  filtered stream.

All behaviour is driven by a JSON config (``--config``); ``--seed``
overrides the config seed and ``--out`` the output directory (which also
honours the ``STREAMHMM_OUT`` environment variable).  Exit codes: 0 on
success, 2 for configuration problems, 3 for numerical failures, 4 when a
measured truncation loss exceeds its bound.
"""

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import serialize
from .config import (
    DATASET_KINDS,
    SCHEMA_VERSION,
    check_schema_version,
    experiment_kind,
    load_config_file,
    parse_dataset,
    parse_error_target,
    parse_methods,
    parse_seeds,
    parse_settings,
    parse_theorem_grid,
    resolved_config,
)
from .datagen import GaussHmmConfig, GpDgpConfig, gen_gaussian_hmm, gen_gp_regime_series
from .errors import ConfigError, StreamHmmError
from .oracle import (
    TruncationBoundError,
    _truncation_report,
    exact_path_posterior,
    path_conditional_predictive,
    posterior_predictive,
    rank_paths,
    sample_conjugate_instance,
    support_sweep,
    weight_optimality_probe,
)
from .prequential import (
    METHOD_NAMES,
    PrequentialConfig,
    aggregate_sweep,
    build_method,
    run_prequential,
    sweep_budget,
)

COMMON_KEYS = ("schema_version", "kind", "seed", "out", "threads")


def _generate_series(dataset_cfg):
    if isinstance(dataset_cfg, GaussHmmConfig):
        return gen_gaussian_hmm(dataset_cfg)
    return gen_gp_regime_series(dataset_cfg)


def _check_keys(document, allowed, where="config"):
    unknown = sorted(set(document) - set(allowed) - set(COMMON_KEYS))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _resolve_out_dir(args, document) -> Path:
    out = args.out or document.get("out") or os.environ.get("STREAMHMM_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _resolve_seed(args, document) -> int:
    if args.seed is not None:
        return int(args.seed)
    seed = document.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("seed: expected an integer")
    return seed


def _resolve_threads(args, document) -> int:
    threads = args.threads if args.threads is not None else document.get("threads", 1)
    if isinstance(threads, bool) or not isinstance(threads, int) or threads < 1:
        raise ConfigError("threads: expected a positive integer")
    return threads


def _load_series(document, dataset_cfg):
    path = document.get("dataset_path")
    if path is not None:
        return serialize.read_dataset(path)
    return _generate_series(dataset_cfg)


def _parse_method_section(document) -> tuple[str, int]:
    section = document.get("method", {})
    if not isinstance(section, dict):
        raise ConfigError("method: expected an object")
    unknown = sorted(set(section) - {"name", "s_budget"})
    if unknown:
        raise ConfigError(f"method: unknown key(s) {', '.join(unknown)}")
    name = section.get("name", "shmm")
    if name not in METHOD_NAMES:
        raise ConfigError(f"method.name: unknown method {name!r}, expected {METHOD_NAMES}")
    s_budget = section.get("s_budget", 2)
    if isinstance(s_budget, bool) or not isinstance(s_budget, int) or s_budget < 1:
        raise ConfigError("method.s_budget: expected a positive integer")
    return name, s_budget


def _guard_method_dataset(names, dataset_cfg) -> None:
    if isinstance(dataset_cfg, GpDgpConfig):
        bad = [n for n in names if n != "shmm"]
        if bad:
            raise ConfigError(
                f"method(s) {', '.join(bad)} assume fixed regime means and only run "
                "on gauss-hmm datasets"
            )


def _targets(document, series) -> np.ndarray | None:
    if parse_error_target(document) == "observations":
        return None
    if not isinstance(series.config, GaussHmmConfig):
        raise ConfigError("error_target 'true-means' needs a gauss-hmm dataset")
    means = np.asarray(series.config.means, dtype=float)
    return means[series.regimes]


def cmd_generate(document, args) -> int:
    if experiment_kind(document) not in DATASET_KINDS:
        raise ConfigError("generate expects kind gauss-hmm or gp-hmm")
    _check_keys(document, ("dataset",))
    seed = _resolve_seed(args, document)
    out_dir = _resolve_out_dir(args, document)
    dataset_cfg = parse_dataset(document, seed)
    series = _generate_series(dataset_cfg)
    resolved = resolved_config(
        document, seed=seed, dataset=serialize.dataset_config_dict(dataset_cfg)
    )
    path = out_dir / "dataset.jsonl"
    serialize.write_dataset(path, series, seed, resolved)
    print(f"wrote {path} ({len(series)} steps)")
    return 0


def cmd_filter(document, args) -> int:
    if experiment_kind(document) not in DATASET_KINDS:
        raise ConfigError("filter expects kind gauss-hmm or gp-hmm")
    _check_keys(
        document,
        ("dataset", "dataset_path", "method", "settings", "error_target", "timing_repeats", "snapshot"),
    )
    seed = _resolve_seed(args, document)
    out_dir = _resolve_out_dir(args, document)
    dataset_cfg = parse_dataset(document, seed)
    series = _load_series(document, dataset_cfg)
    name, s_budget = _parse_method_section(document)
    _guard_method_dataset([name], series.config)
    settings = parse_settings(document, gp_dataset=isinstance(series.config, GpDgpConfig))
    timing_repeats = document.get("timing_repeats", 1)
    resolved = resolved_config(
        document,
        seed=seed,
        dataset=serialize.dataset_config_dict(series.config),
        method={"name": name, "s_budget": s_budget},
        settings=settings,
    )
    factory = lambda: build_method(name, series, s_budget, seed, settings)
    method = factory()
    result = run_prequential(
        method,
        series,
        PrequentialConfig(targets=_targets(document, series), timing_repeats=1),
    )
    if timing_repeats > 1:
        timed = run_prequential(
            factory, series, PrequentialConfig(timing_repeats=timing_repeats, record_regime_means=False)
        )
        result = dataclasses.replace(result, runtime_seconds_min=timed.runtime_seconds_min)

    per_step_path = out_dir / "per_step.jsonl"
    summary_path = out_dir / "summary.json"
    serialize.write_per_step(per_step_path, result, seed, resolved)
    serialize.write_summary(summary_path, result, s_budget, seed, resolved)
    print(f"wrote {per_step_path}")
    print(f"wrote {summary_path}")
    if document.get("snapshot"):
        if name != "shmm":
            raise ConfigError("snapshot: only the shmm method has beam state to save")
        t_delta = float(series.times[1] - series.times[0]) if len(series) > 1 else 1.0
        snapshot_path = out_dir / "snapshot.json"
        serialize.write_snapshot(snapshot_path, method.beam, method.pi, seed, resolved, t_delta=t_delta)
        print(f"wrote {snapshot_path}")
    if result.failed_at_t is not None:
        print(f"filtering failed at t={result.failed_at_t}", file=sys.stderr)
        return 3
    return 0


def _comparison(document, args, s_values, raw_name, aggregate_name) -> int:
    seed = _resolve_seed(args, document)
    out_dir = _resolve_out_dir(args, document)
    threads = _resolve_threads(args, document)
    dataset_cfg = parse_dataset(document, seed)
    methods = parse_methods(document)
    _guard_method_dataset(methods, dataset_cfg)
    settings = parse_settings(document, gp_dataset=isinstance(dataset_cfg, GpDgpConfig))
    seeds = parse_seeds(document, seed)
    measure_runtime = bool(document.get("measure_runtime", True))
    timing_repeats = document.get("timing_repeats", 1)
    resolved = resolved_config(
        document,
        seed=seed,
        dataset=serialize.dataset_config_dict(dataset_cfg),
        methods=methods,
        s_values=list(s_values),
        seeds=seeds,
        settings=settings,
        measure_runtime=measure_runtime,
    )
    cells = sweep_budget(
        methods,
        s_values,
        seeds,
        dataset_cfg,
        settings=settings,
        timing_repeats=timing_repeats,
        threads=threads,
    )
    if not measure_runtime:
        cells = [dataclasses.replace(c, runtime_seconds=0.0) for c in cells]
    raw_path = out_dir / raw_name
    aggregate_path = out_dir / aggregate_name
    serialize.write_compare_csv(raw_path, cells, seed, resolved)
    serialize.write_aggregate_csv(aggregate_path, aggregate_sweep(cells), seed, resolved)
    print(f"wrote {raw_path}")
    print(f"wrote {aggregate_path}")
    failed = [c for c in cells if c.failed_at_t is not None]
    if failed:
        print(f"{len(failed)} cell(s) failed mid-stream", file=sys.stderr)
        return 3
    return 0


def cmd_compare(document, args) -> int:
    _check_keys(
        document,
        ("dataset", "methods", "s_budget", "seeds", "n_seeds", "settings",
         "measure_runtime", "timing_repeats", "error_target"),
    )
    s_budget = document.get("s_budget", 2)
    if isinstance(s_budget, bool) or not isinstance(s_budget, int) or s_budget < 1:
        raise ConfigError("s_budget: expected a positive integer")
    return _comparison(document, args, [s_budget], "compare_raw.csv", "compare_aggregate.csv")


def cmd_sweep(document, args) -> int:
    _check_keys(
        document,
        ("dataset", "methods", "s_values", "seeds", "n_seeds", "settings",
         "measure_runtime", "timing_repeats", "error_target"),
    )
    s_values = document.get("s_values", [1, 2, 5, 10])
    if not isinstance(s_values, list) or not all(
        isinstance(v, int) and not isinstance(v, bool) and v >= 1 for v in s_values
    ):
        raise ConfigError("s_values: expected a list of positive integers")
    return _comparison(document, args, s_values, "sweep_raw.csv", "sweep_aggregate.csv")


def cmd_verify_theorem(document, args) -> int:
    _check_keys(document, ("theorem",))
    seed = _resolve_seed(args, document)
    out_dir = _resolve_out_dir(args, document)
    grid = parse_theorem_grid(document)
    resolved = resolved_config(document, seed=seed, theorem=grid)

    cells = []
    all_hold = True
    strengthened_hold = True
    for k in grid.k_values:
        for t in grid.t_values:
            for idx in range(grid.configs_per_cell):
                observations, pi, summaries = sample_conjugate_instance(k, t, (seed, k, t, idx))
                posterior = exact_path_posterior(observations, pi, summaries)
                ranked = rank_paths(posterior)
                for s in grid.s_values:
                    support = ranked[: min(s, len(ranked))]
                    report = _truncation_report(posterior, pi, support, tol=grid.tol)
                    probe = None
                    if grid.probe_trials > 0:
                        p_full = posterior_predictive(posterior, pi)
                        pairs = [
                            (float(posterior.weights[i]), path_conditional_predictive(posterior, i, pi))
                            for i in sorted(support)
                        ]
                        probe_report = weight_optimality_probe(
                            p_full, pairs, grid.probe_trials, (seed, k, t, idx, s), tol=grid.tol
                        )
                        probe = {
                            "trials": probe_report.trials,
                            "min_gap": probe_report.min_gap,
                            "baseline_kl": probe_report.baseline_kl,
                            "tolerance": probe_report.tolerance,
                            "negative_findings": probe_report.negative_findings.tolist(),
                        }
                    holds = (not report.assumption_holds) or report.bound_holds
                    s_holds = (not report.assumption_holds) or report.strengthened_bound_holds
                    all_hold = all_hold and holds
                    strengthened_hold = strengthened_hold and s_holds
                    cells.append(
                        {
                            "k": k,
                            "t": t,
                            "config_index": idx,
                            "s_budget": s,
                            "w_a": report.w_a,
                            "delta": report.delta,
                            "chi2_c": serialize.isfinite_or_none(report.chi2_c),
                            "kl_exact": report.kl_exact,
                            "bound": serialize.isfinite_or_none(report.bound),
                            "strengthened_bound": serialize.isfinite_or_none(report.strengthened_bound),
                            "quadrature_error_estimate": report.quadrature_error_estimate,
                            "assumption_holds": report.assumption_holds,
                            "bound_holds": holds,
                            "strengthened_bound_holds": s_holds,
                            "probe": probe,
                        }
                    )

    sweeps = []
    for k, t, s in grid.sweep_instances:
        observations, pi, summaries = sample_conjugate_instance(k, t, (seed, k, t, 0))
        sweep_report = support_sweep(observations, pi, summaries, s, tol=grid.tol)
        sweeps.append(
            {
                "k": k,
                "t": t,
                "s_budget": s,
                "n_paths": sweep_report.n_paths,
                "top_support": list(sweep_report.top_support),
                "top_attains_min_delta": sweep_report.top_attains_min_delta,
                "top_attains_min_kl": sweep_report.top_attains_min_kl,
                "rows": [
                    {
                        "support": list(row.support),
                        "delta": row.delta,
                        "chi2_c": serialize.isfinite_or_none(row.chi2_c),
                        "bound": serialize.isfinite_or_none(row.bound),
                        "kl": row.kl,
                    }
                    for row in sweep_report.rows
                ],
            }
        )

    payload = {
        "schema_version": SCHEMA_VERSION,
        "file_kind": "theorem-report",
        "seed": seed,
        "config": resolved,
        "cells": cells,
        "sweeps": sweeps,
        "all_bounds_hold": all_hold,
        "all_strengthened_bounds_hold": strengthened_hold,
    }
    path = out_dir / "theorem_report.json"
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")
    print(f"wrote {path} ({len(cells)} cells)")
    if not all_hold:
        print("truncation bound violated on at least one cell", file=sys.stderr)
        return 4
    return 0


def cmd_forecast(document, args) -> int:
    _check_keys(
        document,
        ("dataset", "dataset_path", "method", "settings", "horizon", "t_anchor", "snapshot_path"),
    )
    from .beam import multi_step_forecast

    seed = _resolve_seed(args, document)
    out_dir = _resolve_out_dir(args, document)
    horizon = document.get("horizon", 20)
    if isinstance(horizon, bool) or not isinstance(horizon, int) or horizon < 1:
        raise ConfigError("horizon: expected a positive integer")

    snapshot_path = document.get("snapshot_path")
    if snapshot_path is not None:
        payload = serialize.read_json(snapshot_path)
        beam, pi, t_base, t_delta = serialize.beam_from_dict(payload)
        resolved = resolved_config(document, seed=seed, snapshot_path=snapshot_path, horizon=horizon)
    else:
        if experiment_kind(document) not in DATASET_KINDS:
            raise ConfigError("forecast expects kind gauss-hmm or gp-hmm (or a snapshot_path)")
        dataset_cfg = parse_dataset(document, seed)
        series = _load_series(document, dataset_cfg)
        name, s_budget = _parse_method_section(document)
        if name != "shmm":
            raise ConfigError("forecast: only the shmm method carries forecastable beam state")
        settings = parse_settings(document, gp_dataset=isinstance(series.config, GpDgpConfig))
        t_anchor = document.get("t_anchor", len(series))
        if isinstance(t_anchor, bool) or not isinstance(t_anchor, int) or not 1 <= t_anchor <= len(series):
            raise ConfigError(f"t_anchor: expected an integer in [1, {len(series)}]")
        method = build_method(name, series, s_budget, seed, settings)
        for y in series.observations[:t_anchor]:
            method.update(float(y))
        beam, pi = method.beam, method.pi
        t_delta = float(series.times[1] - series.times[0]) if len(series) > 1 else 1.0
        t_base = float(series.times[t_anchor - 1])
        resolved = resolved_config(
            document, seed=seed, dataset=serialize.dataset_config_dict(series.config),
            method={"name": name, "s_budget": s_budget}, settings=settings,
            horizon=horizon, t_anchor=t_anchor,
        )
    forecasts = multi_step_forecast(beam, pi, horizon, t_base=t_base, t_delta=t_delta)
    path = out_dir / "forecast.jsonl"
    serialize.write_forecast(path, forecasts, t_base, t_delta, seed, resolved)
    print(f"wrote {path} (horizon {horizon})")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "filter": cmd_filter,
    "compare": cmd_compare,
    "sweep": cmd_sweep,
    "verify-theorem": cmd_verify_theorem,
    "forecast": cmd_forecast,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streamhmm",
        description="Streaming regime-switching filters with truncated path posteriors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="path to a JSON config")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument("--threads", type=int, default=None, help="parallel cells for grid commands")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        document = load_config_file(args.config)
        check_schema_version(document)
        return COMMANDS[args.command](document, args)
    except TruncationBoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StreamHmmError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
