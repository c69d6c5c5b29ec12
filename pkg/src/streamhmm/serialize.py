"""File formats emitted and consumed by the command line front end.

Streams are JSON Lines: the first line is a header object carrying
``schema_version``, the file kind, the seed, and the fully resolved
configuration; every following line is one record.  Tables are CSV with a
single leading ``#`` comment line embedding the same header, so the column
header is the first non-comment line.  Beam snapshots are a single JSON
document that captures enough to resume or forecast: histories, weights,
per-regime summaries, and the transition structure.
"""

import csv
import json
import math

import numpy as np

from .beam import Beam, PathHypothesis, _PathNode
from .config import SCHEMA_VERSION, _plain
from .datagen import GaussHmmConfig, GpDgpConfig, RegimeSeries
from .errors import ConfigError
from .mixtures import GaussianMixture
from .prequential import AggregateRow, PrequentialResult, SweepCell
from .regimes import GaussianConjugateState, GPState, KernelHyper
from .transition import TransitionMatrix, sticky_transition

COMPARE_COLUMNS = ("method", "s_budget", "seed", "mae", "rmse", "runtime_seconds")
AGGREGATE_COLUMNS = (
    "method",
    "s_budget",
    "n_seeds",
    "mae_mean",
    "mae_std",
    "rmse_mean",
    "rmse_std",
    "runtime_seconds_mean",
    "runtime_seconds_std",
)


def _json_line(obj) -> str:
    return json.dumps(_plain(obj), allow_nan=True, separators=(", ", ": "))


def file_header(file_kind: str, seed: int, config: dict) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "file_kind": file_kind,
        "seed": seed,
        "config": config,
    }


def write_jsonl(path, header: dict, records) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(_json_line(header) + "\n")
        for record in records:
            handle.write(_json_line(record) + "\n")


def read_jsonl(path) -> tuple[dict, list[dict]]:
    with open(path, "r", encoding="utf-8") as handle:
        lines = [line for line in handle if line.strip()]
    if not lines:
        raise ConfigError(f"{path}: empty stream file")
    header = json.loads(lines[0])
    if str(header.get("schema_version")) != SCHEMA_VERSION:
        raise ConfigError(
            f"{path}: schema_version {header.get('schema_version')!r}, "
            f"this build reads {SCHEMA_VERSION!r}"
        )
    return header, [json.loads(line) for line in lines[1:]]


def dataset_config_dict(cfg) -> dict:
    """Plain form of a generator config, tagged with its kind.

    ``read_dataset`` needs the tag to pick the right config class, so every
    header embedding a dataset section should use this instead of the bare
    dataclass.
    """
    kind = "gauss-hmm" if isinstance(cfg, GaussHmmConfig) else "gp-hmm"
    return {"kind": kind, **_plain(cfg)}


def dataset_records(series: RegimeSeries):
    t_local = series.t_local
    for i in range(len(series)):
        yield {
            "t": i + 1,
            "y": float(series.observations[i]),
            "true_regime": int(series.regimes[i]),
            "t_local": None if t_local is None else float(t_local[i]),
        }


def write_dataset(path, series: RegimeSeries, seed: int, config: dict) -> None:
    write_jsonl(path, file_header("dataset", seed, config), dataset_records(series))


def read_dataset(path) -> RegimeSeries:
    """Rebuild a generated stream from its file.

    The header's resolved config carries the generator parameters, so the
    transition structure and noise level are recovered exactly; the
    observations come from the records.
    """
    header, records = read_jsonl(path)
    dataset_cfg = (header.get("config") or {}).get("dataset")
    if not isinstance(dataset_cfg, dict) or "kind" not in dataset_cfg:
        raise ConfigError(f"{path}: dataset header lacks a resolved dataset config")
    kind = dataset_cfg["kind"]
    fields = {k: v for k, v in dataset_cfg.items() if k != "kind"}
    for key in ("slopes", "means", "initial"):
        if key in fields and fields[key] is not None:
            fields[key] = tuple(fields[key])
    try:
        cfg = GaussHmmConfig(**fields) if kind == "gauss-hmm" else GpDgpConfig(**fields)
    except (TypeError, AssertionError) as exc:
        raise ConfigError(f"{path}: bad dataset config in header: {exc}") from exc
    observations = np.array([float(r["y"]) for r in records])
    regimes = np.array([int(r["true_regime"]) for r in records], dtype=np.int64)
    t_local = None
    if records and records[0].get("t_local") is not None:
        t_local = np.array([float(r["t_local"]) for r in records])
    if kind == "gauss-hmm":
        times = np.arange(len(records)) + 1.0
    else:
        times = (np.arange(len(records)) + 1.0) * cfg.dt
    return RegimeSeries(
        observations=observations,
        regimes=regimes,
        times=times,
        t_local=t_local,
        transition=sticky_transition(cfg.k, cfg.self_prob, cfg.initial),
        config=cfg,
    )


def per_step_records(result: PrequentialResult):
    for record in result.per_step:
        yield {
            "t": record.t,
            "y": record.y,
            "predictive_mean": record.predictive_mean,
            "predictive_variance": record.predictive_variance,
            "log_score": record.log_score,
            "top_path_state": record.top_path_state,
            "regime_means": None if record.regime_means is None else list(record.regime_means),
        }


def write_per_step(path, result: PrequentialResult, seed: int, config: dict) -> None:
    header = file_header("per-step", seed, config)
    header["method"] = result.method
    write_jsonl(path, header, per_step_records(result))


def summary_dict(result: PrequentialResult, s_budget: int) -> dict:
    return {
        "method": result.method,
        "s_budget": s_budget,
        "n_steps": result.n_steps,
        "mae": result.mae,
        "rmse": result.rmse,
        "runtime_seconds": result.runtime_seconds,
        "runtime_seconds_min": result.runtime_seconds_min,
        "total_log_score": result.total_log_score,
        "failed_at_t": result.failed_at_t,
    }


def write_summary(path, result: PrequentialResult, s_budget: int, seed: int, config: dict) -> None:
    payload = file_header("summary", seed, config)
    payload["summary"] = summary_dict(result, s_budget)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(_plain(payload), handle, indent=2)
        handle.write("\n")


def read_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    if str(payload.get("schema_version")) != SCHEMA_VERSION:
        raise ConfigError(
            f"{path}: schema_version {payload.get('schema_version')!r}, "
            f"this build reads {SCHEMA_VERSION!r}"
        )
    return payload


def _write_csv(path, columns, rows, seed: int, config: dict) -> None:
    header = file_header("table", seed, config)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write("# " + _json_line(header) + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow(row)


def write_compare_csv(path, cells, seed: int, config: dict) -> None:
    rows = [
        (c.method, c.s_budget, c.seed, repr(c.mae), repr(c.rmse), repr(c.runtime_seconds))
        for c in cells
    ]
    _write_csv(path, COMPARE_COLUMNS, rows, seed, config)


def write_aggregate_csv(path, rows: list[AggregateRow], seed: int, config: dict) -> None:
    table = [
        (
            r.method,
            r.s_budget,
            r.n_seeds,
            repr(r.mae_mean),
            repr(r.mae_std),
            repr(r.rmse_mean),
            repr(r.rmse_std),
            repr(r.runtime_mean),
            repr(r.runtime_std),
        )
        for r in rows
    ]
    _write_csv(path, AGGREGATE_COLUMNS, table, seed, config)


def read_csv(path) -> tuple[dict, list[dict]]:
    """Read a table, returning (embedded header, row dicts)."""
    with open(path, "r", encoding="utf-8") as handle:
        lines = handle.read().splitlines()
    comment = [line[1:].strip() for line in lines if line.startswith("#")]
    body = [line for line in lines if line and not line.startswith("#")]
    header = json.loads(comment[0]) if comment else {}
    if comment and str(header.get("schema_version")) != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema_version {header.get('schema_version')!r}")
    reader = csv.DictReader(body)
    return header, list(reader)


def summary_to_cell(summary: dict, seed: int) -> SweepCell:
    return SweepCell(
        method=summary["method"],
        s_budget=int(summary["s_budget"]),
        seed=seed,
        mae=float(summary["mae"]),
        rmse=float(summary["rmse"]),
        runtime_seconds=float(summary["runtime_seconds"]),
        failed_at_t=summary.get("failed_at_t"),
    )


def summary_state_dict(state) -> dict:
    if isinstance(state, GaussianConjugateState):
        return {
            "type": "gaussian",
            "post_mean": state.post_mean,
            "post_var": state.post_var,
            "obs_var": state.obs_var,
        }
    if isinstance(state, GPState):
        return {
            "type": "gp",
            "hyper": _plain(state.hyper),
            "noise_var": state.noise_var,
            "inputs": list(state.inputs),
            "targets": list(state.targets),
            "window_cap": state.window_cap,
        }
    raise TypeError(f"cannot serialize summary of type {type(state).__name__}")


def summary_state_from_dict(payload: dict):
    kind = payload.get("type")
    if kind == "gaussian":
        return GaussianConjugateState(
            post_mean=float(payload["post_mean"]),
            post_var=float(payload["post_var"]),
            obs_var=float(payload["obs_var"]),
        )
    if kind == "gp":
        return GPState(
            hyper=KernelHyper(**payload["hyper"]),
            noise_var=float(payload["noise_var"]),
            inputs=tuple(float(v) for v in payload["inputs"]),
            targets=tuple(float(v) for v in payload["targets"]),
            window_cap=int(payload["window_cap"]),
        )
    raise ConfigError(f"unknown summary type {kind!r} in snapshot")


def beam_to_dict(beam: Beam, pi: TransitionMatrix, *, t_delta: float = 1.0, t_base: float | None = None) -> dict:
    """Self-describing snapshot of a beam and its transition structure."""
    return {
        "schema_version": SCHEMA_VERSION,
        "file_kind": "beam-snapshot",
        "t": beam.t,
        "t_base": beam.t * t_delta if t_base is None else t_base,
        "t_delta": t_delta,
        "transition": {"rows": pi.rows.tolist(), "initial": pi.initial.tolist()},
        "log_weights": [float(v) for v in beam.log_weights],
        "hypotheses": [
            {
                "history": list(h.history),
                "last_state": h.last_state,
                "log_weight": h.log_weight,
                "summaries": [summary_state_dict(s) for s in h.summaries],
            }
            for h in beam.hypotheses
        ],
    }


def beam_from_dict(payload: dict) -> tuple[Beam, TransitionMatrix, float, float]:
    """Rebuild (beam, transition, t_base, t_delta) from a snapshot."""
    if str(payload.get("schema_version")) != SCHEMA_VERSION:
        raise ConfigError(f"snapshot schema_version {payload.get('schema_version')!r} unsupported")
    if payload.get("file_kind") != "beam-snapshot":
        raise ConfigError(f"not a beam snapshot: file_kind={payload.get('file_kind')!r}")
    pi = TransitionMatrix(
        rows=np.array(payload["transition"]["rows"], dtype=float),
        initial=np.array(payload["transition"]["initial"], dtype=float),
    )
    hypotheses = []
    for entry in payload["hypotheses"]:
        node = None
        for state in entry["history"]:
            node = _PathNode(int(state), node)
        hypotheses.append(
            PathHypothesis(
                node=node,
                last_state=None if entry["last_state"] is None else int(entry["last_state"]),
                log_weight=float(entry["log_weight"]),
                summaries=tuple(summary_state_from_dict(s) for s in entry["summaries"]),
            )
        )
    beam = Beam(
        hypotheses=tuple(hypotheses),
        log_weights=np.array(payload["log_weights"], dtype=float),
        t=int(payload["t"]),
    )
    return beam, pi, float(payload["t_base"]), float(payload["t_delta"])


def write_snapshot(path, beam: Beam, pi: TransitionMatrix, seed: int, config: dict, *, t_delta: float = 1.0) -> None:
    payload = beam_to_dict(beam, pi, t_delta=t_delta)
    payload["seed"] = seed
    payload["config"] = config
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(_plain(payload), handle, indent=2)
        handle.write("\n")


def forecast_records(forecasts: list[GaussianMixture], t_base: float, t_delta: float):
    for h, mixture in enumerate(forecasts, start=1):
        mean, var = mixture.moments()
        yield {
            "h": h,
            "t_query": t_base + h * t_delta,
            "mean": mean,
            "variance": var,
            "components": [
                {"weight": float(w), "mean": float(m), "variance": float(v)}
                for w, m, v in mixture.components
            ],
        }


def write_forecast(path, forecasts, t_base: float, t_delta: float, seed: int, config: dict) -> None:
    header = file_header("forecast", seed, config)
    header["t_base"] = t_base
    header["t_delta"] = t_delta
    header["horizon"] = len(forecasts)
    write_jsonl(path, header, forecast_records(forecasts, t_base, t_delta))


def isfinite_or_none(value):
    if value is None:
        return None
    if math.isfinite(value):
        return value
    if math.isnan(value):
        return "nan"
    return "inf" if value > 0 else "-inf"
