"""Readers for the filter CLI's output files.

plotkit talks to the filtering package through files only.  Streams are
JSON Lines whose first line is a header object; tables are CSV whose first
line is a ``# {json}`` comment embedding the same header.  Everything drawn
downstream comes from fields already present in these files; nothing is
recomputed here.
"""

import csv
import json

SCHEMA_VERSION = "1"

AGGREGATE_METRICS = ("mae", "rmse", "runtime_seconds")


class PlotDataError(Exception):
    """Input file missing, malformed, or from an unsupported schema."""


def _check_version(header, path):
    version = header.get("schema_version")
    if str(version) != SCHEMA_VERSION:
        raise PlotDataError(
            f"{path}: schema_version {version!r}, this build reads {SCHEMA_VERSION!r}"
        )


def read_stream(path):
    """Read a JSONL stream; returns (header, records)."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = [line for line in handle if line.strip()]
    except OSError as exc:
        raise PlotDataError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise PlotDataError(f"{path}: empty stream file")
    try:
        header = json.loads(lines[0])
        records = [json.loads(line) for line in lines[1:]]
    except json.JSONDecodeError as exc:
        raise PlotDataError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise PlotDataError(f"{path}: first line is not a header object")
    _check_version(header, path)
    return header, records


def read_table(path):
    """Read a CSV table with its comment header; returns (header, row dicts)."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.read().splitlines()
    except OSError as exc:
        raise PlotDataError(f"cannot read {path}: {exc}") from exc
    comments = [line[1:].strip() for line in lines if line.startswith("#")]
    body = [line for line in lines if line and not line.startswith("#")]
    if not comments:
        raise PlotDataError(f"{path}: missing '# {{json}}' header comment")
    try:
        header = json.loads(comments[0])
    except json.JSONDecodeError as exc:
        raise PlotDataError(f"{path}: invalid header comment: {exc}") from exc
    _check_version(header, path)
    if not body:
        raise PlotDataError(f"{path}: table has no rows")
    return header, list(csv.DictReader(body))


def expect_kind(header, path, *kinds):
    kind = header.get("file_kind")
    if kind not in kinds:
        wanted = " or ".join(repr(k) for k in kinds)
        raise PlotDataError(f"{path}: file_kind {kind!r}, expected {wanted}")


def _column(records, key, path):
    try:
        return [float(r[key]) for r in records]
    except KeyError as exc:
        raise PlotDataError(f"{path}: records lack field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise PlotDataError(f"{path}: field {key!r} is not numeric: {exc}") from exc


def per_step_series(path):
    """(header, t, y, mean, variance) from a per-step stream."""
    header, records = read_stream(path)
    expect_kind(header, path, "per-step")
    if not records:
        raise PlotDataError(f"{path}: per-step file has no records, nothing to draw")
    return (
        header,
        _column(records, "t", path),
        _column(records, "y", path),
        _column(records, "predictive_mean", path),
        _column(records, "predictive_variance", path),
    )


def regime_mean_traces(path):
    """(header, t, traces) where traces[i] is regime i's estimated mean over time."""
    header, records = read_stream(path)
    expect_kind(header, path, "per-step")
    if not records:
        raise PlotDataError(f"{path}: per-step file has no records, nothing to draw")
    t = _column(records, "t", path)
    rows = [r.get("regime_means") for r in records]
    if any(row is None for row in rows):
        raise PlotDataError(f"{path}: per-step records carry no regime_means")
    k = len(rows[0])
    if any(len(row) != k for row in rows):
        raise PlotDataError(f"{path}: regime_means change size mid-stream")
    traces = [[float(row[i]) for row in rows] for i in range(k)]
    return header, t, traces


def forecast_series(path):
    """(header, t_query, mean, variance) from a forecast stream."""
    header, records = read_stream(path)
    expect_kind(header, path, "forecast")
    if not records:
        raise PlotDataError(f"{path}: forecast file has no records, nothing to draw")
    return (
        header,
        _column(records, "t_query", path),
        _column(records, "mean", path),
        _column(records, "variance", path),
    )


def switch_times(path):
    """(header, times): the steps at which the true regime changes."""
    header, records = read_stream(path)
    expect_kind(header, path, "dataset")
    times = []
    previous = None
    for record in records:
        regime = record.get("true_regime")
        if regime is None:
            raise PlotDataError(f"{path}: dataset records lack true_regime")
        if previous is not None and regime != previous:
            times.append(float(record["t"]))
        previous = regime
    return header, times


def sweep_curves_table(path):
    """Per-method aggregate curves over the budget column.

    Returns (header, methods): an ordered mapping from method name to
    ``{"s": [...], metric: ([means], [stds]) for each aggregate metric}``.
    Only aggregate tables qualify; raw per-seed tables lack the ``*_mean``
    columns and are rejected with a pointer to the right file.
    """
    header, rows = read_table(path)
    expect_kind(header, path, "table")
    required = ["method", "s_budget"] + [f"{m}_mean" for m in AGGREGATE_METRICS]
    missing = [column for column in required if column not in rows[0]]
    if missing:
        raise PlotDataError(
            f"{path}: not an aggregate table, missing column(s) {missing}; "
            "sweep-curves reads the *_aggregate.csv output"
        )
    methods = {}
    for row in rows:
        entry = methods.setdefault(
            row["method"],
            {"s": [], **{metric: ([], []) for metric in AGGREGATE_METRICS}},
        )
        entry["s"].append(int(row["s_budget"]))
        for metric in AGGREGATE_METRICS:
            entry[metric][0].append(float(row[f"{metric}_mean"]))
            entry[metric][1].append(float(row[f"{metric}_std"]))
    return header, methods
