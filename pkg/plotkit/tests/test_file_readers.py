import json

import pytest

from plotkit.io import (
    PlotDataError,
    expect_kind,
    forecast_series,
    per_step_series,
    read_stream,
    read_table,
    regime_mean_traces,
    sweep_curves_table,
    switch_times,
)

from format_helpers import AGGREGATE_HEADER, write_stream


def test_read_stream_returns_header_and_records(per_step_file):
    header, records = read_stream(per_step_file(n=5))
    assert header["file_kind"] == "per-step"
    assert header["method"] == "shmm"
    assert len(records) == 5
    assert records[0]["t"] == 1


def test_read_stream_rejects_unsupported_schema_version(tmp_path):
    path = tmp_path / "future.jsonl"
    path.write_text(json.dumps({"schema_version": "2", "file_kind": "per-step"}) + "\n")
    with pytest.raises(PlotDataError, match="schema_version"):
        read_stream(path)


def test_read_stream_rejects_empty_and_missing_files(tmp_path):
    empty = tmp_path / "empty.jsonl"
    empty.write_text("")
    with pytest.raises(PlotDataError, match="empty"):
        read_stream(empty)
    with pytest.raises(PlotDataError, match="cannot read"):
        read_stream(tmp_path / "absent.jsonl")


def test_read_table_parses_comment_header_and_rows(aggregate_csv):
    header, rows = read_table(aggregate_csv())
    assert header["file_kind"] == "table"
    assert len(rows) == 12
    assert rows[0]["method"] == "shmm"
    assert rows[0]["s_budget"] == "1"


def test_read_table_requires_the_header_comment(tmp_path):
    path = tmp_path / "bare.csv"
    path.write_text("method,s_budget\nshmm,2\n")
    with pytest.raises(PlotDataError, match="header comment"):
        read_table(path)


def test_expect_kind_names_both_sides_of_a_mismatch(forecast_file):
    path = forecast_file()
    header, _ = read_stream(path)
    with pytest.raises(PlotDataError, match="'forecast'.*'per-step'"):
        expect_kind(header, path, "per-step")


def test_per_step_series_needs_records(tmp_path):
    path = write_stream(tmp_path / "bare.jsonl", "per-step", [])
    with pytest.raises(PlotDataError, match="no records"):
        per_step_series(path)


def test_per_step_series_extracts_columns(per_step_file):
    _, t, y, mean, variance = per_step_series(per_step_file(n=8))
    assert t == [float(i) for i in range(1, 9)]
    assert len(y) == len(mean) == len(variance) == 8
    assert all(v > 0 for v in variance)


def test_regime_mean_traces_transpose_per_step_records(per_step_file):
    _, t, traces = regime_mean_traces(per_step_file(n=6))
    assert len(traces) == 2
    assert all(len(trace) == 6 for trace in traces)
    assert traces[1][0] == -traces[0][0]


def test_regime_mean_traces_reject_missing_means(per_step_file):
    path = per_step_file(n=4, with_means=False)
    with pytest.raises(PlotDataError, match="regime_means"):
        regime_mean_traces(path)


def test_forecast_series_extracts_query_times(forecast_file):
    _, t, mean, variance = forecast_series(forecast_file(horizon=3, t_base=10.0))
    assert t == [11.0, 12.0, 13.0]
    assert variance == pytest.approx([0.12, 0.14, 0.16])
    assert mean == [1.5, 1.5, 1.5]


def test_switch_times_mark_each_regime_entry(dataset_file):
    _, switches = switch_times(dataset_file(n=40, switch_every=10))
    assert switches == [11.0, 21.0, 31.0]


def test_sweep_table_groups_rows_by_method(aggregate_csv):
    _, methods = sweep_curves_table(aggregate_csv())
    assert list(methods) == ["shmm", "online-em", "rbpf"]
    assert methods["shmm"]["s"] == [1, 2, 5, 10]
    means, stds = methods["rbpf"]["runtime_seconds"]
    assert means == pytest.approx([0.01, 0.02, 0.05, 0.1])
    assert stds == [0.001] * 4


def test_sweep_table_rejects_raw_per_seed_columns(tmp_path):
    header = {"schema_version": "1", "file_kind": "table", "seed": 0, "config": {}}
    path = tmp_path / "sweep_raw.csv"
    path.write_text(
        "# " + json.dumps(header) + "\n"
        "method,s_budget,seed,mae,rmse,runtime_seconds\n"
        "shmm,2,0,0.9,1.2,0.1\n"
    )
    with pytest.raises(PlotDataError, match="aggregate"):
        sweep_curves_table(path)


def test_aggregate_header_fixture_matches_documented_columns(aggregate_csv):
    # guards the fixtures themselves against drifting from the format
    text = aggregate_csv().read_text().splitlines()
    assert text[1] == AGGREGATE_HEADER
