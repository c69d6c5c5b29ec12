"""End-to-end tests of the command line front end (in-process)."""

import json
import math

import pytest

from streamhmm.cli import main
from streamhmm.oracle import TruncationReport
from streamhmm.serialize import beam_from_dict, read_csv, read_dataset, read_json, read_jsonl


def write_config(tmp_path, name, document):
    path = tmp_path / name
    path.write_text(json.dumps(document, indent=2) + "\n")
    return str(path)


def gauss_document(**overrides):
    document = {
        "kind": "gauss-hmm",
        "seed": 11,
        "dataset": {"means": [0.0, 3.0], "length": 30},
    }
    document.update(overrides)
    return document


# --- generate ---


def test_generate_writes_a_readable_dataset(tmp_path, capsys):
    cfg = write_config(tmp_path, "gen.json", gauss_document())
    assert main(["generate", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert "dataset.jsonl" in capsys.readouterr().out
    series = read_dataset(tmp_path / "dataset.jsonl")
    assert len(series) == 30
    header, _ = read_jsonl(tmp_path / "dataset.jsonl")
    assert header["config"]["dataset"]["kind"] == "gauss-hmm"


def test_generate_rejects_invalid_dataset(tmp_path, capsys):
    document = gauss_document()
    document["dataset"]["length"] = 0
    cfg = write_config(tmp_path, "gen.json", document)
    assert main(["generate", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_unknown_top_level_key_is_rejected(tmp_path, capsys):
    cfg = write_config(tmp_path, "gen.json", gauss_document(dataso={"length": 5}))
    assert main(["generate", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "dataso" in capsys.readouterr().err


def test_invalid_json_reports_position(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text('{"kind": "gauss-hmm",\n  "seed": }\n')
    assert main(["generate", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert ":2:" in capsys.readouterr().err


def test_missing_config_file_is_a_config_error(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    assert main(["generate", "--config", missing, "--out", str(tmp_path)]) == 2
    assert "cannot read config" in capsys.readouterr().err


def test_foreign_schema_version_is_rejected(tmp_path):
    cfg = write_config(tmp_path, "gen.json", gauss_document(schema_version="2"))
    assert main(["generate", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_out_dir_resolution_order(tmp_path, monkeypatch):
    env_dir = tmp_path / "from_env"
    flag_dir = tmp_path / "from_flag"
    monkeypatch.setenv("STREAMHMM_OUT", str(env_dir))
    cfg = write_config(tmp_path, "gen.json", gauss_document())
    assert main(["generate", "--config", cfg]) == 0
    assert (env_dir / "dataset.jsonl").exists()
    # an explicit --out beats the environment
    assert main(["generate", "--config", cfg, "--out", str(flag_dir)]) == 0
    assert (flag_dir / "dataset.jsonl").exists()


# --- filter ---


def filter_document(**overrides):
    document = gauss_document(method={"name": "shmm", "s_budget": 2})
    document.update(overrides)
    return document


def test_filter_writes_per_step_and_summary(tmp_path):
    cfg = write_config(tmp_path, "filt.json", filter_document())
    assert main(["filter", "--config", cfg, "--out", str(tmp_path)]) == 0
    header, records = read_jsonl(tmp_path / "per_step.jsonl")
    assert header["method"] == "shmm"
    assert [r["t"] for r in records] == list(range(1, 31))
    summary = read_json(tmp_path / "summary.json")["summary"]
    assert summary["s_budget"] == 2
    assert summary["n_steps"] == 30
    assert summary["mae"] <= summary["rmse"] + 1e-15
    assert summary["failed_at_t"] is None


def test_filter_seed_override_changes_the_stream(tmp_path):
    cfg = write_config(tmp_path, "filt.json", filter_document())
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["filter", "--config", cfg, "--out", str(out_a)]) == 0
    assert main(["filter", "--config", cfg, "--out", str(out_b), "--seed", "99"]) == 0
    summary_a = read_json(out_a / "summary.json")
    summary_b = read_json(out_b / "summary.json")
    assert summary_a["seed"] == 11
    assert summary_b["seed"] == 99
    assert summary_a["summary"]["mae"] != summary_b["summary"]["mae"]


def test_filter_snapshot_requires_the_beam_method(tmp_path):
    document = filter_document(snapshot=True, method={"name": "rbpf", "s_budget": 4})
    cfg = write_config(tmp_path, "filt.json", document)
    assert main(["filter", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_filter_snapshot_captures_final_beam(tmp_path):
    cfg = write_config(tmp_path, "filt.json", filter_document(snapshot=True))
    assert main(["filter", "--config", cfg, "--out", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "snapshot.json").read_text())
    beam, pi, t_base, t_delta = beam_from_dict(payload)
    assert beam.t == 30
    assert t_base == 30.0
    assert t_delta == 1.0
    assert len(beam.hypotheses) <= 2


def test_filter_numerical_failure_exits_3_with_partial_output(tmp_path, capsys):
    gen_cfg = write_config(tmp_path, "gen.json", gauss_document())
    assert main(["generate", "--config", gen_cfg, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "dataset.jsonl").read_text().splitlines()
    # the spike sits past the init window, so no prior mean can absorb it
    record = json.loads(lines[15])
    record["y"] = 1e300
    lines[15] = json.dumps(record)
    doctored = tmp_path / "doctored.jsonl"
    doctored.write_text("\n".join(lines) + "\n")

    document = filter_document(dataset_path=str(doctored))
    cfg = write_config(tmp_path, "filt.json", document)
    assert main(["filter", "--config", cfg, "--out", str(tmp_path)]) == 3
    assert "failed at t=15" in capsys.readouterr().err
    summary = read_json(tmp_path / "summary.json")["summary"]
    assert summary["failed_at_t"] == 15
    _, records = read_jsonl(tmp_path / "per_step.jsonl")
    assert len(records) == 14


# --- compare and sweep ---


def test_compare_emits_method_major_tables_deterministically(tmp_path):
    document = gauss_document(
        methods=["shmm", "online-em", "rbpf"],
        s_budget=2,
        seeds=[0, 1],
        measure_runtime=False,
    )
    cfg = write_config(tmp_path, "cmp.json", document)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert main(["compare", "--config", cfg, "--out", str(out_a)]) == 0
    assert main(["compare", "--config", cfg, "--out", str(out_b)]) == 0

    _, rows = read_csv(out_a / "compare_raw.csv")
    assert [(r["method"], r["seed"]) for r in rows] == [
        (m, s) for m in ("shmm", "online-em", "rbpf") for s in ("0", "1")
    ]
    assert all(r["runtime_seconds"] == "0.0" for r in rows)
    assert (out_a / "compare_raw.csv").read_bytes() == (out_b / "compare_raw.csv").read_bytes()
    assert (out_a / "compare_aggregate.csv").read_bytes() == (
        out_b / "compare_aggregate.csv"
    ).read_bytes()

    _, aggregate = read_csv(out_a / "compare_aggregate.csv")
    assert sorted(r["method"] for r in aggregate) == ["online-em", "rbpf", "shmm"]
    assert all(int(r["n_seeds"]) == 2 for r in aggregate)


def test_compare_rejects_mean_tracking_methods_on_drifting_data(tmp_path, capsys):
    document = {
        "kind": "gp-hmm",
        "seed": 0,
        "dataset": {"length": 20},
        "methods": ["rbpf"],
        "seeds": [0],
    }
    cfg = write_config(tmp_path, "cmp.json", document)
    assert main(["compare", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "gauss-hmm" in capsys.readouterr().err


def test_sweep_runs_the_budget_grid(tmp_path):
    document = gauss_document(
        methods=["shmm"],
        s_values=[1, 2],
        seeds=[0, 1],
        measure_runtime=False,
    )
    cfg = write_config(tmp_path, "sweep.json", document)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "sweep_raw.csv")
    assert [(r["s_budget"], r["seed"]) for r in rows] == [
        ("1", "0"), ("1", "1"), ("2", "0"), ("2", "1")
    ]
    _, aggregate = read_csv(tmp_path / "sweep_aggregate.csv")
    assert [r["s_budget"] for r in aggregate] == ["1", "2"]


def test_sweep_rejects_bad_budget_lists(tmp_path):
    document = gauss_document(methods=["shmm"], s_values=[1, 0], seeds=[0])
    cfg = write_config(tmp_path, "sweep.json", document)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 2


# --- verify-theorem ---


def test_verify_theorem_writes_grid_report(tmp_path):
    document = {
        "kind": "verify-theorem",
        "seed": 3,
        "theorem": {
            "k_values": [2],
            "t_values": [3],
            "s_values": [1, 2, 8],
            "configs_per_cell": 1,
            "probe_trials": 5,
            "sweep_instances": [[2, 2, 1]],
        },
    }
    cfg = write_config(tmp_path, "thm.json", document)
    assert main(["verify-theorem", "--config", cfg, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "theorem_report.json").read_text())
    assert report["file_kind"] == "theorem-report"
    assert len(report["cells"]) == 3
    assert report["all_bounds_hold"] is True

    full = next(c for c in report["cells"] if c["s_budget"] == 8)
    assert full["delta"] == 0.0
    assert full["bound"] == 0.0
    assert abs(full["kl_exact"]) <= 1e-8
    for cell in report["cells"]:
        assert cell["probe"]["trials"] == 5
        assert isinstance(cell["probe"]["negative_findings"], list)

    sweep = report["sweeps"][0]
    assert sweep["n_paths"] == 4
    assert sweep["top_attains_min_delta"] is True
    assert len(sweep["rows"]) == 4


def test_verify_theorem_exit_4_on_bound_violation(tmp_path, monkeypatch, capsys):
    def forged_report(posterior, pi, support_indices, *, t_query=None, tol=1e-9):
        return TruncationReport(
            support=tuple(posterior.paths[i] for i in sorted(support_indices)),
            w_a=0.9,
            delta=0.1,
            chi2_c=1.0,
            kl_exact=1.0,
            bound=math.log1p(0.1),
            strengthened_bound=math.log1p(0.01),
            quadrature_error_estimate=0.0,
            assumption_holds=True,
        )

    monkeypatch.setattr("streamhmm.cli._truncation_report", forged_report)
    document = {
        "kind": "verify-theorem",
        "seed": 3,
        "theorem": {
            "k_values": [2],
            "t_values": [3],
            "s_values": [1],
            "configs_per_cell": 1,
            "probe_trials": 0,
        },
    }
    cfg = write_config(tmp_path, "thm.json", document)
    assert main(["verify-theorem", "--config", cfg, "--out", str(tmp_path)]) == 4
    assert "violated" in capsys.readouterr().err
    # the report is still written for inspection
    report = json.loads((tmp_path / "theorem_report.json").read_text())
    assert report["all_bounds_hold"] is False
    assert report["cells"][0]["bound_holds"] is False


# --- forecast ---


def test_forecast_from_snapshot_matches_fresh_run(tmp_path):
    document = filter_document(snapshot=True)
    cfg = write_config(tmp_path, "filt.json", document)
    assert main(["filter", "--config", cfg, "--out", str(tmp_path)]) == 0

    snap_doc = {"seed": 11, "snapshot_path": str(tmp_path / "snapshot.json"), "horizon": 4}
    snap_cfg = write_config(tmp_path, "fc_snap.json", snap_doc)
    out_snap = tmp_path / "from_snap"
    assert main(["forecast", "--config", snap_cfg, "--out", str(out_snap)]) == 0

    fresh_doc = filter_document(horizon=4)
    fresh_doc.pop("snapshot", None)
    fresh_cfg = write_config(tmp_path, "fc_fresh.json", fresh_doc)
    out_fresh = tmp_path / "from_fresh"
    assert main(["forecast", "--config", fresh_cfg, "--out", str(out_fresh)]) == 0

    _, snap_records = read_jsonl(out_snap / "forecast.jsonl")
    _, fresh_records = read_jsonl(out_fresh / "forecast.jsonl")
    assert snap_records == fresh_records
    assert [r["h"] for r in snap_records] == [1, 2, 3, 4]
    assert [r["t_query"] for r in snap_records] == [31.0, 32.0, 33.0, 34.0]


def test_forecast_anchor_mid_stream(tmp_path):
    document = filter_document(horizon=2, t_anchor=10)
    cfg = write_config(tmp_path, "fc.json", document)
    assert main(["forecast", "--config", cfg, "--out", str(tmp_path)]) == 0
    header, records = read_jsonl(tmp_path / "forecast.jsonl")
    assert header["t_base"] == 10.0
    assert [r["t_query"] for r in records] == [11.0, 12.0]
    assert all(r["variance"] > 0.0 for r in records)


def test_forecast_validates_horizon_and_anchor(tmp_path):
    bad_horizon = write_config(tmp_path, "fc1.json", filter_document(horizon=0))
    assert main(["forecast", "--config", bad_horizon, "--out", str(tmp_path)]) == 2
    bad_anchor = write_config(tmp_path, "fc2.json", filter_document(t_anchor=31))
    assert main(["forecast", "--config", bad_anchor, "--out", str(tmp_path)]) == 2


def test_forecast_requires_beam_method(tmp_path):
    document = filter_document(method={"name": "online-em"})
    cfg = write_config(tmp_path, "fc.json", document)
    assert main(["forecast", "--config", cfg, "--out", str(tmp_path)]) == 2
