import json

import pytest

from plotkit.cli import main

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def test_cli_renders_and_reports_the_output_path(per_step_file, tmp_path, capsys):
    out = tmp_path / "band.png"
    code = main(["predictive-band", "--in", str(per_step_file()), "--out", str(out)])
    assert code == 0
    assert f"wrote {out}" in capsys.readouterr().out
    assert out.read_bytes()[:8] == PNG_MAGIC


def test_cli_accepts_title_and_dpi(forecast_file, tmp_path):
    out = tmp_path / "fan.png"
    code = main(
        ["forecast-fan", "--in", str(forecast_file()), "--out", str(out),
         "--title", "fan", "--dpi", "72"]
    )
    assert code == 0
    assert out.is_file()


def test_cli_rejects_unknown_kind_via_argparse():
    with pytest.raises(SystemExit) as excinfo:
        main(["pie-chart", "--in", "x.jsonl", "--out", "x.png"])
    assert excinfo.value.code == 2


def test_cli_missing_input_file_exits_2(tmp_path, capsys):
    out = tmp_path / "band.png"
    code = main(["predictive-band", "--in", str(tmp_path / "absent.jsonl"), "--out", str(out)])
    assert code == 2
    assert "cannot read" in capsys.readouterr().err
    assert not out.exists()


def test_cli_schema_mismatch_exits_2(tmp_path, capsys):
    path = tmp_path / "future.jsonl"
    path.write_text(json.dumps({"schema_version": "9", "file_kind": "per-step"}) + "\n")
    code = main(["predictive-band", "--in", str(path), "--out", str(tmp_path / "x.png")])
    assert code == 2
    assert "schema_version" in capsys.readouterr().err


def test_cli_wrong_input_count_exits_2(forecast_file, tmp_path, capsys):
    paths = [str(forecast_file()), str(forecast_file(name="again.jsonl"))]
    code = main(["forecast-fan", "--in", *paths, "--out", str(tmp_path / "x.png")])
    assert code == 2
    assert "input file" in capsys.readouterr().err


def test_cli_wrong_file_kind_exits_2(forecast_file, tmp_path, capsys):
    code = main(["predictive-band", "--in", str(forecast_file()), "--out", str(tmp_path / "x.png")])
    assert code == 2
    assert "file_kind" in capsys.readouterr().err
