"""End-to-end: default filter-CLI outputs through every figure kind.

The filtering package is exercised strictly through its command line and
its file formats; nothing from it is imported.  Requires the ``streamhmm``
executable on PATH.
"""

import json
import shutil
import subprocess
from statistics import mean

import pytest

from plotkit.cli import main
from plotkit.io import per_step_series, switch_times

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _run_filter_cli(arguments, cwd):
    executable = shutil.which("streamhmm")
    assert executable, "streamhmm CLI not on PATH; install the filtering package first"
    process = subprocess.run(
        [executable, *arguments], cwd=cwd, capture_output=True, text=True
    )
    assert process.returncode == 0, f"streamhmm {arguments[0]}: {process.stderr}"


@pytest.fixture(scope="module")
def experiment(tmp_path_factory):
    """Outputs of the default experiment: dataset, filter run, forecast, sweep."""
    root = tmp_path_factory.mktemp("experiment")

    def config(name, document):
        path = root / name
        path.write_text(json.dumps(document))
        return str(path)

    generate = config("generate.json", {"kind": "gauss-hmm", "seed": 0, "dataset": {}})
    _run_filter_cli(["generate", "--config", generate, "--out", str(root)], root)

    filter_cfg = config(
        "filter.json",
        {
            "kind": "gauss-hmm",
            "seed": 0,
            "dataset_path": str(root / "dataset.jsonl"),
            "method": {"name": "shmm", "s_budget": 2},
        },
    )
    _run_filter_cli(["filter", "--config", filter_cfg, "--out", str(root)], root)

    forecast = config(
        "forecast.json",
        {
            "kind": "gauss-hmm",
            "seed": 0,
            "dataset_path": str(root / "dataset.jsonl"),
            "method": {"name": "shmm", "s_budget": 2},
            "horizon": 20,
        },
    )
    _run_filter_cli(["forecast", "--config", forecast, "--out", str(root)], root)

    sweep = config(
        "sweep.json",
        {
            "kind": "gauss-hmm",
            "seed": 0,
            "dataset": {},
            "s_values": [1, 2, 5, 10],
            "seeds": [0, 1],
        },
    )
    _run_filter_cli(["sweep", "--config", sweep, "--out", str(root)], root)
    return root


def _render(kind, inputs, out):
    assert main([kind, "--in", *[str(p) for p in inputs], "--out", str(out)]) == 0
    assert out.read_bytes()[:8] == PNG_MAGIC


def test_predictive_band_renders_from_default_run(experiment):
    _render(
        "predictive-band",
        [experiment / "per_step.jsonl", experiment / "dataset.jsonl"],
        experiment / "fig_predictive_band.png",
    )


def test_forecast_fan_renders_from_default_run(experiment):
    _render("forecast-fan", [experiment / "forecast.jsonl"], experiment / "fig_forecast_fan.png")


def test_mean_trace_renders_from_default_run(experiment):
    _render(
        "mean-trace",
        [experiment / "per_step.jsonl", experiment / "dataset.jsonl"],
        experiment / "fig_mean_trace.png",
    )


def test_sweep_curves_render_from_default_run(experiment):
    _render("sweep-curves", [experiment / "sweep_aggregate.csv"], experiment / "fig_sweep_curves.png")


def test_predictive_variance_expands_near_switches(experiment):
    # the picture the band figure exists for: uncertainty should spike in
    # the steps entering each true regime switch (deterministic at seed 0)
    _, t, _, _, variance = per_step_series(experiment / "per_step.jsonl")
    _, switches = switch_times(experiment / "dataset.jsonl")
    assert switches, "default stream should contain regime switches"
    near_steps = set()
    for s in switches:
        near_steps.update((s, s + 1, s + 2))
    near = [v for step, v in zip(t, variance) if step in near_steps]
    far = [v for step, v in zip(t, variance) if step not in near_steps]
    assert mean(near) > 1.1 * mean(far)
