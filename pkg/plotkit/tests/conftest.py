"""File-building fixtures shared across the plotkit tests."""

import json
import math

import numpy as np
import pytest

from format_helpers import AGGREGATE_HEADER, SCHEMA_VERSION, write_stream


@pytest.fixture
def per_step_file(tmp_path):
    def build(n=40, seed=3, with_means=True, name="per_step.jsonl"):
        rng = np.random.default_rng(seed)
        records = []
        for t in range(1, n + 1):
            level = math.sin(t / 5.0)
            records.append(
                {
                    "t": t,
                    "y": level + float(rng.normal(0.0, 0.3)),
                    "predictive_mean": level,
                    "predictive_variance": 0.1 + 0.05 * float(rng.random()),
                    "log_score": -float(rng.random()),
                    "top_path_state": int(rng.integers(0, 2)),
                    "regime_means": [level, -level] if with_means else None,
                }
            )
        return write_stream(tmp_path / name, "per-step", records, {"method": "shmm"})

    return build


@pytest.fixture
def dataset_file(tmp_path):
    def build(n=40, switch_every=10, name="dataset.jsonl"):
        means = [0.0, 3.0]
        records = []
        for t in range(1, n + 1):
            regime = (t - 1) // switch_every % 2
            records.append({"t": t, "y": means[regime], "true_regime": regime, "t_local": None})
        header = {"config": {"dataset": {"kind": "gauss-hmm", "means": means}}}
        return write_stream(tmp_path / name, "dataset", records, header)

    return build


@pytest.fixture
def forecast_file(tmp_path):
    def build(horizon=12, t_base=40.0, name="forecast.jsonl"):
        records = [
            {
                "h": h,
                "t_query": t_base + h,
                "mean": 1.5,
                "variance": 0.1 + 0.02 * h,
                "components": [{"weight": 1.0, "mean": 1.5, "variance": 0.1 + 0.02 * h}],
            }
            for h in range(1, horizon + 1)
        ]
        extra = {"t_base": t_base, "t_delta": 1.0, "horizon": horizon}
        return write_stream(tmp_path / name, "forecast", records, extra)

    return build


@pytest.fixture
def aggregate_csv(tmp_path):
    def build(methods=("shmm", "online-em", "rbpf"), s_values=(1, 2, 5, 10), name="sweep_aggregate.csv"):
        offsets = {"shmm": 0.0, "online-em": 0.1, "rbpf": 0.2}
        header = {"schema_version": SCHEMA_VERSION, "file_kind": "table", "seed": 0, "config": {}}
        lines = ["# " + json.dumps(header), AGGREGATE_HEADER]
        for method in methods:
            for i, s in enumerate(s_values):
                mae = 1.2 - 0.05 * i + offsets.get(method, 0.0)
                lines.append(
                    f"{method},{s},8,{mae!r},0.02,{mae + 0.3!r},0.03,{0.01 * s!r},0.001"
                )
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n")
        return path

    return build
