"""The four figure kinds.

Each builder turns already-computed file fields into a matplotlib Figure;
the only arithmetic on this side is the band convention, mean plus or minus
two predictive standard deviations.  Figures are built with the object API
(no pyplot), so rendering is headless and leaves no global state.
"""

import math
from dataclasses import dataclass
from pathlib import Path

from matplotlib.figure import Figure

from .io import (
    AGGREGATE_METRICS,
    PlotDataError,
    forecast_series,
    per_step_series,
    regime_mean_traces,
    sweep_curves_table,
    switch_times,
)

KINDS = ("predictive-band", "forecast-fan", "mean-trace", "sweep-curves")

# (min, max) input files per kind; the optional second file is the dataset
# whose true regimes mark switch times
INPUT_ARITY = {
    "predictive-band": (1, 2),
    "forecast-fan": (1, 1),
    "mean-trace": (1, 2),
    "sweep-curves": (1, 1),
}

METRIC_LABELS = {"mae": "MAE", "rmse": "RMSE", "runtime_seconds": "runtime (s)"}


@dataclass(frozen=True)
class PlotSpec:
    """What to draw: figure kind, input files in kind order, output image.

    ``inputs`` and ``out`` accept strings or paths.  The output suffix
    selects the image format (.png, .pdf, .svg, ...).
    """

    kind: str
    inputs: tuple
    out: Path
    title: str | None = None
    dpi: int = 150

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}, expected one of {KINDS}")
        inputs = tuple(Path(p) for p in self.inputs)
        lo, hi = INPUT_ARITY[self.kind]
        span = str(lo) if lo == hi else f"{lo} to {hi}"
        if not lo <= len(inputs) <= hi:
            raise ValueError(f"{self.kind} takes {span} input file(s), got {len(inputs)}")
        if self.dpi < 1:
            raise ValueError("dpi must be positive")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "out", Path(self.out))


def _band(mean, variance, path):
    if any(v < 0.0 for v in variance):
        raise PlotDataError(f"{path}: negative variance in input")
    lower = [m - 2.0 * math.sqrt(v) for m, v in zip(mean, variance)]
    upper = [m + 2.0 * math.sqrt(v) for m, v in zip(mean, variance)]
    return lower, upper


def _method_title(base, header):
    method = header.get("method")
    return f"{base} ({method})" if method else base


def _draw_switches(ax, dataset_path):
    _, switches = switch_times(dataset_path)
    for i, x in enumerate(switches):
        ax.axvline(
            x,
            color="tab:red",
            linestyle="--",
            linewidth=0.8,
            alpha=0.6,
            label="regime switch" if i == 0 else None,
        )


def _predictive_band(spec):
    header, t, y, mean, variance = per_step_series(spec.inputs[0])
    lower, upper = _band(mean, variance, spec.inputs[0])
    fig = Figure(figsize=(9.0, 4.0))
    ax = fig.add_subplot(111)
    ax.fill_between(t, lower, upper, alpha=0.25, color="tab:blue", linewidth=0, label="mean +/- 2 std")
    ax.plot(t, mean, color="tab:blue", linewidth=1.2, label="predictive mean")
    ax.plot(t, y, ".", color="black", markersize=3, alpha=0.6, label="observations")
    if len(spec.inputs) == 2:
        _draw_switches(ax, spec.inputs[1])
    ax.set_xlabel("t")
    ax.set_ylabel("y")
    ax.set_title(spec.title or _method_title("One-step predictive band", header))
    ax.legend(loc="best", fontsize=8)
    return fig


def _forecast_fan(spec):
    header, t, mean, variance = forecast_series(spec.inputs[0])
    lower, upper = _band(mean, variance, spec.inputs[0])
    fig = Figure(figsize=(7.0, 4.0))
    ax = fig.add_subplot(111)
    if len(t) == 1:
        # one horizon step: a single vertical band segment
        spread = [[mean[0] - lower[0]], [upper[0] - mean[0]]]
        ax.errorbar(t, mean, yerr=spread, fmt="o", color="tab:purple", capsize=5, label="mean +/- 2 std")
    else:
        ax.fill_between(t, lower, upper, alpha=0.25, color="tab:purple", linewidth=0, label="mean +/- 2 std")
        ax.plot(t, mean, "-o", color="tab:purple", markersize=3, linewidth=1.2, label="forecast mean")
    t_base = header.get("t_base")
    if t_base is not None:
        ax.axvline(float(t_base), color="black", linestyle=":", linewidth=0.8, label="forecast start")
    ax.set_xlabel("t")
    ax.set_ylabel("y")
    ax.set_title(spec.title or "Multi-step forecast fan")
    ax.legend(loc="best", fontsize=8)
    return fig


def _mean_trace(spec):
    header, t, traces = regime_mean_traces(spec.inputs[0])
    fig = Figure(figsize=(9.0, 4.0))
    ax = fig.add_subplot(111)
    for i, trace in enumerate(traces):
        ax.plot(t, trace, linewidth=1.2, label=f"regime {i}")
    if len(spec.inputs) == 2:
        _draw_switches(ax, spec.inputs[1])
        data_header, _ = switch_times(spec.inputs[1])
        true_means = ((data_header.get("config") or {}).get("dataset") or {}).get("means")
        if true_means:
            for i, m in enumerate(true_means):
                ax.axhline(
                    float(m),
                    color="gray",
                    linestyle=":",
                    linewidth=0.8,
                    label="true means" if i == 0 else None,
                )
    ax.set_xlabel("t")
    ax.set_ylabel("estimated regime mean")
    ax.set_title(spec.title or _method_title("Estimated regime means", header))
    ax.legend(loc="best", fontsize=8)
    return fig


def _sweep_curves(spec):
    _, methods = sweep_curves_table(spec.inputs[0])
    fig = Figure(figsize=(7.0, 8.0))
    axes = fig.subplots(len(AGGREGATE_METRICS), 1, sharex=True)
    for ax, metric in zip(axes, AGGREGATE_METRICS):
        for method, entry in methods.items():
            means, stds = entry[metric]
            yerr = stds if all(math.isfinite(v) for v in stds) else None
            ax.errorbar(
                entry["s"], means, yerr=yerr, fmt="-o", markersize=3, capsize=3,
                linewidth=1.2, label=method,
            )
        ax.set_ylabel(METRIC_LABELS[metric])
    axes[-1].set_xlabel("S")
    axes[-1].set_xticks(sorted({s for entry in methods.values() for s in entry["s"]}))
    axes[0].legend(loc="best", fontsize=8)
    fig.suptitle(spec.title or "Accuracy and runtime vs budget S")
    return fig


_BUILDERS = {
    "predictive-band": _predictive_band,
    "forecast-fan": _forecast_fan,
    "mean-trace": _mean_trace,
    "sweep-curves": _sweep_curves,
}


def build_figure(spec: PlotSpec) -> Figure:
    """Draw the figure in memory.  Bad inputs raise before any output exists."""
    return _BUILDERS[spec.kind](spec)


def render(spec: PlotSpec) -> Path:
    """Build and save the figure; returns the output path."""
    fig = build_figure(spec)
    if spec.out.parent != Path(""):
        spec.out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(spec.out, dpi=spec.dpi, bbox_inches="tight")
    return spec.out
