"""Prequential (predict-then-update) evaluation of streaming methods.

Every method is driven through the same two-call protocol: at each step it
must produce a predictive mixture for the next observation before it is
allowed to see that observation.  The harness records predictive moments
and log scores per step, aggregates MAE and RMSE of the predictive means,
and times only the predict/update calls on a monotonic clock.  When a
method factory is supplied the filtering loop can be repeated and the
minimum runtime recorded, which damps scheduler noise in timing
comparisons.

``sweep_budget`` runs a (method, budget, seed) grid on freshly generated
streams; independent cells can run in a process pool, with results
collected in a fixed order so the output is identical regardless of
thread count.
"""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .baselines import (
    OnlineEmState,
    RbpfState,
    head_window_means,
    online_em_init,
    online_em_predictive,
    online_em_step,
    rbpf_init,
    rbpf_predictive,
    rbpf_step,
)
from .beam import Beam, initial_beam, one_step_predictive, step
from .datagen import GaussHmmConfig, GpDgpConfig, RegimeSeries, gen_gaussian_hmm, gen_gp_regime_series
from .errors import StreamHmmError
from .mixtures import GaussianMixture, mixture_moments
from .regimes import DEFAULT_WINDOW_CAP, GaussianConjugateState, GPState, KernelHyper
from .transition import TransitionMatrix

METHOD_NAMES = ("shmm", "online-em", "rbpf")


class ShmmMethod:
    """Beam path filter behind the prequential protocol."""

    name = "shmm"

    def __init__(self, pi: TransitionMatrix, summaries, s_budget: int, times=None):
        self.pi = pi
        self.s_budget = int(s_budget)
        self.times = None if times is None else np.asarray(times, dtype=float)
        self.beam: Beam = initial_beam(pi, summaries)
        self._i = 0

    def _t_in(self) -> float:
        if self.times is None:
            return float(self._i + 1)
        return float(self.times[self._i])

    def predict(self) -> GaussianMixture:
        return one_step_predictive(self.beam, self.pi, t_query=self._t_in())

    def update(self, y: float) -> None:
        self.beam = step(self.beam, y, self.pi, self.s_budget, t_in=self._t_in())
        self._i += 1

    def top_state(self):
        return self.beam.hypotheses[0].last_state

    def regime_means(self):
        top = self.beam.hypotheses[0]
        t_next = float(self._i + 1) if self.times is None else float(
            self.times[min(self._i, len(self.times) - 1)]
        )
        return [summary.predictive(t_next)[0] for summary in top.summaries]


class OnlineEmMethod:
    """Online EM behind the prequential protocol."""

    name = "online-em"

    def __init__(self, pi: TransitionMatrix, state: OnlineEmState):
        self.pi = pi
        self.state = state

    def predict(self) -> GaussianMixture:
        return online_em_predictive(self.state, self.pi)

    def update(self, y: float) -> None:
        self.state = online_em_step(self.state, y, self.pi)

    def top_state(self):
        if self.state.t == 0:
            return None
        return int(np.argmax(self.state.filter_probs))

    def regime_means(self):
        return [float(m) for m in self.state.means]


class RbpfMethod:
    """Rao-Blackwellised particle filter behind the prequential protocol."""

    name = "rbpf"

    def __init__(self, pi: TransitionMatrix, state: RbpfState):
        self.pi = pi
        self.state = state

    def predict(self) -> GaussianMixture:
        return rbpf_predictive(self.state, self.pi)

    def update(self, y: float) -> None:
        self.state = rbpf_step(self.state, y, self.pi)

    def top_state(self):
        if self.state.t == 0:
            return None
        occupancy = np.bincount(
            self.state.last_states, weights=self.state.weights, minlength=self.state.k
        )
        return int(np.argmax(occupancy))

    def regime_means(self):
        w = self.state.weights
        return [float(np.dot(w, self.state.post_mean[:, k])) for k in range(self.state.k)]


@dataclass(frozen=True)
class StepRecord:
    t: int
    y: float
    predictive_mean: float
    predictive_variance: float
    log_score: float
    top_path_state: int | None
    regime_means: tuple[float, ...] | None


@dataclass(frozen=True)
class PrequentialConfig:
    """Harness options.

    ``targets`` replaces the observations as the error target when given
    (for example the true regime means of a synthetic stream);
    ``timing_repeats > 1`` reruns the loop to record a minimum runtime and
    requires a method factory.
    """

    targets: np.ndarray | None = None
    timing_repeats: int = 1
    record_regime_means: bool = True


@dataclass(frozen=True)
class PrequentialResult:
    method: str
    per_step: tuple[StepRecord, ...]
    mae: float
    rmse: float
    runtime_seconds: float
    runtime_seconds_min: float
    total_log_score: float
    failed_at_t: int | None

    @property
    def n_steps(self) -> int:
        return len(self.per_step)


def _observation_stream(stream):
    if isinstance(stream, RegimeSeries):
        return stream.observations, stream.times
    obs = np.asarray(stream, dtype=float)
    return obs, np.arange(len(obs)) + 1.0


def _timed_loop(method, observations, evaluate=True):
    """One filtering pass; returns (records, runtime, failed_at_t).

    ``evaluate=False`` skips the off-clock scoring entirely and returns no
    records; timing-only repeats use it so each extra pass costs just the
    filtering work being measured.
    """
    records = []
    runtime = 0.0
    failed_at = None
    for i, y in enumerate(observations):
        y = float(y)
        t0 = time.perf_counter()
        try:
            mixture = method.predict()
            method.update(y)
        except StreamHmmError:
            runtime += time.perf_counter() - t0
            failed_at = i + 1
            break
        runtime += time.perf_counter() - t0
        if not evaluate:
            continue
        # score and state views are evaluation work, kept off the clock
        mean, var = mixture_moments(mixture)
        records.append(
            (i + 1, y, mean, var, float(mixture.logpdf(y)), method.top_state(), method.regime_means())
        )
    return records, runtime, failed_at


def run_prequential(method, stream, config: PrequentialConfig | None = None) -> PrequentialResult:
    """Drive one method over a stream prequentially.

    ``method`` is either a protocol object or a zero-argument factory; a
    factory is required for ``timing_repeats > 1`` since each repeat needs
    fresh state.  A ``StreamHmmError`` raised mid-stream flags the result
    as failed at that step and keeps the partial records.
    """
    if config is None:
        config = PrequentialConfig()
    factory = method if callable(method) else None
    instance = method() if factory is not None else method
    observations, _ = _observation_stream(stream)

    raw, runtime, failed_at = _timed_loop(instance, observations)
    records = tuple(
        StepRecord(
            t=t,
            y=y,
            predictive_mean=mean,
            predictive_variance=var,
            log_score=score,
            top_path_state=top,
            regime_means=tuple(means) if (config.record_regime_means and means is not None) else None,
        )
        for (t, y, mean, var, score, top, means) in raw
    )

    runtime_min = runtime
    if config.timing_repeats > 1:
        if factory is None:
            raise ValueError("timing_repeats > 1 needs a method factory")
        for _ in range(config.timing_repeats - 1):
            _, extra_runtime, _ = _timed_loop(factory(), observations, evaluate=False)
            runtime_min = min(runtime_min, extra_runtime)

    if records:
        preds = np.array([r.predictive_mean for r in records])
        if config.targets is not None:
            targets = np.asarray(config.targets, dtype=float)[: len(records)]
        else:
            targets = np.array([r.y for r in records])
        errors = preds - targets
        mae = float(np.mean(np.abs(errors)))
        rmse = float(math.sqrt(np.mean(np.square(errors))))
        total_log_score = float(sum(r.log_score for r in records))
    else:
        mae = rmse = total_log_score = math.nan
    return PrequentialResult(
        method=instance.name,
        per_step=records,
        mae=mae,
        rmse=rmse,
        runtime_seconds=runtime,
        runtime_seconds_min=runtime_min,
        total_log_score=total_log_score,
        failed_at_t=failed_at,
    )


@dataclass(frozen=True)
class MethodSettings:
    """Shared knobs for building comparable methods on one dataset.

    ``prior_mean`` of None (the default) spreads per-regime prior means
    over the head window of the stream, the same rule online EM uses to
    initialize; a float pins every regime's prior mean to that value.
    ``prior_var`` of None scales the prior to three noise variances, so a
    regime mean is believed to sit within a few noise widths of its
    anchor; a very diffuse prior instead prices every anchor the same and
    lets small hypothesis budgets waste slots on relabeled duplicates.
    """

    prior_mean: float | None = None
    prior_var: float | None = None
    step_exponent: float = 0.6
    ess_threshold: float = 0.5
    kernel: KernelHyper | None = None
    window_cap: int = DEFAULT_WINDOW_CAP
    noise_var: float | None = None

    def resolve_noise_var(self, series: RegimeSeries) -> float:
        if self.noise_var is not None:
            return self.noise_var
        sigma = float(series.config.sigma)
        if sigma <= 0.0:
            raise ValueError("noiseless stream needs an explicit noise_var")
        return sigma * sigma

    def resolve_prior_var(self, noise_var: float) -> float:
        if self.prior_var is not None:
            return self.prior_var
        return 3.0 * noise_var


def _prior_means(settings: MethodSettings, series: RegimeSeries, k: int) -> np.ndarray:
    if settings.prior_mean is not None:
        return np.full(k, float(settings.prior_mean))
    return head_window_means(series.observations, k)


def build_method(name: str, series: RegimeSeries, s_budget: int, seed: int, settings: MethodSettings | None = None):
    """Construct a prequential method for a generated stream.

    ``s_budget`` is the path budget for the beam filter and the particle
    count for the particle filter; online EM ignores it.  The beam filter
    uses Gaussian-process summaries when ``settings.kernel`` is set and
    conjugate Gaussian means otherwise.
    """
    if settings is None:
        settings = MethodSettings()
    noise_var = settings.resolve_noise_var(series)
    prior_var = settings.resolve_prior_var(noise_var)
    pi = series.transition
    if name == "shmm":
        if settings.kernel is not None:
            summaries = tuple(
                GPState(hyper=settings.kernel, noise_var=noise_var, window_cap=settings.window_cap)
                for _ in range(pi.k)
            )
        else:
            summaries = tuple(
                GaussianConjugateState(
                    post_mean=float(mean), post_var=prior_var, obs_var=noise_var
                )
                for mean in _prior_means(settings, series, pi.k)
            )
        return ShmmMethod(pi, summaries, s_budget, times=series.times)
    if name == "online-em":
        state = online_em_init(
            series.observations, pi.k, noise_var, step_exponent=settings.step_exponent
        )
        return OnlineEmMethod(pi, state)
    if name == "rbpf":
        state = rbpf_init(
            s_budget,
            pi.k,
            noise_var,
            seed,
            prior_mean=_prior_means(settings, series, pi.k),
            prior_var=prior_var,
            ess_threshold=settings.ess_threshold,
        )
        return RbpfMethod(pi, state)
    raise ValueError(f"unknown method {name!r}, expected one of {METHOD_NAMES}")


@dataclass(frozen=True)
class SweepCell:
    method: str
    s_budget: int
    seed: int
    mae: float
    rmse: float
    runtime_seconds: float
    failed_at_t: int | None


def _generate(dataset_cfg, seed: int) -> RegimeSeries:
    cfg = replace(dataset_cfg, seed=seed)
    if isinstance(cfg, GaussHmmConfig):
        return gen_gaussian_hmm(cfg)
    if isinstance(cfg, GpDgpConfig):
        return gen_gp_regime_series(cfg)
    raise TypeError(f"unsupported dataset config {type(cfg).__name__}")


def _run_cell(args):
    dataset_cfg, method, s_budget, seed, settings, timing_repeats = args
    series = _generate(dataset_cfg, seed)
    factory = lambda: build_method(method, series, s_budget, seed, settings)
    result = run_prequential(
        factory,
        series,
        PrequentialConfig(timing_repeats=timing_repeats, record_regime_means=False),
    )
    return SweepCell(
        method=method,
        s_budget=s_budget,
        seed=seed,
        mae=result.mae,
        rmse=result.rmse,
        runtime_seconds=result.runtime_seconds_min,
        failed_at_t=result.failed_at_t,
    )


def sweep_budget(
    methods,
    s_values,
    seeds,
    dataset_cfg,
    *,
    settings: MethodSettings | None = None,
    timing_repeats: int = 1,
    threads: int = 1,
) -> list[SweepCell]:
    """Run every (method, budget, seed) cell on freshly generated streams.

    Each seed regenerates the dataset, so all methods and budgets for one
    seed see identical observations.  Cells are independent; with
    ``threads > 1`` they run in a process pool and are collected in grid
    order, so the result list does not depend on scheduling.
    """
    if settings is None:
        settings = MethodSettings()
    if threads > 1:
        grid = [
            (dataset_cfg, method, int(s), int(seed), settings, timing_repeats)
            for method in methods
            for s in s_values
            for seed in seeds
        ]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_run_cell, grid))
    # serial path: interleave timing repeats across cells round-robin so
    # slow clock drift hits every budget equally, and keep the min per cell
    combos = [
        (method, int(s), int(seed)) for method in methods for s in s_values for seed in seeds
    ]
    series_by_seed = {}
    for _, _, seed in combos:
        if seed not in series_by_seed:
            series_by_seed[seed] = _generate(dataset_cfg, seed)
    cells = []
    for method, s, seed in combos:
        series = series_by_seed[seed]
        factory = lambda m=method, sr=series, b=s, sd=seed: build_method(m, sr, b, sd, settings)
        result = run_prequential(factory, series, PrequentialConfig(record_regime_means=False))
        cells.append(
            SweepCell(
                method=method,
                s_budget=s,
                seed=seed,
                mae=result.mae,
                rmse=result.rmse,
                runtime_seconds=result.runtime_seconds_min,
                failed_at_t=result.failed_at_t,
            )
        )
    # extra passes skip scoring: only the filtering clock matters for the min
    for _ in range(1, timing_repeats):
        for i, (method, s, seed) in enumerate(combos):
            series = series_by_seed[seed]
            fresh = build_method(method, series, s, seed, settings)
            _, runtime, _ = _timed_loop(fresh, series.observations, evaluate=False)
            if runtime < cells[i].runtime_seconds:
                cells[i] = replace(cells[i], runtime_seconds=runtime)
    return cells


@dataclass(frozen=True)
class AggregateRow:
    method: str
    s_budget: int
    n_seeds: int
    mae_mean: float
    mae_std: float
    rmse_mean: float
    rmse_std: float
    runtime_mean: float
    runtime_std: float


def aggregate_sweep(cells) -> list[AggregateRow]:
    """Mean and sample standard deviation per (method, budget) group."""
    groups: dict[tuple[str, int], list[SweepCell]] = {}
    for cell in cells:
        groups.setdefault((cell.method, cell.s_budget), []).append(cell)
    rows = []
    for (method, s_budget), members in sorted(groups.items()):
        mae = np.array([c.mae for c in members])
        rmse = np.array([c.rmse for c in members])
        runtime = np.array([c.runtime_seconds for c in members])
        ddof = 1 if len(members) > 1 else 0
        rows.append(
            AggregateRow(
                method=method,
                s_budget=s_budget,
                n_seeds=len(members),
                mae_mean=float(mae.mean()),
                mae_std=float(mae.std(ddof=ddof)),
                rmse_mean=float(rmse.mean()),
                rmse_std=float(rmse.std(ddof=ddof)),
                runtime_mean=float(runtime.mean()),
                runtime_std=float(runtime.std(ddof=ddof)),
            )
        )
    return rows
