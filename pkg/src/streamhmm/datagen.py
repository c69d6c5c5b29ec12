"""Synthetic regime-switching streams.

Two generators with known ground truth:

* ``gen_gp_regime_series``: a drifting series whose slope and a shared
  sinusoidal modulation restart whenever the hidden regime switches,

      y_t = y_{t-1} + slope_k * dt + w1 * sin(w2 * t_local) * dt + eps_t,

  with y_0 = 0 and t_local the time elapsed inside the current regime
  segment (the first segment is anchored at y_0, so an unbroken run gives
  t_local = t * dt).

* ``gen_gaussian_hmm``: i.i.d. Gaussian emissions around per-regime means.

Both draw the full regime sequence first and the noise vector second from
one seeded generator, so outputs are bit-reproducible for a given seed.
"""

import math
from dataclasses import dataclass

import numpy as np

from .transition import TransitionMatrix, sticky_transition


@dataclass(frozen=True)
class GpDgpConfig:
    """Configuration for the slope-plus-sinusoid generator."""

    slopes: tuple[float, ...] = (0.15, -0.15)
    w1: float = 0.3
    w2: float = 0.5
    dt: float = 0.1
    sigma: float = 0.05
    self_prob: float = 0.99
    length: int = 1000
    seed: int = 0
    initial: tuple[float, ...] | None = None

    def __post_init__(self):
        assert len(self.slopes) >= 1, "need at least one regime slope"
        assert self.dt > 0.0, "dt must be positive"
        assert self.sigma >= 0.0, "sigma must be nonnegative"
        assert self.length >= 1, "length must be at least 1"
        assert 0.0 <= self.self_prob <= 1.0, "self_prob must lie in [0, 1]"

    @property
    def k(self) -> int:
        return len(self.slopes)


@dataclass(frozen=True)
class GaussHmmConfig:
    """Configuration for the Gaussian-emission generator."""

    means: tuple[float, ...] = (-3.0, 0.0, 3.0)
    sigma: float = 1.0
    self_prob: float = 0.98
    length: int = 2000
    seed: int = 0
    initial: tuple[float, ...] | None = None

    def __post_init__(self):
        assert len(self.means) >= 1, "need at least one regime mean"
        assert self.sigma >= 0.0, "sigma must be nonnegative"
        assert self.length >= 1, "length must be at least 1"
        assert 0.0 <= self.self_prob <= 1.0, "self_prob must lie in [0, 1]"

    @property
    def k(self) -> int:
        return len(self.means)


@dataclass(frozen=True)
class RegimeSeries:
    """A generated stream with its ground truth.

    ``times`` is the input coordinate a time-aware regime model should see
    (global time, t * dt for the drifting generator, the step index
    otherwise).  ``t_local`` is None for generators without segment-local
    structure.  ``config`` is the generating configuration, kept so
    downstream consumers know the noise level and regime structure.
    """

    observations: np.ndarray
    regimes: np.ndarray
    times: np.ndarray
    t_local: np.ndarray | None
    transition: TransitionMatrix
    config: "GpDgpConfig | GaussHmmConfig"

    def __len__(self) -> int:
        return len(self.observations)


def _sample_regimes(rng, transition: TransitionMatrix, length: int) -> np.ndarray:
    cumulative = np.cumsum(transition.rows, axis=1)
    cum_initial = np.cumsum(transition.initial)
    u = rng.random(length)
    k = transition.k
    regimes = np.empty(length, dtype=np.int64)
    state = min(int(np.searchsorted(cum_initial, u[0], side="right")), k - 1)
    regimes[0] = state
    for i in range(1, length):
        state = min(int(np.searchsorted(cumulative[state], u[i], side="right")), k - 1)
        regimes[i] = state
    return regimes


def gen_gp_regime_series(cfg: GpDgpConfig) -> RegimeSeries:
    """Generate a drifting series with regime-switching slope and phase."""
    transition = sticky_transition(cfg.k, cfg.self_prob, cfg.initial)
    rng = np.random.default_rng(cfg.seed)
    regimes = _sample_regimes(rng, transition, cfg.length)
    noise = rng.standard_normal(cfg.length) * cfg.sigma

    observations = np.empty(cfg.length)
    t_local = np.empty(cfg.length)
    y = 0.0
    elapsed = 0.0
    for i in range(cfg.length):
        # the first segment is anchored at the y_0 = 0 origin
        if i == 0 or regimes[i] == regimes[i - 1]:
            elapsed += cfg.dt
        else:
            elapsed = 0.0
        t_local[i] = elapsed
        y = y + cfg.slopes[regimes[i]] * cfg.dt + cfg.w1 * math.sin(cfg.w2 * elapsed) * cfg.dt + noise[i]
        observations[i] = y

    times = (np.arange(cfg.length) + 1.0) * cfg.dt
    return RegimeSeries(
        observations=observations,
        regimes=regimes,
        times=times,
        t_local=t_local,
        transition=transition,
        config=cfg,
    )


def gen_gaussian_hmm(cfg: GaussHmmConfig) -> RegimeSeries:
    """Generate i.i.d. Gaussian emissions around regime means."""
    transition = sticky_transition(cfg.k, cfg.self_prob, cfg.initial)
    rng = np.random.default_rng(cfg.seed)
    regimes = _sample_regimes(rng, transition, cfg.length)
    noise = rng.standard_normal(cfg.length) * cfg.sigma
    observations = np.asarray(cfg.means, dtype=float)[regimes] + noise
    times = np.arange(cfg.length) + 1.0
    return RegimeSeries(
        observations=observations,
        regimes=regimes,
        times=times,
        t_local=None,
        transition=transition,
        config=cfg,
    )
