"""Baseline online estimators for Gaussian-emission regime switching.

Two baselines with the same known transition structure as the path filter:

* Online EM: a stochastic-approximation EM that tracks point estimates of
  the regime means.  The E step is one exact HMM forward step under the
  current means; the M step blends sufficient statistics with step size
  gamma_t = t^(-step_exponent).
* RBPF: a Rao-Blackwellised particle filter that samples regime paths from
  the transition prior and keeps the conjugate mean posterior per particle
  in closed form.  Weights are multiplied by the sampled regime's
  predictive likelihood; systematic resampling triggers when the effective
  sample size falls below a fraction of the particle count.

Particle state is stored as arrays (one row per particle); randomness is
drawn per step from a generator keyed by (seed, step), with the i-th
variate belonging to particle i, so runs are bit-reproducible and
independent of evaluation order.
"""

import bisect
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateLikelihoodError, NonFiniteObservationError
from .mixtures import LOG_2PI, GaussianMixture, logsumexp_1d, mixture_from_components, normal_logpdf
from .regimes import GaussianConjugateState
from .transition import TransitionMatrix

DEFAULT_STEP_EXPONENT = 0.6
DEFAULT_ESS_THRESHOLD = 0.5
OCCUPANCY_EPS = 1e-12
INIT_WINDOW = 10


def _check_observation(y: float) -> float:
    y = float(y)
    if not math.isfinite(y):
        raise NonFiniteObservationError(f"observation must be finite, got {y!r}")
    return y


@dataclass(frozen=True)
class OnlineEmState:
    """Online EM tracker for regime means with known noise variance.

    ``s0``/``s1`` are smoothed occupancy and first-moment statistics; a
    regime's mean estimate is s1/s0 once its occupancy exceeds
    ``OCCUPANCY_EPS`` and falls back to its initialization before that.
    """

    means: np.ndarray
    init_means: np.ndarray
    filter_probs: np.ndarray
    s0: np.ndarray
    s1: np.ndarray
    obs_var: float
    step_exponent: float = DEFAULT_STEP_EXPONENT
    t: int = 0

    @property
    def k(self) -> int:
        return len(self.means)


def head_window_means(observations, k: int) -> np.ndarray:
    """Evenly spaced regime-mean guesses over the range of the first
    observations (at most ``INIT_WINDOW`` of them are considered).

    A degenerate range is widened by one on each side.  Every comparison
    method initializes from this same rule, so none of them sees
    information the others lack, and distinct starting means break the
    label-permutation symmetry that otherwise wastes hypothesis or
    particle budget on relabeled copies of one solution.
    """
    if k < 1:
        raise ValueError("need at least one regime")
    head = [float(y) for y in list(observations)[:INIT_WINDOW]]
    if not head:
        raise ValueError("need at least one observation to initialize")
    lo, hi = min(head), max(head)
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    return np.linspace(lo, hi, k) if k > 1 else np.array([(lo + hi) / 2.0])


def online_em_init(
    first_observations,
    k: int,
    obs_var: float,
    *,
    step_exponent: float = DEFAULT_STEP_EXPONENT,
) -> OnlineEmState:
    """Initialize means from the shared head-window rule."""
    if not obs_var > 0.0:
        raise ValueError("obs_var must be positive")
    means = head_window_means(first_observations, k)
    return OnlineEmState(
        means=means,
        init_means=means.copy(),
        filter_probs=np.full(k, 1.0 / k),
        s0=np.zeros(k),
        s1=np.zeros(k),
        obs_var=float(obs_var),
        step_exponent=float(step_exponent),
        t=0,
    )


def online_em_step(state: OnlineEmState, y: float, pi: TransitionMatrix) -> OnlineEmState:
    """One E step (HMM forward) and one stochastic-approximation M step."""
    y = _check_observation(y)
    predicted = pi.initial if state.t == 0 else state.filter_probs @ pi.rows
    with np.errstate(divide="ignore"):
        log_post = np.log(predicted) + normal_logpdf(y, state.means, state.obs_var)
    norm = logsumexp_1d(log_post)
    if not math.isfinite(norm):
        raise DegenerateLikelihoodError(state.t + 1)
    filter_probs = np.exp(log_post - norm)

    t_new = state.t + 1
    gamma = t_new ** (-state.step_exponent)
    s0 = (1.0 - gamma) * state.s0 + gamma * filter_probs
    s1 = (1.0 - gamma) * state.s1 + gamma * filter_probs * y
    means = np.where(s0 > OCCUPANCY_EPS, s1 / np.where(s0 > OCCUPANCY_EPS, s0, 1.0), state.init_means)
    return replace(state, means=means, filter_probs=filter_probs, s0=s0, s1=s1, t=t_new)


def online_em_predictive(state: OnlineEmState, pi: TransitionMatrix) -> GaussianMixture:
    """Next-observation mixture under current point estimates."""
    weights = pi.initial if state.t == 0 else state.filter_probs @ pi.rows
    variances = np.full(state.k, state.obs_var)
    return mixture_from_components(weights, state.means.copy(), variances)


@dataclass(frozen=True)
class RbpfState:
    """Particle ensemble with per-particle conjugate mean posteriors.

    ``post_mean``/``post_var`` have one row per particle and one column per
    regime.  ``log_weights`` are normalized.  ``last_states`` is -1 before
    the first step (the first transition draws from ``pi.initial``).
    """

    last_states: np.ndarray
    post_mean: np.ndarray
    post_var: np.ndarray
    log_weights: np.ndarray
    obs_var: float
    seed: int
    ess_threshold: float = DEFAULT_ESS_THRESHOLD
    t: int = 0
    resample_count: int = 0
    prior_mean: float | np.ndarray = 0.0
    prior_var: float = 100.0

    @property
    def n(self) -> int:
        return len(self.log_weights)

    @property
    def k(self) -> int:
        return self.post_mean.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def particle(self, i: int):
        """Record view of particle i: (last_state, per-regime summaries)."""
        summaries = tuple(
            GaussianConjugateState(
                post_mean=float(self.post_mean[i, k]),
                post_var=float(self.post_var[i, k]),
                obs_var=self.obs_var,
            )
            for k in range(self.k)
        )
        return int(self.last_states[i]), summaries

    def ess(self) -> float:
        return float(1.0 / np.exp(2.0 * self.log_weights).sum())


def rbpf_init(
    n: int,
    k: int,
    obs_var: float,
    seed: int,
    *,
    prior_mean=0.0,
    prior_var: float = 100.0,
    ess_threshold: float = DEFAULT_ESS_THRESHOLD,
) -> RbpfState:
    """Fresh ensemble; ``prior_mean`` is a scalar or one value per regime."""
    if n < 1:
        raise ValueError("need at least one particle")
    if not (obs_var > 0.0 and prior_var > 0.0):
        raise ValueError("variances must be positive")
    means = np.broadcast_to(np.asarray(prior_mean, dtype=float), (k,))
    if np.ndim(prior_mean) == 0:
        stored_mean: float | np.ndarray = float(prior_mean)
    else:
        stored_mean = means.copy()
        stored_mean.flags.writeable = False
    return RbpfState(
        last_states=np.full(n, -1, dtype=np.int64),
        post_mean=np.tile(means, (n, 1)),
        post_var=np.full((n, k), float(prior_var)),
        log_weights=np.full(n, -math.log(n)),
        obs_var=float(obs_var),
        seed=int(seed),
        ess_threshold=float(ess_threshold),
        prior_mean=stored_mean,
        prior_var=float(prior_var),
    )


def _systematic_resample(weights: np.ndarray, u: float) -> np.ndarray:
    n = len(weights)
    positions = (np.arange(n) + u) / n
    return np.minimum(np.searchsorted(np.cumsum(weights), positions, side="right"), n - 1)


def rbpf_step(
    state: RbpfState,
    y: float,
    pi: TransitionMatrix,
    *,
    forced_states: np.ndarray | None = None,
) -> RbpfState:
    """Advance the ensemble by one observation.

    With ``forced_states`` (testing only) each particle follows a preset
    regime instead of sampling; the transition probability then enters the
    weight so that, with resampling disabled, final weights reproduce the
    exact path posterior of the forced paths.
    """
    y = _check_observation(y)
    n = state.n
    k = state.k
    t_new = state.t + 1
    rng = np.random.default_rng((state.seed, t_new))
    u_z = rng.random(n)
    first = state.t == 0

    if forced_states is not None:
        z = np.asarray(forced_states, dtype=np.int64)
        if z.shape != (n,):
            raise ValueError("forced_states must give one regime per particle")
        if first:
            trans = pi.log_initial[z]
        else:
            trans = pi.log_rows[state.last_states, z]
        log_w = state.log_weights + trans
        forced = z.tolist()
    else:
        log_w = state.log_weights.copy()
        forced = None

    cum_initial = np.cumsum(pi.initial).tolist()
    cum_rows = np.cumsum(pi.rows, axis=1).tolist()
    last = state.last_states.tolist()
    post_mean = state.post_mean.copy()
    post_var = state.post_var.copy()
    obs_var = state.obs_var
    k_top = k - 1
    z_out = np.empty(n, dtype=np.int64)
    # per-particle loop: one conditional update each, cost grows with n
    for i in range(n):
        if forced is not None:
            zi = forced[i]
        else:
            cum = cum_initial if first else cum_rows[last[i]]
            zi = bisect.bisect_right(cum, u_z[i])
            if zi > k_top:
                zi = k_top
        z_out[i] = zi
        # plain floats: faster scalar arithmetic, and a huge residual
        # overflows silently to inf instead of warning
        mean_i = float(post_mean[i, zi])
        var_i = float(post_var[i, zi])
        pred_var = var_i + obs_var
        resid = y - mean_i
        log_w[i] += -0.5 * (LOG_2PI + math.log(pred_var) + resid * resid / pred_var)
        new_var = 1.0 / (1.0 / var_i + 1.0 / obs_var)
        post_mean[i, zi] = new_var * (mean_i / var_i + y / obs_var)
        post_var[i, zi] = new_var
    z = z_out

    norm = logsumexp_1d(log_w)
    if not math.isfinite(norm):
        raise DegenerateLikelihoodError(t_new)
    log_w = log_w - norm

    resample_count = state.resample_count
    weights = np.exp(log_w)
    ess = 1.0 / float(np.square(weights).sum())
    if state.ess_threshold > 0.0 and ess / n < state.ess_threshold:
        idx = _systematic_resample(weights, float(rng.random()))
        z = z[idx]
        post_mean = post_mean[idx]
        post_var = post_var[idx]
        log_w = np.full(n, -math.log(n))
        resample_count += 1

    return replace(
        state,
        last_states=z,
        post_mean=post_mean,
        post_var=post_var,
        log_weights=log_w,
        t=t_new,
        resample_count=resample_count,
    )


def rbpf_predictive(state: RbpfState, pi: TransitionMatrix) -> GaussianMixture:
    """Next-observation mixture: particles x successor regimes."""
    if state.t == 0:
        rows = np.tile(pi.initial, (state.n, 1))
    else:
        rows = pi.rows[state.last_states]
    weights = (state.weights[:, None] * rows).ravel()
    means = state.post_mean.ravel()
    variances = (state.post_var + state.obs_var).ravel()
    return mixture_from_components(weights, means, variances)


def rbpf_log_predictive_bootstrap(
    state: RbpfState,
    pi: TransitionMatrix,
    y: float,
    *,
    n_boot: int = 200,
    seed: int = 0,
) -> tuple[float, float]:
    """Predictive log-density at y with a bootstrap standard error.

    Particles are resampled uniformly with replacement (keeping their
    weights) and the self-normalized estimate is recomputed per replicate;
    the standard deviation of the replicate log-densities estimates the
    Monte Carlo error of the log predictive.
    """
    y = _check_observation(y)
    if state.t == 0:
        rows = np.tile(pi.initial, (state.n, 1))
    else:
        rows = pi.rows[state.last_states]
    with np.errstate(divide="ignore"):
        comp = np.log(rows) + normal_logpdf(
            y, state.post_mean, state.post_var + state.obs_var
        )
    log_dens = logsumexp(comp, axis=1)
    log_value = logsumexp_1d(state.log_weights + log_dens)

    rng = np.random.default_rng((state.seed, seed, 10**9 + 7))
    idx = rng.integers(0, state.n, size=(n_boot, state.n))
    lw = state.log_weights[idx]
    ld = log_dens[idx]
    replicate = logsumexp(lw + ld, axis=1) - logsumexp(lw, axis=1)
    return log_value, float(np.std(replicate, ddof=1))
