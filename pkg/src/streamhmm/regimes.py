"""Per-regime predictive models.

A regime model is an immutable summary of the observations a path has
assigned to one regime.  It supports two operations: absorb one observation
(returning a new summary) and report a one-step Gaussian predictive.  Both
models condition on a known observation noise variance.

Two models are provided:

* ``GaussianConjugateState``: unknown regime mean with a Gaussian prior,
  known noise variance.  Updates are exchangeable and O(1).
* ``GPState``: a Gaussian process over time with a squared-exponential plus
  periodic kernel, maintained through an incrementally extended Cholesky
  factor with a sliding window.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Protocol, runtime_checkable

import numpy as np
from scipy.linalg import solve_triangular

from .errors import CholeskyBreakdownError, NonFiniteObservationError

JITTER_LADDER = (0.0, 1e-9, 1e-8, 1e-7, 1e-6)

DEFAULT_WINDOW_CAP = 256


def _check_observation(y: float) -> float:
    y = float(y)
    if not math.isfinite(y):
        raise NonFiniteObservationError(f"observation must be finite, got {y!r}")
    return y


@runtime_checkable
class RegimeModel(Protocol):
    """Common interface the path filter relies on."""

    def update(self, t: float, y: float) -> "RegimeModel": ...

    def predictive(self, t: float) -> tuple[float, float]: ...


@dataclass(frozen=True)
class GaussianConjugateState:
    """Posterior over an unknown regime mean with known noise variance.

    Attributes:
        post_mean: posterior mean of the regime mean.
        post_var: posterior variance of the regime mean.
        obs_var: known observation noise variance.
    """

    post_mean: float
    post_var: float
    obs_var: float

    def __post_init__(self):
        if not self.post_var > 0.0:
            raise ValueError("post_var must be positive")
        if not self.obs_var > 0.0:
            raise ValueError("obs_var must be positive")

    def update(self, t: float, y: float) -> "GaussianConjugateState":
        # time index is irrelevant for an exchangeable model
        return gaussian_update(self, y)

    def predictive(self, t: float) -> tuple[float, float]:
        return gaussian_predictive(self)


def gaussian_update(state: GaussianConjugateState, y: float) -> GaussianConjugateState:
    """Absorb one observation by precision-weighted averaging.

    new_var  = 1 / (1/post_var + 1/obs_var)
    new_mean = new_var * (post_mean/post_var + y/obs_var)
    """
    y = _check_observation(y)
    new_var = 1.0 / (1.0 / state.post_var + 1.0 / state.obs_var)
    new_mean = new_var * (state.post_mean / state.post_var + y / state.obs_var)
    return GaussianConjugateState(post_mean=new_mean, post_var=new_var, obs_var=state.obs_var)


def gaussian_predictive(state: GaussianConjugateState) -> tuple[float, float]:
    """One-step predictive (mean, variance); variance adds the noise floor."""
    return state.post_mean, state.post_var + state.obs_var


@dataclass(frozen=True)
class KernelHyper:
    """Hyperparameters of the squared-exponential plus periodic kernel.

    k(t, t') = rbf_variance * exp(-(t - t')^2 / (2 rbf_lengthscale^2))
             + per_variance * exp(-2 sin^2(pi (t - t') / per_period) / per_lengthscale^2)
    """

    rbf_variance: float = 1.0
    rbf_lengthscale: float = 5.0
    per_variance: float = 0.5
    per_lengthscale: float = 1.0
    per_period: float = 2.0 * math.pi / 0.5

    def __post_init__(self):
        for name in ("rbf_variance", "per_variance"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("rbf_lengthscale", "per_lengthscale", "per_period"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")


def kernel_eval(hyper: KernelHyper, t1, t2):
    """Kernel value k(t1, t2); broadcasts over array inputs."""
    diff = np.asarray(t1, dtype=float) - np.asarray(t2, dtype=float)
    rbf = hyper.rbf_variance * np.exp(-np.square(diff) / (2.0 * hyper.rbf_lengthscale**2))
    phase = np.sin(np.pi * diff / hyper.per_period)
    per = hyper.per_variance * np.exp(-2.0 * np.square(phase) / hyper.per_lengthscale**2)
    return rbf + per


def _cholesky_with_jitter(gram: np.ndarray) -> np.ndarray:
    for jitter in JITTER_LADDER:
        try:
            return np.linalg.cholesky(gram + jitter * np.eye(gram.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise CholeskyBreakdownError(JITTER_LADDER[-1])


@dataclass(frozen=True)
class GPState:
    """Gaussian-process regime summary over (time, observation) pairs.

    The noisy Gram matrix K + noise_var * I is kept as a lower Cholesky
    factor.  Absorbing a point appends one row to the factor in O(n^2); when
    ``window_cap`` would be exceeded the oldest point is evicted and the
    factor is rebuilt.  ``alpha`` caches L^{-1} targets for predictions.
    """

    hyper: KernelHyper
    noise_var: float
    inputs: tuple[float, ...] = ()
    targets: tuple[float, ...] = ()
    window_cap: int = DEFAULT_WINDOW_CAP
    chol: np.ndarray | None = field(default=None, repr=False, compare=False)
    alpha: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.noise_var > 0.0:
            raise ValueError("noise_var must be positive")
        if self.window_cap < 1:
            raise ValueError("window_cap must be at least 1")
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets must have equal length")
        if self.inputs and (self.chol is None or self.alpha is None):
            chol, alpha = _gp_factorize(self.hyper, self.noise_var, self.inputs, self.targets)
            object.__setattr__(self, "chol", chol)
            object.__setattr__(self, "alpha", alpha)

    def __len__(self) -> int:
        return len(self.inputs)

    def update(self, t: float, y: float) -> "GPState":
        return gp_update(self, t, y)

    def predictive(self, t: float) -> tuple[float, float]:
        return gp_predictive(self, t)


def _gp_factorize(hyper, noise_var, inputs, targets):
    pts = np.asarray(inputs, dtype=float)
    gram = kernel_eval(hyper, pts[:, None], pts[None, :])
    gram[np.diag_indices_from(gram)] += noise_var
    chol = _cholesky_with_jitter(gram)
    alpha = solve_triangular(chol, np.asarray(targets, dtype=float), lower=True)
    chol.flags.writeable = False
    alpha.flags.writeable = False
    return chol, alpha


def gp_update(state: GPState, t: float, y: float) -> GPState:
    """Absorb one (time, observation) pair.

    Within the window the Cholesky factor is copied and extended by one row;
    a breakdown of the new diagonal entry escalates through the jitter ladder
    before failing.  Past the window the oldest point is dropped and the
    factor rebuilt from scratch.
    """
    y = _check_observation(y)
    t = float(t)
    if state.inputs and not t > state.inputs[-1]:
        raise ValueError(
            f"time index {t!r} must exceed the last stored input {state.inputs[-1]!r}"
        )
    n = len(state)
    if n + 1 > state.window_cap:
        inputs = state.inputs[-(state.window_cap - 1):] + (t,) if state.window_cap > 1 else (t,)
        targets = state.targets[-(state.window_cap - 1):] + (y,) if state.window_cap > 1 else (y,)
        chol, alpha = _gp_factorize(state.hyper, state.noise_var, inputs, targets)
        return replace(state, inputs=inputs, targets=targets, chol=chol, alpha=alpha)

    k_tt = float(kernel_eval(state.hyper, t, t)) + state.noise_var
    if n == 0:
        chol = np.array([[math.sqrt(k_tt)]])
        alpha = np.array([y / chol[0, 0]])
    else:
        k_vec = kernel_eval(state.hyper, np.asarray(state.inputs), t)
        c = solve_triangular(state.chol, k_vec, lower=True)
        d_sq = k_tt - float(np.dot(c, c))
        for jitter in JITTER_LADDER:
            if d_sq + jitter > 0.0:
                d_sq += jitter
                break
        else:
            raise CholeskyBreakdownError(JITTER_LADDER[-1])
        d = math.sqrt(d_sq)
        chol = np.zeros((n + 1, n + 1))
        chol[:n, :n] = state.chol
        chol[n, :n] = c
        chol[n, n] = d
        alpha = np.append(state.alpha, (y - float(np.dot(c, state.alpha))) / d)
    chol.flags.writeable = False
    alpha.flags.writeable = False
    return replace(
        state,
        inputs=state.inputs + (t,),
        targets=state.targets + (y,),
        chol=chol,
        alpha=alpha,
    )


def gp_predictive(state: GPState, t_query: float) -> tuple[float, float]:
    """Posterior predictive (mean, variance) at ``t_query``.

    The variance includes the observation noise, so it never falls below
    ``noise_var`` up to roundoff.
    """
    t_query = float(t_query)
    k_qq = float(kernel_eval(state.hyper, t_query, t_query))
    if len(state) == 0:
        return 0.0, k_qq + state.noise_var
    k_vec = kernel_eval(state.hyper, np.asarray(state.inputs), t_query)
    c = solve_triangular(state.chol, k_vec, lower=True)
    mean = float(np.dot(c, state.alpha))
    var = k_qq + state.noise_var - float(np.dot(c, c))
    return mean, var
