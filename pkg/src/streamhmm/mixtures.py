"""Finite Gaussian mixtures used as predictive distributions.

All predictive densities produced by the filters in this package are finite
mixtures of univariate Gaussians, so they share one value type.  Densities
are evaluated in log space throughout.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

LOG_2PI = math.log(2.0 * math.pi)

WEIGHT_SUM_TOL = 1e-10


def normal_logpdf(y, mean, var):
    """Log density of N(mean, var) at y.  Broadcasts like numpy."""
    return -0.5 * (LOG_2PI + np.log(var)) - np.square(y - mean) / (2.0 * var)


def logsumexp_1d(values: np.ndarray) -> float:
    """log(sum(exp(values))) for a 1-D float array.

    scipy's logsumexp dominates the per-step cost of the filters at small
    sizes (array-API dispatch overhead), so the hot loops use this direct
    version instead.  Returns -inf for an all-(-inf) input.
    """
    m = values.max()
    if not np.isfinite(m):
        # +inf or nan propagate; -inf means zero total mass
        return float(m)
    return float(m + math.log(np.exp(values - m).sum()))


@dataclass(frozen=True)
class GaussianMixture:
    """Normalized mixture of univariate Gaussians.

    Attributes:
        means: component means, shape (m,).
        variances: component variances, shape (m,), strictly positive.
        weights: component weights, shape (m,), nonnegative, summing to one
            within ``WEIGHT_SUM_TOL``.
    """

    means: np.ndarray
    variances: np.ndarray
    weights: np.ndarray
    log_weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        variances = np.asarray(self.variances, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if not (means.shape == variances.shape == weights.shape):
            raise ValueError("component arrays must share one shape")
        if means.ndim != 1 or means.size == 0:
            raise ValueError("mixture needs at least one component")
        if not np.all(np.isfinite(means)):
            raise ValueError("non-finite component mean")
        if not np.all(variances > 0.0):
            raise ValueError("component variances must be positive")
        if np.any(weights < 0.0):
            raise ValueError("negative component weight")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(
                f"weights sum to {weights.sum()!r}, expected 1 within {WEIGHT_SUM_TOL}"
            )
        for name, arr in (("means", means), ("variances", variances), ("weights", weights)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        with np.errstate(divide="ignore"):
            lw = np.log(self.weights)
        lw.flags.writeable = False
        object.__setattr__(self, "log_weights", lw)

    @property
    def components(self):
        """Components as a list of (weight, mean, variance) triples."""
        return list(zip(self.weights, self.means, self.variances))

    def logpdf(self, y):
        """Log density at y (scalar or array)."""
        y = np.asarray(y, dtype=float)
        comp = self.log_weights + normal_logpdf(y[..., None], self.means, self.variances)
        if comp.ndim == 1:
            # scalar query: scipy's dispatch overhead dwarfs the arithmetic
            return logsumexp_1d(comp)
        return logsumexp(comp, axis=-1)

    def pdf(self, y):
        return np.exp(self.logpdf(y))

    def moments(self):
        return mixture_moments(self)


def mixture_moments(mixture: GaussianMixture) -> tuple[float, float]:
    """Overall mean and variance of a Gaussian mixture.

    The variance combines within-component variance with the spread of the
    component means:  var = sum_i w_i (v_i + m_i^2) - mean^2.
    """
    w, m, v = mixture.weights, mixture.means, mixture.variances
    mean = float(np.dot(w, m))
    second = float(np.dot(w, v + np.square(m)))
    return mean, second - mean * mean


def mixture_from_components(weights, means, variances) -> GaussianMixture:
    """Build a normalized mixture, renormalizing weights defensively.

    Weights may be any nonnegative vector with positive sum; they are scaled
    to sum to one so callers can pass unnormalized posterior masses.
    """
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if not total > 0.0:
        raise ValueError("mixture weights must have positive sum")
    return GaussianMixture(
        means=np.asarray(means, dtype=float),
        variances=np.asarray(variances, dtype=float),
        weights=weights / total,
    )
