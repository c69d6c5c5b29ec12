"""Known regime-transition structure.

The filters in this package treat the regime transition matrix as known and
fixed; nothing here is estimated.  The ``initial`` vector is the distribution
of the regime that emits the first observation.
"""

from dataclasses import dataclass, field

import numpy as np

ROW_SUM_TOL = 1e-12


def _log_probabilities(probs: np.ndarray) -> np.ndarray:
    # exact zeros must map to -inf, not raise
    out = np.full(probs.shape, -np.inf)
    nonzero = probs > 0.0
    out[nonzero] = np.log(probs[nonzero])
    return out


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic transition matrix with an initial distribution.

    Attributes:
        rows: shape (K, K); rows[i, j] = P(next regime j | current regime i).
        initial: shape (K,); distribution of the first regime.
    """

    rows: np.ndarray
    initial: np.ndarray
    log_rows: np.ndarray = field(init=False, repr=False, compare=False)
    log_initial: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        initial = np.asarray(self.initial, dtype=float)
        if rows.ndim != 2 or rows.shape[0] != rows.shape[1]:
            raise ValueError("rows must be a square matrix")
        k = rows.shape[0]
        if initial.shape != (k,):
            raise ValueError("initial must have one entry per regime")
        if np.any(rows < 0.0) or np.any(rows > 1.0) or np.any(initial < 0.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if np.any(np.abs(rows.sum(axis=1) - 1.0) > ROW_SUM_TOL):
            raise ValueError(f"rows must sum to 1 within {ROW_SUM_TOL}")
        if abs(initial.sum() - 1.0) > ROW_SUM_TOL:
            raise ValueError(f"initial must sum to 1 within {ROW_SUM_TOL}")
        rows = rows.copy()
        initial = initial.copy()
        rows.flags.writeable = False
        initial.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "initial", initial)
        log_rows = _log_probabilities(rows)
        log_initial = _log_probabilities(initial)
        log_rows.flags.writeable = False
        log_initial.flags.writeable = False
        object.__setattr__(self, "log_rows", log_rows)
        object.__setattr__(self, "log_initial", log_initial)

    @property
    def k(self) -> int:
        """Number of regimes."""
        return self.rows.shape[0]

    def power(self, h: int) -> np.ndarray:
        """h-step transition matrix rows^h (h >= 0)."""
        if h < 0:
            raise ValueError("power requires h >= 0")
        return np.linalg.matrix_power(self.rows, h)

    def stationary(self) -> np.ndarray:
        """Stationary distribution (left eigenvector for eigenvalue 1)."""
        values, vectors = np.linalg.eig(self.rows.T)
        idx = int(np.argmin(np.abs(values - 1.0)))
        pi = np.real(vectors[:, idx])
        pi = np.abs(pi)
        return pi / pi.sum()


def uniform_initial(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def sticky_rows(k: int, self_prob: float) -> np.ndarray:
    """Transition rows with a shared self-transition probability.

    Off-diagonal mass is spread evenly over the other k - 1 regimes.
    """
    if k < 1:
        raise ValueError("need at least one regime")
    if not 0.0 <= self_prob <= 1.0:
        raise ValueError("self_prob must lie in [0, 1]")
    if k == 1:
        return np.ones((1, 1))
    off = (1.0 - self_prob) / (k - 1)
    rows = np.full((k, k), off)
    np.fill_diagonal(rows, self_prob)
    return rows


def sticky_transition(k: int, self_prob: float, initial=None) -> TransitionMatrix:
    if initial is None:
        initial = uniform_initial(k)
    return TransitionMatrix(rows=sticky_rows(k, self_prob), initial=np.asarray(initial, float))
