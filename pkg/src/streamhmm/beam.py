"""Beam-truncated posterior over regime paths.

A regime path of length t assigns one of K regimes to every observation so
far.  The exact path posterior satisfies

    p(path + [k] | y_1..y_t)  proportional to
        p(path | y_1..y_{t-1}) * P(k | last regime) * f_k(y_t),

where f_k is the predictive density of the regime-k summary carried by that
path.  The number of paths grows as K^t, so after each step only the
``s_budget`` heaviest paths are retained and the retained weights are
renormalized.  Retention keeps the largest posterior mass, which makes the
renormalized truncation the closest distribution (in forward KL) supported
on the retained set; ``oracle.verify_theorem`` checks the resulting error
bound against brute-force enumeration.

All weight arithmetic is carried out in log space.  Beams are immutable
values: branching shares the untouched per-regime summaries between parent
and child, and path histories are shared parent chains, materialized only on
demand.
"""

import math
from dataclasses import dataclass
from functools import cached_property, cmp_to_key

import numpy as np
from .errors import DegenerateLikelihoodError, NonFiniteObservationError
from .mixtures import LOG_2PI, GaussianMixture, logsumexp_1d, mixture_from_components
from .transition import TransitionMatrix

WEIGHT_SUM_TOL = 1e-10


class _PathNode:
    """One link in a shared path-history chain."""

    __slots__ = ("state", "parent", "depth")

    def __init__(self, state: int, parent: "_PathNode | None"):
        self.state = state
        self.parent = parent
        self.depth = 1 if parent is None else parent.depth + 1


@dataclass(frozen=True)
class PathHypothesis:
    """One retained regime path with its per-regime summaries.

    Attributes:
        node: tail of the shared history chain; None for the pre-observation
            root.
        last_state: regime of the most recent observation; None at the root.
        log_weight: unnormalized log posterior weight from branching.
        summaries: one regime model per regime; exactly one summary changes
            relative to the parent at each branch step.
    """

    node: "_PathNode | None"
    last_state: int | None
    log_weight: float
    summaries: tuple

    @cached_property
    def history(self) -> tuple[int, ...]:
        """Regime assignments so far, oldest first."""
        states = []
        node = self.node
        while node is not None:
            states.append(node.state)
            node = node.parent
        states.reverse()
        return tuple(states)


@dataclass(frozen=True)
class Beam:
    """Truncated, renormalized path posterior after t observations.

    Hypotheses are ordered by descending weight with a deterministic
    tie-break (lexicographically smaller history first).  ``log_weights``
    are normalized; the linear weights sum to one within 1e-10.
    """

    hypotheses: tuple[PathHypothesis, ...]
    log_weights: np.ndarray
    t: int

    def __post_init__(self):
        if len(self.hypotheses) == 0:
            raise ValueError("beam must hold at least one hypothesis")
        lw = np.asarray(self.log_weights, dtype=float)
        if lw.shape != (len(self.hypotheses),):
            raise ValueError("log_weights must match hypotheses")
        total = float(np.exp(lw).sum())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"beam weights sum to {total!r}")
        lw = lw.copy()
        lw.flags.writeable = False
        object.__setattr__(self, "log_weights", lw)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def size(self) -> int:
        return len(self.hypotheses)

    def histories(self) -> list[tuple[int, ...]]:
        return [h.history for h in self.hypotheses]


def initial_beam(pi: TransitionMatrix, summaries) -> Beam:
    """Pre-observation root beam: one empty path with fresh summaries.

    The first branch step distributes the root's mass over regimes using
    ``pi.initial``.
    """
    summaries = tuple(summaries)
    if len(summaries) != pi.k:
        raise ValueError("need one fresh summary per regime")
    root = PathHypothesis(node=None, last_state=None, log_weight=0.0, summaries=summaries)
    return Beam(hypotheses=(root,), log_weights=np.zeros(1), t=0)


def _transition_log_row(pi: TransitionMatrix, hypothesis: PathHypothesis) -> np.ndarray:
    if hypothesis.last_state is None:
        return pi.log_initial
    return pi.log_rows[hypothesis.last_state]


def branch(beam: Beam, y: float, pi: TransitionMatrix, *, t_in: float | None = None):
    """Expand every hypothesis to all K successor regimes.

    Returns the S' * K candidates in (parent-major, regime-minor) order:
    candidate i descends from ``beam.hypotheses[i // K]`` with regime i % K.
    Candidate log-weights are unnormalized:

        normalized parent log-weight + log transition + log predictive(y).

    The candidate's regime-k summary absorbs y; the other K - 1 summaries
    are shared with the parent.  Raises ``DegenerateLikelihoodError`` when
    every candidate has zero mass.
    """
    y = float(y)
    if not math.isfinite(y):
        raise NonFiniteObservationError(f"observation must be finite, got {y!r}")
    if t_in is None:
        t_in = float(beam.t + 1)
    candidates = []
    any_finite = False
    for s, parent in enumerate(beam.hypotheses):
        parent_lw = float(beam.log_weights[s])
        log_row = _transition_log_row(pi, parent)
        for k in range(pi.k):
            mean, var = parent.summaries[k].predictive(t_in)
            # scalar form of normal_logpdf; huge residuals overflow the
            # squared term to inf and the candidate cleanly to -inf
            resid = y - float(mean)
            var = float(var)
            lw = parent_lw + float(log_row[k]) - 0.5 * (
                LOG_2PI + math.log(var) + resid * resid / var
            )
            if math.isnan(lw):
                lw = -math.inf
            any_finite = any_finite or lw > -math.inf
            new_summaries = list(parent.summaries)
            new_summaries[k] = parent.summaries[k].update(t_in, y)
            candidates.append(
                PathHypothesis(
                    node=_PathNode(k, parent.node),
                    last_state=k,
                    log_weight=lw,
                    summaries=tuple(new_summaries),
                )
            )
    if not any_finite:
        raise DegenerateLikelihoodError(beam.t + 1)
    return candidates


def _compare_candidates(a: PathHypothesis, b: PathHypothesis) -> int:
    if a.log_weight != b.log_weight:
        return -1 if a.log_weight > b.log_weight else 1
    ha, hb = a.history, b.history
    if ha < hb:
        return -1
    if ha > hb:
        return 1
    return 0


def truncate_top_s(candidates, s_budget: int, t: int) -> Beam:
    """Keep the ``s_budget`` heaviest candidates and renormalize.

    Ordering is by descending log-weight; exact ties fall back to the
    lexicographically smaller path history (whose final element is the
    regime index), so retention is deterministic.  Discarded candidates get
    zero mass; retained weights are renormalized with log-sum-exp.
    """
    if s_budget < 1:
        raise ValueError("s_budget must be at least 1")
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidates to truncate")
    if all(c.log_weight == -math.inf for c in candidates):
        raise DegenerateLikelihoodError(t)
    ordered = sorted(candidates, key=cmp_to_key(_compare_candidates))
    retained = ordered[: min(s_budget, len(ordered))]
    raw = np.array([c.log_weight for c in retained])
    log_norm = logsumexp_1d(raw)
    return Beam(hypotheses=tuple(retained), log_weights=raw - log_norm, t=t)


def step(beam: Beam, y: float, pi: TransitionMatrix, s_budget: int, *, t_in: float | None = None) -> Beam:
    """Advance one observation: branch to S' * K candidates, keep the top S.

    Deterministic: identical inputs give bit-identical beams.
    """
    candidates = branch(beam, y, pi, t_in=t_in)
    return truncate_top_s(candidates, s_budget, beam.t + 1)


def one_step_predictive(beam: Beam, pi: TransitionMatrix, *, t_query: float | None = None) -> GaussianMixture:
    """Predictive mixture for the next observation.

    One component per retained path and successor regime, weighted by the
    path weight times the transition probability; the component is the
    regime summary's Gaussian predictive.  At the root the transition row is
    replaced by the initial distribution.
    """
    if t_query is None:
        t_query = float(beam.t + 1)
    weights, means, variances = [], [], []
    for s, hyp in enumerate(beam.hypotheses):
        w_s = float(np.exp(beam.log_weights[s]))
        row = pi.initial if hyp.last_state is None else pi.rows[hyp.last_state]
        for k in range(pi.k):
            mean, var = hyp.summaries[k].predictive(t_query)
            weights.append(w_s * float(row[k]))
            means.append(mean)
            variances.append(var)
    return mixture_from_components(weights, means, variances)


def multi_step_forecast(
    beam: Beam,
    pi: TransitionMatrix,
    horizon: int,
    *,
    t_base: float | None = None,
    t_delta: float = 1.0,
):
    """Predictive mixtures for horizons 1..horizon with frozen summaries.

    Regime uncertainty is propagated through powers of the transition
    matrix: at horizon h the regime marginal for a path is the last-state
    row of pi^h.  Summaries absorb no pseudo-observations; time-aware
    summaries are queried at ``t_base + h * t_delta`` so their predictive
    variance can grow with the horizon.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    if t_base is None:
        t_base = float(beam.t)
    forecasts = []
    power = np.eye(pi.k)
    for h in range(1, horizon + 1):
        power = power @ pi.rows
        t_query = t_base + h * t_delta
        weights, means, variances = [], [], []
        for s, hyp in enumerate(beam.hypotheses):
            w_s = float(np.exp(beam.log_weights[s]))
            if hyp.last_state is None:
                # root: push the initial distribution h - 1 steps forward
                marginal = pi.initial @ np.linalg.matrix_power(pi.rows, h - 1)
            else:
                marginal = power[hyp.last_state]
            for k in range(pi.k):
                mean, var = hyp.summaries[k].predictive(t_query)
                weights.append(w_s * float(marginal[k]))
                means.append(mean)
                variances.append(var)
        forecasts.append(mixture_from_components(weights, means, variances))
    return forecasts
