"""Running-MLE sequential likelihood-ratio test and confidence sequences.

After a burn-in of ``t0`` observations the statistic is

    M_t = prod_{t0 < i <= t} p_{theta1_{i-1}}(Y_i) / max_{theta in null} prod_{t0 < i <= t} p_theta(Y_i)

where ``theta1_{i-1}`` is fitted on all observations before ``i`` (including
the burn-in). ``M_t`` is dominated by a nonnegative martingale under the
null, so ``1/M_t`` is an anytime-valid p-value. Gaussian-type families use
running sufficient statistics; other families refit from stored data.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .data import as_dataset
from .errors import InvalidInputError
from .families import FULL, Family, ParamVector, fit_mle, log_likelihood
from .split import ratio_log


class MartingaleState:
    """Single-owner state of one sequential test; advance it with :meth:`update`.

    Parameters
    ----------
    family
        Model family of the observations.
    null
        Constraint describing the null set (``FULL`` for confidence
        sequences without a test).
    theta_default
        Plug-in used for the first post-burn-in factor when no data has
        been seen (only matters for ``burn_in == 0``).
    burn_in
        Number of initial observations during which ``M_t`` is pinned to 1.
    estimator
        Optional non-anticipating estimator ``f(family, past_data)``;
        defaults to the running full-model MLE.
    """

    def __init__(self, family: Family, null, theta_default: ParamVector, burn_in: int = 1,
                 estimator: Callable | None = None):
        family.check(theta_default)
        if burn_in < 0:
            raise InvalidInputError("burn-in must be nonnegative")
        self.family = family
        self.null = null
        self.burn_in = int(burn_in)
        self.estimator = estimator
        self.t = 0
        self.theta1 = theta_default
        self.log_numerator = 0.0
        self.log_M = 0.0
        self.p_min = 1.0
        self.fast = getattr(family, "has_suff_stats", False)
        if self.fast:
            self.all_stats = family.empty_stats()
            self.post_stats = family.empty_stats()
        self._all: list[np.ndarray] = []
        self._post: list[np.ndarray] = []
        self._keep_all = estimator is not None or not self.fast

    # -- updates --------------------------------------------------------

    def update(self, y) -> "MartingaleState":
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if y.ndim != 1 or y.size != self.family.dim:
            raise InvalidInputError(f"observation must have dimension {self.family.dim}")
        if not np.all(np.isfinite(y)):
            raise InvalidInputError("observation must be finite")
        row = y[None, :]
        self.t += 1
        if self.t > self.burn_in:
            # numerator uses the estimate from strictly earlier data
            self.log_numerator += float(self.family.logpdf(self.theta1, row)[0])
            if self.fast:
                self.post_stats = self.family.combine(self.post_stats, self.family.stats(row))
            else:
                self._post.append(y)
            self.log_M = ratio_log(self.log_numerator, self.log_null_max())
            self.p_min = min(self.p_min, self.p_value)
        if self.fast:
            self.all_stats = self.family.combine(self.all_stats, self.family.stats(row))
        if self._keep_all:
            self._all.append(y)
        self.theta1 = self._refit()
        return self

    def _refit(self) -> ParamVector:
        if self.estimator is not None:
            return self.estimator(self.family, np.array(self._all))
        if self.fast:
            return self.family.fit_stats(self.all_stats, FULL)
        return fit_mle(self.family, np.array(self._all), None, FULL)

    # -- queries --------------------------------------------------------

    def _post_loglik(self, theta: ParamVector) -> float:
        if self.fast:
            return self.family.loglik_stats(theta, self.post_stats)
        return log_likelihood(self.family, theta, np.array(self._post))

    def log_null_max(self) -> float:
        """Maximised null log-likelihood of the post-burn-in observations."""
        if self.t <= self.burn_in:
            return 0.0
        if self.fast:
            theta0 = self.family.fit_stats(self.post_stats, self.null)
        else:
            theta0 = fit_mle(self.family, np.array(self._post), None, self.null)
        return self._post_loglik(theta0)

    def log_ratio(self, theta: ParamVector) -> float:
        """``log R_t(theta)``: running-MLE numerator against a fixed ``theta``.

        With ``theta`` the true parameter this is the oracle martingale
        ``log L_t``; ``log_M <= log_ratio(theta)`` for every null ``theta``.
        """
        self.family.check(theta)
        if self.t <= self.burn_in:
            return 0.0
        log_den = self._post_loglik(theta)
        if log_den == -math.inf:
            # theta could not have produced the data
            return math.inf
        return ratio_log(self.log_numerator, log_den)

    @property
    def p_value(self) -> float:
        return 1.0 if self.log_M <= 0 else math.exp(-self.log_M)

    def should_stop(self, alpha: float) -> bool:
        if not 0.0 < alpha < 1.0:
            raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
        return self.log_M > math.log(1.0 / alpha)

    def anytime_p(self) -> tuple[float, float]:
        """``(p_t, running minimum of p_s)``."""
        return self.p_value, self.p_min


def seq_init(family: Family, null, theta_default: ParamVector, burn_in: int = 1, estimator=None) -> MartingaleState:
    return MartingaleState(family, null, theta_default, burn_in, estimator)


def seq_update(state: MartingaleState, y) -> MartingaleState:
    return state.update(y)


def seq_should_stop(state: MartingaleState, alpha: float) -> bool:
    return state.should_stop(alpha)


def seq_anytime_p(state: MartingaleState) -> tuple[float, float]:
    return state.anytime_p()


def confseq_contains(state: MartingaleState, theta: ParamVector, alpha: float) -> bool:
    """Is ``theta`` in ``C_t = {theta : R_t(theta) <= 1/alpha}``?"""
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    return state.log_ratio(theta) <= math.log(1.0 / alpha)


def run_stream(state: MartingaleState, stream) -> list[tuple[int, float, float, float]]:
    """Feed every row of ``stream``; returns ``(t, log_M, p_t, p_bar)`` per step."""
    rows = []
    for y in as_dataset(stream):
        state.update(y)
        p, p_bar = state.anytime_p()
        rows.append((state.t, state.log_M, p, p_bar))
    return rows


class ConfSeqTracker:
    """Membership flags of ``C_t`` and its running intersection on a parameter grid."""

    def __init__(self, grid: Sequence[ParamVector], alpha: float):
        if not 0.0 < alpha < 1.0:
            raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
        self.grid = list(grid)
        self.alpha = alpha
        self.log_threshold = math.log(1.0 / alpha)
        self.current = np.ones(len(self.grid), dtype=bool)
        self.running = self.current.copy()

    def update(self, state: MartingaleState) -> "ConfSeqTracker":
        self.current = np.array([state.log_ratio(th) <= self.log_threshold for th in self.grid])
        self.running &= self.current
        return self


def null_grid_excluded(state: MartingaleState, null_grid: Sequence[ParamVector], alpha: float) -> bool:
    """True when no null grid point lies in the current confidence set."""
    return not any(confseq_contains(state, th, alpha) for th in null_grid)

