"""Split likelihood-ratio tests and universal confidence sets.

Every statistic is carried as a log value. A split term is
``log L0(theta_hat_1) - log L0(theta)`` where ``L0`` is the likelihood of
the evaluation half and ``theta_hat_1`` is fitted on the other half.
Averaged variants (crossfit, K-fold, repeated subsampling) combine terms
on the ratio scale with a log-mean-exp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize

from .data import DataSplit, as_dataset
from .errors import DegenerateStatisticError, InvalidInputError
from .families import (
    FULL,
    Family,
    FixedValue,
    GaussianUnknownVar,
    ParamVector,
    fit_mle,
    log_likelihood,
)

Estimator = Callable[[Family, np.ndarray, np.ndarray], ParamVector]


def mle_estimator(family: Family, data: np.ndarray, idx: np.ndarray) -> ParamVector:
    """Default alternative estimator: the unconstrained MLE on ``data[idx]``."""
    return fit_mle(family, data, idx, FULL)


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")


# ---------------------------------------------------------------------------
# Outcomes and schemes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestOutcome:
    """Decision of a universal test, with the conservative p-value ``1/U``."""

    __test__ = False  # not a pytest class

    log_statistic: float
    log_threshold: float
    reject: bool
    p_bound: float

    @classmethod
    def from_log_statistic(cls, log_statistic: float, alpha: float) -> "TestOutcome":
        _check_alpha(alpha)
        log_threshold = math.log(1.0 / alpha)
        p = 1.0 if log_statistic <= 0 else math.exp(-log_statistic)
        return cls(float(log_statistic), log_threshold, bool(log_statistic > log_threshold), p)


@dataclass(frozen=True)
class SingleSplit:
    pass


@dataclass(frozen=True)
class Crossfit:
    pass


@dataclass(frozen=True)
class KFold:
    """``k`` folds; each fold is evaluated against an estimate from the rest.

    Folds are contiguous blocks when ``seed`` is None, otherwise a seeded
    random partition.
    """

    k: int
    seed: int | None = None


@dataclass(frozen=True)
class Subsample:
    """``b`` independent random ``k``-fold partitions, all terms averaged."""

    k: int
    b: int
    seed: int = 0


SplitScheme = SingleSplit | Crossfit | KFold | Subsample


def _kfold_parts(n: int, k: int, rng) -> list[np.ndarray]:
    if not 2 <= k <= n:
        raise InvalidInputError(f"need 2 <= K <= n, got K={k}, n={n}")
    order = np.arange(n) if rng is None else rng.permutation(n)
    return [np.sort(part) for part in np.array_split(order, k)]


def fold_pairs(scheme: SplitScheme, n: int, split: DataSplit | None = None):
    """List of ``(evaluate_idx, fit_idx)`` pairs defined by ``scheme``."""
    if isinstance(scheme, (SingleSplit, Crossfit)):
        if split is None:
            raise InvalidInputError(f"{type(scheme).__name__} needs an explicit DataSplit")
        split.check(n)
        pairs = [(split.d0, split.d1)]
        if isinstance(scheme, Crossfit):
            pairs.append((split.d1, split.d0))
        return pairs
    if isinstance(scheme, KFold):
        rng = None if scheme.seed is None else np.random.default_rng(scheme.seed)
        parts = _kfold_parts(n, scheme.k, rng)
        return [(p, np.setdiff1d(np.arange(n), p)) for p in parts]
    if isinstance(scheme, Subsample):
        if scheme.b < 1:
            raise InvalidInputError("Subsample needs b >= 1")
        rng = np.random.default_rng(scheme.seed)
        pairs = []
        for _ in range(scheme.b):
            for p in _kfold_parts(n, scheme.k, rng):
                pairs.append((p, np.setdiff1d(np.arange(n), p)))
        return pairs
    raise InvalidInputError(f"unknown split scheme {scheme!r}")


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


def ratio_log(log_num: float, log_den: float) -> float:
    """``log_num - log_den`` in extended arithmetic.

    A vanishing numerator gives ``-inf``, a vanishing denominator ``+inf``;
    both vanishing is undefined.
    """
    if log_num == -math.inf and log_den == -math.inf:
        raise DegenerateStatisticError("both likelihoods are zero")
    if log_num == -math.inf:
        return -math.inf
    if log_den == -math.inf:
        return math.inf
    return log_num - log_den


def log_split_statistic(family: Family, theta: ParamVector, theta1: ParamVector, data, d0_idx) -> float:
    """``log T = log L0(theta1) - log L0(theta)`` on the rows ``d0_idx``."""
    return ratio_log(
        log_likelihood(family, theta1, data, d0_idx),
        log_likelihood(family, theta, data, d0_idx),
    )


def powered_log_statistic(eta: float, family, theta, theta1, data, d0_idx) -> float:
    """Split statistic computed with likelihoods raised to ``eta``."""
    if not 0.0 < eta <= 1.0:
        raise InvalidInputError(f"eta must lie in (0, 1], got {eta}")
    return eta * log_split_statistic(family, theta, theta1, data, d0_idx)


def averaged_log_statistic(log_terms) -> float:
    """Log of the arithmetic mean of ``exp(log_terms)``."""
    terms = np.asarray(list(log_terms), dtype=float)
    if terms.size == 0:
        raise InvalidInputError("need at least one term to average")
    if np.any(np.isnan(terms)):
        raise InvalidInputError("NaN statistic")
    top = terms.max()
    if top == math.inf:
        return math.inf
    if top == -math.inf:
        return -math.inf
    # subtract the logs first so equal terms come back exactly
    return float(top + (math.log(np.exp(terms - top).sum()) - math.log(terms.size)))


# ---------------------------------------------------------------------------
# Tests
# ---------------------------------------------------------------------------


def _null_log_terms(family, data, pairs, null, estimator, eta):
    estimator = estimator or mle_estimator
    terms = []
    for ev, fit in pairs:
        theta1 = estimator(family, data, fit)
        theta0 = fit_mle(family, data, ev, null)
        terms.append(eta * log_split_statistic(family, theta0, theta1, data, ev))
    return terms


def lrt(
    family: Family,
    data,
    null,
    alpha: float,
    scheme: SplitScheme = SingleSplit(),
    split: DataSplit | None = None,
    estimator: Estimator | None = None,
    eta: float = 1.0,
) -> TestOutcome:
    """Universal likelihood-ratio test of ``null`` under any split scheme.

    Each term compares ``estimator`` (fitted off-fold) with the null MLE on
    the evaluation fold; terms are averaged on the ratio scale. ``eta < 1``
    gives the powered-likelihood variant.
    """
    _check_alpha(alpha)
    if not 0.0 < eta <= 1.0:
        raise InvalidInputError(f"eta must lie in (0, 1], got {eta}")
    data = as_dataset(data)
    pairs = fold_pairs(scheme, data.shape[0], split)
    terms = _null_log_terms(family, data, pairs, null, estimator, eta)
    if isinstance(scheme, Crossfit) and all(t == -math.inf for t in terms):
        raise DegenerateStatisticError("both crossfit terms are zero")
    return TestOutcome.from_log_statistic(averaged_log_statistic(terms), alpha)


def split_lrt(family, data, split, null, alpha, estimator=None, eta=1.0) -> TestOutcome:
    """Reject when ``L0(theta_hat_1) / L0(theta_hat_0) > 1/alpha``."""
    return lrt(family, data, null, alpha, SingleSplit(), split, estimator, eta)


def crossfit_lrt(family, data, split, null, alpha, estimator=None, eta=1.0) -> TestOutcome:
    """Average of the split statistic and its role-swapped twin."""
    return lrt(family, data, null, alpha, Crossfit(), split, estimator, eta)


def relaxed_split_lrt(family, data, split, log_f0_max: float, alpha, estimator=None) -> TestOutcome:
    """Split test against an upper bound ``log_f0_max`` on the null log-likelihood.

    The caller guarantees ``log_f0_max >= max over the null of log L0``;
    the statistic is then never larger than the exact split statistic.
    """
    data = as_dataset(data)
    split.check(data.shape[0])
    theta1 = (estimator or mle_estimator)(family, data, split.d1)
    log_num = log_likelihood(family, theta1, data, split.d0)
    return TestOutcome.from_log_statistic(ratio_log(log_num, float(log_f0_max)), alpha)


# ---------------------------------------------------------------------------
# Confidence sets
# ---------------------------------------------------------------------------


class UniversalSet:
    """Universal confidence set ``{theta : averaged T(theta) <= 1/alpha}``.

    Off-fold estimates are computed once, so membership queries only cost
    likelihood evaluations. A ``theta`` that gives zero likelihood to some
    evaluation fold is outside the set (it cannot have produced the data).
    """

    def __init__(self, family, data, alpha, scheme=SingleSplit(), split=None, estimator=None, eta=1.0):
        _check_alpha(alpha)
        if not 0.0 < eta <= 1.0:
            raise InvalidInputError(f"eta must lie in (0, 1], got {eta}")
        self.family = family
        self.data = as_dataset(data)
        self.alpha = alpha
        self.eta = eta
        self.log_threshold = math.log(1.0 / alpha)
        estimator = estimator or mle_estimator
        self.pairs = fold_pairs(scheme, self.data.shape[0], split)
        self.fits = [estimator(family, self.data, fit) for _, fit in self.pairs]
        self.log_num = [log_likelihood(family, t1, self.data, ev) for t1, (ev, _) in zip(self.fits, self.pairs)]

    def log_statistic(self, theta: ParamVector) -> float:
        terms = []
        for log_num, (ev, _) in zip(self.log_num, self.pairs):
            log_den = log_likelihood(self.family, theta, self.data, ev)
            if log_den == -math.inf:
                return math.inf
            terms.append(self.eta * ratio_log(log_num, log_den))
        return averaged_log_statistic(terms)

    def contains(self, theta: ParamVector) -> bool:
        return self.log_statistic(theta) <= self.log_threshold

    def interval(self, make_theta: Callable[[float], ParamVector], center: float, lo: float, hi: float,
                 xtol: float = 1e-10) -> tuple[float, float]:
        """Endpoints of a one-parameter set by bisection outward from ``center``.

        Assumes the statistic is monotone in ``|x - center|`` and that
        ``center`` belongs to the set. Returns ``lo``/``hi`` when the set
        reaches the search bounds.
        """
        def g(x):
            return min(self.log_statistic(make_theta(x)), 1e300) - self.log_threshold

        if g(center) > 0:
            raise InvalidInputError("center is not inside the confidence set")
        left = lo if g(lo) <= 0 else optimize.bisect(g, lo, center, xtol=xtol)
        right = hi if g(hi) <= 0 else optimize.bisect(g, center, hi, xtol=xtol)
        return left, right

    def grid_members(self, make_theta: Callable[[float], ParamVector], lo: float, hi: float,
                     num: int = 10_000) -> np.ndarray:
        """Grid points in ``[lo, hi]`` belonging to the set (non-monotone case)."""
        grid = np.linspace(lo, hi, num)
        keep = np.array([self.contains(make_theta(x)) for x in grid])
        return grid[keep]


def universal_set_contains(family, theta, data, alpha, scheme=SingleSplit(), split=None,
                           estimator=None, eta=1.0) -> bool:
    """Membership of ``theta`` in the universal confidence set."""
    return UniversalSet(family, data, alpha, scheme, split, estimator, eta).contains(theta)


def profile_log_likelihood(family: Family, psi: float, data, idx, g: str = "mean") -> float:
    """``sup { log L(theta) : g(theta) = psi }`` over ``data[idx]``."""
    if not isinstance(family, GaussianUnknownVar) or g != "mean":
        raise NotImplementedError("profile likelihood is implemented for the mean of GaussianUnknownVar")
    theta = fit_mle(family, data, idx, FixedValue(g, psi))
    return log_likelihood(family, theta, data, idx)


def profile_set_contains(psi: float, family, data, split: DataSplit, alpha: float, g: str = "mean",
                         estimator=None) -> bool:
    """Is ``psi`` in ``{psi : L0(theta_hat_1) / L0_profile(psi) <= 1/alpha}``?"""
    _check_alpha(alpha)
    data = as_dataset(data)
    split.check(data.shape[0])
    theta1 = (estimator or mle_estimator)(family, data, split.d1)
    log_num = log_likelihood(family, theta1, data, split.d0)
    log_den = profile_log_likelihood(family, psi, data, split.d0, g)
    return ratio_log(log_num, log_den) <= math.log(1.0 / alpha)


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def gaussian_region(data, split: DataSplit, alpha: float) -> tuple[np.ndarray, float]:
    """Center and squared radius of the universal ball for ``N_d(theta, I)``.

    With ``m`` points per half, the set is
    ``|theta - mean0|^2 <= (2/m) log(1/alpha) + |mean0 - mean1|^2``.
    """
    if not 0.0 < alpha <= 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1], got {alpha}")
    data = as_dataset(data)
    split.check(data.shape[0])
    m = split.d0.size
    if split.d1.size != m:
        raise InvalidInputError("closed-form region needs equal halves")
    center = data[split.d0].mean(axis=0)
    gap = center - data[split.d1].mean(axis=0)
    return center, float(2.0 / m * math.log(1.0 / alpha) + gap @ gap)


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise InvalidInputError(f"interval endpoints out of order: {self.lo} > {self.hi}")

    def __contains__(self, x) -> bool:
        return self.lo <= x <= self.hi

    @property
    def length(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class CrossfitIntervals:
    """Uniform-scale crossfit interval in two readings.

    ``literal`` uses the smaller half-maximum as lower end; ``support``
    raises it to the overall maximum, below which the likelihood is zero.
    """

    literal: Interval
    support: Interval


def uniform_crossfit_interval(data, split: DataSplit, alpha: float) -> CrossfitIntervals:
    """Crossfit universal interval for the scale of Uniform(0, theta)."""
    if alpha <= 0:
        raise InvalidInputError("alpha must be positive")
    data = as_dataset(data)
    split.check(data.shape[0])
    n = split.d0.size
    if split.d1.size != n:
        raise InvalidInputError("crossfit interval needs equal halves")
    a, b = float(data[split.d0, 0].max()), float(data[split.d1, 0].max())
    small, large = min(a, b), max(a, b)
    upper = large * (2.0 / alpha) ** (1.0 / n)
    return CrossfitIntervals(Interval(small, upper), Interval(large, upper))


def uniform_classical_interval(data, alpha: float) -> Interval:
    """Exact pivotal interval ``[max, max * (1/alpha)^(1/N)]`` over all N points."""
    if not 0.0 < alpha <= 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1], got {alpha}")
    data = as_dataset(data)
    top = float(data[:, 0].max())
    return Interval(top, top * (1.0 / alpha) ** (1.0 / data.shape[0]))
