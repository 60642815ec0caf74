"""Parametric families over which every universal procedure is generic.

A family object knows how to evaluate log densities, fit (possibly
constrained) maximum likelihood estimates and draw samples. Parameters
travel as :class:`ParamVector` values tagged with the family they belong to.

All likelihood arithmetic is done in log space; ``-inf`` marks points
outside the support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import ClassVar

import numpy as np

from .data import as_dataset, as_index
from .errors import InvalidInputError

SIGMA_MIN = 1e-3
WEIGHT_MIN = 1e-6
LOG_2PI = math.log(2.0 * math.pi)


class FamilyTag(str, Enum):
    GAUSSIAN = "gaussian"
    GAUSSIAN_UNKNOWN_VAR = "gaussian-unknown-var"
    MIXTURE = "mixture"
    UNIFORM_SCALE = "uniform-scale"
    MVN_IDENTITY = "mvn-identity"


_EMPTY = np.zeros(0)


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Parameter of one family, stored in natural (untransformed) units.

    ``means`` holds component means (mixtures) or the mean vector (MVN);
    ``scales`` holds standard deviations, or ``[theta]`` for the uniform
    scale family; ``weights`` is only populated for mixtures.
    """

    family: FamilyTag
    means: np.ndarray = field(default_factory=lambda: _EMPTY)
    scales: np.ndarray = field(default_factory=lambda: _EMPTY)
    weights: np.ndarray = field(default_factory=lambda: _EMPTY)

    def __post_init__(self):
        for name in ("means", "scales", "weights"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float)).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (np.all(np.isfinite(self.means)) and np.all(np.isfinite(self.scales))):
            raise InvalidInputError("parameters must be finite")
        fam = self.family
        if fam is FamilyTag.UNIFORM_SCALE:
            if self.scales.shape != (1,) or self.scales[0] <= 0:
                raise InvalidInputError("uniform scale theta must be a single positive number")
            return
        if fam is FamilyTag.MVN_IDENTITY:
            if self.means.size == 0:
                raise InvalidInputError("MVN mean vector is empty")
            return
        if np.any(self.scales <= 0):
            raise InvalidInputError("scales must be positive")
        if fam is FamilyTag.MIXTURE:
            k = self.means.size
            if k == 0 or self.scales.size != k or self.weights.size != k:
                raise InvalidInputError("mixture blocks must all have length k >= 1")
            if np.any(self.weights <= 0) or abs(self.weights.sum() - 1.0) > 1e-9:
                raise InvalidInputError("mixture weights must be positive and sum to 1")
        elif self.means.size != 1 or self.scales.size != 1:
            raise InvalidInputError("Gaussian parameters are a scalar mean and scale")

    # constructors -------------------------------------------------------

    @classmethod
    def gaussian(cls, mean: float, sigma: float = 1.0) -> "ParamVector":
        return cls(FamilyTag.GAUSSIAN, [mean], [sigma])

    @classmethod
    def gaussian_unknown_var(cls, mean: float, sigma: float) -> "ParamVector":
        return cls(FamilyTag.GAUSSIAN_UNKNOWN_VAR, [mean], [sigma])

    @classmethod
    def mixture(cls, weights, means, sigmas) -> "ParamVector":
        means = np.atleast_1d(np.asarray(means, dtype=float))
        sigmas = np.broadcast_to(np.asarray(sigmas, dtype=float), means.shape)
        return cls(FamilyTag.MIXTURE, means, sigmas, weights)

    @classmethod
    def uniform(cls, theta: float) -> "ParamVector":
        return cls(FamilyTag.UNIFORM_SCALE, scales=[theta])

    @classmethod
    def mvn(cls, mean) -> "ParamVector":
        return cls(FamilyTag.MVN_IDENTITY, means=mean)

    # convenience --------------------------------------------------------

    @property
    def k(self) -> int:
        return self.means.size

    @property
    def theta(self) -> float:
        """Scale of the uniform family."""
        return float(self.scales[0])

    @property
    def mean(self) -> float:
        """Scalar mean of a one-component Gaussian parameter."""
        return float(self.means[0])

    @property
    def sigma(self) -> float:
        return float(self.scales[0])

    def __repr__(self) -> str:
        parts = [f"means={self.means.tolist()}"]
        if self.scales.size:
            parts.append(f"scales={self.scales.tolist()}")
        if self.weights.size:
            parts.append(f"weights={self.weights.tolist()}")
        return f"ParamVector({self.family.value}, {', '.join(parts)})"


# ---------------------------------------------------------------------------
# Constraints
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Full:
    """No restriction: the unconstrained MLE over the family."""


@dataclass(frozen=True)
class FixedPoint:
    """Simple null ``{theta0}``."""

    theta: ParamVector


@dataclass(frozen=True)
class MeanAtMost:
    """One-sided composite null ``E[Y] <= c`` (one-dimensional families)."""

    c: float


@dataclass(frozen=True)
class MixtureComponents:
    """Mixtures with exactly ``k`` components."""

    k: int


@dataclass(frozen=True)
class FixedValue:
    """Parameters with ``g(theta) == psi``; only ``g == "mean"`` is supported."""

    g: str
    psi: float


FULL = Full()
Constraint = Full | FixedPoint | MeanAtMost | MixtureComponents | FixedValue


def _unsupported(family, constraint) -> InvalidInputError:
    return InvalidInputError(f"constraint {constraint!r} is not supported by {type(family).__name__}")


def _normal_logpdf(y, mean, sigma):
    z = (y - mean) / sigma
    return -0.5 * z * z - np.log(sigma) - 0.5 * LOG_2PI


# ---------------------------------------------------------------------------
# Families
# ---------------------------------------------------------------------------


class Family:
    """Base class. Subclasses implement ``logpdf``, ``fit`` and ``sample``."""

    tag: ClassVar[FamilyTag]
    dim: int = 1

    def check(self, theta: ParamVector) -> None:
        if theta.family is not self.tag:
            raise InvalidInputError(f"{type(self).__name__} cannot use a {theta.family.value} parameter")

    def logpdf(self, theta: ParamVector, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def fit(self, y: np.ndarray, constraint=FULL) -> ParamVector:
        raise NotImplementedError

    def sample(self, theta: ParamVector, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def to_flat(self, theta: ParamVector) -> np.ndarray:
        """Unconstrained real coordinates of ``theta`` (log scales, logit weights)."""
        raise NotImplementedError

    def from_flat(self, vec, like: ParamVector) -> ParamVector:
        raise NotImplementedError


class _SuffStatMixin:
    """Running sums ``(count, sum y, sum |y|^2)`` for Gaussian-type families."""

    has_suff_stats = True

    def stats(self, y: np.ndarray) -> tuple[int, np.ndarray, float]:
        return y.shape[0], y.sum(axis=0), float(np.sum(y * y))

    def combine(self, a, b):
        return a[0] + b[0], a[1] + b[1], a[2] + b[2]

    def empty_stats(self):
        return 0, np.zeros(self.dim), 0.0

    @staticmethod
    def _sum_sq_dev(mean, stats) -> float:
        t, s1, s2 = stats
        mean = np.asarray(mean, dtype=float)
        return float(s2 - 2.0 * np.dot(mean, s1) + t * np.dot(mean, mean))


@dataclass(frozen=True)
class Gaussian(_SuffStatMixin, Family):
    """N(mu, sigma^2) with known ``sigma``; only the mean is estimated."""

    sigma: float = 1.0
    tag: ClassVar[FamilyTag] = FamilyTag.GAUSSIAN

    def param(self, mean: float) -> ParamVector:
        return ParamVector.gaussian(mean, self.sigma)

    def logpdf(self, theta, y):
        return _normal_logpdf(y[:, 0], theta.mean, theta.sigma)

    def fit(self, y, constraint=FULL):
        return self.fit_stats(self.stats(y), constraint)

    def fit_stats(self, stats, constraint=FULL):
        t, s1, _ = stats
        if isinstance(constraint, FixedPoint):
            self.check(constraint.theta)
            return constraint.theta
        if isinstance(constraint, FixedValue):
            if constraint.g != "mean":
                raise _unsupported(self, constraint)
            return self.param(constraint.psi)
        if t == 0:
            raise InvalidInputError("cannot fit a mean to zero observations")
        ybar = float(s1[0]) / t
        if isinstance(constraint, Full):
            return self.param(ybar)
        if isinstance(constraint, MeanAtMost):
            return self.param(min(ybar, constraint.c))
        raise _unsupported(self, constraint)

    def loglik_stats(self, theta, stats) -> float:
        t = stats[0]
        return -0.5 * t * (LOG_2PI + 2.0 * math.log(theta.sigma)) - 0.5 * self._sum_sq_dev(
            theta.means, stats
        ) / theta.sigma**2

    def sample(self, theta, n, rng):
        return rng.normal(theta.mean, theta.sigma, size=(n, 1))

    def to_flat(self, theta):
        return np.array([theta.mean])

    def from_flat(self, vec, like):
        return ParamVector.gaussian(float(vec[0]), like.sigma)


@dataclass(frozen=True)
class GaussianUnknownVar(_SuffStatMixin, Family):
    """N(mu, sigma^2) with both parameters estimated; sigma floored at ``SIGMA_MIN``."""

    tag: ClassVar[FamilyTag] = FamilyTag.GAUSSIAN_UNKNOWN_VAR

    def logpdf(self, theta, y):
        return _normal_logpdf(y[:, 0], theta.mean, theta.sigma)

    def fit(self, y, constraint=FULL):
        return self.fit_stats(self.stats(y), constraint)

    def fit_stats(self, stats, constraint=FULL):
        t, s1, _ = stats
        if isinstance(constraint, FixedPoint):
            self.check(constraint.theta)
            return constraint.theta
        if t == 0:
            raise InvalidInputError("cannot fit to zero observations")
        ybar = float(s1[0]) / t
        if isinstance(constraint, Full):
            mu = ybar
        elif isinstance(constraint, MeanAtMost):
            mu = min(ybar, constraint.c)
        elif isinstance(constraint, FixedValue) and constraint.g == "mean":
            mu = float(constraint.psi)
        else:
            raise _unsupported(self, constraint)
        var = max(self._sum_sq_dev([mu], stats) / t, SIGMA_MIN**2)
        return ParamVector.gaussian_unknown_var(mu, math.sqrt(var))

    def loglik_stats(self, theta, stats) -> float:
        t = stats[0]
        return -0.5 * t * (LOG_2PI + 2.0 * math.log(theta.sigma)) - 0.5 * self._sum_sq_dev(
            theta.means, stats
        ) / theta.sigma**2

    def sample(self, theta, n, rng):
        return rng.normal(theta.mean, theta.sigma, size=(n, 1))

    def to_flat(self, theta):
        return np.array([theta.mean, math.log(theta.sigma)])

    def from_flat(self, vec, like):
        return ParamVector.gaussian_unknown_var(float(vec[0]), max(math.exp(vec[1]), SIGMA_MIN))


@dataclass(frozen=True)
class MvnIdentity(_SuffStatMixin, Family):
    """N_d(theta, I)."""

    dim: int = 1
    tag: ClassVar[FamilyTag] = FamilyTag.MVN_IDENTITY

    def check(self, theta):
        super().check(theta)
        if theta.means.size != self.dim:
            raise InvalidInputError(f"expected a mean of dimension {self.dim}, got {theta.means.size}")

    def logpdf(self, theta, y):
        diff = y - theta.means
        return -0.5 * np.sum(diff * diff, axis=1) - 0.5 * self.dim * LOG_2PI

    def fit(self, y, constraint=FULL):
        return self.fit_stats(self.stats(y), constraint)

    def fit_stats(self, stats, constraint=FULL):
        if isinstance(constraint, FixedPoint):
            self.check(constraint.theta)
            return constraint.theta
        if isinstance(constraint, Full):
            if stats[0] == 0:
                raise InvalidInputError("cannot fit to zero observations")
            return ParamVector.mvn(stats[1] / stats[0])
        raise _unsupported(self, constraint)

    def loglik_stats(self, theta, stats) -> float:
        return -0.5 * stats[0] * self.dim * LOG_2PI - 0.5 * self._sum_sq_dev(theta.means, stats)

    def sample(self, theta, n, rng):
        return theta.means + rng.standard_normal((n, self.dim))

    def to_flat(self, theta):
        return theta.means.copy()

    def from_flat(self, vec, like):
        return ParamVector.mvn(vec)


@dataclass(frozen=True)
class UniformScale(Family):
    """Uniform on ``(0, theta]``."""

    tag: ClassVar[FamilyTag] = FamilyTag.UNIFORM_SCALE

    def logpdf(self, theta, y):
        y = y[:, 0]
        inside = (y > 0) & (y <= theta.theta)
        return np.where(inside, -math.log(theta.theta), -np.inf)

    def fit(self, y, constraint=FULL):
        if isinstance(constraint, FixedPoint):
            self.check(constraint.theta)
            return constraint.theta
        top = float(y[:, 0].max())
        if top <= 0:
            raise InvalidInputError("uniform scale data must contain a positive value")
        if isinstance(constraint, Full):
            return ParamVector.uniform(top)
        if isinstance(constraint, MeanAtMost):
            # mean theta/2 <= c; beyond the data maximum the null likelihood is zero
            return ParamVector.uniform(min(top, 2.0 * constraint.c))
        raise _unsupported(self, constraint)

    def sample(self, theta, n, rng):
        # 1 - U lies in (0, 1], matching the closed support endpoint
        return theta.theta * (1.0 - rng.random((n, 1)))

    def to_flat(self, theta):
        return np.array([math.log(theta.theta)])

    def from_flat(self, vec, like):
        return ParamVector.uniform(math.exp(vec[0]))


@dataclass(frozen=True)
class Mixture(Family):
    """Mixture of ``k`` univariate Gaussians fitted by EM.

    With ``sigma`` set, every component has that fixed standard deviation;
    otherwise each scale is estimated and floored at ``SIGMA_MIN``.
    """

    k: int = 2
    sigma: float | None = None
    restarts: int = 10
    tol: float = 1e-8
    max_iter: int = 500
    seed: int = 0
    tag: ClassVar[FamilyTag] = FamilyTag.MIXTURE

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError("mixture needs k >= 1")

    def logpdf(self, theta, y):
        comp = _normal_logpdf(y[:, :1], theta.means, theta.scales) + np.log(theta.weights)
        top = comp.max(axis=1)
        return top + np.log(np.exp(comp - top[:, None]).sum(axis=1))

    def fit(self, y, constraint=FULL):
        from .mixture import em_fit_mixture

        if isinstance(constraint, FixedPoint):
            self.check(constraint.theta)
            return constraint.theta
        if isinstance(constraint, Full):
            k = self.k
        elif isinstance(constraint, MixtureComponents):
            k = constraint.k
        else:
            raise _unsupported(self, constraint)
        return em_fit_mixture(
            y, k=k, restarts=self.restarts, tol=self.tol, max_iter=self.max_iter,
            sigma=self.sigma, seed=self.seed,
        )

    def sample(self, theta, n, rng):
        labels = rng.choice(theta.k, size=n, p=theta.weights)
        return rng.normal(theta.means[labels], theta.scales[labels])[:, None]

    def to_flat(self, theta):
        logits = np.log(theta.weights[:-1]) - math.log(theta.weights[-1])
        parts = [logits, theta.means]
        if self.sigma is None:
            parts.append(np.log(theta.scales))
        return np.concatenate(parts)

    def from_flat(self, vec, like):
        k = like.k
        vec = np.asarray(vec, dtype=float)
        logits = np.append(vec[: k - 1], 0.0)
        w = np.exp(logits - logits.max())
        w = np.maximum(w / w.sum(), WEIGHT_MIN)
        means = vec[k - 1 : 2 * k - 1]
        if self.sigma is None:
            scales = np.maximum(np.exp(vec[2 * k - 1 : 3 * k - 1]), SIGMA_MIN)
        else:
            scales = like.scales
        return ParamVector.mixture(w / w.sum(), means, scales)


def family_for(tag: FamilyTag | str, **options) -> Family:
    """Build a family object from its tag (CLI and config entry point)."""
    tag = FamilyTag(tag)
    return {
        FamilyTag.GAUSSIAN: Gaussian,
        FamilyTag.GAUSSIAN_UNKNOWN_VAR: GaussianUnknownVar,
        FamilyTag.MIXTURE: Mixture,
        FamilyTag.UNIFORM_SCALE: UniformScale,
        FamilyTag.MVN_IDENTITY: MvnIdentity,
    }[tag](**options)


# ---------------------------------------------------------------------------
# Module-level operations
# ---------------------------------------------------------------------------


def _check_dim(family: Family, data: np.ndarray) -> None:
    if data.shape[1] != family.dim:
        raise InvalidInputError(
            f"{type(family).__name__} expects {family.dim}-dimensional observations, got {data.shape[1]}"
        )


def log_density(family: Family, theta: ParamVector, y) -> float:
    """Natural-log density of a single observation (``-inf`` off the support)."""
    family.check(theta)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.ndim != 1:
        raise InvalidInputError("a single observation must be a scalar or a vector")
    if not np.all(np.isfinite(y)):
        raise InvalidInputError("observation contains non-finite values")
    row = y[None, :]
    _check_dim(family, row)
    return float(family.logpdf(theta, row)[0])


def log_likelihood(family: Family, theta: ParamVector, data, idx=None) -> float:
    """Sum of log densities over ``data[idx]`` (all rows when ``idx`` is None)."""
    family.check(theta)
    data = as_dataset(data)
    _check_dim(family, data)
    if idx is not None:
        data = data[as_index(idx, data.shape[0])]
    return float(np.sum(family.logpdf(theta, data)))


def fit_mle(family: Family, data, idx=None, constraint=FULL) -> ParamVector:
    """Maximum likelihood estimate over ``data[idx]`` under ``constraint``."""
    data = as_dataset(data)
    _check_dim(family, data)
    if idx is not None:
        data = data[as_index(idx, data.shape[0])]
    return family.fit(data, constraint)


def sample_from(family: Family, theta: ParamVector, n: int, seed=None) -> np.ndarray:
    """``n`` i.i.d. draws as an ``(n, d)`` array; deterministic given ``seed``."""
    family.check(theta)
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return family.sample(theta, int(n), rng)
