"""Nested-model selection by repeated split likelihood-ratio tests.

Level ``j`` is rejected when the level ``j+1`` fit from ``d1`` beats the
level ``j`` MLE on ``d0`` by more than ``1/alpha``. The first level that
survives is selected. One split is reused across all levels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .data import DataSplit, as_dataset
from .errors import InvalidInputError
from .families import FULL, Family, Mixture, fit_mle, log_likelihood
from .split import ratio_log


@dataclass
class SieveResult:
    j_hat: int
    log_statistics: list[float] = field(default_factory=list)
    levels_tested: int = 0


class SieveLevelError(RuntimeError):
    """A fit failed at a specific sieve level."""

    def __init__(self, level: int, cause: Exception):
        super().__init__(f"fit failed at sieve level {level}: {cause}")
        self.level = level


def mixture_sieve(sigma: float | None = None, **em_options) -> Callable[[int], Family]:
    """Level ``j`` -> Gaussian mixture family with ``j`` components."""
    return lambda j: Mixture(k=j, sigma=sigma, **em_options)


def select_model(
    data,
    split: DataSplit,
    levels: Sequence[Family] | Callable[[int], Family],
    alpha: float,
    j_max: int = 10,
) -> SieveResult:
    """Return the first level ``j`` whose null is not rejected.

    ``levels`` is either a sequence (level ``j`` is ``levels[j-1]``) or a
    callable ``j -> family``. If every tested level is rejected the result
    is the sentinel ``j_max + 1``.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    if j_max < 1:
        raise InvalidInputError("j_max must be at least 1")
    data = as_dataset(data)
    split.check(data.shape[0])
    if callable(levels):
        get = levels
    else:
        if len(levels) < j_max + 1:
            raise InvalidInputError(f"need {j_max + 1} nested families to test {j_max} levels")
        get = lambda j: levels[j - 1]  # noqa: E731

    threshold = math.log(1.0 / alpha)
    result = SieveResult(j_hat=j_max + 1)
    for j in range(1, j_max + 1):
        try:
            null_fam, alt_fam = get(j), get(j + 1)
            p_null = fit_mle(null_fam, data, split.d0, FULL)
            p_alt = fit_mle(alt_fam, data, split.d1, FULL)
            stat = ratio_log(
                log_likelihood(alt_fam, p_alt, data, split.d0),
                log_likelihood(null_fam, p_null, data, split.d0),
            )
        except InvalidInputError:
            raise
        except Exception as exc:
            raise SieveLevelError(j, exc) from exc
        result.log_statistics.append(stat)
        result.levels_tested = j
        if not stat > threshold:
            result.j_hat = j
            break
    return result
