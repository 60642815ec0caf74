"""EM for univariate Gaussian mixtures on a restricted parameter space.

Scales are floored at ``SIGMA_MIN`` and weights at ``WEIGHT_MIN``; both
floors are applied as exact constrained M-steps, so the ascent property of
EM is preserved. The inner loop is compiled with numba; restarts stop
independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .data import as_dataset, as_index
from .errors import InvalidInputError
from .families import LOG_2PI, SIGMA_MIN, WEIGHT_MIN, ParamVector


@dataclass
class EMRun:
    params: ParamVector
    loglik: float
    n_iter: int
    converged: bool
    history: np.ndarray  # log-likelihood at each visited parameter


def floor_weights(w: np.ndarray, floor: float = WEIGHT_MIN) -> np.ndarray:
    """Maximise ``sum n_j log w_j`` over the simplex with ``w_j >= floor``.

    ``w`` holds the unconstrained maximisers (rows of ``n_j / n``). The
    solution is ``max(floor, w_j / lam)``, found by fixing violators.
    """
    w = np.atleast_2d(np.asarray(w, dtype=float))
    k = w.shape[-1]
    if k * floor >= 1.0:
        raise InvalidInputError("weight floor too large for k components")
    fixed = np.zeros(w.shape, dtype=bool)
    out = w
    for _ in range(k):
        low = (out < floor) & ~fixed
        if not low.any():
            break
        fixed |= low
        free_mass = 1.0 - floor * fixed.sum(axis=-1, keepdims=True)
        free_sum = np.where(fixed, 0.0, w).sum(axis=-1, keepdims=True)
        out = np.where(fixed, floor, w * free_mass / free_sum)
    return out


def _initial_means(y: np.ndarray, k: int, restarts: int, rng) -> np.ndarray:
    # restart 0 spreads the means over sample quantiles, the rest pick distinct data points
    means = np.empty((restarts, k))
    means[0] = np.quantile(y, (np.arange(k) + 0.5) / k)
    for r in range(1, restarts):
        means[r] = y[rng.choice(y.size, size=k, replace=False)]
    return means


@njit(cache=True)
def _em_kernel(y, means, scales, weights, fit_scales, tol, max_iter, sigma_min, weight_min):
    # in-place EM on one restart; returns (history, n_iter, converged)
    n = y.size
    k = means.size
    history = np.empty(max_iter + 1)
    logp = np.empty((k, n))  # E-step scratch, holds responsibilities
    point_ll = np.empty(n)
    nk = np.empty(k)
    s1 = np.empty(k)
    s2 = np.empty(k)
    prev = -np.inf
    half_log_2pi = 0.5 * np.log(2.0 * np.pi)
    it = 0
    while True:
        # responsibilities are stored in logp after the E-step
        ll = 0.0
        for j in range(k):
            nk[j] = 0.0
            s1[j] = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(k):
                z = (y[i] - means[j]) / scales[j]
                v = weights[j] / scales[j] * np.exp(-0.5 * z * z)
                logp[j, i] = v
                acc += v
            if acc > 1e-280:
                point_ll[i] = np.log(acc) - half_log_2pi
                for j in range(k):
                    logp[j, i] /= acc
            else:
                # far tail: redo this point in log space
                top = -np.inf
                for j in range(k):
                    z = (y[i] - means[j]) / scales[j]
                    logp[j, i] = np.log(weights[j]) - np.log(scales[j]) - 0.5 * z * z
                    if logp[j, i] > top:
                        top = logp[j, i]
                acc = 0.0
                for j in range(k):
                    acc += np.exp(logp[j, i] - top)
                for j in range(k):
                    logp[j, i] = np.exp(logp[j, i] - top) / acc
                point_ll[i] = top + np.log(acc) - half_log_2pi
            ll += point_ll[i]
        history[it] = ll
        if ll - prev < tol:
            return history[: it + 1], it, True
        if it == max_iter:
            return history[: it + 1], it, False
        prev = ll

        for j in range(k):
            for i in range(n):
                r = logp[j, i]
                nk[j] += r
                s1[j] += r * y[i]
        for j in range(k):
            if nk[j] > 0.0:
                means[j] = s1[j] / nk[j]
        if fit_scales:
            for j in range(k):
                s2[j] = 0.0
                for i in range(n):
                    d = y[i] - means[j]
                    s2[j] += logp[j, i] * d * d
                if nk[j] > 0.0:
                    var = s2[j] / nk[j]
                    if var < sigma_min * sigma_min:
                        var = sigma_min * sigma_min
                    scales[j] = np.sqrt(var)

        # weights: constrained maximiser max(floor, nk/lam) on the simplex
        fixed = np.zeros(k, dtype=np.bool_)
        for j in range(k):
            weights[j] = nk[j] / n
        for _ in range(k):
            changed = False
            for j in range(k):
                if not fixed[j] and weights[j] < weight_min:
                    fixed[j] = True
                    changed = True
            if not changed:
                break
            free_sum = 0.0
            n_fixed = 0
            for j in range(k):
                if fixed[j]:
                    n_fixed += 1
                else:
                    free_sum += nk[j] / n
            free_mass = 1.0 - weight_min * n_fixed
            for j in range(k):
                if fixed[j]:
                    weights[j] = weight_min
                else:
                    weights[j] = (nk[j] / n) * free_mass / free_sum
        it += 1


def em_runs(
    y,
    k: int,
    restarts: int = 10,
    tol: float = 1e-8,
    max_iter: int = 500,
    sigma: float | None = None,
    seed=0,
) -> list[EMRun]:
    """Run ``restarts`` EM trajectories on 1-d data ``y``; one ``EMRun`` each.

    A run stops once the log-likelihood gain drops below ``tol`` or after
    ``max_iter`` M-steps.
    """
    y = np.ascontiguousarray(np.asarray(y, dtype=float).ravel())
    n = y.size
    if k < 1 or restarts < 1:
        raise InvalidInputError("k and restarts must be positive")
    if n < k:
        raise InvalidInputError(f"need at least k={k} observations, got {n}")
    if k * WEIGHT_MIN >= 1.0:
        raise InvalidInputError("weight floor too large for k components")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    starts = _initial_means(y, k, restarts, rng)
    if sigma is None:
        scale0 = max(float(y.std()), SIGMA_MIN)
    else:
        scale0 = float(sigma)
    runs = []
    for r in range(restarts):
        means = starts[r].copy()
        scales = np.full(k, scale0)
        weights = np.full(k, 1.0 / k)
        hist, n_iter, conv = _em_kernel(
            y, means, scales, weights, sigma is None, tol, max_iter, SIGMA_MIN, WEIGHT_MIN
        )
        params = ParamVector.mixture(weights / weights.sum(), means, scales)
        runs.append(EMRun(params, float(hist[-1]), int(n_iter), bool(conv), hist.copy()))
    return runs


def em_fit_mixture(
    data,
    idx=None,
    k: int = 2,
    restarts: int = 10,
    tol: float = 1e-8,
    max_iter: int = 500,
    sigma: float | None = None,
    seed=0,
) -> ParamVector:
    """Best-of-restarts EM estimate for a ``k``-component Gaussian mixture."""
    data = as_dataset(data)
    if data.shape[1] != 1:
        raise InvalidInputError("mixture EM expects one-dimensional observations")
    if idx is not None:
        data = data[as_index(idx, data.shape[0])]
    y = data[:, 0]
    if k == 1:
        # closed form; EM would reach it after a single step
        if sigma is None:
            sd = max(float(y.std()), SIGMA_MIN)
        else:
            sd = float(sigma)
        return ParamVector.mixture([1.0], [float(y.mean())], [sd])
    runs = em_runs(y, k, restarts=restarts, tol=tol, max_iter=max_iter, sigma=sigma, seed=seed)
    best = max(runs, key=lambda r: r.loglik)
    return best.params
