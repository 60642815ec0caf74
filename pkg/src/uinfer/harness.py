"""Monte Carlo experiments checking the finite-sample guarantees.

Every replication draws from its own generator, seeded by
``(master seed, replication index)``, so results do not depend on how
replications are scheduled across workers.
"""

from __future__ import annotations

import csv
import io
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .chi2 import chi2_upper_quantile
from .data import DataSplit
from .errors import InvalidInputError
from .families import (
    FULL,
    FixedPoint,
    Gaussian,
    MeanAtMost,
    Mixture,
    MixtureComponents,
    MvnIdentity,
    ParamVector,
    UniformScale,
    fit_mle,
    log_likelihood,
    sample_from,
)
from .sieve import mixture_sieve, select_model
from .split import (
    Crossfit,
    KFold,
    SingleSplit,
    UniversalSet,
    averaged_log_statistic,
    fold_pairs,
    gaussian_region,
    log_split_statistic,
    ratio_log,
)

# EM effort used inside simulations; validity of the universal test never
# depends on the quality of the alternative fit
SIM_EM = dict(restarts=3, tol=1e-8, max_iter=500)


# ---------------------------------------------------------------------------
# Plumbing
# ---------------------------------------------------------------------------


def rep_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))


def binomial_se(rate: float, reps: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / reps)


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("UINFER_THREADS", "1"))
    return max(1, int(threads))


def run_replications(fn, reps: int, threads: int | None = 1) -> list:
    """``[fn(0), ..., fn(reps - 1)]``, optionally across worker processes."""
    threads = resolve_threads(threads)
    if threads == 1 or reps < 2:
        return [fn(i) for i in range(reps)]
    chunk = max(1, reps // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(reps), chunksize=chunk))


def _check(alpha: float, reps: int) -> None:
    if not 0.0 < alpha < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")
    if reps < 1:
        raise InvalidInputError("need at least one replication")


@dataclass
class SimReport:
    """Rows of one experiment; ``to_csv`` writes only the declared columns."""

    columns: list[str]
    rows: list[dict] = field(default_factory=list)
    wall_clock: float = 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(row[c]) for c in self.columns])
        return buf.getvalue()

    def row(self, **match) -> dict:
        for r in self.rows:
            if all(r.get(k) == v for k, v in match.items()):
                return r
        raise KeyError(match)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


# ---------------------------------------------------------------------------
# Null scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    family: object
    truth: ParamVector
    null: object


def scenario(name: str) -> Scenario:
    """Named data-generating processes that lie in their null."""
    if name == "gaussian-simple":
        return Scenario(Gaussian(1.0), ParamVector.gaussian(0.0), FixedPoint(ParamVector.gaussian(0.0)))
    if name == "gaussian-composite":
        return Scenario(Gaussian(1.0), ParamVector.gaussian(0.0), MeanAtMost(0.0))
    if name == "mixture":
        return Scenario(Mixture(k=2, sigma=1.0, **SIM_EM), ParamVector.mixture([1.0], [0.0], [1.0]),
                        MixtureComponents(1))
    if name == "uniform":
        return Scenario(UniformScale(), ParamVector.uniform(1.0), FixedPoint(ParamVector.uniform(1.0)))
    raise InvalidInputError(f"unknown scenario {name!r}")


SCENARIOS = ("gaussian-simple", "gaussian-composite", "mixture", "uniform")
VARIANTS = ("split", "crossfit", "kfold", "powered", "relaxed")


class _Fits:
    """Memoised off-fold MLEs for one dataset, shared by all variants."""

    def __init__(self, family, data):
        self.family, self.data, self.cache = family, data, {}

    def __call__(self, family, data, idx):
        key = idx.tobytes()
        if key not in self.cache:
            self.cache[key] = fit_mle(self.family, self.data, idx, FULL)
        return self.cache[key]


def _null_term(sc, data, ev, theta1, eta=1.0):
    theta0 = fit_mle(sc.family, data, ev, sc.null)
    return eta * log_split_statistic(sc.family, theta0, theta1, data, ev)


def _type1_rep(i, *, name, m, alpha, seed, variants, k_folds, eta):
    sc = scenario(name)
    rng = rep_rng(seed, i)
    data = sample_from(sc.family, sc.truth, 2 * m, rng)
    split = DataSplit.random_halves(2 * m, rng)
    fold_seed = int(rng.integers(2**31))
    fits = _Fits(sc.family, data)
    thr = math.log(1.0 / alpha)
    d0, d1 = split.d0, split.d1
    out = {}
    for v in variants:
        if v == "split":
            stat = _null_term(sc, data, d0, fits(None, data, d1))
        elif v == "crossfit":
            stat = averaged_log_statistic([
                _null_term(sc, data, d0, fits(None, data, d1)),
                _null_term(sc, data, d1, fits(None, data, d0)),
            ])
        elif v == "kfold":
            pairs = fold_pairs(KFold(k_folds, fold_seed), 2 * m)
            stat = averaged_log_statistic([_null_term(sc, data, ev, fits(None, data, fit)) for ev, fit in pairs])
        elif v == "powered":
            stat = _null_term(sc, data, d0, fits(None, data, d1), eta)
        elif v == "relaxed":
            # relax the null to the whole alternative family fitted on d0
            null_ll = log_likelihood(sc.family, fit_mle(sc.family, data, d0, sc.null), data, d0)
            full_ll = log_likelihood(sc.family, fits(None, data, d0), data, d0)
            num = log_likelihood(sc.family, fits(None, data, d1), data, d0)
            stat = ratio_log(num, max(null_ll, full_ll))
        else:
            raise InvalidInputError(f"unknown variant {v!r}")
        out[v] = stat > thr
    return out


def simulate_type1(scenarios=SCENARIOS, variants=VARIANTS, m: int = 100, alpha: float = 0.1,
                   reps: int = 10_000, seed: int = 0, threads: int | None = 1, k_folds: int = 5,
                   eta: float = 0.5) -> SimReport:
    """Rejection rate of each test variant when the data satisfy the null."""
    _check(alpha, reps)
    start = time.perf_counter()
    report = SimReport(["variant", "rate", "se"])
    for name in scenarios:
        fn = partial(_type1_rep, name=name, m=m, alpha=alpha, seed=seed, variants=tuple(variants),
                     k_folds=k_folds, eta=eta)
        results = run_replications(fn, reps, threads)
        for v in variants:
            rate = sum(r[v] for r in results) / reps
            report.rows.append({"variant": f"{name}:{v}", "scenario": name, "test": v,
                                "rate": rate, "se": binomial_se(rate, reps)})
    report.wall_clock = time.perf_counter() - start
    return report


# ---------------------------------------------------------------------------
# Coverage and the unit-expectation bound
# ---------------------------------------------------------------------------


def _coverage_rep(i, *, name, m, alpha, seed, schemes):
    sc = scenario(name)
    rng = rep_rng(seed, i)
    data = sample_from(sc.family, sc.truth, 2 * m, rng)
    split = DataSplit.random_halves(2 * m, rng)
    out = {}
    for s in schemes:
        scheme = {"split": SingleSplit(), "crossfit": Crossfit()}[s]
        out[s] = UniversalSet(sc.family, data, alpha, scheme, split).contains(sc.truth)
    return out


def simulate_coverage(scenarios=("gaussian-simple", "uniform"), schemes=("split", "crossfit"), m: int = 50,
                      alpha: float = 0.1, reps: int = 10_000, seed: int = 0,
                      threads: int | None = 1) -> SimReport:
    """Frequency with which the universal set contains the true parameter."""
    _check(alpha, reps)
    start = time.perf_counter()
    report = SimReport(["variant", "rate", "se"])
    for name in scenarios:
        fn = partial(_coverage_rep, name=name, m=m, alpha=alpha, seed=seed, schemes=tuple(schemes))
        results = run_replications(fn, reps, threads)
        for s in schemes:
            rate = sum(r[s] for r in results) / reps
            report.rows.append({"variant": f"{name}:{s}", "scenario": name, "test": s,
                                "rate": rate, "se": binomial_se(rate, reps)})
    report.wall_clock = time.perf_counter() - start
    return report


def _expectation_rep(i, *, m, seed):
    fam = Gaussian(1.0)
    truth = ParamVector.gaussian(0.0)
    rng = rep_rng(seed, i)
    data = sample_from(fam, truth, 2 * m, rng)
    theta1 = fit_mle(fam, data, np.arange(m, 2 * m))
    return math.exp(log_split_statistic(fam, truth, theta1, data, np.arange(m)))


def expectation_experiment(m: int = 50, reps: int = 100_000, seed: int = 0,
                           threads: int | None = 1) -> SimReport:
    """Sample mean and standard error of ``T_n(theta*)`` for N(0, 1) data."""
    if reps < 2:
        raise InvalidInputError("need at least two replications")
    start = time.perf_counter()
    vals = np.array(run_replications(partial(_expectation_rep, m=m, seed=seed), reps, threads))
    report = SimReport(["m", "reps", "mean_T", "se"])
    report.rows.append({"m": m, "reps": reps, "mean_T": float(vals.mean()),
                        "se": float(vals.std(ddof=1) / math.sqrt(reps))})
    report.wall_clock = time.perf_counter() - start
    return report


# ---------------------------------------------------------------------------
# Mixture power curve and the bootstrap comparator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapOutcome:
    lrs: float
    p_value: float
    reject: bool
    boot_lrs: np.ndarray = field(repr=False)


def mixture_lrs(y, k0: int, k1: int, sigma: float | None = 1.0, em=None) -> float:
    """Full-data ``2 [log L(k1 fit) - log L(k0 fit)]``, clipped at 0 (nested models)."""
    em = em or {}
    fam0 = Mixture(k=k0, sigma=sigma, **em)
    fam1 = Mixture(k=k1, sigma=sigma, **em)
    ll0 = log_likelihood(fam0, fit_mle(fam0, y), y)
    ll1 = log_likelihood(fam1, fit_mle(fam1, y), y)
    return 2.0 * max(ll1 - ll0, 0.0)


def bootstrap_mixture_lrt(data, k0: int = 1, k1: int = 2, B: int = 200, alpha: float = 0.1, seed: int = 0,
                          sigma: float | None = 1.0, em=None) -> BootstrapOutcome:
    """Parametric bootstrap of the mixture LRS under the fitted ``k0`` null.

    The p-value is ``(1 + #{LRS_b >= LRS_obs}) / (B + 1)``.
    """
    if B < 100:
        raise InvalidInputError("bootstrap needs B >= 100")
    _check(alpha, 1)
    em = em or {}
    y = np.asarray(data, dtype=float).reshape(-1, 1)
    lrs = mixture_lrs(y, k0, k1, sigma, em) if k1 != k0 else 0.0
    fam0 = Mixture(k=k0, sigma=sigma, **em)
    null_fit = fit_mle(fam0, y)
    rng = np.random.default_rng(seed)
    boot = np.empty(B)
    for b in range(B):
        yb = sample_from(fam0, null_fit, y.shape[0], rng)
        boot[b] = mixture_lrs(yb, k0, k1, sigma, em) if k1 != k0 else 0.0
    p = (1.0 + np.sum(boot >= lrs)) / (B + 1.0)
    return BootstrapOutcome(lrs, float(p), bool(p <= alpha) and k1 != k0, boot)


def _pool_rep(i, *, n, seed):
    rng = rep_rng(seed, i)
    y = rng.standard_normal((n, 1))
    return mixture_lrs(y, 1, 2, 1.0, SIM_EM)


def null_lrs_pool(n: int, size: int, seed: int, threads: int | None = 1) -> np.ndarray:
    """Draws of the 1-vs-2 component LRS for N(0, 1) samples of size ``n``.

    With unit component scales the LRS is invariant to shifting the data, so
    this is the parametric-bootstrap null law for every dataset of size ``n``.
    """
    return np.array(run_replications(partial(_pool_rep, n=n, seed=seed), size, threads))


def _power_rep(i, *, mu, m, alpha, seed, B, pool):
    rng = rep_rng(seed, i)
    truth = ParamVector.mixture([0.5, 0.5], [-mu, mu], [1.0, 1.0]) if mu > 0 else \
        ParamVector.mixture([1.0], [0.0], [1.0])
    fam = Mixture(k=2, sigma=1.0, **SIM_EM)
    data = sample_from(fam, truth, 2 * m, rng)
    split = DataSplit.random_halves(2 * m, rng)
    theta1 = fit_mle(fam, data, split.d1)
    theta0 = fit_mle(fam, data, split.d0, MixtureComponents(1))
    universal = log_split_statistic(fam, theta0, theta1, data, split.d0) > math.log(1.0 / alpha)
    lrs = mixture_lrs(data, 1, 2, 1.0, SIM_EM)
    boot = pool[rng.choice(pool.size, size=B, replace=False)]
    p = (1.0 + np.sum(boot >= lrs)) / (B + 1.0)
    return universal, bool(p <= alpha)


DEFAULT_MU_GRID = tuple(float(x) for x in np.round(np.arange(0.0, 3.01, 0.25), 2))


def simulate_power_curve(mus=DEFAULT_MU_GRID, m: int = 200, alpha: float = 0.1, reps: int = 1000,
                         B: int = 200, seed: int = 0, pool_size: int = 2000,
                         threads: int | None = 1) -> SimReport:
    """Power of the split LRT and the bootstrap LRT for 1 vs 2 mixture components.

    Data are ``2m`` draws from ``0.5 N(-mu, 1) + 0.5 N(mu, 1)``.
    """
    _check(alpha, reps)
    if B < 100 or pool_size < B:
        raise InvalidInputError("need B >= 100 and pool_size >= B")
    start = time.perf_counter()
    pool = null_lrs_pool(2 * m, pool_size, seed + 1, threads)
    report = SimReport(["mu", "power_universal", "se_u", "power_bootstrap", "se_b"])
    for mu in mus:
        fn = partial(_power_rep, mu=float(mu), m=m, alpha=alpha, seed=seed, B=B, pool=pool)
        res = run_replications(fn, reps, threads)
        pu = sum(r[0] for r in res) / reps
        pb = sum(r[1] for r in res) / reps
        report.rows.append({"mu": float(mu), "power_universal": pu, "se_u": binomial_se(pu, reps),
                            "power_bootstrap": pb, "se_b": binomial_se(pb, reps)})
    report.wall_clock = time.perf_counter() - start
    return report


# ---------------------------------------------------------------------------
# Multivariate normal radius
# ---------------------------------------------------------------------------


def _radius_rep(i, *, d, m, alpha, seed):
    rng = rep_rng(seed, i)
    fam = MvnIdentity(d)
    data = sample_from(fam, ParamVector.mvn(np.zeros(d)), 2 * m, rng)
    return gaussian_region(data, DataSplit.first_half(2 * m), alpha)[1]


def theory_r2(d: int, n: int, alpha: float) -> float:
    """Mean squared radius ``(4 log(1/alpha) + 4 d) / n`` of the universal ball."""
    return (4.0 * math.log(1.0 / alpha) + 4.0 * d) / n


def radius_experiment(d: int, m: int, alpha: float = 0.1, reps: int = 10_000, seed: int = 0,
                      threads: int | None = 1) -> SimReport:
    """Empirical mean squared radius of the universal ball vs theory and the LRT ball."""
    if d < 1 or m < 1:
        raise InvalidInputError("need d >= 1 and m >= 1")
    _check(alpha, reps)
    start = time.perf_counter()
    r2 = np.array(run_replications(partial(_radius_rep, d=d, m=m, alpha=alpha, seed=seed), reps, threads))
    n = 2 * m
    classical = chi2_upper_quantile(alpha, d) / n
    emp = float(r2.mean())
    report = SimReport(["d", "n", "alpha", "emp_mean_r2", "theory_r2", "ratio_to_classical"])
    report.rows.append({"d": d, "n": n, "alpha": alpha, "emp_mean_r2": emp, "theory_r2": theory_r2(d, n, alpha),
                        "ratio_to_classical": emp / classical, "classical_r2": classical,
                        "se": float(r2.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0})
    report.wall_clock = time.perf_counter() - start
    return report


# ---------------------------------------------------------------------------
# Sequential
# ---------------------------------------------------------------------------


def gaussian_stream_paths(y, mu0: float, burn_in: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``(log M_t, log numerator_t)`` for a unit-variance Gaussian stream.

    Same quantities as feeding ``y`` to a :class:`MartingaleState` with the
    simple null ``mean = mu0``, computed with cumulative sums.
    """
    y = np.asarray(y, dtype=float)
    T = y.size
    if T == 0:
        return np.empty(0), np.empty(0)
    t = np.arange(1, T + 1)
    prev_mean = np.empty(T)
    prev_mean[0] = mu0  # plug-in default before any data
    prev_mean[1:] = np.cumsum(y)[:-1] / t[:-1]
    post = t > burn_in
    num_terms = np.where(post, -0.5 * (y - prev_mean) ** 2, 0.0)
    den_terms = np.where(post, -0.5 * (y - mu0) ** 2, 0.0)
    # the 0.5 log(2 pi) constants cancel between numerator and denominator
    log_num = np.cumsum(num_terms)
    log_M = log_num - np.cumsum(den_terms)
    return log_M, log_num


def _crossing_rep(i, *, mu, mu0, T, alpha, seed, burn_in):
    rng = rep_rng(seed, i)
    log_M, _ = gaussian_stream_paths(rng.normal(mu, 1.0, size=T), mu0, burn_in)
    return bool(log_M.size and log_M.max() > math.log(1.0 / alpha))


def seq_crossing_experiment(mu: float = 0.0, T: int = 1000, alpha: float = 0.1, reps: int = 2000,
                            seed: int = 0, mu0: float = 0.0, burn_in: int = 1,
                            threads: int | None = 1) -> SimReport:
    """Fraction of N(mu, 1) streams on which the test of ``mu = mu0`` stops by ``T``."""
    _check(alpha, reps)
    if T < 0:
        raise InvalidInputError("horizon must be nonnegative")
    start = time.perf_counter()
    fn = partial(_crossing_rep, mu=mu, mu0=mu0, T=T, alpha=alpha, seed=seed, burn_in=burn_in)
    hits = run_replications(fn, reps, threads)
    rate = sum(hits) / reps
    report = SimReport(["T", "alpha", "crossing_rate", "se"])
    report.rows.append({"T": T, "alpha": alpha, "crossing_rate": rate, "se": binomial_se(rate, reps)})
    report.wall_clock = time.perf_counter() - start
    return report


def _confseq_rep(i, *, mu, T, alpha, seed, burn_in):
    # log R_t(mu) is log M_t for the simple null at the true mean
    rng = rep_rng(seed, i)
    log_R, _ = gaussian_stream_paths(rng.normal(mu, 1.0, size=T), mu, burn_in)
    return bool(log_R.size == 0 or log_R.max() <= math.log(1.0 / alpha))


def confseq_coverage_experiment(mu: float = 0.0, T: int = 1000, alpha: float = 0.1, reps: int = 2000,
                                seed: int = 0, burn_in: int = 1, threads: int | None = 1) -> SimReport:
    """Frequency with which ``C_t`` contains the true mean at every ``t <= T``."""
    _check(alpha, reps)
    start = time.perf_counter()
    fn = partial(_confseq_rep, mu=mu, T=T, alpha=alpha, seed=seed, burn_in=burn_in)
    covered = run_replications(fn, reps, threads)
    rate = sum(covered) / reps
    report = SimReport(["T", "alpha", "coverage", "se"])
    report.rows.append({"T": T, "alpha": alpha, "coverage": rate, "se": binomial_se(rate, reps)})
    report.wall_clock = time.perf_counter() - start
    return report


# ---------------------------------------------------------------------------
# Sieve
# ---------------------------------------------------------------------------


def sieve_truth(name: str) -> tuple[ParamVector, int]:
    if name == "gaussian":
        return ParamVector.mixture([1.0], [0.0], [1.0]), 1
    if name == "mixture2":
        return ParamVector.mixture([0.5, 0.5], [-2.0, 2.0], [1.0, 1.0]), 2
    raise InvalidInputError(f"unknown sieve truth {name!r}")


def _sieve_rep(i, *, truth, m, alpha, seed, j_max):
    theta, _ = sieve_truth(truth)
    rng = rep_rng(seed, i)
    data = sample_from(Mixture(k=theta.k), theta, 2 * m, rng)
    split = DataSplit.random_halves(2 * m, rng)
    return select_model(data, split, mixture_sieve(**SIM_EM), alpha, j_max).j_hat


def sieve_experiment(truth: str = "gaussian", m: int = 100, alpha: float = 0.1, reps: int = 1000,
                     seed: int = 0, j_max: int = 4, threads: int | None = 1) -> SimReport:
    """Distribution of the selected level against the true number of components."""
    _check(alpha, reps)
    start = time.perf_counter()
    _, j_true = sieve_truth(truth)
    fn = partial(_sieve_rep, truth=truth, m=m, alpha=alpha, seed=seed, j_max=j_max)
    picks = np.array(run_replications(fn, reps, threads))
    over = float(np.mean(picks > j_true))
    exact = float(np.mean(picks == j_true))
    report = SimReport(["truth", "j_true", "freq_overshoot", "se_overshoot", "freq_exact", "se_exact"])
    report.rows.append({"truth": truth, "j_true": j_true, "freq_overshoot": over,
                        "se_overshoot": binomial_se(over, reps), "freq_exact": exact,
                        "se_exact": binomial_se(exact, reps)})
    report.wall_clock = time.perf_counter() - start
    return report
