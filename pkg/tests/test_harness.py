import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uinfer import harness
from uinfer.errors import InvalidInputError
from uinfer.families import FixedPoint, Gaussian
from uinfer.sequential import MartingaleState


def test_schemas():
    assert harness.radius_experiment(2, 5, reps=3).columns == [
        "d", "n", "alpha", "emp_mean_r2", "theory_r2", "ratio_to_classical"]
    assert harness.seq_crossing_experiment(T=5, reps=3).columns == ["T", "alpha", "crossing_rate", "se"]
    assert harness.simulate_type1(["uniform"], ["split"], m=5, reps=3).columns == ["variant", "rate", "se"]
    rep = harness.simulate_power_curve((0.0,), m=10, reps=2, B=100, pool_size=100)
    assert rep.columns == ["mu", "power_universal", "se_u", "power_bootstrap", "se_b"]
    assert rep.to_csv().splitlines()[0] == "mu,power_universal,se_u,power_bootstrap,se_b"


def test_rates_and_se():
    rep = harness.simulate_type1(["gaussian-simple"], ["split", "crossfit"], m=10, reps=50, seed=3)
    for row in rep.rows:
        assert 0.0 <= row["rate"] <= 1.0
        assert row["se"] == pytest.approx(math.sqrt(row["rate"] * (1 - row["rate"]) / 50))


@pytest.mark.parametrize("alpha", [0.0, 1.0, 1.5])
def test_alpha_guard(alpha):
    with pytest.raises(InvalidInputError):
        harness.simulate_type1(alpha=alpha, reps=1)
    with pytest.raises(InvalidInputError):
        harness.seq_crossing_experiment(alpha=alpha, reps=1)


def test_reps_guard():
    with pytest.raises(InvalidInputError):
        harness.radius_experiment(2, 5, reps=0)


def test_zero_horizon_never_crosses():
    assert harness.seq_crossing_experiment(T=0, reps=20).rows[0]["crossing_rate"] == 0.0


def test_replication_seeds_are_schedule_independent():
    a = harness.simulate_type1(["gaussian-composite", "uniform"], m=8, reps=12, seed=5, threads=1)
    b = harness.simulate_type1(["gaussian-composite", "uniform"], m=8, reps=12, seed=5, threads=2)
    assert a.to_csv() == b.to_csv()
    assert harness.rep_rng(1, 3).random() == harness.rep_rng(1, 3).random()
    assert harness.rep_rng(1, 3).random() != harness.rep_rng(1, 4).random()


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv("UINFER_THREADS", "3")
    assert harness.resolve_threads(None) == 3
    assert harness.resolve_threads(2) == 2


def test_theory_radius():
    assert harness.theory_r2(10, 100, 0.1) == pytest.approx(0.49210, abs=1e-5)
    # alpha -> 1 leaves only the dimension term
    assert harness.theory_r2(7, 50, 1.0) == pytest.approx(4 * 7 / 50)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), mu0=st.floats(-1, 1), burn_in=st.integers(0, 5))
def test_vectorised_stream_matches_state(seed, mu0, burn_in):
    y = np.random.default_rng(seed).normal(0.2, 1, 120)
    g = Gaussian()
    state = MartingaleState(g, FixedPoint(g.param(mu0)), g.param(mu0), burn_in)
    want = []
    for v in y:
        state.update(v)
        want.append(state.log_M)
    got, _ = harness.gaussian_stream_paths(y, mu0, burn_in)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-9)


def test_sequential_power_under_alternative():
    assert harness.seq_crossing_experiment(mu=0.5, T=1000, reps=200).rows[0]["crossing_rate"] > 0.9


# -- bootstrap ------------------------------------------------------------------


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(-50, 50))
def test_lrs_is_shift_invariant(seed, shift):
    # justifies reusing one null LRS pool for every dataset of a given size
    y = np.random.default_rng(seed).normal(size=(60, 1))
    a = harness.mixture_lrs(y, 1, 2, 1.0, harness.SIM_EM)
    b = harness.mixture_lrs(y + shift, 1, 2, 1.0, harness.SIM_EM)
    assert b == pytest.approx(a, rel=1e-6, abs=1e-8)


def test_bootstrap_p_value_formula():
    y = np.random.default_rng(1).normal(size=(60, 1))
    out = harness.bootstrap_mixture_lrt(y, B=100, alpha=0.1, seed=2, em=harness.SIM_EM)
    assert out.p_value == (1 + np.sum(out.boot_lrs >= out.lrs)) / 101
    assert out.reject == (out.p_value <= 0.1)
    assert 1 / 101 <= out.p_value <= 1.0


def test_bootstrap_equal_orders_never_reject():
    y = np.random.default_rng(1).normal(size=(40, 1))
    out = harness.bootstrap_mixture_lrt(y, k0=2, k1=2, B=100, alpha=0.5)
    assert out.lrs == 0.0 and not out.reject


def test_bootstrap_minimum_draws():
    with pytest.raises(InvalidInputError):
        harness.bootstrap_mixture_lrt(np.zeros((10, 1)), B=99)


def test_bootstrap_rejects_separated_mixture():
    rng = np.random.default_rng(3)
    y = np.r_[rng.normal(-3, 1, 100), rng.normal(3, 1, 100)][:, None]
    out = harness.bootstrap_mixture_lrt(y, B=100, alpha=0.1, seed=1, em=harness.SIM_EM)
    assert out.reject and out.p_value == pytest.approx(1 / 101)


def test_pooled_bootstrap_is_valid_under_null():
    # pooled p-values on null data: rejection rate close to alpha
    n, reps, B = 100, 300, 100
    pool = harness.null_lrs_pool(n, 600, seed=11)
    rng = np.random.default_rng(12)
    rejections = 0
    for _ in range(reps):
        lrs = harness.mixture_lrs(rng.normal(size=(n, 1)), 1, 2, 1.0, harness.SIM_EM)
        boot = pool[rng.choice(pool.size, B, replace=False)]
        rejections += (1 + np.sum(boot >= lrs)) / (B + 1) <= 0.1
    rate = rejections / reps
    assert abs(rate - 0.1) <= 3 * math.sqrt(0.1 * 0.9 / reps)


# -- small end-to-end runs -----------------------------------------------------


def test_coverage_and_expectation_runs():
    cov = harness.simulate_coverage(m=10, reps=200, seed=1)
    assert all(r["rate"] >= 0.9 - 3 * r["se"] for r in cov.rows)
    exp = harness.expectation_experiment(m=10, reps=2000, seed=1)
    row = exp.rows[0]
    assert row["mean_T"] <= 1 + 3 * row["se"]


def test_sieve_experiment_runs():
    rep = harness.sieve_experiment("mixture2", m=200, reps=10, seed=0)
    assert rep.rows[0]["freq_exact"] >= 0.8
    with pytest.raises(InvalidInputError):
        harness.sieve_experiment("poisson", reps=1)
