import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uinfer.errors import InvalidInputError
from uinfer.families import (
    FULL,
    FixedPoint,
    Gaussian,
    GaussianUnknownVar,
    MeanAtMost,
    MvnIdentity,
    ParamVector,
    UniformScale,
    fit_mle,
    log_likelihood,
)
from uinfer.sequential import (
    ConfSeqTracker,
    MartingaleState,
    confseq_contains,
    null_grid_excluded,
    run_stream,
    seq_anytime_p,
    seq_init,
    seq_should_stop,
    seq_update,
)

G = Gaussian()
NULL0 = FixedPoint(G.param(0.0))


def brute_force_log_M(family, null, default, burn_in, ys):
    """log M_t for every prefix, refitting everything from scratch."""
    ys = np.asarray(ys, dtype=float).reshape(len(ys), -1)
    out = []
    for t in range(1, len(ys) + 1):
        if t <= burn_in:
            out.append(0.0)
            continue
        num = 0.0
        for i in range(burn_in, t):
            theta1 = default if i == 0 else fit_mle(family, ys[:i], None, FULL)
            num += log_likelihood(family, theta1, ys[i : i + 1])
        post = ys[burn_in:t]
        den = log_likelihood(family, fit_mle(family, post, None, null), post)
        out.append(num - den)
    return out


def test_fresh_state():
    s = seq_init(G, NULL0, G.param(0.0))
    assert (s.t, s.log_M, s.p_min) == (0, 0.0, 1.0)
    assert seq_anytime_p(s) == (1.0, 1.0)


def test_stream_two_twos():
    s = seq_init(G, NULL0, G.param(0.0), burn_in=0)
    seq_update(s, 2.0)
    assert s.log_M == pytest.approx(0.0, abs=1e-12)
    seq_update(s, 2.0)
    assert s.log_M == pytest.approx(2.0, abs=1e-12)


def test_burn_in_pins_statistic():
    s = seq_init(G, NULL0, G.param(0.0), burn_in=5)
    for y in [4.0, 5.0, 6.0, 7.0, 8.0]:
        seq_update(s, y)
        assert s.log_M == 0.0
    seq_update(s, 6.0)
    assert s.log_M > 0


def test_frozen_estimator_gives_unit_martingale():
    theta0 = G.param(0.3)
    s = MartingaleState(G, FixedPoint(theta0), theta0, burn_in=0, estimator=lambda fam, past: theta0)
    for y in np.random.default_rng(0).normal(size=50):
        s.update(y)
        assert s.log_M == pytest.approx(0.0, abs=1e-12)


def test_composite_null_negative_stream():
    s = seq_init(G, MeanAtMost(0.0), G.param(0.0))
    for y in -np.abs(np.random.default_rng(1).normal(size=100)):
        s.update(y)
        assert s.log_M <= 1e-12


def test_should_stop_and_p_values():
    s = seq_init(G, NULL0, G.param(0.0))
    assert not seq_should_stop(s, 0.1)
    s.log_M = 2.4
    assert seq_should_stop(s, 0.1)
    s.log_M = math.log(10)
    assert s.p_value == pytest.approx(0.1)
    with pytest.raises(InvalidInputError):
        seq_should_stop(s, 1.0)


def test_p_bar_nonincreasing():
    s = seq_init(G, NULL0, G.param(0.0))
    rows = run_stream(s, np.random.default_rng(2).normal(0.2, 1, 300))
    p_bar = [r[3] for r in rows]
    assert all(b <= a for a, b in zip(p_bar, p_bar[1:]))
    assert all(r[3] <= r[2] for r in rows)


def test_observation_guards():
    s = seq_init(G, NULL0, G.param(0.0))
    with pytest.raises(InvalidInputError):
        s.update(float("nan"))
    with pytest.raises(InvalidInputError):
        s.update([1.0, 2.0])
    with pytest.raises(InvalidInputError):
        seq_init(G, NULL0, G.param(0.0), burn_in=-1)


@pytest.mark.parametrize(
    "family, null, default, gen",
    [
        (G, NULL0, G.param(0.0), lambda r: r.normal(0.3, 1, 60)),
        (G, MeanAtMost(0.0), G.param(0.0), lambda r: r.normal(0.1, 1, 60)),
        (GaussianUnknownVar(), MeanAtMost(0.0), ParamVector.gaussian_unknown_var(0, 1), lambda r: r.normal(0, 2, 60)),
        (MvnIdentity(2), FixedPoint(ParamVector.mvn([0, 0])), ParamVector.mvn([0, 0]), lambda r: r.normal(0, 1, (60, 2))),
        (UniformScale(), FixedPoint(ParamVector.uniform(1.5)), ParamVector.uniform(1.5), lambda r: r.uniform(0, 1, 60)),
    ],
)
@pytest.mark.parametrize("burn_in", [0, 1, 4])
def test_incremental_matches_brute_force(family, null, default, gen, burn_in):
    ys = gen(np.random.default_rng(burn_in))
    s = MartingaleState(family, null, default, burn_in)
    got = []
    for y in ys:
        s.update(y)
        got.append(s.log_M)
    want = brute_force_log_M(family, null, default, burn_in, ys)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-9)


def test_uniform_support_violation():
    # after seeing 0.9 the plug-in is 0.9; a later 0.95 has zero numerator density
    s = MartingaleState(UniformScale(), FixedPoint(ParamVector.uniform(2.0)), ParamVector.uniform(2.0), 1)
    s.update(0.9)
    s.update(0.95)
    assert s.log_M == -math.inf
    assert not s.should_stop(0.1)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), mu0=st.floats(-1, 1), burn_in=st.integers(0, 3))
def test_oracle_domination(seed, mu0, burn_in):
    rng = np.random.default_rng(seed)
    truth = G.param(mu0)
    for null in (FixedPoint(truth), MeanAtMost(mu0 + 0.5)):
        s = MartingaleState(G, null, G.param(0.0), burn_in)
        for y in rng.normal(mu0, 1, 80):
            s.update(y)
            assert s.log_M <= s.log_ratio(truth) + 1e-9


def test_oracle_martingale_has_unit_mean():
    # without a burn-in the second moment of L_t is infinite and the SE check is meaningless
    rng = np.random.default_rng(7)
    reps, checkpoints = 4000, (11, 15, 30)
    values = {t: [] for t in checkpoints}
    truth = G.param(0.0)
    for _ in range(reps):
        s = MartingaleState(G, NULL0, truth, burn_in=10)
        for t, y in enumerate(rng.normal(size=max(checkpoints)), start=1):
            s.update(y)
            if t in values:
                values[t].append(math.exp(s.log_ratio(truth)))
    for t, v in values.items():
        v = np.array(v)
        assert abs(v.mean() - 1.0) <= 3 * v.std(ddof=1) / math.sqrt(reps) + 1e-12


def test_confseq_burn_in_contains_everything():
    s = seq_init(G, FULL, G.param(0.0), burn_in=3)
    for y in (10.0, 11.0, 12.0):
        s.update(y)
        assert confseq_contains(s, G.param(-100.0), 0.1)


def test_confseq_constant_stream_contains_plug_in():
    s = seq_init(G, FULL, G.param(1.0), burn_in=0)
    for _ in range(20):
        s.update(1.0)
    assert confseq_contains(s, G.param(1.0), 0.1)
    assert not confseq_contains(s, G.param(5.0), 0.1)


def test_tracker_running_intersection():
    grid = [G.param(x) for x in np.linspace(-2, 2, 41)]
    s = seq_init(G, FULL, G.param(0.0))
    tracker = ConfSeqTracker(grid, 0.1)
    prev = tracker.running.copy()
    for y in np.random.default_rng(3).normal(0.5, 1, 200):
        s.update(y)
        tracker.update(s)
        assert np.all(tracker.running <= tracker.current)
        assert np.all(tracker.running <= prev)
        prev = tracker.running.copy()
    assert tracker.running.any()


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(0, 1.5))
def test_duality_stop_excludes_null_grid(seed, shift):
    rng = np.random.default_rng(seed)
    grid = [G.param(x) for x in np.linspace(-3, 0, 61)]
    s = seq_init(G, MeanAtMost(0.0), G.param(0.0))
    for y in rng.normal(shift, 1, 60):
        s.update(y)
        if seq_should_stop(s, 0.1):
            assert null_grid_excluded(s, grid, 0.1)
