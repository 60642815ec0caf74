"""Acceptance criteria, each run at its stated size and tolerance.

Every test records a single PASS/FAIL line (see ``conftest.py``), which the
terminal summary lists in criterion order.
"""

import math
import time

import numpy as np
from scipy import stats

from uinfer import cli, harness
from uinfer.data import write_dataset
from uinfer.families import FixedPoint, Gaussian, MeanAtMost
from uinfer.mixture import em_runs
from uinfer.sequential import MartingaleState

ALPHA = 0.1


def _rel(a, b):
    return abs(a - b) / abs(b)


# 1 -------------------------------------------------------------------------------


def test_01_uniform_intervals_exact(tmp_path, capsys, criterion):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for n in (10, 37, 200):
        y = rng.uniform(0, 2.5, 2 * n)
        path = tmp_path / f"u{n}.csv"
        write_dataset(y[:, None], path)
        assert cli.run(["interval-uniform", "--data", str(path), "--split", "first-half", "--alpha", "0.1"]) == 0
        rows = {r.split(",")[0]: list(map(float, r.split(",")[1:])) for r in capsys.readouterr().out.splitlines()[1:]}
        small, large = sorted((y[:n].max(), y[n:].max()))
        upper = large * (2 / ALPHA) ** (1 / n)
        top = y.max()
        want = {
            "crossfit-literal": (small, upper),
            "crossfit-support": (top, upper),
            "classical": (top, top * (1 / ALPHA) ** (1 / (2 * n))),
        }
        for form, (lo, hi) in want.items():
            worst = max(worst, _rel(rows[form][0], lo), _rel(rows[form][1], hi))
    elapsed = time.perf_counter() - start
    criterion(1, worst <= 1e-12 and elapsed < 1.0, f"max rel error {worst:.2e}, {elapsed:.2f}s")


# 2, 3 ----------------------------------------------------------------------------


def test_02_gaussian_radius_law(criterion):
    rep = harness.radius_experiment(d=10, m=50, alpha=ALPHA, reps=10_000, seed=2)
    row = rep.rows[0]
    theory = (4 * math.log(10) + 40) / 100
    err = _rel(row["emp_mean_r2"], theory)
    criterion(2, abs(row["theory_r2"] - 0.49210) < 5e-6 and err <= 0.02 and rep.wall_clock < 30,
              f"empirical {row['emp_mean_r2']:.5f} vs theory {theory:.5f} (rel {err:.4f}), {rep.wall_clock:.1f}s")


def test_03_four_times_classical_radius(criterion):
    rep = harness.radius_experiment(d=100, m=200, alpha=ALPHA, reps=10_000, seed=3)
    ratio = rep.rows[0]["ratio_to_classical"]
    criterion(3, 3.5 <= ratio <= 4.5 and rep.wall_clock < 120,
              f"mean r2 ratio universal/classical {ratio:.4f} (target [3.5, 4.5]), {rep.wall_clock:.1f}s")


# 4 -------------------------------------------------------------------------------


def test_04_type1_error(criterion):
    rep = harness.simulate_type1(alpha=ALPHA, reps=2000, m=100, seed=4, threads=1)
    bad = [r["variant"] for r in rep.rows if r["rate"] > ALPHA + 3 * r["se"]]
    mixture = max(r["rate"] for r in rep.rows if r["scenario"] == "mixture")
    worst = max(rep.rows, key=lambda r: r["rate"] - 3 * r["se"])
    ok = not bad and mixture < ALPHA / 2 and rep.wall_clock < 300
    criterion(4, ok, f"{len(rep.rows)} cells, worst {worst['variant']}={worst['rate']:.4f}, "
                     f"mixture max {mixture:.4f}, violations {bad}, {rep.wall_clock:.0f}s")


# 5, 6 ----------------------------------------------------------------------------


def test_05_coverage(criterion):
    rep = harness.simulate_coverage(m=50, alpha=ALPHA, reps=10_000, seed=5)
    low = [r["variant"] for r in rep.rows if r["rate"] < 1 - ALPHA - 3 * r["se"]]
    rates = ", ".join(f"{r['variant']}={r['rate']:.4f}" for r in rep.rows)
    criterion(5, not low and rep.wall_clock < 60, f"{rates}, {rep.wall_clock:.1f}s")


def test_06_expectation_bound(criterion):
    rep = harness.expectation_experiment(m=50, reps=100_000, seed=6)
    row = rep.rows[0]
    criterion(6, row["mean_T"] <= 1 + 3 * row["se"], f"mean T {row['mean_T']:.4f} (se {row['se']:.4f})")


# 7 -------------------------------------------------------------------------------


def test_07_power_curve(criterion):
    rep = harness.simulate_power_curve(m=200, alpha=ALPHA, reps=500, B=200, seed=7, threads=1)
    at = {r["mu"]: r for r in rep.rows}
    dominated = all(
        r["power_bootstrap"] >= r["power_universal"] - 2 * math.hypot(r["se_u"], r["se_b"]) for r in rep.rows
    )
    ok = at[0.0]["power_universal"] < 0.05 and at[2.0]["power_universal"] > 0.8 and dominated \
        and rep.wall_clock < 900
    curve = " ".join(f"{mu:g}:{r['power_universal']:.2f}/{r['power_bootstrap']:.2f}" for mu, r in at.items())
    criterion(7, ok, f"mu:universal/bootstrap {curve}, {rep.wall_clock:.0f}s")


# 8, 9 ----------------------------------------------------------------------------


def test_08_sequential_validity(criterion):
    cross = harness.seq_crossing_experiment(mu=0.0, T=1000, alpha=ALPHA, reps=2000, seed=8)
    cover = harness.confseq_coverage_experiment(mu=0.0, T=1000, alpha=ALPHA, reps=2000, seed=8)
    c, v = cross.rows[0], cover.rows[0]
    elapsed = cross.wall_clock + cover.wall_clock
    ok = c["crossing_rate"] <= ALPHA + 3 * c["se"] and v["coverage"] >= 1 - ALPHA - 3 * v["se"] and elapsed < 180
    criterion(8, ok, f"crossing {c['crossing_rate']:.4f}, simultaneous coverage {v['coverage']:.4f}, "
                     f"{elapsed:.1f}s")


def _from_scratch(ys, null_mean_cap, simple):
    # log M_t for every prefix, using scipy densities and explicit refits
    out = []
    for t in range(1, ys.size + 1):
        if t <= 1:
            out.append(0.0)
            continue
        prev_means = np.array([ys[:i].mean() for i in range(1, t)])
        num = stats.norm.logpdf(ys[1:t], prev_means).sum()
        post = ys[1:t]
        mu0 = 0.0 if simple else min(post.mean(), null_mean_cap)
        out.append(num - stats.norm.logpdf(post, mu0).sum())
    return np.array(out)


def test_09_incremental_matches_batch(criterion):
    g = Gaussian()
    worst = 0.0
    for s in range(50):
        rng = np.random.default_rng(900 + s)
        ys = rng.normal(rng.uniform(-1, 1), 1, 200)
        simple = s % 2 == 0
        null = FixedPoint(g.param(0.0)) if simple else MeanAtMost(0.0)
        state = MartingaleState(g, null, g.param(0.0), burn_in=1)
        got = []
        for y in ys:
            state.update(y)
            got.append(state.log_M)
        worst = max(worst, float(np.max(np.abs(np.array(got) - _from_scratch(ys, 0.0, simple)))))
    criterion(9, worst <= 1e-9, f"max |incremental - batch| {worst:.2e} over 50 streams x 200 steps")


# 10 ------------------------------------------------------------------------------


def test_10_sieve_guarantee(criterion):
    single = harness.sieve_experiment("gaussian", m=100, alpha=ALPHA, reps=1000, seed=10)
    double = harness.sieve_experiment("mixture2", m=1000, alpha=ALPHA, reps=1000, seed=10)
    s, d = single.rows[0], double.rows[0]
    elapsed = single.wall_clock + double.wall_clock
    ok = s["freq_overshoot"] <= ALPHA + 3 * s["se_overshoot"] and d["freq_exact"] >= 0.8 and elapsed < 600
    criterion(10, ok, f"overshoot {s['freq_overshoot']:.4f}, two-component exact {d['freq_exact']:.4f}, "
                      f"{elapsed:.0f}s")


# 11 ------------------------------------------------------------------------------


def test_11_em_ascent(criterion):
    worst = 0.0
    for s in range(100):
        rng = np.random.default_rng(1100 + s)
        k = int(rng.integers(2, 5))
        n = int(rng.integers(20, 400))
        centers = rng.normal(0, 3, k)
        y = rng.normal(centers[rng.integers(0, k, n)], rng.uniform(0.2, 2))
        sigma = None if s % 2 else 1.0
        for run in em_runs(y, k, restarts=3, sigma=sigma, seed=s):
            worst = min(worst, float(np.min(np.diff(run.history), initial=0.0)))
    criterion(11, worst >= -1e-8, f"largest per-iteration decrease {-worst:.2e} over 100 datasets")


# 12 ------------------------------------------------------------------------------

EXPERIMENTS = [
    ["sim-type1", "--m", "20", "--reps", "30", "--seed", "12"],
    ["sim-power", "--m", "30", "--reps", "6", "--B", "100", "--pool-size", "120", "--mus", "0,1,2", "--seed", "12"],
    ["sim-radius", "--d", "5", "--m", "20", "--reps", "300", "--seed", "12"],
    ["sim-seq", "--T", "300", "--reps", "100", "--seed", "12"],
    ["sim-seq", "--T", "300", "--reps", "100", "--seed", "12", "--coverage"],
]


def test_12_determinism(tmp_path, criterion):
    mismatched = []
    for i, argv in enumerate(EXPERIMENTS):
        outputs = []
        for j, threads in enumerate(("1", "1", "2", "2")):
            path = tmp_path / f"{i}_{j}.csv"
            assert cli.run([*argv, "--threads", threads, "--out", str(path)]) == 0
            outputs.append(path.read_bytes())
        if len(set(outputs)) != 1:
            mismatched.append(argv[0])
    criterion(12, not mismatched, f"{len(EXPERIMENTS)} experiments x (1, 1, 2, 2 threads), mismatches {mismatched}")

