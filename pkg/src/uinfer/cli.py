"""Command-line front end: ``uinfer <subcommand> [options]``.

Every subcommand writes CSV with a one-line header to ``--out`` (default
stdout). Exit status is 0 on success, 2 on invalid input and 1 on any other
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np
from scipy import optimize

from . import harness
from .data import DataSplit, read_dataset
from .errors import InvalidInputError
from .families import (
    FULL,
    FamilyTag,
    FixedPoint,
    GaussianUnknownVar,
    MeanAtMost,
    MixtureComponents,
    MvnIdentity,
    ParamVector,
    UniformScale,
    family_for,
    fit_mle,
    log_likelihood,
)
from .sequential import MartingaleState
from .sieve import mixture_sieve, select_model
from .split import (
    Crossfit,
    KFold,
    SingleSplit,
    UniversalSet,
    gaussian_region,
    lrt,
    profile_set_contains,
    relaxed_split_lrt,
    uniform_classical_interval,
    uniform_crossfit_interval,
)


class _Parser(argparse.ArgumentParser):
    # report bad arguments as InvalidInputError so run() maps them to exit 2
    def error(self, message):
        raise InvalidInputError(f"{self.prog}: {message}")


def _alpha(text: str) -> float:
    try:
        a = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < a < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {a}")
    return a


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _names(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


# ---------------------------------------------------------------------------
# Shared option groups
# ---------------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")
    p.add_argument("--seed", type=int, default=0, help="master seed for all randomness")
    p.add_argument("--config", default=None, help="JSON file of option defaults; flags override it")


def _add_data(p, families=tuple(t.value for t in FamilyTag)):
    p.add_argument("--data", required=True, help="headered CSV (y1,...,yd) or '-' for stdin")
    p.add_argument("--family", choices=families, default=families[0], help="model family")
    p.add_argument("--alpha", type=_alpha, default=0.1, help="level in (0, 1)")
    p.add_argument("--sigma", type=float, default=None,
                   help="known scale for gaussian (default 1) or shared mixture scale (default free)")
    p.add_argument("--k", type=int, default=2, help="mixture components in the alternative")
    p.add_argument("--restarts", type=int, default=10, help="EM restarts for mixtures")


def _add_split(p):
    p.add_argument("--split", choices=("random", "first-half"), default="random",
                   help="how to halve the data")
    p.add_argument("--split-seed", type=int, default=None, help="seed of the random split (default: --seed)")


def _add_null(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--null-point", type=_floats, default=None,
                   help="simple null: mean (gaussian), mean,sigma (gaussian-unknown-var), theta (uniform-scale) "
                        "or a mean vector (mvn-identity)")
    g.add_argument("--null-mean-at-most", type=float, default=None, help="composite null E[Y] <= c")
    g.add_argument("--null-components", type=int, default=None, help="mixture null with this many components")


def _add_threads(p):
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes, None reads $UINFER_THREADS or uses 1; results do not depend on it")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="uinfer", description="Universal likelihood-ratio inference.", formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("test-split", help="split likelihood-ratio test", formatter_class=fmt)
    _add_data(p)
    _add_split(p)
    _add_null(p)
    _add_common(p)
    p.add_argument("--eta", type=float, default=1.0, help="likelihood power in (0, 1]")
    p.add_argument("--relaxed", action="store_true",
                   help="divide by the larger of the null and full-model maxima on the first half")

    p = sub.add_parser("test-crossfit", help="crossfit or K-fold likelihood-ratio test", formatter_class=fmt)
    _add_data(p)
    _add_split(p)
    _add_null(p)
    _add_common(p)
    p.add_argument("--folds", type=int, default=2, help="2 gives the crossfit test, more gives K-fold")
    p.add_argument("--eta", type=float, default=1.0, help="likelihood power in (0, 1]")

    p = sub.add_parser("confset", help="universal confidence set", formatter_class=fmt)
    _add_data(p, ("gaussian", "uniform-scale", "gaussian-unknown-var", "mvn-identity"))
    _add_split(p)
    _add_common(p)
    p.add_argument("--crossfit", action="store_true", help="average over both split directions")

    p = sub.add_parser("interval-uniform", help="closed-form intervals for Uniform(0, theta)",
                       formatter_class=fmt)
    p.add_argument("--data", required=True, help="headered CSV (y1) or '-' for stdin")
    p.add_argument("--alpha", type=_alpha, default=0.1, help="level in (0, 1)")
    _add_split(p)
    _add_common(p)

    p = sub.add_parser("seq-monitor", help="anytime-valid sequential test over a data stream",
                       formatter_class=fmt)
    _add_data(p)
    _add_null(p)
    _add_common(p)
    p.add_argument("--burn-in", type=int, default=1, help="observations before the statistic starts")

    p = sub.add_parser("sieve", help="select the number of mixture components", formatter_class=fmt)
    p.add_argument("--data", required=True, help="headered CSV (y1) or '-' for stdin")
    p.add_argument("--alpha", type=_alpha, default=0.1, help="level in (0, 1)")
    p.add_argument("--sigma", type=float, default=None, help="shared component scale (default free)")
    p.add_argument("--j-max", type=int, default=10, help="largest level tested")
    p.add_argument("--restarts", type=int, default=10, help="EM restarts")
    _add_split(p)
    _add_common(p)

    p = sub.add_parser("sim-type1", help="type-I error of every test variant", formatter_class=fmt)
    p.add_argument("--scenarios", type=_names, default=list(harness.SCENARIOS),
                   help=f"comma list from {','.join(harness.SCENARIOS)}")
    p.add_argument("--variants", type=_names, default=list(harness.VARIANTS),
                   help=f"comma list from {','.join(harness.VARIANTS)}")
    p.add_argument("--m", type=int, default=100, help="observations per half")
    p.add_argument("--alpha", type=_alpha, default=0.1, help="level in (0, 1)")
    p.add_argument("--reps", type=int, default=10_000, help="replications per scenario")
    p.add_argument("--k-folds", type=int, default=5, help="folds of the K-fold variant")
    p.add_argument("--eta", type=float, default=0.5, help="power of the powered variant")
    _add_threads(p)
    _add_common(p)

    p = sub.add_parser("sim-power", help="power of universal and bootstrap mixture tests", formatter_class=fmt)
    p.add_argument("--mus", type=_floats, default=list(harness.DEFAULT_MU_GRID), help="comma list of mu >= 0")
    p.add_argument("--m", type=int, default=200, help="observations per half")
    p.add_argument("--alpha", type=_alpha, default=0.1, help="level in (0, 1)")
    p.add_argument("--reps", type=int, default=1000, help="replications per mu")
    p.add_argument("--B", type=int, default=200, help="bootstrap draws per test")
    p.add_argument("--pool-size", type=int, default=2000, help="precomputed null LRS draws")
    _add_threads(p)
    _add_common(p)

    p = sub.add_parser("sim-radius", help="squared radius of the Gaussian universal ball", formatter_class=fmt)
    p.add_argument("--d", type=int, default=10, help="dimension")
    p.add_argument("--m", type=int, default=50, help="observations per half")
    p.add_argument("--alpha", type=_alpha, default=0.1, help="level in (0, 1)")
    p.add_argument("--reps", type=int, default=10_000, help="replications")
    _add_threads(p)
    _add_common(p)

    p = sub.add_parser("sim-seq", help="crossing rate of the sequential test", formatter_class=fmt)
    p.add_argument("--mu", type=float, default=0.0, help="true mean of the N(mu, 1) stream")
    p.add_argument("--mu0", type=float, default=0.0, help="null mean")
    p.add_argument("--T", type=int, default=1000, help="horizon")
    p.add_argument("--alpha", type=_alpha, default=0.1, help="level in (0, 1)")
    p.add_argument("--reps", type=int, default=2000, help="replications")
    p.add_argument("--burn-in", type=int, default=1, help="observations before the statistic starts")
    p.add_argument("--coverage", action="store_true",
                   help="report simultaneous coverage of the confidence sequence instead")
    _add_threads(p)
    _add_common(p)
    return parser


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _load(path: str) -> np.ndarray:
    if path == "-":
        return read_dataset(sys.stdin)
    if not Path(path).is_file():
        raise InvalidInputError(f"no such data file: {path}")
    return read_dataset(path)


def _family(args, k=None):
    tag = FamilyTag(args.family)
    if tag is FamilyTag.GAUSSIAN:
        return family_for(tag, sigma=1.0 if args.sigma is None else args.sigma)
    if tag is FamilyTag.MIXTURE:
        return family_for(tag, k=k or args.k, sigma=args.sigma, restarts=args.restarts, seed=args.seed)
    if tag is FamilyTag.MVN_IDENTITY:
        return family_for(tag, dim=args.dim)
    return family_for(tag)


def _null(args, family):
    if args.null_point is not None:
        v = args.null_point
        if isinstance(family, UniformScale):
            return FixedPoint(ParamVector.uniform(v[0]))
        if isinstance(family, GaussianUnknownVar):
            if len(v) != 2:
                raise InvalidInputError("gaussian-unknown-var null point is mean,sigma")
            return FixedPoint(ParamVector.gaussian_unknown_var(v[0], v[1]))
        if isinstance(family, MvnIdentity):
            return FixedPoint(ParamVector.mvn(v))
        if args.family == "mixture":
            raise InvalidInputError("use --null-components for mixtures")
        return FixedPoint(family.param(v[0]))
    if args.null_mean_at_most is not None:
        return MeanAtMost(args.null_mean_at_most)
    if args.null_components is not None:
        return MixtureComponents(args.null_components)
    raise InvalidInputError("give one of --null-point, --null-mean-at-most, --null-components")


def _split(args, n: int) -> DataSplit:
    if args.split == "first-half":
        return DataSplit.first_half(n)
    seed = args.seed if args.split_seed is None else args.split_seed
    return DataSplit.random_halves(n, np.random.default_rng(seed))


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else str(v) for v in row])
    return buf.getvalue()


def _outcome_csv(out) -> str:
    return _csv(["log_statistic", "log_threshold", "reject", "p_bound"],
                [[out.log_statistic, out.log_threshold, int(out.reject), out.p_bound]])


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_test(args) -> str:
    data = _load(args.data)
    args.dim = data.shape[1]
    family = _family(args)
    null = _null(args, family)
    split = _split(args, data.shape[0])
    if args.command == "test-crossfit":
        if args.folds < 2:
            raise InvalidInputError("--folds must be at least 2")
        scheme = Crossfit() if args.folds == 2 else KFold(args.folds, args.seed)
        return _outcome_csv(lrt(family, data, null, args.alpha, scheme, split, eta=args.eta))
    if args.relaxed:
        null_ll = log_likelihood(family, fit_mle(family, data, split.d0, null), data, split.d0)
        full_ll = log_likelihood(family, fit_mle(family, data, split.d0, FULL), data, split.d0)
        return _outcome_csv(relaxed_split_lrt(family, data, split, max(null_ll, full_ll), args.alpha))
    return _outcome_csv(lrt(family, data, null, args.alpha, SingleSplit(), split, eta=args.eta))


def cmd_confset(args) -> str:
    data = _load(args.data)
    args.dim = data.shape[1]
    split = _split(args, data.shape[0])
    family = _family(args)
    scheme = Crossfit() if args.crossfit else SingleSplit()
    if isinstance(family, MvnIdentity):
        if args.crossfit:
            raise InvalidInputError("the closed-form ball uses a single split")
        center, r2 = gaussian_region(data, split, args.alpha)
        return _csv(["r2"] + [f"center_{j + 1}" for j in range(center.size)], [[r2, *map(float, center)]])
    if isinstance(family, GaussianUnknownVar):
        if args.crossfit:
            raise InvalidInputError("the profile set uses a single split")
        mid = float(data[split.d0, 0].mean())
        width = 10.0 * float(np.ptp(data[:, 0]) + 1.0)

        def g(psi):
            return 0.5 if profile_set_contains(psi, family, data, split, args.alpha) else -0.5

        lo = optimize.bisect(g, mid - width, mid, xtol=1e-10) if g(mid - width) < 0 else mid - width
        hi = optimize.bisect(g, mid, mid + width, xtol=1e-10) if g(mid + width) < 0 else mid + width
        return _csv(["lo", "hi"], [[lo, hi]])
    uset = UniversalSet(family, data, args.alpha, scheme, split)
    if isinstance(family, UniformScale):
        top = float(data[:, 0].max())
        lo, hi = uset.interval(ParamVector.uniform, top, top * 1e-6, top * 1e6)
    else:
        mid = float(data[:, 0].mean())
        width = 10.0 * float(np.ptp(data[:, 0]) + family.sigma)
        lo, hi = uset.interval(family.param, mid, mid - width, mid + width)
    return _csv(["lo", "hi"], [[lo, hi]])


def cmd_interval_uniform(args) -> str:
    data = _load(args.data)
    if data.shape[1] != 1:
        raise InvalidInputError("uniform data must have one column")
    split = _split(args, data.shape[0])
    cf = uniform_crossfit_interval(data, split, args.alpha)
    cl = uniform_classical_interval(data, args.alpha)
    rows = [["crossfit-literal", cf.literal.lo, cf.literal.hi],
            ["crossfit-support", cf.support.lo, cf.support.hi],
            ["classical", cl.lo, cl.hi]]
    return _csv(["form", "lo", "hi"], rows)


def cmd_seq_monitor(args) -> str:
    data = _load(args.data)
    args.dim = data.shape[1]
    family = _family(args)
    null = _null(args, family)
    if isinstance(null, FixedPoint):
        default = null.theta
    elif args.burn_in >= 1:
        default = fit_mle(family, data[:1], None, null)
    else:
        raise InvalidInputError("a composite null needs --burn-in >= 1")
    state = MartingaleState(family, null, default, args.burn_in)
    rows = []
    for y in data:
        state.update(y)
        p, p_bar = state.anytime_p()
        rows.append([state.t, state.log_M, p, p_bar, int(state.should_stop(args.alpha))])
    return _csv(["t", "log_M", "p", "p_bar", "stop"], rows)


def cmd_sieve(args) -> str:
    data = _load(args.data)
    if data.shape[1] != 1:
        raise InvalidInputError("mixture sieve needs one-dimensional data")
    split = _split(args, data.shape[0])
    res = select_model(data, split, mixture_sieve(args.sigma, restarts=args.restarts, seed=args.seed),
                       args.alpha, args.j_max)
    thr = math.log(1.0 / args.alpha)
    rows = [[j + 1, s, int(s > thr), res.j_hat] for j, s in enumerate(res.log_statistics)]
    return _csv(["level", "log_statistic", "reject", "j_hat"], rows)


def cmd_sim_type1(args) -> str:
    return harness.simulate_type1(args.scenarios, args.variants, args.m, args.alpha, args.reps, args.seed,
                                  args.threads, args.k_folds, args.eta).to_csv()


def cmd_sim_power(args) -> str:
    if any(mu < 0 for mu in args.mus):
        raise InvalidInputError("mu grid must be nonnegative")
    return harness.simulate_power_curve(args.mus, args.m, args.alpha, args.reps, args.B, args.seed,
                                        args.pool_size, args.threads).to_csv()


def cmd_sim_radius(args) -> str:
    return harness.radius_experiment(args.d, args.m, args.alpha, args.reps, args.seed, args.threads).to_csv()


def cmd_sim_seq(args) -> str:
    if args.coverage:
        return harness.confseq_coverage_experiment(args.mu, args.T, args.alpha, args.reps, args.seed,
                                                   args.burn_in, args.threads).to_csv()
    return harness.seq_crossing_experiment(args.mu, args.T, args.alpha, args.reps, args.seed, args.mu0,
                                           args.burn_in, args.threads).to_csv()


COMMANDS = {
    "test-split": cmd_test,
    "test-crossfit": cmd_test,
    "confset": cmd_confset,
    "interval-uniform": cmd_interval_uniform,
    "seq-monitor": cmd_seq_monitor,
    "sieve": cmd_sieve,
    "sim-type1": cmd_sim_type1,
    "sim-power": cmd_sim_power,
    "sim-radius": cmd_sim_radius,
    "sim-seq": cmd_sim_seq,
}


def parse_args(argv) -> argparse.Namespace:
    """Parse ``argv``; a ``--config`` JSON supplies defaults that explicit flags override."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        config = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInputError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(config, dict):
        raise InvalidInputError("config must be a JSON object")
    sub = parser._subparsers._group_actions[0].choices[args.command]
    known = {a.dest for a in sub._actions}
    config = {k.replace("-", "_"): v for k, v in config.items()}
    unknown = sorted(set(config) - known)
    if unknown:
        raise InvalidInputError(f"unknown config keys: {', '.join(unknown)}")
    # config values pass through the same type conversion as flags
    for action in sub._actions:
        if action.dest in config and action.type is not None and isinstance(config[action.dest], str):
            try:
                config[action.dest] = action.type(config[action.dest])
            except argparse.ArgumentTypeError as exc:
                raise InvalidInputError(str(exc)) from None
    sub.set_defaults(**config)
    return parser.parse_args(argv)


def _validate(args) -> None:
    alpha = getattr(args, "alpha", None)
    if alpha is not None and not 0.0 < float(alpha) < 1.0:
        raise InvalidInputError(f"alpha must lie in (0, 1), got {alpha}")


def run(argv=None) -> int:
    """Run one subcommand; returns the process exit status."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        _validate(args)
        text = COMMANDS[args.command](args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
