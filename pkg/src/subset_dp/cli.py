"""Command-line front end.

Exit codes: 0 success, 2 bad arguments or input, 3 pipeline failure.
Option values come from flags first, then the ``--config`` JSON file, then
built-in defaults. ``SUBSET_DP_SEED`` supplies the default seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .dataset import DataFormatError, Interval, SortedDataset, read_values
from .report import dumps

EXIT_OK, EXIT_USAGE, EXIT_PIPELINE = 0, 2, 3

DEFAULTS = {
    "mean": {"gamma": 1.0, "mode": "subset"},
    "threshold": {},
    "estimate": {},
    "bench": {},
    "selftest": {"pairs": 200},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="subset-dp", description="Subset-optimal differentially private estimation.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, data=True):
        sp.add_argument("--config", help="JSON file with option values")
        sp.add_argument("--seed", type=int, help="RNG seed (default: $SUBSET_DP_SEED or 0)")
        sp.add_argument("--out", help="write JSON here instead of stdout")
        if data:
            sp.add_argument("--input", help="one number per line, or CSV with --column")
            sp.add_argument("--column", help="CSV column to read")

    m = sub.add_parser("mean", help="private mean")
    common(m)
    m.add_argument("--epsilon", type=float)
    m.add_argument("--range", type=float, help="half-width R of the public range [-R, R]")
    m.add_argument("--gamma", type=float)
    m.add_argument("--mode", choices=["naive", "subset"])

    t = sub.add_parser("threshold", help="private approximate rank threshold")
    common(t)
    t.add_argument("--rank", type=int)
    t.add_argument("--alpha", type=float)
    t.add_argument("--epsilon", type=float)
    t.add_argument("--range", help="a,b")

    e = sub.add_parser("estimate", help="private monotone property")
    common(e)
    e.add_argument("--property", help="mean | median | quantile:Q | lp:P")
    e.add_argument("--epsilon", type=float)
    e.add_argument("--range", type=float)
    e.add_argument("--beta", type=float)

    b = sub.add_parser("bench", help="Monte Carlo benchmark")
    common(b, data=False)
    b.add_argument("--workers", type=int)

    s = sub.add_parser("selftest", help="analytic privacy checks")
    common(s, data=False)
    s.add_argument("--pairs", type=int)
    return p


def _options(args) -> dict:
    opts = dict(DEFAULTS[args.command])
    env_seed = os.environ.get("SUBSET_DP_SEED")
    if env_seed is not None:
        try:
            opts["seed"] = int(env_seed)
        except ValueError:
            raise UsageError(f"SUBSET_DP_SEED must be an integer, got {env_seed!r}") from None
    else:
        opts["seed"] = 0
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}:{exc.lineno}: invalid JSON: {exc.msg}") from None
        if not isinstance(cfg, dict):
            raise UsageError(f"{args.config}: top level must be an object")
        opts.update(cfg)
    for k, v in vars(args).items():
        if v is not None and k not in ("command", "config"):
            opts[k] = v
    return opts


def _require(opts, *keys):
    missing = [k for k in keys if opts.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k for k in missing))


def _load(opts) -> SortedDataset:
    _require(opts, "input")
    try:
        return SortedDataset(read_values(opts["input"], opts.get("column")))
    except OSError as exc:
        raise UsageError(f"cannot read {opts['input']}: {exc.strerror}") from None


def _cmd_mean(opts):
    from .mean import SubsetMeanParams, naive_mean, subset_optimal_mean
    from .noise import Rng

    _require(opts, "epsilon", "range")
    d = _load(opts)
    rng = Rng(int(opts["seed"]))
    if opts["mode"] == "naive":
        return naive_mean(d, float(opts["range"]), float(opts["epsilon"]), rng).to_dict()
    if opts["mode"] != "subset":
        raise UsageError(f"--mode must be naive or subset, got {opts['mode']!r}")
    p = SubsetMeanParams(float(opts["range"]), float(opts["epsilon"]), float(opts["gamma"]))
    return subset_optimal_mean(d, p, rng).to_dict()


def _cmd_threshold(opts):
    from .noise import Rng
    from .threshold import ThresholdParams, private_threshold

    _require(opts, "rank", "alpha", "epsilon", "range")
    rng_text = opts["range"]
    try:
        a, b = (float(x) for x in str(rng_text).split(",")) if isinstance(rng_text, str) else map(float, rng_text)
    except ValueError:
        raise UsageError(f"--range must look like a,b; got {rng_text!r}") from None
    d = _load(opts)
    p = ThresholdParams(Interval(a, b), int(opts["rank"]), float(opts["alpha"]), float(opts["epsilon"]))
    tau = private_threshold(d, p, Rng(int(opts["seed"])))
    return {"threshold": tau, "epsilon_spent": p.epsilon}


def _cmd_estimate(opts):
    from .monotone import MonotoneParams, estimate_monotone, parse_property
    from .noise import Rng

    _require(opts, "property", "epsilon", "range", "beta")
    spec = parse_property(str(opts["property"]))
    d = _load(opts)
    mp = MonotoneParams(float(opts["range"]), float(opts["epsilon"]), float(opts["beta"]))
    return estimate_monotone(d, mp, spec, Rng(int(opts["seed"]))).to_dict()


def _cmd_bench(opts):
    from .bench import ESTIMATORS, DistSpec, fitted_slopes, run_experiment

    _require(opts, "dist", "n_list", "eps_list", "trials")
    dist = opts["dist"]
    try:
        dist = DistSpec.from_dict(dist) if isinstance(dist, dict) else DistSpec(str(dist))
    except (KeyError, TypeError, AttributeError) as exc:
        raise UsageError(f"bad dist specification {opts['dist']!r}: {exc}") from None
    estimators = list(opts.get("estimators") or ESTIMATORS)
    results = run_experiment(dist, [int(n) for n in opts["n_list"]], [float(e) for e in opts["eps_list"]],
                             estimators, int(opts["trials"]), int(opts["seed"]),
                             gamma=float(opts.get("gamma", 1.0)), workers=int(opts.get("workers") or 1))
    return {
        "config": {
            "dist": dist.to_dict(),
            "n_list": [int(n) for n in opts["n_list"]],
            "eps_list": [float(e) for e in opts["eps_list"]],
            "estimators": estimators,
            "trials": int(opts["trials"]),
            "seed": int(opts["seed"]),
            "gamma": float(opts.get("gamma", 1.0)),
        },
        "results": [r.to_dict() for r in results],
        "slopes": fitted_slopes(results),
    }


def _cmd_selftest(opts):
    from .privacy_checks import run_selftest

    rows = run_selftest(int(opts["pairs"]), int(opts["seed"]))
    for name, worst, eps, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'} {name}: max log-ratio {worst:.6f} <= {eps}")
    ok = all(r[3] for r in rows)
    print(f"selftest: {sum(r[3] for r in rows)}/{len(rows)} checks passed")
    return None if ok else False


COMMANDS = {
    "mean": _cmd_mean,
    "threshold": _cmd_threshold,
    "estimate": _cmd_estimate,
    "bench": _cmd_bench,
    "selftest": _cmd_selftest,
}


def main(argv=None) -> int:
    from .monotone import PipelineError

    try:
        args = _build_parser().parse_args(argv)
        opts = _options(args)
        result = COMMANDS[args.command](opts)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PipelineError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if result is False:
        return EXIT_PIPELINE
    if result is not None:
        text = dumps(result) + "\n"
        if opts.get("out"):
            Path(opts["out"]).write_text(text)
        else:
            sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
