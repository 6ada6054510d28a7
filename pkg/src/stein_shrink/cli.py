"""Command-line interface: ``stein-shrink {bench,estimate,verify}``.

Exit status is 0 on success, 2 on usage errors (bad or inconsistent flags)
and 1 on runtime or numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import bench, verify
from .errors import SteinShrinkError
from .estimators import ShrinkageRule, default_rule, dominance_bound, haff_estimate
from .model import UINT64_MAX, CovarianceSpec, Dimensions, sample_cov

log = logging.getLogger("stein_shrink")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

PRESETS = {
    "table1": {
        "alphas": list(bench.TABLE1_ALPHAS),
        "reps": bench.DEFAULT_REPLICATIONS,
        "seed": 0,
        "rho": 0.9,
    }
}
BENCH_DEFAULTS = {
    "structure": "identity",
    "rho": 0.9,
    "alphas": list(bench.TABLE1_ALPHAS),
    "reps": bench.DEFAULT_REPLICATIONS,
    "seed": 0,
    "out": ".",
}


class UsageError(Exception):
    pass


class MatrixFileError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an unsigned 64-bit integer, got {text!r}") from None
    if not 0 <= value <= UINT64_MAX:
        raise argparse.ArgumentTypeError(f"seed out of range: {value}")
    return value


def read_matrix(path) -> np.ndarray:
    """Read a headerless comma-separated real matrix, one row per line.

    Raises
    ------
    MatrixFileError
        Naming the first row (1-based) that is empty, ragged or non-numeric.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise MatrixFileError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise MatrixFileError(f"{path}: file is empty")
    rows = []
    width = None
    for lineno, record in enumerate(csv.reader(lines), start=1):
        try:
            row = [float(tok) for tok in record]
        except ValueError:
            raise MatrixFileError(f"{path}: row {lineno} is not numeric: {','.join(record)!r}") from None
        if not row:
            raise MatrixFileError(f"{path}: row {lineno} is empty")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise MatrixFileError(f"{path}: row {lineno} has {len(row)} columns, expected {width}")
        if not all(np.isfinite(row)):
            raise MatrixFileError(f"{path}: row {lineno} has non-finite values")
        rows.append(row)
    return np.array(rows, dtype=np.float64)


def format_matrix(A) -> str:
    return "".join(",".join(repr(float(x)) for x in row) + "\n" for row in np.asarray(A))


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return data


def _merged(args, keys, defaults) -> dict:
    """defaults < preset < config file < explicit flags."""
    merged = dict(defaults)
    preset = getattr(args, "preset", None)
    if preset:
        merged.update(PRESETS[preset])
    merged.update(_load_config(getattr(args, "config", None)))
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _bench_configs(args) -> tuple[list[bench.ExperimentConfig], dict]:
    opts = _merged(args, ["structure", "rho", "p", "n", "r", "alphas", "b", "reps", "seed", "out"], BENCH_DEFAULTS)
    reps, seed = int(opts["reps"]), int(opts["seed"])
    if reps < 2:
        raise UsageError("--reps must be at least 2")
    if not 0 <= seed <= UINT64_MAX:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    alphas = tuple(float(a) for a in opts["alphas"])
    b = opts.get("b")
    try:
        if args.preset == "table1":
            # explicit structure/p/n/r flags select a subset of the grid
            configs = [
                c
                for c in bench.table1_configs(reps, seed, float(opts["rho"]), alphas)
                if all(
                    getattr(args, key) is None or getattr(args, key) == value
                    for key, value in (("structure", c.spec.structure), ("p", c.spec.p), ("n", c.n), ("r", c.spec.r))
                )
            ]
            if not configs:
                raise UsageError("no preset setting matches the given --structure/--p/--n/--r")
            if b is not None:
                configs = [bench.ExperimentConfig(c.spec, c.n, c.alphas, reps, seed, None, float(b)) for c in configs]
        else:
            missing = [k for k in ("p", "n", "r") if opts.get(k) is None]
            if missing:
                raise UsageError("missing " + ", ".join(f"--{k}" for k in missing) + " (or use --preset table1)")
            spec = CovarianceSpec(opts["structure"], int(opts["p"]), int(opts["r"]), float(opts["rho"]))
            configs = [
                bench.ExperimentConfig(spec, int(opts["n"]), alphas, reps, seed, None, None if b is None else float(b))
            ]
        for c in configs:
            for a in c.alphas:
                c.rule(a)
    except SteinShrinkError as exc:
        raise UsageError(str(exc)) from exc
    return configs, opts


def cmd_bench(args) -> int:
    configs, opts = _bench_configs(args)
    out_dir = Path(opts["out"])
    csv_path, md_path = out_dir / "prial.csv", out_dir / "prial.md"
    report = bench.run_table(configs)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report.to_csv())
        with open(md_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(report.to_markdown())
    except BaseException:
        for path in (csv_path, md_path):
            path.unlink(missing_ok=True)
        raise
    log.info("wrote %d rows to %s and %s", len(report.rows), csv_path, md_path)
    return EXIT_OK


def cmd_estimate(args) -> int:
    X = read_matrix(args.input)
    p, n_cols = X.shape
    n = n_cols if args.n is None else args.n
    if n != n_cols:
        raise UsageError(f"--n {n} does not match the {n_cols} columns of {args.input}")
    try:
        dims = Dimensions(p=p, n=n, r=args.r)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rule = default_rule(dims, args.alpha) if args.b is None else ShrinkageRule(args.alpha, args.b)
    except SteinShrinkError as exc:
        raise UsageError(str(exc)) from exc
    estimate = haff_estimate(sample_cov(X), dims, rule)
    text = format_matrix(estimate.sigma_hat)
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        out = Path(args.out)
        try:
            out.write_text(text, encoding="utf-8")
        except BaseException:
            out.unlink(missing_ok=True)
            raise
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        dims = Dimensions(p=args.p, n=args.n, r=args.r)
        results = verify.run_trials(dims, args.alphas, args.b, args.trials, args.seed)
    except SteinShrinkError as exc:
        raise UsageError(str(exc)) from exc
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        b_o = dominance_bound(dims)

    groups: dict[tuple[float, float], list[verify.TrialResult]] = {}
    for res in results:
        groups.setdefault((res.alpha, res.b), []).append(res)
    print(f"# p={dims.p} n={dims.n} r={dims.r} q={dims.q} m={dims.m} b_o={b_o!r}")
    print("alpha,b,trials,asserted,majorization_ok,trace_submult_ok,min_log_gap,risk_diff_bound,failures")
    total_failures = 0
    for (alpha, b), group in groups.items():
        fails = sum(1 for g in group if g.failures)
        total_failures += fails
        print(
            f"{alpha!r},{b!r},{len(group)},{'yes' if group[0].in_domain else 'no'},"
            f"{sum(g.diagnostics.majorization_ok for g in group)},"
            f"{sum(g.diagnostics.trace_submult_ok for g in group)},"
            f"{min(g.diagnostics.log_bound_gap for g in group)!r},"
            f"{group[0].diagnostics.risk_diff_bound!r},{fails}"
        )
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["trial", "alpha", "b", "majorization_ok", "trace_submult_ok", "log_bound_gap", "risk_diff_bound", "asserted", "failures"]
            )
            for res in results:
                d = res.diagnostics
                writer.writerow(
                    [res.trial, repr(res.alpha), repr(res.b), d.majorization_ok, d.trace_submult_ok,
                     repr(d.log_bound_gap), repr(d.risk_diff_bound), res.in_domain, ";".join(res.failures)]
                )
    if total_failures:
        log.error("%d trial(s) violated an asserted inequality", total_failures)
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stein-shrink",
        description="Haff-type covariance shrinkage under Stein loss.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_bench = sub.add_parser("bench", help="Monte Carlo PRIAL table (writes prial.csv and prial.md)")
    p_bench.add_argument("--preset", choices=sorted(PRESETS), help="run the 20-setting benchmark grid")
    p_bench.add_argument("--config", help="JSON file with default flag values")
    p_bench.add_argument("--structure", choices=["identity", "ar"])
    p_bench.add_argument("--rho", type=float, help="AR coefficient (default 0.9)")
    p_bench.add_argument("--p", type=_positive_int)
    p_bench.add_argument("--n", type=_positive_int)
    p_bench.add_argument("--r", type=_positive_int)
    p_bench.add_argument("--alphas", type=_float_list, help="comma-separated, default 1,2,3,4,5")
    p_bench.add_argument("--b", type=float, help="fixed shrinkage mass (default: dominance bound b_o)")
    p_bench.add_argument("--reps", type=_positive_int, help="replications per setting (default 1000)")
    p_bench.add_argument("--seed", type=_seed, help="master seed (default 0)")
    p_bench.add_argument("--out", help="output directory (default .)")
    p_bench.set_defaults(func=cmd_bench)

    p_est = sub.add_parser("estimate", help="apply the Haff estimator to a p x n data matrix")
    p_est.add_argument("--input", required=True, help="CSV data matrix, one variable per row")
    p_est.add_argument("--r", type=_positive_int, required=True, help="model rank")
    p_est.add_argument("--n", type=_positive_int, help="sample size (default: column count)")
    p_est.add_argument("--alpha", type=float, default=1.0)
    p_est.add_argument("--b", type=float, help="shrinkage mass (default b_o)")
    p_est.add_argument("--out", help="output CSV path (default stdout)")
    p_est.set_defaults(func=cmd_estimate)

    p_ver = sub.add_parser("verify", help="randomized checks of the dominance-proof inequalities")
    p_ver.add_argument("--p", type=_positive_int, required=True)
    p_ver.add_argument("--n", type=_positive_int, required=True)
    p_ver.add_argument("--r", type=_positive_int, required=True)
    p_ver.add_argument("--alphas", type=_float_list, default=[1.0])
    p_ver.add_argument("--b", type=_float_list, help="comma-separated b values (default b_o)")
    p_ver.add_argument("--trials", type=_positive_int, default=100)
    p_ver.add_argument("--seed", type=_seed, default=0)
    p_ver.add_argument("--out", help="optional per-trial CSV")
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except MatrixFileError as exc:
        print(f"stein-shrink: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (SteinShrinkError, OSError) as exc:
        print(f"stein-shrink: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
