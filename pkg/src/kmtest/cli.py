"""Command-line interface: ``kmtest test | mc | curve-sim``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import secrets
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import bandwidth as bw
from .data import DataError, TwoSampleData, mark_last_uncensored, read_csv, truncate
from .permutation import PermutationError, PermutationPlan, permutation_test
from .scenario import SCHEMA_VERSION, ScenarioError, load as load_scenario, parse_test
from .simulation import SimulationError, curve_scenario, read_curve_csv, run_monte_carlo

DEFAULT_MEASURES = ("energy", "gaussian", "laplacian")

TABLE_COLUMNS = (
    "test", "form", "measure", "kernel", "params", "n0", "n1",
    "rejection_rate", "mean_p", "sd_p", "n_effective", "n_excluded", "censoring_upper",
)


class CliError(Exception):
    pass


def _threads(value: int) -> int:
    if value == 0:
        return os.cpu_count() or 1
    return value


def _sigma(value: str):
    if value == "auto":
        return value
    try:
        out = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError("--sigma takes 'auto' or a positive number") from None
    if not out > 0:
        raise argparse.ArgumentTypeError("--sigma must be positive")
    return out


def _battery(args) -> list:
    """Test configurations from the measure/kernel flags."""
    measures = args.measure or list(DEFAULT_MEASURES)
    if args.alpha is not None and not {"energy", "distance_induced"} & set(measures):
        raise CliError("--alpha applies only to energy/distance_induced measures")
    if args.sigma is not None and not {"gaussian", "laplacian", "matern"} & set(measures):
        raise CliError("--sigma applies only to gaussian/laplacian/matern kernels")
    out = []
    for m in measures:
        entry = {"measure": m, "form": args.form, "bandwidth": args.bandwidth, "scaling": args.scaling}
        if m in ("energy", "distance_induced") and args.alpha is not None:
            entry["alpha"] = args.alpha
        if m in ("gaussian", "laplacian", "matern") and args.sigma is not None:
            entry["sigma"] = args.sigma
        if m == "matern":
            entry["nu"] = args.nu
        if m == "rational_quadratic":
            entry.update(c=args.c, beta=args.beta)
        try:
            out.append(parse_test(entry))
        except Exception as exc:
            raise CliError(f"invalid test configuration for {m}: {getattr(exc, 'message', exc)}") from None
    return out


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = secrets.randbits(63)
    print(f"kmtest: no --seed given, using --seed {seed}", file=sys.stderr)
    return seed


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.generic):
        return _clean(x.item())
    return x


def _dump_json(doc: dict) -> str:
    return json.dumps(_clean(doc), indent=2, sort_keys=False) + "\n"


def _table_csv(rows: list[dict], extra: list[str]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=[*extra, *TABLE_COLUMNS], extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**r, "params": json.dumps(r["params"], sort_keys=True)})
    return buf.getvalue()


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    tmp = Path(output + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(output)


def _standardize(data: TwoSampleData) -> TwoSampleData:
    if data.group0.covariates is None:
        return data
    pooled = np.vstack([data.group0.covariates, data.group1.covariates])
    mu, sd = pooled.mean(axis=0), pooled.std(axis=0)
    sd[sd == 0] = 1.0
    g0 = replace(data.group0, covariates=(data.group0.covariates - mu) / sd)
    g1 = replace(data.group1, covariates=(data.group1.covariates - mu) / sd)
    return TwoSampleData(g0, g1, data.meta)


def cmd_test(args) -> str:
    battery = _battery(args)
    covariates = None if args.covariates else []
    if args.covariate_columns:
        covariates = args.covariate_columns.split(",")
    data = read_csv(args.input, args.time_col, args.event_col, args.group_col, covariates)
    prep = {"truncate": None, "last_uncensored": bool(args.last_uncensored), "standardize": bool(args.standardize)}
    if args.truncate is not None:
        tau = None if args.truncate == "auto" else float(args.truncate)
        data = truncate(data, tau)
        prep["truncate"] = float(tau if tau is not None else min(data.group0.time.max(), data.group1.time.max()))
    if args.last_uncensored:
        data = TwoSampleData(mark_last_uncensored(data.group0), mark_last_uncensored(data.group1), data.meta)
    if args.standardize:
        data = _standardize(data)
    seed = _seed(args)
    workers = _threads(args.threads)
    results = []
    for test in battery:
        plan = PermutationPlan(args.mode, args.permutations, seed, workers=workers)
        res = permutation_test(data, test.spec, plan, test.bandwidth)
        doc = res.to_dict()
        doc["test"] = test.label
        doc["bandwidth_rule"] = {"variant": test.bandwidth.variant, "scaling": test.bandwidth.scaling} if test.spec.kernel.kind in ("gaussian", "laplacian", "matern") else None
        doc["significant_at_0.05"] = res.p_value <= 0.05
        results.append(doc)
    g0, g1 = data.group0, data.group1
    out = {
        "schema_version": SCHEMA_VERSION,
        "tool": f"kmtest {__version__}",
        "command": "test",
        "input": str(args.input),
        "seed": seed,
        "groups": [
            {"label": g.label, "n": len(g), "events": g.n_events, "covariates": g.dim} for g in (g0, g1)
        ],
        "preprocessing": prep,
        "results": results,
    }
    if args.format == "csv":
        buf = io.StringIO()
        cols = ["test", "form", "measure", "kernel", "statistic", "scaled_statistic", "p_value", "mode", "n_permutations", "sigma_used", "seed"]
        w = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in results:
            w.writerow(_clean(r))
        return buf.getvalue()
    return _dump_json(out)


def _table_doc(command: str, rows: list[dict], seed: int, extra_cols: list[str], fmt: str, meta: dict) -> str:
    if fmt == "csv":
        return _table_csv(rows, extra_cols)
    return _dump_json({"schema_version": SCHEMA_VERSION, "tool": f"kmtest {__version__}", "command": command, "seed": seed, **meta, "rows": rows})


def cmd_mc(args) -> str:
    overrides = {"seed": args.seed, "replications": args.replications, "permutations": args.permutations}
    specs = load_scenario(args.scenario, _threads(args.threads), overrides)
    rows = []
    for s in specs:
        rows.extend(run_monte_carlo(s))
    extra = sorted({k for s in specs for k in s.labels})
    return _table_doc("mc", rows, specs[0].seed, extra, args.format, {"scenario": str(args.scenario)})


def cmd_curve_sim(args) -> str:
    c0, c1 = read_curve_csv(args.curve0), read_curve_csv(args.curve1)
    tests = tuple(_battery(args))
    seed = _seed(args)
    try:
        sizes = [int(x) for x in args.sizes.split(",")]
    except ValueError:
        raise CliError("--sizes takes comma-separated integers") from None
    rows = []
    for n in sizes:
        s = curve_scenario(
            c0, c1, args.multiplier,
            n0=n, n1=n, tests=tests, replications=args.replications, permutations=args.permutations,
            alpha_level=args.alpha_level, seed=seed, workers=_threads(args.threads),
        )
        rows.extend(run_monte_carlo(s))
    meta = {"curves": [str(args.curve0), str(args.curve1)], "tau": min(c0.t_max, c1.t_max), "censoring_multiplier": args.multiplier}
    return _table_doc("curve-sim", rows, seed, [], args.format, meta)


def _add_battery(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("test battery")
    g.add_argument("--measure", action="append", choices=["energy", "gaussian", "laplacian", "matern", "rational_quadratic", "distance_induced"],
                   help="repeatable; default: energy, gaussian, laplacian")
    g.add_argument("--alpha", type=float, help="energy exponent in (0, 2] (default 1)")
    g.add_argument("--sigma", type=_sigma, help="'auto' (median heuristic) or a positive bandwidth")
    g.add_argument("--form", choices=["v", "u", "unnormalized_v"], default="v")
    g.add_argument("--bandwidth", choices=[bw.UNCENSORED, bw.ALL], default=bw.UNCENSORED)
    g.add_argument("--scaling", choices=[bw.SQRT_HALF, bw.SQRT], default=bw.SQRT_HALF)
    g.add_argument("--nu", type=float, default=0.5, help="Matern smoothness: 0.5, 1.5 or 2.5")
    g.add_argument("--c", type=float, default=1.0, help="rational quadratic offset")
    g.add_argument("--beta", type=float, default=1.0, help="rational quadratic exponent")


def _add_common(p: argparse.ArgumentParser, permutations: bool = True) -> None:
    p.add_argument("--seed", type=int, help="64-bit seed; drawn and reported when omitted")
    if permutations:
        p.add_argument("--permutations", type=int, default=1000)
    p.add_argument("--threads", type=int, default=0, help="worker threads, 0 = all cores; results do not depend on it")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--output", help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kmtest", description="Kaplan-Meier weighted energy/MMD two-sample tests for right-censored data")
    parser.add_argument("--version", action="version", version=f"kmtest {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test a two-group censored dataset")
    t.add_argument("--input", required=True, help="CSV with columns time,event,group[,covariates...]")
    t.add_argument("--time-col", default="time")
    t.add_argument("--event-col", default="event")
    t.add_argument("--group-col", default="group")
    t.add_argument("--covariates", action="store_true", help="use every extra column as a covariate")
    t.add_argument("--covariate-columns", help="comma-separated covariate columns")
    t.add_argument("--standardize", action="store_true", help="z-score covariates on the pooled sample")
    t.add_argument("--truncate", nargs="?", const="auto", help="censor beyond tau (default: smaller group maximum)")
    t.add_argument("--last-uncensored", action="store_true", help="treat each group's largest time as an event")
    t.add_argument("--mode", choices=["auto", "exact", "monte_carlo"], default="auto")
    _add_battery(t)
    _add_common(t)
    t.set_defaults(func=cmd_test)

    m = sub.add_parser("mc", help="Monte Carlo size/power study from a scenario file")
    m.add_argument("--scenario", required=True, help="scenario JSON file")
    m.add_argument("--replications", type=int)
    _add_common(m, permutations=False)
    m.add_argument("--permutations", type=int)
    m.set_defaults(func=cmd_mc)

    c = sub.add_parser("curve-sim", help="power study sampling from two digitized survival curves")
    c.add_argument("--curve0", required=True, help="CSV with columns t,s")
    c.add_argument("--curve1", required=True)
    c.add_argument("--sizes", default="20,50,100,200", help="per-group sample sizes")
    c.add_argument("--multiplier", type=float, default=3.0, help="censoring is Uniform(0, multiplier * tau)")
    c.add_argument("--replications", type=int, default=500)
    c.add_argument("--alpha-level", type=float, default=0.05)
    _add_battery(c)
    _add_common(c)
    c.set_defaults(func=cmd_curve_sim)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = args.func(args)
    except (CliError, ScenarioError) as exc:
        print(f"kmtest {args.command}: {exc}", file=sys.stderr)
        return 2
    except (DataError, PermutationError, SimulationError, ValueError, OSError) as exc:
        print(f"kmtest {args.command}: error: {exc}", file=sys.stderr)
        return 1
    _emit(text, args.output)
    return 0


if __name__ == "__main__":
    sys.exit(main())
