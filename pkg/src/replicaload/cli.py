"""Command-line experiment runner.

Subcommands: design, feasible, simulate, bounds, scan. Each writes CSV (or a
one-line verdict for ``feasible``) to stdout or ``--out``. Exit codes: 0 ok,
1 infeasible demand (``feasible`` only), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import allocation as al
from . import bounds as bd
from . import demand as dm
from . import feasibility as fe
from . import robustness as rb
from . import scanstat as sc
from ._streams import run_chunks
from .errors import ReplicaError

SIMULATE_COLUMNS = ["design", "n", "d", "m", "model", "param", "trials", "p_hat", "ci_low", "ci_high", "seed"]
BOUNDS_COLUMNS = ["bound", "kind", "design", "n", "d", "m", "model", "param", "value", "asymptotic", "seed"]
MC_COLUMNS = ["mc_p_hat", "mc_ci_low", "mc_ci_high"]
SCAN_COLUMNS = ["method", "n", "s", "x", "circular", "model", "trials", "p", "ci_low", "ci_high", "seed"]
FLAGS = {"circular", "fix_alloc", "with_mc", "block_native_n"}


class UsageError(Exception):
    pass


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def ints(text):
    vals = [int(v) for v in str(text).split(",") if v.strip()]
    if not vals:
        raise UsageError("empty integer grid")
    return vals


def floats(text):
    vals = [float(v) for v in str(text).split(",") if v.strip()]
    if not vals:
        raise UsageError("empty grid")
    return vals


def names(text):
    vals = [v.strip() for v in str(text).split(",") if v.strip()]
    if not vals:
        raise UsageError("empty list")
    return vals


def read_config(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key = key.strip().replace("-", "_")
        val = val.strip()
        if key in FLAGS:
            if val.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"{path}:{lineno}: {key} must be true or false")
            out[key] = val.lower() in ("true", "1", "yes")
        else:
            out[key] = val
    return out


def write_csv(rows, columns, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    emit(buf.getvalue(), out)


def emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def model_points(specs, sweep):
    """Expand model specs with an optional ``name=v1,v2`` parameter sweep."""
    pts = []
    for spec in specs:
        if not sweep:
            pts.append((dm.parse_model(spec), ""))
            continue
        key, _, vals = sweep.partition("=")
        key = key.strip()
        for v in floats(vals):
            pts.append((dm.parse_model(_set_param(spec, key, v)), f"{key}={fmt(v)}"))
    return pts


def _set_param(spec, key, value):
    name, _, rest = spec.partition(":")
    items = [s.strip() for s in rest.split(",") if s.strip()]
    items = [s for s in items if s.partition("=")[0].strip() != key]
    items.append(f"{key}={value!r}")
    return f"{name}:{','.join(items)}"


# design


def cmd_design(args):
    seeds = [args.seed + i for i in range(args.seeds)] if args.seeds > 1 else [args.seed]
    n = args.n
    dk = al.DesignKind.parse(args.kind)
    if n is None:
        if dk.kind is al.Kind.BLOCK:
            n = args.d * args.d - args.d + 1
        else:
            raise UsageError("--n is required for this design")
    rows = []
    allocs = []
    for seed in seeds:
        alloc = al.build(dk, n, args.d, seed if dk.kind.randomized else None)
        allocs.append(alloc)
        prof = al.overlap_profile(alloc)
        row = {"kind": str(dk), "n": n, "d": args.d, "seed": seed if dk.kind.randomized else "",
               "balanced": alloc.is_balanced,
               "cum_overlap_2": al.cum_overlap(alloc, 2, method="nodes") if alloc.n_objects >= 2 else 0}
        for s in range(1, args.d + 1):
            row[f"overlap_frac_{s}"] = prof.by_size.get(s, 0.0)
        rows.append(row)
    cols = ["kind", "n", "d", "seed", "balanced", "cum_overlap_2"] + [f"overlap_frac_{s}" for s in range(1, args.d + 1)]
    if len(rows) > 1:
        for label, fn in (("mean", np.mean), ("stdev", np.std)):
            agg = {"kind": str(dk), "n": n, "d": args.d, "seed": label, "balanced": ""}
            for c in cols[5:]:
                agg[c] = float(fn([r[c] for r in rows]))
            rows.append(agg)
    if args.alloc_out:
        Path(args.alloc_out).write_text(allocs[0].to_text())
    write_csv(rows, cols, args.out)
    return 0


# feasible


def cmd_feasible(args):
    alloc = al.StorageAllocation.load(args.alloc)
    rho = np.array([float(x) for x in Path(args.rho).read_text().split()])
    check = fe.check_subsets if args.method == "subsets" else fe.check_flow
    verdict = check(alloc, rho, args.m)
    emit(verdict.describe() + "\n", args.out)
    return 0 if verdict.feasible else 1


# simulate


def _design_points(designs, n_grid, d_grid, native_block):
    for name in designs:
        dk = al.DesignKind.parse(name)
        for d in d_grid:
            if dk.kind is al.Kind.BLOCK and native_block:
                yield dk, d * d - d + 1, d
                continue
            for n in n_grid:
                yield dk, n, d


def _simulate_point(dk, n, d, m, model, param, trials, seed, fix_alloc):
    row = {"design": str(dk), "n": n, "d": d, "m": m, "model": model.spec(), "param": param,
           "trials": trials, "seed": seed}
    try:
        est = rb.estimate_P(rb.Design(dk, n, d), model, m, trials, seed, fix_alloc=fix_alloc)
    except ReplicaError as exc:
        row.update(p_hat="skipped", ci_low=type(exc).__name__)
        return row
    row.update(p_hat=est.p_hat, ci_low=est.ci_low, ci_high=est.ci_high)
    return row


def cmd_simulate(args):
    designs = names(args.designs)
    n_grid, d_grid, m_grid = ints(args.n), ints(args.d), floats(args.m)
    if not args.model:
        raise UsageError("--model is required")
    models = model_points(args.model, args.sweep)
    pts = sorted(set(_design_points(designs, n_grid, d_grid, args.block_native_n)), key=lambda p: (str(p[0]), p[1], p[2]))
    jobs = [(dk, n, d, m, model, param, args.trials, args.seed, args.fix_alloc)
            for dk, n, d in pts for m in m_grid for model, param in models]
    rows = run_chunks(_simulate_point, jobs, args.workers)
    rows.sort(key=lambda r: (r["design"], r["n"], r["d"], r["m"], r["model"], r["param"]))
    write_csv(rows, SIMULATE_COLUMNS, args.out)
    return 0


# bounds

DEFAULT_BOUNDS = {
    "clustering": ["clustering_chernoff", "span_ub", "scan_ub_any"],
    "cyclic": ["cyclic", "rgap", "span_ub", "scan_ub_any"],
    "block": ["block", "span_ub", "scan_ub_any"],
    "random": ["random_ub", "span_ub", "scan_ub_any"],
    "random-block-approx": ["span_ub", "scan_ub_any"],
    "constrained-random": ["constrained_random_lb", "span_ub", "scan_ub_any"],
    "single-choice": ["span_ub"],
}


def _bound_reports(name, dk, n, d, m, model, opts):
    kw = {"trials": opts["trials"], "seed": opts["seed"]}
    method = opts["method"]
    if name == "span_ub":
        if dk.kind is al.Kind.RANDOM and not opts["fix_alloc"]:
            target = rb.Design(dk, n, d)
        else:
            target = al.build(dk, n, d, opts["seed"] if dk.kind.randomized else None)
        return [bd.ub_span_based(target, model, m, opts["t_values"])]
    if name == "scan_ub_any":
        return [bd.scan_ub_any(n, d, model, m, opts["s_values"], method, **kw)]
    if name == "any_poisson_ub":
        return [bd.any_design_poisson_ub(n, d, model, m)]
    if name == "rgap":
        r = opts["r"] if opts["r"] is not None else d - 1
        return list(bd.rgap_bounds(n, d, r, model, m, opts["s"], method, **kw))
    if name.startswith("cyclic"):
        mode = {"cyclic": "finite", "cyclic_asymptotic": "asymptotic", "cyclic_simple": "asymptotic-simple",
                "cyclic_subgaussian": "subgaussian"}.get(name)
        if mode is None:
            raise UsageError(f"unknown bound {name!r}")
        return list(bd.cyclic_bounds(n, d, model, m, mode, opts["s_values"], opts["constants"], method=method, **kw))
    if name.startswith("block"):
        mode = {"block": "finite", "block_asymptotic": "asymptotic", "block_subgaussian": "subgaussian"}.get(name)
        if mode is None:
            raise UsageError(f"unknown bound {name!r}")
        return list(bd.block_bounds(n, d, model, m, mode, opts["constants"], method=method, **kw))
    if name == "clustering_chernoff":
        return [bd.clustering_bounds(n, d, model, m, "chernoff")[0]]
    if name == "clustering_subgaussian":
        return list(bd.clustering_bounds(n, d, model, m, "subgaussian", opts["constants"]))
    if name == "random_ub":
        return [bd.random_ub(n, d, model, m, opts["partition"], "exact-mc", seed=opts["seed"])]
    if name == "random_mean_approx":
        return [bd.random_ub(n, d, model, m, opts["partition"], "mean-approx")]
    if name == "constrained_random_lb":
        return [bd.constrained_random_lb(n, d, dk.v_max, model, m, method, **kw)]
    raise UsageError(f"unknown bound {name!r}")


KNOWN_BOUNDS = {"span_ub", "scan_ub_any", "any_poisson_ub", "rgap", "cyclic", "cyclic_asymptotic", "cyclic_simple",
                "cyclic_subgaussian", "block", "block_asymptotic", "block_subgaussian", "clustering_chernoff",
                "clustering_subgaussian", "random_ub", "random_mean_approx", "constrained_random_lb"}


def _bounds_point(dk, n, d, m, model, param, bound_names, opts):
    base = {"design": str(dk), "n": n, "d": d, "m": m, "model": model.spec(), "param": param, "seed": opts["seed"]}
    rows = []
    for name in bound_names:
        try:
            reps = _bound_reports(name, dk, n, d, m, model, opts)
        except ReplicaError as exc:
            rows.append(dict(base, bound=name, kind="skipped", value=type(exc).__name__))
            continue
        for rep in reps:
            rows.append(dict(base, bound=rep.name, kind=rep.kind, value=rep.value, asymptotic=rep.asymptotic))
    if opts["with_mc"]:
        try:
            est = rb.estimate_P(rb.Design(dk, n, d), model, m, opts["trials"], opts["seed"], fix_alloc=opts["fix_alloc"])
            mc = {"mc_p_hat": est.p_hat, "mc_ci_low": est.ci_low, "mc_ci_high": est.ci_high}
        except ReplicaError:
            mc = {"mc_p_hat": "skipped"}
        for r in rows:
            r.update(mc)
    return rows


def cmd_bounds(args):
    designs = names(args.designs)
    n_grid, d_grid, m_grid = ints(args.n), ints(args.d), floats(args.m)
    if not args.model:
        raise UsageError("--model is required")
    models = model_points(args.model, args.sweep)
    requested = names(args.bounds) if args.bounds else None
    for b in requested or []:
        if b not in KNOWN_BOUNDS:
            raise UsageError(f"unknown bound {b!r}; known: {', '.join(sorted(KNOWN_BOUNDS))}")
    constants = None
    if args.constants:
        constants = {k.strip(): float(v) for k, _, v in (c.partition("=") for c in names(args.constants))}
    opts = {
        "trials": args.trials, "seed": args.seed, "method": args.method, "fix_alloc": args.fix_alloc,
        "with_mc": args.with_mc, "constants": constants, "r": args.r, "s": args.s,
        "t_values": ints(args.t_values) if args.t_values else None,
        "s_values": ints(args.s_values) if args.s_values else None,
        "partition": ([int(x) for x in args.partition.split(",")] if args.partition and not args.partition.startswith("even")
                      else args.partition),
    }
    pts = sorted(set(_design_points(designs, n_grid, d_grid, args.block_native_n)), key=lambda p: (str(p[0]), p[1], p[2]))
    jobs = []
    for dk, n, d in pts:
        bnames = requested or DEFAULT_BOUNDS[dk.kind.value]
        for m in m_grid:
            for model, param in models:
                jobs.append((dk, n, d, m, model, param, bnames, opts))
    rows = [r for part in run_chunks(_bounds_point, jobs, args.workers) for r in part]
    rows.sort(key=lambda r: (r["design"], r["n"], r["d"], r["m"], r["model"], r["param"], r["bound"], r["kind"]))
    write_csv(rows, BOUNDS_COLUMNS + (MC_COLUMNS if args.with_mc else []), args.out)
    return 0


# scan


def cmd_scan(args):
    model = dm.parse_model(args.model)
    rows = []
    for x in floats(args.x):
        q = sc.ScanQuery(args.n, args.s, x, args.circular)
        row = {"method": args.method, "n": args.n, "s": args.s, "x": x, "circular": args.circular,
               "model": model.spec(), "trials": args.trials, "seed": args.seed}
        if args.method == "mc":
            est = sc.scan_cdf_mc(model, q, args.trials, args.seed, args.workers)
            row.update(p=est.p_hat, ci_low=est.ci_low, ci_high=est.ci_high)
        elif args.method == "poisson":
            row.update(p=sc.scan_cdf_poisson(model, q), trials="", seed="")
        else:
            row.update(p=sc.scan_cdf_naus(model, q, args.trials, args.seed))
        rows.append(row)
    write_csv(rows, SCAN_COLUMNS, args.out)
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=100_000)
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--config", default=None, help="file of 'key = value' lines; flags override it")
    common.add_argument("--workers", type=int, default=1)

    p = argparse.ArgumentParser(prog="replicaload", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", parents=[common], help="build an allocation and report overlap statistics")
    d.add_argument("--kind", required=True)
    d.add_argument("--n", type=int)
    d.add_argument("--d", type=int, required=True)
    d.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds starting at --seed")
    d.add_argument("--alloc-out", help="write the (first) allocation here")
    d.set_defaults(func=cmd_design)

    f = sub.add_parser("feasible", parents=[common], help="check one demand vector")
    f.add_argument("--alloc", required=True)
    f.add_argument("--rho", required=True, help="file with one demand per line")
    f.add_argument("--m", type=float, required=True)
    f.add_argument("--method", choices=["flow", "subsets"], default="flow")
    f.set_defaults(func=cmd_feasible)

    for name, func, helptext in (("simulate", cmd_simulate, "Monte Carlo P over a grid"),
                                 ("bounds", cmd_bounds, "analytic bounds over a grid")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--designs", default="clustering,cyclic,block,random")
        s.add_argument("--n", default="21")
        s.add_argument("--d", default="3")
        s.add_argument("--m", default="1")
        s.add_argument("--model", action="append", help="demand model spec; repeatable")
        s.add_argument("--sweep", help="model parameter sweep, e.g. p=0.2,0.3,0.4")
        s.add_argument("--fix-alloc", action="store_true", help="one allocation instance for randomized designs")
        s.add_argument("--block-native-n", action="store_true", help="run block at n = d^2 - d + 1 instead of the n grid")
        s.set_defaults(func=func)
        if name == "bounds":
            s.add_argument("--bounds", help="comma list of bound names (default: per design)")
            s.add_argument("--method", choices=["mc", "naus", "poisson"], default="mc")
            s.add_argument("--with-mc", action="store_true")
            s.add_argument("--constants", help="alpha=..,beta=..,gamma=..,mu=.. for sub-gaussian bounds")
            s.add_argument("--r", type=int)
            s.add_argument("--s", type=int)
            s.add_argument("--t-values")
            s.add_argument("--s-values")
            s.add_argument("--partition", help="part sizes 'u1,u2,...' or 'even:u'")

    c = sub.add_parser("scan", parents=[common], help="scan statistic CDF")
    c.add_argument("--model", required=True)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--s", type=int, required=True)
    c.add_argument("--x", required=True, help="threshold or comma list of thresholds")
    c.add_argument("--circular", action="store_true")
    c.add_argument("--method", choices=["mc", "poisson", "naus"], default="mc")
    c.set_defaults(func=cmd_scan)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            cfg = read_config(args.config)
            sub = parser._subparsers._group_actions[0].choices[args.command]
            known = {a.dest for a in sub._actions}
            unknown = set(cfg) - known
            if unknown:
                raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
            if "model" in cfg:
                cfg["model"] = [cfg["model"]] if args.command != "scan" else cfg["model"]
            sub.set_defaults(**cfg)
            args = parser.parse_args(argv)
        if args.trials < 1:
            raise UsageError("--trials must be >= 1")
        return args.func(args)
    except (UsageError, ReplicaError, ValueError, OSError, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
