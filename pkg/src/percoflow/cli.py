"""Command-line front end.

Exit codes: 0 success, 2 invalid configuration, 3 numerical non-convergence,
4 property-check failure (``verify``).  Every CSV starts with ``#``-prefixed
lines echoing the run configuration; the JSON summary carries the same
config plus the package version and wall time.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, catalog, exchange, percolation, tree
from .dist import DistributionSpec, InvalidDistribution, kesten_series, parse
from .exchange import ConvergenceError
from .graphs import IntegerLattice, Lattice, Tree

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_PROPERTY = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class PropertyFailure(AssertionError):
    pass


# -- output --------------------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, np.generic):
        return _jsonable(v.item())
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if hasattr(v, "value") and isinstance(getattr(v, "value"), str):
        return v.value
    return v


def _config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "out", "format", "workers")}
    return _jsonable(cfg)


def render_csv(config: dict, header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(f"# percoflow {__version__}\n")
    buf.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


class Emitter:
    """Collects one table and one summary per run and writes them out."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = _config(args)
        self.t0 = time.perf_counter()
        self.table: tuple[list[str], list] | None = None

    def rows(self, header: list[str], rows) -> None:
        self.table = (header, list(rows))

    def finish(self, summary: dict) -> None:
        doc = {"config": self.config, "version": __version__,
               "wall_time_s": round(time.perf_counter() - self.t0, 6), **_jsonable(summary)}
        text_json = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        out = self.args.out
        if out is None:
            if self.args.format == "json" or self.table is None:
                sys.stdout.write(text_json)
            else:
                sys.stdout.write(render_csv(self.config, *self.table))
            return
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        if self.table is not None:
            out.with_suffix(".csv").write_text(render_csv(self.config, *self.table))
        out.with_suffix(".json").write_text(text_json)


def _spec(args) -> DistributionSpec:
    if args.dist is None:
        raise ConfigError("--dist is required")
    try:
        return parse(args.dist)
    except FileNotFoundError as e:
        raise ConfigError(f"spec file not found: {e.filename or args.dist}") from e
    except (InvalidDistribution, ValueError, json.JSONDecodeError) as e:
        raise ConfigError(f"invalid distribution {args.dist!r}: {e}") from e


# -- subcommands -----------------------------------------------------------------------


def cmd_exchange(args) -> int:
    spec = _spec(args)
    em = Emitter(args)
    size = args.size or exchange.default_size(spec)
    if args.action == "classify":
        ks = kesten_series(spec, args.terms)
        print(f"class={exchange.classify(spec).value} mean={spec.mean()} kesten={ks.verdict.value}",
              file=sys.stderr)
        em.finish({"class": exchange.classify(spec), "mean": spec.mean(),
                   "kesten_verdict": ks.verdict, "kesten_partial_sum": ks.partial_sums[-1]})
    elif args.action == "stationary":
        tau = exchange.stationary_measure(spec, size - 1)
        vals = tau.normalized if tau.normalized is not None else tau.values
        em.rows(["x", "tau", "tau_normalized"],
                [(x, tau.values[x], vals[x] if tau.normalized is not None else "") for x in range(size)])
        em.finish({"normalizable": tau.normalizable, "size": size})
    elif args.action == "matrix":
        P = exchange.transition_matrix(spec, size)
        em.rows(["x"] + [f"p{y}" for y in range(size)],
                [[x, *P.matrix[x]] for x in range(size)])
        em.finish({"size": size, "exact": P.exact,
                   "spectral_radius": exchange.spectral_radius_P(spec, size, args.tol)})
    else:  # path
        path = exchange.simulate_path(spec, args.steps, args.seed)
        law = exchange.occupation_law(path.x, size)
        em.rows(["k", "y", "x"], [(k, path.y[k], path.x[k]) for k in range(path.x.size)])
        em.finish({"steps": args.steps, "occupation": law})
    return EXIT_OK


def _window(args):
    side, dim = args.window, args.dim
    if args.family == "N0":
        return Lattice(dim, side)
    if args.family == "Z":
        return IntegerLattice(dim, side, args.margin)
    return Tree(args.arity, args.depth)


def cmd_perc(args) -> int:
    spec = _spec(args)
    em = Emitter(args)
    family_n = args.arity if args.family == "D" else args.dim
    verdict = percolation.coverage_criterion(spec, args.family, family_n)
    if args.action == "criterion":
        print(f"family={args.family} n={family_n} verdict={verdict.value}")
        em.finish({"verdict": verdict})
        return EXIT_OK
    window = _window(args)
    try:
        stats = percolation.uncovered_census(window, spec, args.trials, args.seed,
                                             workers=args.workers)
    except percolation.CoveredAlmostSurely as e:
        print(f"not sampled: {e}", file=sys.stderr)
        em.finish({"verdict": verdict, "sampled": False})
        return EXIT_OK
    em.rows(["trial_id", "uncovered_count", "censored"],
            [(i, int(c), int(s)) for i, (c, s) in enumerate(zip(stats.counts, stats.censored))])
    summary = {"verdict": verdict, "mean": stats.mean, "var": stats.var, "stderr": stats.stderr,
               "histogram": stats.histogram, "censored_fraction": stats.censored_fraction,
               "truncation_bound": stats.truncation_bound}
    if args.family == "N0" and args.dim == 1:
        q = percolation.expected_uncovered_line(spec, max(args.window, 1000))
        summary["q_series"] = {"value": q.value, "converged": q.converged, "remainder": q.remainder}
    if stats.geometric is not None:
        summary["geometric_fit"] = vars(stats.geometric)
    em.finish(summary)
    return EXIT_OK


def cmd_tree(args) -> int:
    spec = _spec(args)
    em = Emitter(args)
    n = args.arity
    if args.action == "criterion":
        rho = tree.rho_M(spec, args.size, min(args.tol, 1e-12))
        verdict = tree.infinite_path_criterion(spec, n, args.size, args.tol)
        shown = "indeterminate" if verdict is None else str(verdict).lower()
        print(f"rho={rho:.12g} threshold={1.0 / n:.12g} verdict={shown}")
        em.finish({"rho": rho, "threshold": 1.0 / n, "verdict": verdict})
    elif args.action == "rseq":
        seq = tree.r_recurrence(spec, n, args.depth)
        rows = []
        for m in range(args.depth + 1):
            if args.trials > 0:
                pr = tree.tree_uncovered_probe(spec, n, m, args.trials, args.seed, workers=args.workers)
                rows.append((m, seq.r[m], pr.r_hat, pr.stderr))
            else:
                rows.append((m, seq.r[m], "", ""))
        em.rows(["m", "r_analytic", "r_empirical", "stderr"], rows)
        em.finish({"arity": n, "depth": args.depth})
    else:  # branching
        res = tree.simulate_branching(spec, n, args.generations, args.seed, runs=args.trials,
                                      type_cap=args.size, workers=args.workers)
        em.rows(["run", "final_population", "survived", "saturated"],
                [(i, int(res.population[i, -1]), int(res.survived[i]), int(res.saturated[i]))
                 for i in range(res.population.shape[0])])
        em.finish({"survival_fraction": res.survival_fraction,
                   "rho": tree.rho_M(spec, args.size), "threshold": 1.0 / n})
    return EXIT_OK


def cmd_catalog(args) -> int:
    em = Emitter(args)
    if args.law == "euler":
        tau = catalog.euler_distribution(args.p, args.size or 200)
        em.rows(["n", "tau"], enumerate(tau))
        em.finish({"p": args.p, "phi": catalog.euler_phi(args.p), "total": math.fsum(tau)})
    elif args.law == "uniform":
        tau = catalog.uniform_stationary_law(args.m)
        em.rows(["n", "tau"], enumerate(tau))
        em.finish({"m": args.m, "total": math.fsum(tau)})
    elif args.law == "naor":
        exact = catalog.naor_exact(args.m)
        res = catalog.naor_urn(args.m, args.trials, args.seed, workers=args.workers) if args.trials else None
        rows = []
        for t in range(1, args.m + 1):
            rows.append((t, exact[t - 1], "" if res is None else float(np.mean(res.T == t))))
        em.rows(["T", "p_exact", "p_empirical"], rows)
        em.finish({"m": args.m, "trials": args.trials})
    else:  # inverse-beta
        ys = np.linspace(0.1, 5.0, 50)
        em.rows(["y", "cdf"], [(y, catalog.inverse_beta_cdf(args.c, y)) for y in ys])
        em.finish({"c": args.c})
    return EXIT_OK


def cmd_verify(args) -> int:
    em = Emitter(args)
    checks = {}
    if args.coupling or not args.stationary:
        specs = [args.dist] if args.dist else ["support01:p=0.5", "geometric:p=0.5", "power:c=2,K=8"]
        for text in specs:
            spec = parse(text) if args.dist is None else _spec(args)
            try:
                for t in range(args.trials):
                    percolation.coupling_check(spec, args.steps, args.seed, trial=t)
                checks[f"coupling[{text}]"] = True
            except percolation.CouplingMismatch as e:
                print(f"coupling failed for {text}: {e}", file=sys.stderr)
                checks[f"coupling[{text}]"] = False
    if args.stationary:
        spec = _spec(args)
        tau = exchange.stationary_measure(spec, (args.size or exchange.default_size(spec)) - 1)
        res = tau.recursion_residual(spec)
        checks["stationary_recursion"] = bool(res < 1e-10)
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    em.finish({"checks": checks})
    if not all(checks.values()):
        raise PropertyFailure(", ".join(k for k, v in checks.items() if not v))
    return EXIT_OK


# -- parser ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dist", help="inline spec (e.g. 'geometric:p=0.5') or a JSON file path")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=None,
                        help="Monte Carlo trials (default 1000; 1 for verify)")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--size", type=int, default=None, help="truncation size")
    common.add_argument("--tol", type=float, default=1e-9)
    common.add_argument("--out", default=None, help="output path stem (.csv and .json are written)")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="stdout format when --out is not given")

    p = argparse.ArgumentParser(prog="percoflow", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("exchange", parents=[common], help="exchange chain: class, tau, P, paths")
    ex.add_argument("action", choices=("classify", "stationary", "matrix", "path"))
    ex.add_argument("--steps", type=int, default=10_000)
    ex.add_argument("--terms", type=int, default=10_000)
    ex.set_defaults(func=cmd_exchange)

    pc = sub.add_parser("perc", parents=[common], help="coverage census on N0^n, Z^n or the tree")
    pc.add_argument("action", choices=("census", "criterion"))
    pc.add_argument("--family", choices=("N0", "Z", "D"), default="N0")
    pc.add_argument("--dim", type=int, default=1)
    pc.add_argument("--window", type=int, default=1000)
    pc.add_argument("--margin", type=int, default=60)
    pc.add_argument("--arity", type=int, default=2)
    pc.add_argument("--depth", type=int, default=10)
    pc.set_defaults(func=cmd_perc)

    tr = sub.add_parser("tree", parents=[common], help="tree criterion, r-sequence, branching runs")
    tr.add_argument("action", choices=("criterion", "rseq", "branching"))
    tr.add_argument("--arity", type=int, default=2)
    tr.add_argument("--depth", type=int, default=10)
    tr.add_argument("--generations", type=int, default=100)
    tr.set_defaults(func=cmd_tree)

    ct = sub.add_parser("catalog", parents=[common], help="closed-form law tables")
    ct.add_argument("law", choices=("euler", "uniform", "naor", "inverse-beta"))
    ct.add_argument("--p", type=float, default=0.5)
    ct.add_argument("--m", type=int, default=5)
    ct.add_argument("--c", type=float, default=2.0)
    ct.set_defaults(func=cmd_catalog)

    vf = sub.add_parser("verify", parents=[common], help="property checks (exit 4 on failure)")
    vf.add_argument("--coupling", action="store_true")
    vf.add_argument("--stationary", action="store_true")
    vf.add_argument("--steps", type=int, default=10_000)
    vf.set_defaults(func=cmd_verify)
    return p


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else EXIT_OK
    if args.trials is None:
        args.trials = 1 if args.command == "verify" else 1000
    try:
        return args.func(args)
    except (ConfigError, InvalidDistribution) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except PropertyFailure as e:
        print(f"property check failed: {e}", file=sys.stderr)
        return EXIT_PROPERTY
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())
