"""Command-line interface.

Subcommands: enumerate, analyze, constraints, fit, select, simulate,
ystruct.  Exit codes: 0 success, 1 usage error, 2 data error, 3 internal
invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys

from .equivalence import (
    ClassTable,
    build_class_table,
    generic_rank,
    theorem2_equivalents,
)
from .constraints import theorem1_constraints
from .errors import (
    DataError,
    GraphParseError,
    InternalError,
    SemalgError,
)
from .fitting import (
    FitOptions,
    load_covariance_csv,
    load_data_csv,
    random_sem,
    ricf_fit,
    sample_data,
    select_class,
)
from .graphs import graph_to_json_dict, load_graph
from .halftrek import find_identifying_sets
from .polynomials import to_string
from .ystruct import run_experiment


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="semalg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="build the equivalence-class table")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rank-trials", type=int, default=3)

    p = sub.add_parser("analyze", help="identifiability, constraints, rank of one graph")
    p.add_argument("graph")

    p = sub.add_parser("constraints", help="equality constraints of one graph")
    p.add_argument("graph")

    p = sub.add_parser("fit", help="maximum-likelihood fit of one graph")
    p.add_argument("graph")
    p.add_argument("--data")
    p.add_argument("--cov")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("select", help="BIC selection over the class table")
    p.add_argument("--classes", required=True)
    p.add_argument("--data")
    p.add_argument("--cov")
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", help="simulate data from a random model")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, metavar="PREFIX")

    p = sub.add_parser("ystruct", help="Y-structure detection experiment")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--filter", choices=["none", "mag", "full"], default="full")
    p.add_argument("--classes")
    return parser


def _load_cov(args):
    if args.data and args.cov:
        raise DataError("give either --data or --cov, not both")
    if args.data:
        return load_data_csv(args.data)
    if args.cov:
        if args.n is None:
            raise DataError("--cov requires --n (sample count)")
        return load_covariance_csv(args.cov, args.n)
    raise DataError("one of --data or --cov is required")


def cmd_enumerate(args) -> int:
    if args.nodes > 4:
        raise DataError("class tables are supported for up to 4 nodes")
    table = build_class_table(
        args.nodes, trials=args.rank_trials, seed=args.seed, jobs=args.jobs
    )
    table.save(args.out)
    print(
        f"graphs={table.graph_count} clusters={table.cluster_count} "
        f"classes={table.class_count}"
    )
    return 0


def cmd_analyze(args, constraints_only: bool = False) -> int:
    g = load_graph(args.graph)
    status = find_identifying_sets(g)
    if not constraints_only:
        if status.identifiable:
            witness = {
                g.names[v]: sorted(g.names[y] for y in status.sets.sets[v])
                for v in range(g.n)
            }
            print(f"htc_status: identifiable witness={json.dumps(witness)}")
        else:
            print("htc_status: inconclusive")
    if status.identifiable:
        cons = theorem1_constraints(g, status.sets)
        print(f"constraints: {len(cons)}")
        for poly, tag in zip(cons.polys, cons.tags):
            print(f"  {tag.label(g.names)}: {to_string(poly)} = 0")
    else:
        print("constraints: unavailable (not identifiable); use an equivalent graph")
    if constraints_only:
        return 0
    report = generic_rank(g)
    print(
        f"rank: {report.rank} deficiency: {report.deficiency} "
        f"dimension: {report.rank + len(g.bidirected)}"
    )
    if report.deficiency > 0:
        peers = theorem2_equivalents(g)
        print(f"equivalents: {len(peers)}")
        for h in peers:
            edges = [f"{h.names[u]}->{h.names[v]}" for (u, v) in sorted(h.directed)]
            edges += [f"{h.names[u]}<->{h.names[v]}" for (u, v) in sorted(h.bidirected)]
            print("  " + (", ".join(edges) if edges else "(empty graph)"))
    return 0


def cmd_fit(args) -> int:
    g = load_graph(args.graph)
    cov = _load_cov(args)
    if tuple(cov.names) != g.names:
        raise DataError("data node names do not match the graph")
    fit = ricf_fit(g, cov.s, cov.n_samples, FitOptions(seed=args.seed))
    out = {
        "loglik": fit.loglik,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "restarts_used": fit.restarts_used,
        "lambda": {
            f"{g.names[u]}->{g.names[v]}": fit.lam[u, v] for (u, v) in sorted(g.directed)
        },
        "omega": {
            f"{g.names[u]}<->{g.names[v]}": fit.omega[u, v]
            for (u, v) in sorted(g.bidirected)
        },
        "variances": {g.names[v]: fit.omega[v, v] for v in range(g.n)},
    }
    print(json.dumps(out, indent=1, sort_keys=True))
    return 0


def cmd_select(args) -> int:
    table = ClassTable.load(args.classes)
    cov = _load_cov(args)
    report = select_class(table, cov, FitOptions(seed=args.seed))
    print(json.dumps(report.to_json_dict(), indent=1))
    return 0


def cmd_simulate(args) -> int:
    if args.p < 4:
        raise DataError("simulation needs at least 4 variables")
    g, params = random_sem(args.p, args.seed)
    data = sample_data(g, params, args.n, args.seed * 31 + 1)
    with open(args.out + ".graph.json", "w", encoding="utf-8") as fh:
        json.dump(graph_to_json_dict(g), fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(args.out + ".data.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(g.names)
        for row in data:
            writer.writerow([f"{x:.10g}" for x in row])
    print(f"wrote {args.out}.graph.json and {args.out}.data.csv")
    return 0


def cmd_ystruct(args) -> int:
    table = None
    filters = (args.filter,) if args.filter == "none" else ("none", args.filter)
    if any(m in ("mag", "full") for m in filters):
        if not args.classes:
            raise DataError("--classes is required for mag/full filtering")
        table = ClassTable.load(args.classes)
    report = run_experiment(
        p=args.p,
        reps=args.reps,
        n_samples=args.n,
        alpha=args.alpha,
        seed=args.seed,
        table=table,
        filters=filters,
    )
    print(json.dumps(report.to_json_dict(), indent=1))
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "enumerate":
            return cmd_enumerate(args)
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "constraints":
            return cmd_analyze(args, constraints_only=True)
        if args.command == "fit":
            return cmd_fit(args)
        if args.command == "select":
            return cmd_select(args)
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "ystruct":
            return cmd_ystruct(args)
        parser.error(f"unknown command {args.command!r}")
    except (GraphParseError, DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except SemalgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
