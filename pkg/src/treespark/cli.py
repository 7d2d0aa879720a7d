"""Command line front end.

Commands
--------
``treespark sample``   write sampled spanning trees as text lines
``treespark certify``  tree-average sparsifier certificate with JSON report
``treespark diag``     diagnostic suites (marginals, martingale, tails, ...)

Graphs are given either as a file path (format: ``n m`` header then
``u v w`` lines) or as a constructor spec: ``k:N`` (complete),
``ring:N``, ``cliquestar:L,S`` or ``er:N,P`` (seeded by ``--seed``).

Exit codes: 0 pass, 1 gate or diagnostic failure, 2 usage or unreadable
input, 3 invalid (disconnected) graph, 4 size guard refusal.  The
default seed comes from ``TREESPARK_SEED`` when set, else 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .graph import (
    DisconnectedGraphError,
    GraphFileError,
    SizeGuardError,
    complete_graph,
    clique_star,
    erdos_renyi_connected,
    read_graph,
    ring_graph,
)
from .spectral import check_symmetric_triangle
from .srdiag import (
    check_trace_bounds,
    default_reverse_chernoff_grid,
    martingale_trace,
    reverse_chernoff_check,
    check_stirling_binom_lower,
    shrinking_marginals_suite,
    trace_dump,
)
from .experiments import report_to_dict, run_sum_trees, write_extremes_csv
from .treesample import format_tree_line, sample_tree_wilson

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_BAD_GRAPH = 3
EXIT_SIZE_GUARD = 4


class UsageError(ValueError):
    pass


def parse_graph_spec(spec: str, seed: int):
    """Build a graph from a constructor spec or read it from a file."""
    kind, _, rest = spec.partition(":")
    try:
        if kind == "k":
            return complete_graph(int(rest))
        if kind == "ring":
            return ring_graph(int(rest))
        if kind == "cliquestar":
            num, size = rest.split(",")
            return clique_star(int(num), int(size))
        if kind == "er":
            n, p = rest.split(",")
            return erdos_renyi_connected(int(n), float(p), seed)
    except DisconnectedGraphError:
        raise
    except ValueError as exc:
        raise UsageError(f"bad graph spec {spec!r}: {exc}") from exc
    if os.path.exists(spec):
        return read_graph(spec)
    raise UsageError(f"graph spec {spec!r} is neither a constructor nor a file")


def _default_seed() -> int:
    raw = os.environ.get("TREESPARK_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"TREESPARK_SEED must be an integer, got {raw!r}")


def _emit(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_sample(args) -> int:
    g = parse_graph_spec(args.graph, args.seed)
    lines = []
    for i in range(args.count):
        tree = sample_tree_wilson(g, args.seed + i)
        lines.append(format_tree_line(tree))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_PASS


def _cmd_certify(args) -> int:
    g = parse_graph_spec(args.graph, args.seed)
    if args.t is None and args.cmult is None:
        args.cmult = 1.0
    report = run_sum_trees(
        g,
        eps=args.eps,
        trials=args.trials,
        base_seed=args.seed,
        c_mult=args.cmult,
        t=args.t,
        gate=args.gate,
        jobs=args.jobs,
        graph_desc=args.graph,
    )
    payload = report_to_dict(report)
    payload["run_config"] = {
        "command": "certify",
        "graph": args.graph,
        "eps": args.eps,
        "t": args.t,
        "cmult": args.cmult,
        "trials": args.trials,
        "seed": args.seed,
        "gate": args.gate,
        "jobs": args.jobs,
        "library_version": __version__,
    }
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    if args.csv:
        write_extremes_csv(report, args.csv)
    if not args.json:
        print(
            f"certify: pass_fraction={report.pass_fraction:g} gate={report.gate:g} "
            f"{'PASS' if report.passed else 'FAIL'}",
            file=sys.stderr,
        )
    return EXIT_PASS if report.passed else EXIT_FAIL


def _diag_marginals(args) -> tuple[bool, dict]:
    g = parse_graph_spec(args.graph, args.seed)
    report = shrinking_marginals_suite(g)
    return report.passed, {
        "suite": "marginals",
        "graph": args.graph,
        "forests": report.num_forests,
        "pairs": report.num_pairs,
        "max_excess": report.max_excess,
        "passed": report.passed,
    }


def _diag_martingale(args) -> tuple[bool, dict]:
    g = parse_graph_spec(args.graph, args.seed)
    results = []
    dumps = []
    for i in range(args.seeds):
        trace = martingale_trace(g, args.seed + i)
        results.append(check_trace_bounds(trace))
        if args.dump:
            dumps.append(trace_dump(trace))
    if args.dump:
        with open(args.dump, "w") as fh:
            fh.writelines(dumps)
    passed = all(results)
    return passed, {
        "suite": "martingale",
        "graph": args.graph,
        "seeds": args.seeds,
        "failures": results.count(False),
        "passed": passed,
    }


def _diag_reverse_chernoff(args) -> tuple[bool, dict]:
    grid = default_reverse_chernoff_grid()
    results = [reverse_chernoff_check(k, p, eps) for k, p, eps in grid]
    passed = all(results)
    return passed, {
        "suite": "reverse-chernoff",
        "triples": len(grid),
        "failures": results.count(False),
        "passed": passed,
    }


def _diag_stirling(args) -> tuple[bool, dict]:
    results = [
        check_stirling_binom_lower(k, l)
        for k in range(2, args.kmax + 1)
        for l in range(1, k)
    ]
    passed = all(results)
    return passed, {
        "suite": "stirling",
        "kmax": args.kmax,
        "pairs": len(results),
        "failures": results.count(False),
        "passed": passed,
    }


def _diag_matrix_fact(args) -> tuple[bool, dict]:
    gen = np.random.Generator(np.random.Philox(args.seed))
    failures = 0
    for _ in range(args.pairs):
        a = gen.uniform(-1.0, 1.0, (args.dim, args.dim))
        b = gen.uniform(-1.0, 1.0, (args.dim, args.dim))
        a = (a + a.T) / 2.0
        b = (b + b.T) / 2.0
        if not check_symmetric_triangle(a, b):
            failures += 1
    passed = failures == 0
    return passed, {
        "suite": "matrix-fact",
        "pairs": args.pairs,
        "dim": args.dim,
        "failures": failures,
        "passed": passed,
    }


_DIAG_SUITES = {
    "marginals": _diag_marginals,
    "martingale": _diag_martingale,
    "reverse-chernoff": _diag_reverse_chernoff,
    "stirling": _diag_stirling,
    "matrix-fact": _diag_matrix_fact,
}


def _cmd_diag(args) -> int:
    passed, payload = _DIAG_SUITES[args.suite](args)
    payload["library_version"] = __version__
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return EXIT_PASS if passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treespark", description="weighted spanning tree sparsifier toolkit"
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sample = sub.add_parser("sample", help="sample spanning trees")
    p_sample.add_argument("--graph", required=True)
    p_sample.add_argument("--count", type=int, default=1)
    p_sample.add_argument("--seed", type=int, default=None)
    p_sample.add_argument("--out", default=None)
    p_sample.set_defaults(func=_cmd_sample)

    p_cert = sub.add_parser("certify", help="tree-average sparsifier certificate")
    p_cert.add_argument("--graph", required=True)
    p_cert.add_argument("--eps", type=float, required=True)
    p_cert.add_argument("--t", type=int, default=None)
    p_cert.add_argument("--cmult", type=float, default=None)
    p_cert.add_argument("--trials", type=int, default=10)
    p_cert.add_argument("--gate", type=float, default=0.9)
    p_cert.add_argument("--seed", type=int, default=None)
    p_cert.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    p_cert.add_argument("--json", action="store_true", help="machine output only")
    p_cert.add_argument("--out", default=None)
    p_cert.add_argument("--csv", default=None)
    p_cert.set_defaults(func=_cmd_certify)

    p_diag = sub.add_parser("diag", help="diagnostic suites")
    p_diag.add_argument("suite", choices=sorted(_DIAG_SUITES))
    p_diag.add_argument("--graph", default="k:5")
    p_diag.add_argument("--seeds", type=int, default=20)
    p_diag.add_argument("--grid", default="default", choices=["default"])
    p_diag.add_argument("--json", action="store_true", help="machine output only")
    p_diag.add_argument("--kmax", type=int, default=60)
    p_diag.add_argument("--pairs", type=int, default=200)
    p_diag.add_argument("--dim", type=int, default=8)
    p_diag.add_argument("--seed", type=int, default=None)
    p_diag.add_argument("--dump", default=None)
    p_diag.add_argument("--out", default=None)
    p_diag.set_defaults(func=_cmd_diag)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "seed", None) is None:
            args.seed = _default_seed()
        return args.func(args)
    except UsageError as exc:
        print(f"treespark: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GraphFileError as exc:
        print(f"treespark: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DisconnectedGraphError as exc:
        print(f"treespark: invalid graph: {exc}", file=sys.stderr)
        return EXIT_BAD_GRAPH
    except SizeGuardError as exc:
        print(f"treespark: size guard: {exc}", file=sys.stderr)
        return EXIT_SIZE_GUARD
    except (ValueError, OSError) as exc:
        print(f"treespark: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
