"""Command line: generate trees, solve under the simulator, verify against
the oracles, and sweep families for round/memory tables.

Exit codes: 0 success, 1 verification mismatch (or a not-isomorphic verdict),
2 simulation fault, 3 input error.
"""

import argparse
import csv
import hashlib
import json
import os
import sys

from .errors import ExprArithmeticError, InputError, LogIntegrityError, SimFault
from .oracles import (all_shapes, broom, caterpillar, complete_kary, path,
                      random_tree, star, with_edge_weights, with_vertex_weights)
from .problems import REGISTRY
from .sim import SimConfig
from .trees import parse_tree, serialize_tree

_FAMILIES = ("path", "star", "broom", "caterpillar", "random", "complete-kary",
             "all-shapes")


def _make_tree(family, n, seed, k):
    if family == "path":
        return path(n)
    if family == "star":
        return star(n)
    if family == "broom":
        return broom(n)
    if family == "caterpillar":
        return caterpillar(n)
    if family == "random":
        return random_tree(n, seed)
    if family == "complete-kary":
        return complete_kary(n, k)
    raise InputError("family %r is not generable as a single tree" % family)


def _load_inputs(args, arity):
    paths = args.input or []
    if arity == 0:
        if len(paths) != 1:
            raise InputError("problem %r takes exactly one expression input"
                             % args.problem)
        raw = paths[0]
        if os.path.isfile(raw):
            with open(raw) as fh:
                raw = fh.read().strip()
        return [([], raw, raw.encode())]
    if not paths or len(paths) % max(arity, 1):
        raise InputError("problem %r takes inputs in groups of %d"
                         % (args.problem, arity))
    instances = []
    for g in range(0, len(paths), arity):
        trees, blob = [], bytearray()
        for p in paths[g:g + arity]:
            with open(p) as fh:
                text = fh.read()
            trees.append(parse_tree(text))
            blob.extend(text.encode())
        instances.append((trees, None, bytes(blob)))
    return instances


def _cfg_for(args, trees, text):
    if not 0 < args.epsilon < 1:
        raise InputError("epsilon must be in (0, 1)")
    n = max(4, len(text)) if text is not None else max(t.n for t in trees)
    kw = {"epsilon": args.epsilon, "n": n, "seed": args.seed,
          "strict": args.strict}
    if args.space_constant is not None:
        kw["C_s"] = args.space_constant
    return SimConfig(**kw)


def _digest(blob):
    return hashlib.sha256(blob).hexdigest()[:16]


def _cmd_solve(args):
    entry = REGISTRY[args.problem]
    worst = 0
    for trees, text, _ in _load_inputs(args, entry["arity"]):
        cfg = _cfg_for(args, trees, text)
        result = entry["solve"](trees, text, cfg, args.seed)
        for line in result["lines"]:
            print(line)
        report = {"problem": args.problem, "n": cfg.n, "epsilon": args.epsilon,
                  "seed": args.seed, "value": result["value"],
                  "metrics": result.get("metrics")}
        if args.report:
            with open(args.report, "a") as fh:
                fh.write(json.dumps(report) + "\n")
        else:
            print(json.dumps(report))
        if args.log and result.get("log") is not None:
            result["log"].save(args.log)
        worst = max(worst, result.get("exit", 0))
    return worst


def _cmd_verify(args):
    entry = REGISTRY[args.problem]
    bad = 0
    for trees, text, blob in _load_inputs(args, entry["arity"]):
        cfg = _cfg_for(args, trees, text)
        result = entry["solve"](trees, text, cfg, args.seed)
        oracle, engine, equal = entry["check"](trees, text, result)
        line = {"problem": args.problem, "digest": _digest(blob),
                "oracle": oracle, "engine": engine, "equal": equal}
        out = json.dumps(line)
        if args.report:
            with open(args.report, "a") as fh:
                fh.write(out + "\n")
        print(out)
        bad += 0 if equal else 1
    return 1 if bad else 0


def _cmd_bench(args):
    entry = REGISTRY[args.problem]
    if entry["arity"] != 1:
        raise InputError("bench sweeps single-tree problems only")
    rows = [("family", "n", "epsilon", "rounds", "peak_words")]
    for family in args.family:
        for n in args.n:
            for eps in args.epsilon or [0.5]:
                tree = _make_tree(family, n, args.seed, args.k)
                ns = argparse.Namespace(**{**vars(args), "epsilon": eps})
                cfg = _cfg_for(ns, [tree], None)
                result = entry["solve"]([tree], None, cfg, args.seed)
                m = result["metrics"]
                rows.append((family, n, eps, m["rounds"],
                             m["peak_machine_words"]))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        csv.writer(out).writerows(rows)
    finally:
        if args.out:
            out.close()
    return 0


def _weighted(tree, args):
    if args.edge_weights:
        tree = with_edge_weights(tree, args.seed)
    if args.vertex_weights:
        tree = with_vertex_weights(tree, args.seed)
    return tree


def _cmd_gen(args):
    if args.family == "all-shapes":
        os.makedirs(args.out, exist_ok=True)
        count = 0
        for i, tree in enumerate(all_shapes(args.n), start=1):
            dest = os.path.join(args.out, "shape-%03d.tree" % i)
            with open(dest, "w") as fh:
                fh.write(serialize_tree(_weighted(tree, args)))
            count += 1
        print("%d files in %s" % (count, args.out))
        return 0
    tree = _weighted(_make_tree(args.family, args.n, args.seed, args.k), args)
    text = serialize_tree(tree)
    if parse_tree(text) != tree:
        raise LogIntegrityError("generated tree does not round-trip")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _common(sub):
    sub.add_argument("--epsilon", type=float, default=0.5)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--strict", dest="strict", action="store_true",
                     default=True)
    sub.add_argument("--relaxed", dest="strict", action="store_false")
    sub.add_argument("--report", metavar="PATH")
    sub.add_argument("--log", metavar="PATH")
    sub.add_argument("--space-constant", type=int, default=None,
                     help=argparse.SUPPRESS)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="treecontract",
        description="Tree contraction under a round-accurate AMPC simulator.")
    subs = parser.add_subparsers(dest="cmd", required=True)

    solve = subs.add_parser("solve", help="run a problem on inputs")
    solve.add_argument("--problem", required=True, choices=sorted(REGISTRY))
    solve.add_argument("--input", action="append",
                       help="tree file; twice for pair problems; an "
                            "expression file or literal for eval")
    _common(solve)

    verify = subs.add_parser("verify", help="solve and compare with oracles")
    verify.add_argument("--problem", required=True, choices=sorted(REGISTRY))
    verify.add_argument("--input", action="append")
    _common(verify)

    bench = subs.add_parser("bench", help="family sweep to CSV")
    bench.add_argument("--problem", default="height",
                       choices=sorted(REGISTRY))
    bench.add_argument("--family", action="append", required=True,
                       choices=[f for f in _FAMILIES if f != "all-shapes"])
    bench.add_argument("--n", action="append", type=int, required=True)
    bench.add_argument("--epsilon", action="append", type=float)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--k", type=int, default=2)
    bench.add_argument("--strict", dest="strict", action="store_true",
                       default=True)
    bench.add_argument("--relaxed", dest="strict", action="store_false")
    bench.add_argument("--out", metavar="PATH")
    bench.add_argument("--space-constant", type=int, default=None,
                       help=argparse.SUPPRESS)

    gen = subs.add_parser("gen", help="write generated tree files")
    gen.add_argument("--family", required=True, choices=_FAMILIES)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--k", type=int, default=2)
    gen.add_argument("--edge-weights", action="store_true")
    gen.add_argument("--vertex-weights", action="store_true")
    gen.add_argument("--out", metavar="PATH")
    return parser


def main(argv=None):
    threads = os.environ.get("TC_THREADS")
    if threads and not threads.isdigit():
        print("error: TC_THREADS must be a positive integer", file=sys.stderr)
        return 3
    args = _build_parser().parse_args(argv)
    try:
        cmd = {"solve": _cmd_solve, "verify": _cmd_verify,
               "bench": _cmd_bench, "gen": _cmd_gen}[args.cmd]
        return cmd(args)
    except (InputError, ExprArithmeticError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3
    except (SimFault, LogIntegrityError) as exc:
        print("simulation fault: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
