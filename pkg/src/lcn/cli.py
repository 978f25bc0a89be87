"""``lcn`` command-line entry point.

Exit codes: 0 success, 1 user error, 2 infeasible or inconsistent model,
3 capacity exceeded.  Results go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from importlib import resources
from pathlib import Path
from typing import List, Optional

from .errors import (
    CapacityError, GroundingError, InconsistencyError, InfeasibleError, LCNError, ParseError,
    PreconditionError, UndefinedConditionalError,
)

EXIT_OK, EXIT_USER, EXIT_MODEL, EXIT_CAPACITY = 0, 1, 2, 3


def resolve_path(path: str) -> Path:
    """The given path, or the bundled data file with the same name when it does not exist."""
    p = Path(path)
    if p.exists():
        return p
    bundled = resources.files("lcn") / "data" / p.name
    if bundled.is_file():
        return Path(str(bundled))
    raise FileNotFoundError(path)


def _load_ground(path: str):
    from .model import ground
    from .parser import load

    return ground(load(resolve_path(path)))


def _solver_config(args):
    from .solver import SolverConfig

    return SolverConfig(starts=args.starts, tol_feas=args.tol_feas, max_iter=args.max_iter,
                        seed=args.seed)


def _emit(obj, args):
    if not getattr(args, "no_timing", False) and "elapsed" not in obj and hasattr(args, "_t0"):
        obj["elapsed"] = round(time.perf_counter() - args._t0, 6)
    print(json.dumps(obj, sort_keys=True))


# -- subcommands -------------------------------------------------------------------

def cmd_check(args) -> int:
    gp = _load_ground(args.file)
    if args.json:
        print(json.dumps({"file": args.file, "atoms": len(gp.atoms), "sentences": len(gp.sentences),
                          "ok": True}, sort_keys=True))
    else:
        print(f"ok: {len(gp.atoms)} atoms, {len(gp.sentences)} ground sentences")
    return EXIT_OK


def cmd_ground(args) -> int:
    from .parser import format_sentence

    gp = _load_ground(args.file)
    if args.json:
        print(json.dumps({"atoms": gp.atom_names,
                          "sentences": [format_sentence(s) for s in gp.sentences]}, sort_keys=True))
    else:
        for s in gp.sentences:
            print(format_sentence(s))
    return EXIT_OK


def cmd_graph(args) -> int:
    from .depgraph import build_dependency_graph, markov_statements, to_dot

    g = build_dependency_graph(_load_ground(args.file))
    if args.dot:
        sys.stdout.write(to_dot(g))
    elif args.json:
        print(json.dumps({
            "atoms": list(g.atoms),
            "edges": [[u, v, list(g.edges[(u, v)])] for u, v in g.edge_list()],
            "independence": [str(s) for s in markov_statements(g)],
        }, sort_keys=True))
    else:
        for s in markov_statements(g):
            print(s)
    return EXIT_OK


def cmd_infer(args) -> int:
    from .parser import parse_query

    gp = _load_ground(args.file)
    cfg = _solver_config(args)
    mode = "no-markov" if args.no_markov else "markov"
    if args.method == "bp":
        from .bp import BPConfig, build_factor_graph, run_bp

        q = parse_query(args.query, atoms=gp.atom_names)
        if q.kind != "marginal" or q.q.op != "atom":
            print("error: --method bp answers single-atom marginal queries only", file=sys.stderr)
            return EXIT_USER
        name = str(q.q)
        if name not in gp.index:
            print(f"error: unknown atom {name!r}", file=sys.stderr)
            return EXIT_USER
        res = run_bp(build_factor_graph(gp), BPConfig(solver=cfg), trace=args.trace)
        m = res.intervals[name]
        out = {"query": str(q), "lower": m.l, "upper": m.u, "mode": "bp",
               "status": "converged" if res.converged else "max-rounds",
               "atoms": list(gp.atom_names), "rounds": res.rounds}
        if args.trace:
            out["trace"] = [{f"{a}->{b}": [v.l, v.u] for (a, b), v in sorted(step.items())}
                            for step in res.trace]
    else:
        from .exact import query_interval

        r = query_interval(gp, args.query, mode, cfg)
        out = r.to_json()
    if args.json:
        _emit(out, args)
    else:
        print(f"{out['query']} in [{out['lower']:.6f}, {out['upper']:.6f}]  ({out['mode']})")
    return EXIT_OK


def cmd_map(args) -> int:
    from .map_inference import MapTask, map_assignment
    from .parser import parse_formula

    gp = _load_ground(args.file)
    atoms = tuple(a.strip() for a in args.vars.split(",") if a.strip())
    ev = parse_formula(args.evidence) if args.evidence else None
    mode = "no-markov" if args.no_markov else "markov"
    res = map_assignment(gp, MapTask(atoms, args.criterion, ev), _solver_config(args), mode=mode)
    if args.json:
        _emit(res.to_json(), args)
    else:
        for a in res.argmax:
            print(", ".join(f"{k}={int(v)}" for k, v in zip(res.atoms, a)))
    return EXIT_OK


def cmd_mastermind(args) -> int:
    from . import mastermind as mm

    cfg = mm.GameConfig(pegs=args.pegs, colors=args.colors, seed=args.seed,
                        fixed_priors=args.fixed_priors)
    methods = [m.strip() for m in args.methods.split(",")] if args.methods else list(mm.DEFAULT_METHODS)
    for m in methods:
        if m not in mm.METHODS:
            print(f"error: unknown method {m!r}", file=sys.stderr)
            return EXIT_USER
    if args.action == "gen":
        puzzles, attempts = mm.generate_puzzles(cfg, args.count)
        out = Path(args.out)
        mm.write_puzzles(puzzles, out)
        print(json.dumps({"accepted": len(puzzles), "attempts": attempts, "dir": str(out)},
                         sort_keys=True))
        return EXIT_OK
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [args.seed]
    if args.puzzles:
        puzzles = mm.read_puzzles(args.puzzles)
        game = mm.Game(puzzles[0].pegs, puzzles[0].colors) if puzzles else None
        summary = mm.summarize({args.seed: mm.evaluate_puzzles(puzzles, methods, game)}, methods)
    else:
        summary = mm.evaluate_methods(seeds, methods, cfg, args.count)
    text = json.dumps(summary, sort_keys=True)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "accuracy.json").write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------

def _solver_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=16, help="multi-start count")
    p.add_argument("--tol-feas", type=float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=200, help="outer augmented-Lagrangian iterations")
    p.add_argument("--threads", type=int, default=1, help="cap on BLAS worker threads")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lcn", description="Logical credal network inference.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="parse, validate and ground a program")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("ground", help="print the ground sentences")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("graph", help="dependency graph and implied independences")
    p.add_argument("file")
    p.add_argument("--dot", action="store_true", help="Graphviz output")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("infer", help="probability interval of a query")
    p.add_argument("file")
    p.add_argument("--query", required=True, help='e.g. "P(a | b)"')
    p.add_argument("--method", choices=("exact", "bp"), default="exact")
    p.add_argument("--no-markov", action="store_true", help="drop the independence constraints")
    p.add_argument("--json", action="store_true")
    p.add_argument("--trace", action="store_true", help="per-round BP messages")
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock fields from JSON")
    _solver_flags(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("map", help="MAP assignment of query atoms")
    p.add_argument("file")
    p.add_argument("--vars", required=True, help="comma-separated query atoms")
    p.add_argument("--criterion", choices=("maximax", "maximin", "maxent"), default="maximin")
    p.add_argument("--evidence", help="conditioning formula")
    p.add_argument("--no-markov", action="store_true")
    p.add_argument("--json", action="store_true")
    p.add_argument("--no-timing", action="store_true")
    _solver_flags(p)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("mastermind", help="Mastermind-with-lies benchmark")
    p.add_argument("action", choices=("gen", "eval"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", help="comma-separated seeds for eval (default: --seed)")
    p.add_argument("--pegs", type=int, default=3)
    p.add_argument("--colors", type=int, default=4)
    p.add_argument("--count", type=int, default=200, help="accepted puzzles per seed")
    p.add_argument("--fixed-priors", action="store_true", help="give every method the prior [0.3, 0.7]")
    p.add_argument("--methods", help="comma-separated method names")
    p.add_argument("--out", help="output directory (gen: puzzles; eval: accuracy.json)")
    p.add_argument("--puzzles", help="eval: read puzzles from this directory instead of generating")
    p.set_defaults(func=cmd_mastermind)
    return ap


def run(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    args._t0 = time.perf_counter()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", None):
        os.environ.setdefault("OMP_NUM_THREADS", str(args.threads))
    if args.command == "mastermind" and args.action == "gen" and not args.out:
        args.out = f"mastermind-{args.seed}"
    try:
        return args.func(args)
    except ParseError as e:
        for d in e.diagnostics:
            print(f"{getattr(args, 'file', '')}:{d.line}:{d.column}: {d.message}", file=sys.stderr)
        return EXIT_USER
    except CapacityError as e:
        print(f"capacity: {e}", file=sys.stderr)
        return EXIT_CAPACITY
    except (InfeasibleError, InconsistencyError, UndefinedConditionalError) as e:
        print(f"model: {e}", file=sys.stderr)
        return EXIT_MODEL
    except (GroundingError, PreconditionError, LCNError, ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USER
    except FileNotFoundError as e:
        print(f"error: no such file: {e}", file=sys.stderr)
        return EXIT_USER


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
