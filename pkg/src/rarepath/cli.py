"""Command-line entry point.

Subcommands mirror the pipeline stages: ``cfg``, ``selectivity``, ``paths``,
``rare``, ``gen-seeds``, ``fuzz``, ``experiment``.  Every stage writes its
artifact under --out and is deterministic given its flags (all randomness is
seeded via --seed).  Exit status: 0 success, 1 usage error, 2 analysis
failure; failures also emit one JSON diagnostic line on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .bytecode import compile_program
from .cfg import build_cfg, build_eip_cfg, build_ip_cfg, export_dot, graph_to_json
from .concolic import DEFAULT_STEP_BUDGET
from .fuzz import (
    compare_experiment,
    deep_edges,
    fuzz as run_fuzz,
    report_to_json,
    stats_series_csv,
)
from .gce import EmptyCorpusError, gen_seed_corpus, read_corpus_dir, write_corpus
from .minic import MiniCError, parse_file
from .paths import (
    DEFAULT_BOUND,
    DEFAULT_MAX_PATHS,
    PathExplosionError,
    enumerate_paths,
    rare_paths,
)
from .prob import build_prob_cfg, selectivity_report

USAGE_ERROR, ANALYSIS_ERROR = 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _diag("usage", message)
        raise SystemExit(USAGE_ERROR)


def _diag(kind: str, message: str):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message)}) + "\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="rarepath", description=__doc__)
    parser.add_argument("--version", action="version", version=f"rarepath {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("source", help="MiniC source file (.mc)")
        p.add_argument("-L", "--input-length", type=int, default=None,
                       help="override the declared input length")
        p.add_argument("--out", default=".", help="output directory (default: .)")

    p = sub.add_parser("cfg", help="export a control flow graph")
    common(p)
    p.add_argument("--flavor", choices=["procedure", "ip", "eip"], default="eip")
    p.add_argument("--proc", default=None, help="procedure name (flavor=procedure)")
    p.add_argument("--json", action="store_true", help="also write a JSON dump")
    p.add_argument("--probs", action="store_true", help="annotate edges with probability scores")

    p = sub.add_parser("selectivity", help="branch selectivity report")
    common(p)

    p = sub.add_parser("paths", help="enumerate bounded control flow paths")
    common(p)
    _path_flags(p)

    p = sub.add_parser("rare", help="select the k rarest paths")
    common(p)
    _path_flags(p)
    p.add_argument("--k", type=int, default=3)

    p = sub.add_parser("gen-seeds", help="generate the rare-path seed corpus")
    common(p)
    _path_flags(p)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--strategy", choices=["auto", "ip", "iip"], default="auto")
    p.add_argument("--seed", type=int, default=0, help="PRNG seed")

    p = sub.add_parser("fuzz", help="run one coverage-guided fuzzing campaign")
    common(p)
    p.add_argument("--seeds", default=None, help="seed corpus directory (default: one random seed)")
    p.add_argument("--budget", type=int, default=100000, help="execution budget")
    p.add_argument("--seed", type=int, default=0, help="PRNG seed")
    p.add_argument("--sample-every", type=int, default=1000)
    p.add_argument("--target-edge", action="append", default=[],
                   help="SRC:DST edge to time-to-cover (repeatable)")
    p.add_argument("--step-budget", type=int, default=DEFAULT_STEP_BUDGET)

    p = sub.add_parser("experiment", help="random seed vs rare seed comparison")
    common(p)
    _path_flags(p)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--budget", type=int, default=100000)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--split-budget", action="store_true",
                   help="charge the rare arm an analysis share of its budget")
    p.add_argument("--analysis-fraction", type=float, default=0.25)
    return parser


def _path_flags(p):
    p.add_argument("--kind", choices=["intra", "inter", "ii"], default="ii")
    p.add_argument("--bound", type=int, default=DEFAULT_BOUND)
    p.add_argument("--proc", default=None, help="procedure for --kind intra")
    p.add_argument("--max-paths", type=int, default=DEFAULT_MAX_PATHS)
    p.add_argument("--truncate", action="store_true",
                   help="stop at --max-paths instead of failing")
    p.add_argument("--paper-rounding", action="store_true",
                   help="round selectivities to 3 decimals before products")


def _load(args):
    program = parse_file(args.source)
    if args.input_length is not None:
        if args.input_length < 1:
            raise MiniCError("input length must be >= 1")
        program.input_len = args.input_length
    return program


def _outpath(args, name):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def _stem(args):
    return os.path.splitext(os.path.basename(args.source))[0]


def _enumerate(program, args):
    pg = build_prob_cfg(program, build_eip_cfg(program))
    found = enumerate_paths(
        pg,
        kind=args.kind,
        bound=args.bound,
        proc=args.proc,
        max_paths=args.max_paths,
        on_cap="truncate" if args.truncate else "error",
    )
    return pg, found, ("paper" if args.paper_rounding else "exact")


def _path_record(t, mode):
    return {
        "index": t.index,
        "kind": t.kind,
        "vertices": list(t.vertices),
        "length": t.length,
        "probability_decimal": t.probability_decimal(mode),
        "probability_exact": f"{t.prob_exact.numerator}/{t.prob_exact.denominator}",
    }


def cmd_cfg(args) -> int:
    program = _load(args)
    if args.flavor == "procedure":
        name = args.proc or program.entry
        if name not in program.procedures:
            _diag("analysis", f"no procedure named {name!r}")
            return ANALYSIS_ERROR
        graph = build_cfg(program.procedures[name])
        suffix = f"cfg_{name}"
    elif args.flavor == "ip":
        graph = build_ip_cfg(program)
        suffix = "ipcfg"
    else:
        graph = build_eip_cfg(program)
        suffix = "eipcfg"
    probs = None
    if args.probs:
        if args.flavor != "eip":
            _diag("usage", "--probs requires --flavor eip")
            return USAGE_ERROR
        pg = build_prob_cfg(program, graph)
        probs = {e: f"{float(v):.3g}" for e, v in pg.f_exact.items()}
    dot = export_dot(graph, probs)
    path = _outpath(args, f"{_stem(args)}_{suffix}.dot")
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(dot)
    print(path)
    if args.json:
        jpath = _outpath(args, f"{_stem(args)}_{suffix}.json")
        with open(jpath, "w", encoding="utf-8") as handle:
            handle.write(graph_to_json(graph))
        print(jpath)
    return 0


def cmd_selectivity(args) -> int:
    program = _load(args)
    graph = build_eip_cfg(program)
    report = selectivity_report(program, graph)
    path = _outpath(args, f"{_stem(args)}_selectivity.json")
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report, handle, indent=2)
    print(path)
    return 0


def cmd_paths(args) -> int:
    program = _load(args)
    pg, found, mode = _enumerate(program, args)
    path = _outpath(args, f"{_stem(args)}_paths_{args.kind}.jsonl")
    with open(path, "w", encoding="utf-8") as handle:
        for t in found:
            handle.write(json.dumps(_path_record(t, mode)) + "\n")
    print(path)
    print(f"{len(found)} {args.kind} paths (bound {args.bound})")
    return 0


def cmd_rare(args) -> int:
    program = _load(args)
    pg, found, mode = _enumerate(program, args)
    rare = rare_paths(found, args.k, mode=mode, bound=args.bound)
    payload = {
        "kind": args.kind,
        "bound": args.bound,
        "k": args.k,
        "mode": mode,
        "short_of_k": rare.short_of_k,
        "paths": [_path_record(t, mode) for t in rare.paths],
    }
    path = _outpath(args, f"{_stem(args)}_rare.json")
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2)
    print(path)
    for t in rare.paths:
        print(f"path {t.index}: {t.probability_decimal(mode)}")
    return 0


def cmd_gen_seeds(args) -> int:
    program = _load(args)
    pg, found, mode = _enumerate(program, args)
    rare = rare_paths(found, args.k, mode=mode, bound=args.bound)
    corpus = gen_seed_corpus(program, rare, strategy=args.strategy, rng_seed=args.seed)
    seed_dir = os.path.join(args.out, f"{_stem(args)}_seeds")
    names = write_corpus(corpus, seed_dir)
    print(seed_dir)
    for name, rec in zip(names, corpus.seeds):
        print(f"{name}: path {rec.source_path.index} ({rec.achieved})")
    return 0


def _parse_target_edges(specs):
    out = []
    for spec in specs:
        try:
            src, dst = spec.split(":")
            out.append((int(src), int(dst)))
        except ValueError:
            raise MiniCError(f"bad --target-edge {spec!r}, expected SRC:DST") from None
    return out


def cmd_fuzz(args) -> int:
    from .concolic import random_input

    program = _load(args)
    compiled = compile_program(program)
    if args.seeds:
        seeds = read_corpus_dir(args.seeds)
        if not seeds:
            _diag("analysis", f"no .bin seeds in {args.seeds}")
            return ANALYSIS_ERROR
    else:
        seeds = [random_input(program.input_len, args.seed + 1, program.byte_domain)]
    targets = _parse_target_edges(args.target_edge)
    stats = run_fuzz(
        compiled, seeds, args.budget, rng_seed=args.seed,
        sample_every=args.sample_every, targets=targets,
        step_budget=args.step_budget,
    )
    csv_path = _outpath(args, f"{_stem(args)}_fuzz_series.csv")
    with open(csv_path, "w", encoding="utf-8") as handle:
        handle.write(stats_series_csv(stats))
    summary = {
        "executions": stats.executions,
        "covered_edges": stats.covered_edges,
        "total_edges": stats.total_edges,
        "corpus_size": stats.corpus_size,
        "time_to_cover": {f"{s}->{d}": v for (s, d), v in stats.time_to_cover.items()},
    }
    json_path = _outpath(args, f"{_stem(args)}_fuzz_summary.json")
    with open(json_path, "w", encoding="utf-8") as handle:
        json.dump(summary, handle, indent=2)
    print(csv_path)
    print(json_path)
    print(f"covered {stats.covered_edges}/{stats.total_edges} edges "
          f"in {stats.executions} executions")
    return 0


def cmd_experiment(args) -> int:
    program = _load(args)
    report = compare_experiment(
        program,
        budget=args.budget,
        trials=args.trials,
        rng_seed=args.seed,
        kind=args.kind,
        bound=args.bound,
        k=args.k,
        split_budget=args.split_budget,
        analysis_fraction=args.analysis_fraction,
        jobs=args.jobs,
        program_path=args.source,
    )
    csv_path = _outpath(args, f"{_stem(args)}_experiment.csv")
    with open(csv_path, "w", encoding="utf-8") as handle:
        handle.write(report.to_csv())
    json_path = _outpath(args, f"{_stem(args)}_experiment.json")
    with open(json_path, "w", encoding="utf-8") as handle:
        handle.write(report_to_json(report))
    print(csv_path)
    print(json_path)
    print(
        f"mean covered edges: rare {report.summary['mean_covered_rare']:.1f} "
        f"vs random {report.summary['mean_covered_random']:.1f} "
        f"({report.summary['rare_paired_wins']}/{report.trials} paired wins)"
    )
    return 0


_COMMANDS = {
    "cfg": cmd_cfg,
    "selectivity": cmd_selectivity,
    "paths": cmd_paths,
    "rare": cmd_rare,
    "gen-seeds": cmd_gen_seeds,
    "fuzz": cmd_fuzz,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except MiniCError as exc:
        _diag("minic", exc)
        return USAGE_ERROR
    except FileNotFoundError as exc:
        _diag("io", exc)
        return USAGE_ERROR
    except PathExplosionError as exc:
        _diag("analysis", exc)
        return ANALYSIS_ERROR
    except EmptyCorpusError as exc:
        _diag("analysis", exc)
        return ANALYSIS_ERROR
    except (ValueError, RuntimeError) as exc:
        _diag("analysis", exc)
        return ANALYSIS_ERROR


if __name__ == "__main__":
    sys.exit(main())
