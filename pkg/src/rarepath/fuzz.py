"""Deterministic coverage-guided mutation fuzzer and the seed-set experiment.

The campaign loop is the classic one: pick a corpus entry round-robin, apply
one mutation (byte flip, byte replace, insert, delete, splice; chosen
uniformly by a seeded PRNG), execute, and keep the mutant iff it covered a
new EIP-CFG edge.  Budgets are execution counts, not wall-clock, so a
campaign is a pure function of (program, seeds, budget, rng_seed).

``compare_experiment`` reruns the core comparison at desk scale: one
campaign from a single random seed versus one from the rare-path seed
corpus, per trial, with paired PRNG seeds.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import backend as backend_mod
from .bytecode import Compiled, compile_program
from .concolic import DEFAULT_STEP_BUDGET, random_input
from .gce import SeedCorpus, gen_seed_corpus
from .minic import Program, parse_file
from .paths import enumerate_paths, rare_paths
from .prob import build_prob_cfg

DEFAULT_SAMPLE_EVERY = 1000


@dataclass
class CoverageMap:
    counts: dict  # (src, dst) -> hit count

    @property
    def covered_edges(self) -> int:
        return sum(1 for c in self.counts.values() if c > 0)


@dataclass
class FuzzStats:
    executions: int
    covered_edges: int
    total_edges: int
    corpus_size: int
    series: list  # (executions, covered edges), non-decreasing
    time_to_cover: dict  # (src, dst) -> execution count or None
    coverage: CoverageMap


def _edge_ids(compiled: Compiled, targets) -> np.ndarray:
    index = {e: i for i, e in enumerate(compiled.edge_list)}
    ids = []
    for edge in targets or ():
        if tuple(edge) not in index:
            raise ValueError(f"target edge {edge} not in graph")
        ids.append(index[tuple(edge)])
    return np.asarray(ids, dtype=np.int64)


def run_coverage(compiled: Compiled, data: bytes, step_budget: int = DEFAULT_STEP_BUDGET,
                 backend=None) -> CoverageMap:
    """Edge coverage of a single execution."""
    vm = backend or backend_mod.get_backend()
    from .concolic import pad_input

    inp = np.frombuffer(pad_input(data, compiled.input_len), dtype=np.uint8).copy()
    hits = np.zeros(compiled.n_edges, dtype=np.int64)
    slots = np.zeros(compiled.total_slots, dtype=np.int64)
    depth = compiled.max_depth + 1
    vm.run_cov(
        *compiled.vm_args(), *compiled.edge_args(),
        inp, step_budget, hits, slots,
        np.zeros(depth, dtype=np.int64), np.zeros(depth, dtype=np.int64),
        np.zeros(depth, dtype=np.int64),
    )
    return CoverageMap(counts={e: int(hits[i]) for i, e in enumerate(compiled.edge_list)})


def fuzz(
    compiled: Compiled,
    seeds: list,
    budget: int,
    rng_seed: int = 0,
    sample_every: int = DEFAULT_SAMPLE_EVERY,
    targets=(),
    step_budget: int = DEFAULT_STEP_BUDGET,
    backend=None,
) -> FuzzStats:
    """One deterministic fuzzing campaign. ``seeds`` is a list of byte strings."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if not seeds:
        raise ValueError("the seed corpus must not be empty")
    vm = backend or backend_mod.get_backend()
    L = compiled.input_len
    seed_arr = np.zeros((len(seeds), L), dtype=np.uint8)
    seed_lens = np.zeros(len(seeds), dtype=np.int64)
    for i, s in enumerate(seeds):
        s = bytes(s)[:L]
        seed_arr[i, : len(s)] = np.frombuffer(s, dtype=np.uint8)
        seed_lens[i] = len(s)
    target_ids = _edge_ids(compiled, targets)
    execs, covered, hits, sx, sy, n_series, corpus_n, ttc = vm.fuzz_campaign(
        *compiled.vm_args(), *compiled.edge_args(),
        compiled.n_edges, seed_arr, seed_lens, budget, rng_seed, sample_every,
        target_ids, step_budget, compiled.byte_domain,
    )
    series = [(int(sx[i]), int(sy[i])) for i in range(n_series)]
    time_to_cover = {
        tuple(edge): (int(ttc[i]) if ttc[i] >= 0 else None)
        for i, edge in enumerate(targets or ())
    }
    return FuzzStats(
        executions=int(execs),
        covered_edges=int(covered),
        total_edges=compiled.n_edges,
        corpus_size=int(corpus_n),
        series=series,
        time_to_cover=time_to_cover,
        coverage=CoverageMap(counts={e: int(hits[i]) for i, e in enumerate(compiled.edge_list)}),
    )


def stats_series_csv(stats: FuzzStats) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["execs", "covered_edges"])
    for execs, covered in stats.series:
        writer.writerow([execs, covered])
    return buf.getvalue()


def deep_edges(pg) -> list:
    """True edges of branches on call-return values: the 'go deeper' edges.

    These are the branches the probability analysis could not count (their
    condition tests a procedure result), which is where the interesting
    post-check functionality hides in scanners like the bundled example.
    """
    out = []
    g = pg.graph
    for vid in g.branch_vertices():
        sel = pg.selectivities.get(vid)
        if sel is not None and not sel.countable and vid in pg.dep.input_dependent:
            out.append((vid, g.succ[vid][0]))
    return out


# ---------------------------------------------------------------------------
# Experiment: random seed vs rare-path seed corpus
# ---------------------------------------------------------------------------

@dataclass
class TrialResult:
    trial: int
    arm: str  # "random" | "rare"
    rng_seed: int
    executions: int
    covered_edges: int
    target_cover: dict  # edge -> exec or None


@dataclass
class ExperimentReport:
    trials: int
    budget: int
    rare_budget: int
    seed_corpus: list  # byte strings used for the rare arm
    targets: list
    rows: list  # TrialResult
    summary: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        header = ["trial", "arm", "rng_seed", "executions", "covered_edges"]
        header += [f"ttc_{s}_{d}" for s, d in self.targets]
        writer.writerow(header)
        for row in self.rows:
            record = [row.trial, row.arm, row.rng_seed, row.executions, row.covered_edges]
            record += [row.target_cover.get(tuple(t), "") for t in self.targets]
            writer.writerow(record)
        return buf.getvalue()


def _campaign(args):
    (path, byte_domain, seeds, budget, rng_seed, targets, step_budget) = args
    program = parse_file(path, byte_domain)
    compiled = compile_program(program)
    stats = fuzz(compiled, seeds, budget, rng_seed=rng_seed, targets=targets,
                 step_budget=step_budget)
    return stats.covered_edges, stats.executions, stats.time_to_cover


def compare_experiment(
    program: Program,
    budget: int,
    trials: int,
    rng_seed: int = 0,
    kind: str = "ii",
    bound: int = 60,
    k: int = 3,
    targets: Optional[list] = None,
    split_budget: bool = False,
    analysis_fraction: float = 0.25,
    jobs: int = 1,
    program_path: Optional[str] = None,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> ExperimentReport:
    """Paired campaigns: a single random seed vs the rare-path seed corpus.

    With ``split_budget`` the rare arm gives up ``analysis_fraction`` of its
    execution budget, mirroring an analysis-time/fuzzing-time split; by
    default both arms get the full budget.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    compiled = compile_program(program)
    pg = build_prob_cfg(program, compiled.graph)
    all_paths = enumerate_paths(pg, kind=kind, bound=bound)
    rare = rare_paths(all_paths, k, mode="exact", bound=bound)
    corpus = gen_seed_corpus(program, rare, rng_seed=rng_seed, compiled=compiled)
    rare_seeds = [rec.input for rec in corpus.seeds]
    if targets is None:
        targets = deep_edges(pg)
    rare_budget = int(budget * (1 - analysis_fraction)) if split_budget else budget

    tasks = []
    for t in range(trials):
        trial_seed = rng_seed + 1000 * (t + 1)
        random_seed_input = random_input(program.input_len, trial_seed + 1, program.byte_domain)
        tasks.append(("random", t, trial_seed, [random_seed_input], budget))
        tasks.append(("rare", t, trial_seed, rare_seeds, rare_budget))

    rows = []
    if jobs > 1 and program_path:
        packed = [
            (program_path, program.byte_domain, seeds, b, ts, targets, step_budget)
            for (_arm, _t, ts, seeds, b) in tasks
        ]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_campaign, packed))
        for (arm, t, ts, _seeds, b), (covered, execs, ttc) in zip(tasks, outcomes):
            rows.append(TrialResult(t, arm, ts, execs, covered, ttc))
    else:
        for arm, t, ts, seeds, b in tasks:
            stats = fuzz(compiled, seeds, b, rng_seed=ts, targets=targets,
                         step_budget=step_budget)
            rows.append(
                TrialResult(t, arm, ts, stats.executions, stats.covered_edges,
                            stats.time_to_cover)
            )

    random_rows = [r for r in rows if r.arm == "random"]
    rare_rows = [r for r in rows if r.arm == "rare"]
    paired_wins = sum(
        1 for a, b in zip(rare_rows, random_rows) if a.covered_edges > b.covered_edges
    )
    summary = {
        "trials": trials,
        "budget": budget,
        "rare_budget": rare_budget,
        "mean_covered_random": float(np.mean([r.covered_edges for r in random_rows])),
        "mean_covered_rare": float(np.mean([r.covered_edges for r in rare_rows])),
        "rare_paired_wins": paired_wins,
        "seed_corpus_size": len(rare_seeds),
        "targets": [list(t) for t in targets],
        "target_covered_trials": {
            f"{s}->{d}": {
                "random": sum(1 for r in random_rows if r.target_cover.get((s, d)) is not None),
                "rare": sum(1 for r in rare_rows if r.target_cover.get((s, d)) is not None),
            }
            for s, d in targets
        },
    }
    return ExperimentReport(
        trials=trials,
        budget=budget,
        rare_budget=rare_budget,
        seed_corpus=rare_seeds,
        targets=[tuple(t) for t in targets],
        rows=rows,
        summary=summary,
    )


def report_to_json(report: ExperimentReport) -> str:
    return json.dumps(report.summary, indent=2)
