"""Path-guided concolic execution and rare-seed corpus generation.

Two drivers turn a rare path into a concrete input:

* ``ip_gce`` walks a full inter-procedural target path and the concrete
  trace position by position; at the first divergence it negates the last
  common branch, re-solves and re-executes.  An infeasible negation aborts
  the walk and flags the path, which is how statically-rare-but-infeasible
  paths get filtered out of the corpus.
* ``iip_gce`` guides toward a target that may skip callee bodies, so traces
  can never equal it vertex for vertex.  It makes a single pass over the
  concrete trace's branches, negating those that differ from the target
  (taking the complementary side, or having no counterpart in the target at
  the same occurrence), and keeps a negation only if the ordered overlap
  with the target strictly improves.

Overlap is the longest-common-subsequence length of the two vertex-id
sequences.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

from .bytecode import Compiled, compile_program
from .cfg import BRANCH, CALL
from .concolic import (
    DEFAULT_STEP_BUDGET,
    ExecTrace,
    execute,
    is_feasible,
    negated_path,
    random_input,
    solve,
)
from .minic import Program
from .paths import CfPath, RareSet

ACHIEVED_EXACT = "exact"
ACHIEVED_PARTIAL = "partial"
ACHIEVED_INFEASIBLE = "infeasible-filtered"


class EmptyCorpusError(RuntimeError):
    """Every rare path was filtered as infeasible; no seeds to emit."""


@dataclass
class SeedRecord:
    input: bytes
    source_path: CfPath
    achieved: str
    overlap: Optional[int]
    iterations: int
    progress: tuple = ()  # per accepted step: matched prefix (ip) / overlap (iip)


@dataclass
class SeedCorpus:
    records: list  # one per rare path, in rare-set order
    seeds: list = field(default_factory=list)  # deduplicated, feasible only


def lcs_length(a, b) -> int:
    """Longest common subsequence length of two sequences."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, 1):
            if x == y:
                curr.append(prev[j - 1] + 1)
            else:
                curr.append(max(prev[j], curr[-1]))
        prev = curr
    return prev[-1]


def overlap(t_c: ExecTrace, t_r) -> int:
    """Ordered common-vertex count between a trace and a target path."""
    target = t_r.vertices if hasattr(t_r, "vertices") else tuple(t_r)
    return lcs_length(t_c.vertices, target)


def path_uses_shortcut(graph, vertices) -> bool:
    for a, b in zip(vertices, vertices[1:]):
        if graph.vertices[a].kind == CALL and graph.retsite_of_call.get(a) == b:
            return True
    return False


class GceEngine:
    """Shared compilation state and bookkeeping for guided runs."""

    def __init__(self, program: Program, compiled: Optional[Compiled] = None,
                 rng_seed: int = 0, step_budget: int = DEFAULT_STEP_BUDGET):
        self.program = program
        self.compiled = compiled or compile_program(program)
        self.graph = self.compiled.graph
        self.rng_seed = rng_seed
        self.step_budget = step_budget
        self.pc_log = []  # (PathConstraint, is_feasible result), for auditing

    def _initial_input(self, path_index: int) -> bytes:
        seed = self.rng_seed + 7919 * (path_index + 1)
        return random_input(self.program.input_len, seed, self.program.byte_domain)

    def _execute(self, data: bytes) -> ExecTrace:
        return execute(self.compiled, data, self.step_budget)

    def _check(self, pc) -> bool:
        ok = is_feasible(pc, self.program.input_len, self.program.byte_domain)
        self.pc_log.append((pc, ok))
        return ok

    def ip_gce(self, t_r: CfPath) -> SeedRecord:
        """Inter-path guided concolic execution (branch-mismatch negation)."""
        if path_uses_shortcut(self.graph, t_r.vertices):
            raise ValueError("ip_gce expects an inter path (no shortcut edges)")
        data = self._initial_input(t_r.index)
        t_c = self._execute(data)
        target = t_r.vertices
        progress = [_matched_prefix(t_c.vertices, target)]
        iterations = 0
        infeasible = False
        cap = 4 * len(target)
        i = 1
        while i < min(len(t_c.vertices), len(target)) - 1:
            if t_c.vertices[i] != target[i]:
                iterations += 1
                if iterations > cap:
                    break
                pc = negated_path(t_c, i)
                if self._check(pc):
                    data = solve(pc, self.program.input_len, self.program.byte_domain)
                    t_c = self._execute(data)
                    progress.append(_matched_prefix(t_c.vertices, target))
                else:
                    infeasible = True
                    break
            i += 1
        if infeasible:
            achieved = ACHIEVED_INFEASIBLE
        elif t_c.vertices == tuple(target):
            achieved = ACHIEVED_EXACT
        else:
            achieved = ACHIEVED_PARTIAL
        return SeedRecord(
            input=data,
            source_path=t_r,
            achieved=achieved,
            overlap=overlap(t_c, t_r),
            iterations=iterations,
            progress=tuple(progress),
        )

    def iip_gce(self, t_r: CfPath) -> SeedRecord:
        """II-path guided concolic execution (overlap-improving negation)."""
        data = self._initial_input(t_r.index)
        t_c = self._execute(data)
        target = t_r.vertices
        max_overlap = overlap(t_c, t_r)
        max_input = data
        progress = [max_overlap]
        iterations = 0
        cap = 4 * len(target)
        index = 0
        while index < len(t_c.vertices) - 1:
            v = t_c.vertices[index]
            if self.graph.vertices[v].kind == BRANCH and self._differ(t_c.vertices, index, target):
                iterations += 1
                if iterations > cap:
                    break
                pc = negated_path(t_c, index + 1)
                if self._check(pc):
                    data = solve(pc, self.program.input_len, self.program.byte_domain)
                    t_c = self._execute(data)
                    new_overlap = overlap(t_c, t_r)
                    if new_overlap > max_overlap:
                        max_overlap = new_overlap
                        max_input = data
                        progress.append(max_overlap)
                    else:
                        data = max_input
                        t_c = self._execute(data)
            index += 1
        achieved = ACHIEVED_EXACT if max_overlap == len(target) else ACHIEVED_PARTIAL
        return SeedRecord(
            input=max_input,
            source_path=t_r,
            achieved=achieved,
            overlap=max_overlap,
            iterations=iterations,
            progress=tuple(progress),
        )

    def _differ(self, tc_vertices, pos, target) -> bool:
        """True if the target takes the other side of this branch occurrence,
        or contains no occurrence of it at all (branch inside a skipped
        procedure)."""
        v = tc_vertices[pos]
        ordinal = sum(1 for w in tc_vertices[:pos] if w == v)
        seen = 0
        for j, w in enumerate(target):
            if w == v:
                if seen == ordinal:
                    if j + 1 >= len(target):
                        return True
                    return target[j + 1] != tc_vertices[pos + 1]
                seen += 1
        return True


def _matched_prefix(a, b) -> int:
    n = 0
    for x, y in zip(a, b):
        if x != y:
            break
        n += 1
    return n


def gen_seed_corpus(
    program: Program,
    rare: RareSet,
    strategy: str = "auto",
    rng_seed: int = 0,
    compiled: Optional[Compiled] = None,
    step_budget: int = DEFAULT_STEP_BUDGET,
    engine: Optional[GceEngine] = None,
) -> SeedCorpus:
    """Drive GCE over a rare-path set and collect the surviving inputs.

    ``auto`` uses ip_gce for paths that never take a shortcut edge and
    iip_gce otherwise; infeasible-filtered records emit no seed; identical
    inputs are deduplicated (first, i.e. rarest, wins).
    """
    if strategy not in ("auto", "ip", "iip"):
        raise ValueError(f"unknown strategy {strategy!r}")
    if not rare.paths:
        raise ValueError("rare set is empty")
    eng = engine or GceEngine(program, compiled=compiled, rng_seed=rng_seed, step_budget=step_budget)
    records = []
    for path in rare.paths:
        use_ip = strategy == "ip" or (
            strategy == "auto" and not path_uses_shortcut(eng.graph, path.vertices)
        )
        records.append(eng.ip_gce(path) if use_ip else eng.iip_gce(path))
    seeds = []
    seen = set()
    for rec in records:
        if rec.achieved == ACHIEVED_INFEASIBLE:
            continue
        if rec.input in seen:
            continue
        seen.add(rec.input)
        seeds.append(rec)
    if not seeds:
        raise EmptyCorpusError("all rare paths were infeasible; corpus is empty")
    return SeedCorpus(records=records, seeds=seeds)


# ---------------------------------------------------------------------------
# Corpus files
# ---------------------------------------------------------------------------

def write_corpus(corpus: SeedCorpus, out_dir: str) -> list:
    """One raw-bytes file per seed plus a manifest; returns the file names."""
    os.makedirs(out_dir, exist_ok=True)
    names = []
    manifest = []
    for i, rec in enumerate(corpus.seeds):
        name = f"seed_{i:03d}_p{rec.source_path.index}.bin"
        with open(os.path.join(out_dir, name), "wb") as handle:
            handle.write(rec.input)
        names.append(name)
        manifest.append(_manifest_entry(name, rec))
    for rec in corpus.records:
        if rec.achieved == ACHIEVED_INFEASIBLE:
            manifest.append(_manifest_entry(None, rec))
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2)
    return names


def _manifest_entry(name, rec: SeedRecord) -> dict:
    return {
        "file": name,
        "path_index": rec.source_path.index,
        "path_kind": rec.source_path.kind,
        "probability": rec.source_path.probability_decimal("exact"),
        "achieved": rec.achieved,
        "overlap": rec.overlap,
        "iterations": rec.iterations,
        "input_sha1": hashlib.sha1(rec.input).hexdigest() if name else None,
    }


def read_corpus_dir(path: str) -> list:
    """All .bin seed files of a corpus directory, deterministic order."""
    out = []
    for name in sorted(os.listdir(path)):
        if name.endswith(".bin"):
            with open(os.path.join(path, name), "rb") as handle:
                out.append(handle.read())
    return out
