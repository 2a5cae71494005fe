"""Bounded path enumeration over the probabilistic EIP graph.

Three path kinds share one depth-first traversal (true edge first, shortcut
edge before callee entry):

* ``intra`` -- paths of one procedure's own CFG: calls are always skipped via
  the shortcut edge and callee bodies are never entered;
* ``inter`` -- whole-program paths that never use a shortcut edge, so every
  call encountered is entered.  Paths that meet no call vertex at all are
  classified intra-only and are not reported as inter paths (programs without
  any call statement keep their paths);
* ``ii`` -- whole-program paths free to enter or skip each call.

Call/return matching: a callee exit may only continue to the return site of
the most recent unreturned call, so context-insensitive exit->return-site
edges never produce mismatched walks.

A path's length is its number of executable vertices (basic, branch, call,
return site); the entry/exit bookkeeping vertices do not count toward the
depth bound.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .cfg import CALL, EXIT, EXIT_GLOBAL, CfGraph
from .prob import ProbCfg

DEFAULT_BOUND = 60
DEFAULT_MAX_PATHS = 10**6

KINDS = ("intra", "inter", "ii")


class PathExplosionError(RuntimeError):
    def __init__(self, cap: int):
        self.cap = cap
        super().__init__(
            f"path enumeration exceeded the cap of {cap} paths; "
            "raise --max-paths or lower --bound"
        )


class _CapReached(Exception):
    pass


@dataclass(frozen=True)
class CfPath:
    index: int
    kind: str
    vertices: tuple
    prob_exact: Fraction
    prob_paper: Fraction
    length: int  # executable vertex count

    def probability(self, mode: str = "exact") -> Fraction:
        return self.prob_exact if mode == "exact" else self.prob_paper

    def probability_decimal(self, mode: str = "exact") -> str:
        return format_probability(self.probability(mode))

    def sort_key(self, mode: str = "exact"):
        return (self.probability(mode), self.length, self.vertices)


@dataclass
class RareSet:
    paths: list
    k: int
    bound: int
    mode: str
    short_of_k: bool = False  # fewer paths existed than requested


def format_probability(value: Fraction) -> str:
    return f"{float(value):.2e}"


def enumerate_paths(
    pg: ProbCfg,
    kind: str = "ii",
    bound: int = DEFAULT_BOUND,
    proc: Optional[str] = None,
    max_paths: int = DEFAULT_MAX_PATHS,
    on_cap: str = "error",
) -> list:
    """All paths of the requested kind with length <= bound, in DFS order."""
    if kind not in KINDS:
        raise ValueError(f"unknown path kind {kind!r}")
    if bound < 2:
        raise ValueError("bound must be >= 2")
    if on_cap not in ("error", "truncate"):
        raise ValueError("on_cap must be 'error' or 'truncate'")
    g = pg.graph
    if proc is None:
        proc = g.vertices[g.succ[g.entry][0]].proc if g.flavor != "procedure" else None
        if proc is None:
            proc = next(iter(g.proc_entry))
    if kind == "intra":
        start, goal = g.proc_entry[proc], g.proc_exit[proc]
    else:
        start, goal = g.entry, g.exit

    has_calls = any(v.kind == CALL for v in g.vertices.values())
    results = []
    path = [start]
    call_stack = []

    def successors(v: int):
        vert = g.vertices[v]
        if kind != "intra" and vert.kind == EXIT and v != goal:
            if call_stack:
                return [call_stack[-1]]
            return [d for d in g.succ[v] if g.vertices[d].kind == EXIT_GLOBAL]
        out = []
        for dst in g.succ[v]:
            label = g.labels[(v, dst)]
            if kind == "inter" and label == "skip":
                continue
            if kind == "intra" and g.vertices[dst].proc != proc:
                continue
            out.append(dst)
        return out

    def emit():
        if kind == "inter" and has_calls and not any(g.vertices[x].kind == CALL for x in path):
            return  # call-free walks are intra paths, not inter paths
        if len(results) >= max_paths:
            raise _CapReached()
        results.append(tuple(path))

    def dfs(v: int, exec_count: int, prob_exact: Fraction, prob_paper: Fraction):
        if v == goal:
            emit()
            return
        for dst in successors(v):
            dvert = g.vertices[dst]
            d_exec = 1 if dvert.is_executable else 0
            if exec_count + d_exec > bound:
                continue
            entered_call = g.vertices[v].kind == CALL and g.labels[(v, dst)] == "call"
            left_callee = (
                g.vertices[v].kind == EXIT and v != goal and call_stack and dst == call_stack[-1]
            )
            if entered_call:
                call_stack.append(g.retsite_of_call[v])
            elif left_callee:
                popped = call_stack.pop()
            path.append(dst)
            try:
                dfs(
                    dst,
                    exec_count + d_exec,
                    prob_exact * pg.f_exact[(v, dst)],
                    prob_paper * pg.f_paper[(v, dst)],
                )
            finally:
                path.pop()
                if entered_call:
                    call_stack.pop()
                elif left_callee:
                    call_stack.append(popped)

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 8 * bound + 1000))
    try:
        start_exec = 1 if g.vertices[start].is_executable else 0
        dfs(start, start_exec, Fraction(1), Fraction(1))
    except _CapReached:
        if on_cap == "error":
            raise PathExplosionError(max_paths) from None
    finally:
        sys.setrecursionlimit(old_limit)

    return [
        CfPath(
            index=i,
            kind=kind,
            vertices=vertices,
            prob_exact=path_probability(pg, vertices, "exact"),
            prob_paper=path_probability(pg, vertices, "paper"),
            length=sum(1 for v in vertices if g.vertices[v].is_executable),
        )
        for i, vertices in enumerate(results)
    ]


def path_probability(pg: ProbCfg, vertices, mode: str = "exact") -> Fraction:
    """Product of edge scores along consecutive vertices of a path."""
    table = pg.f_exact if mode == "exact" else pg.f_paper
    prob = Fraction(1)
    for src, dst in zip(vertices, vertices[1:]):
        if (src, dst) not in table:
            raise ValueError(f"edge {src}->{dst} not in graph")
        prob *= table[(src, dst)]
    return prob


def rare_paths(paths, k: int, mode: str = "exact", bound: int = DEFAULT_BOUND) -> RareSet:
    """The k lowest-probability paths, deterministically tie-broken.

    Ties are broken by ascending probability, then shorter length, then
    lexicographically smaller vertex sequence.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(paths, key=lambda p: p.sort_key(mode))
    return RareSet(
        paths=ranked[:k],
        k=k,
        bound=bound,
        mode=mode,
        short_of_k=len(ranked) < k,
    )
