"""Control-flow graphs for MiniC programs.

Three flavors share one vertex universe:

* ``procedure`` -- one procedure's CFG; each call is a call / return-site
  vertex pair joined by a direct edge.
* ``ip`` -- the whole-program inter-procedural graph: call vertices are wired
  to callee entries, callee exits back to every return site, and the direct
  call->return-site edges are removed.  Adds the global entry/exit vertices.
* ``eip`` -- the ip graph plus the call->return-site shortcut edges added
  back, so paths may skip a callee's body.

Vertex numbering is deterministic (source order, entry first, exit last per
procedure); branch successors are ordered true edge first, call successors
shortcut first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .minic import (
    Assign,
    AtomicCond,
    Block,
    CallStmt,
    CurAssign,
    Decl,
    If,
    Procedure,
    Program,
    Return,
    While,
)

ENTRY, EXIT = "entry", "exit"
BASIC, BRANCH, CALL, RETURN_SITE = "basic", "branch", "call", "return_site"
ENTRY_GLOBAL, EXIT_GLOBAL = "entry_global", "exit_global"

EXECUTABLE_KINDS = frozenset({BASIC, BRANCH, CALL, RETURN_SITE})

# Successor ordering: true before false, shortcut before callee entry.
_LABEL_ORDER = {"T": 0, "skip": 0, "": 1, "ret": 1, "F": 2, "call": 2}


@dataclass
class Vertex:
    id: int
    kind: str
    proc: Optional[str] = None
    stmts: tuple = ()
    cond: Optional[AtomicCond] = None
    callee: Optional[str] = None
    site: Optional[int] = None
    ret_target: Optional[str] = None
    args: tuple = ()
    loop_bound: Optional[int] = None

    @property
    def is_executable(self) -> bool:
        return self.kind in EXECUTABLE_KINDS

    def label(self) -> str:
        if self.kind == BRANCH:
            return str(self.cond)
        if self.kind == CALL:
            pre = "; ".join(_stmt_text(s) for s in self.stmts)
            call = f"call {self.callee}()" if self.ret_target is None else f"{self.ret_target} = {self.callee}()"
            return f"{pre}; {call}" if pre else call
        if self.kind == RETURN_SITE:
            return f"ret-site {self.callee}"
        if self.kind == BASIC:
            return "; ".join(_stmt_text(s) for s in self.stmts) or "nop"
        if self.kind in (ENTRY, EXIT):
            return f"{self.kind}-{self.proc}"
        return self.kind.replace("_", "-")


def _stmt_text(stmt) -> str:
    if isinstance(stmt, Assign):
        return f"{stmt.target} = {stmt.value}"
    if isinstance(stmt, CurAssign):
        return f"cur = {stmt.value}"
    if isinstance(stmt, Return):
        return "return" if stmt.value is None else f"return {stmt.value}"
    return str(stmt)


@dataclass
class CfGraph:
    flavor: str
    vertices: dict = field(default_factory=dict)
    succ: dict = field(default_factory=dict)
    labels: dict = field(default_factory=dict)  # (src, dst) -> edge label
    entry: int = 0
    exit: int = 0
    proc_entry: dict = field(default_factory=dict)
    proc_exit: dict = field(default_factory=dict)
    retsite_of_call: dict = field(default_factory=dict)

    def edges(self):
        """Canonical edge order: by source id, then successor order."""
        for src in sorted(self.succ):
            for dst in self.succ[src]:
                yield src, dst

    def n_edges(self) -> int:
        return sum(len(s) for s in self.succ.values())

    def successors(self, v: int):
        return self.succ.get(v, [])

    def branch_targets(self, v: int):
        """(true target, false target) of a branch vertex."""
        outs = self.succ[v]
        if self.vertices[v].kind != BRANCH or len(outs) != 2:
            raise ValueError(f"vertex {v} is not a two-way branch")
        return outs[0], outs[1]

    def branch_vertices(self, proc: Optional[str] = None):
        return [
            v.id
            for v in sorted(self.vertices.values(), key=lambda x: x.id)
            if v.kind == BRANCH and (proc is None or v.proc == proc)
        ]


class _IdAlloc:
    def __init__(self, start: int = 0):
        self.n = start

    def take(self) -> int:
        v = self.n
        self.n += 1
        return v


class _ProcBuilder:
    """Emits one procedure's vertices and labeled skeleton edges."""

    def __init__(self, proc: Procedure, alloc: _IdAlloc, site_alloc: _IdAlloc):
        self.proc = proc
        self.alloc = alloc
        self.site_alloc = site_alloc
        self.vertices = []
        self.edges = []  # (src, dst, label)
        self.returns = []
        self.calls = []  # (call vertex id, retsite id, callee)
        self.memo = {}

    def new(self, kind, **kw) -> Vertex:
        v = Vertex(id=self.alloc.take(), kind=kind, proc=self.proc.name, **kw)
        self.vertices.append(v)
        return v

    def edge(self, src: int, dst: int, label: str = ""):
        self.edges.append((src, dst, label))

    def patch(self, dangling, target: int):
        for vid, slot in dangling:
            self.edge(vid, target, {"next": "", "true": "T", "false": "F"}[slot])

    def build(self):
        entry = self.new(ENTRY)
        first, dangling = self.emit_block(self.proc.body)
        exit_v = self.new(EXIT)
        if first is None:
            self.edge(entry.id, exit_v.id)
        else:
            self.edge(entry.id, first)
            self.patch(dangling, exit_v.id)
        for vid in self.returns:
            self.edge(vid, exit_v.id)
        return entry.id, exit_v.id

    def emit_block(self, block: Block):
        """Returns (first vertex id or None, dangling edge slots).

        Desugared short-circuit chains share arm blocks by object identity;
        the memo makes the shared arm a single subgraph.
        """
        if id(block) in self.memo:
            return self.memo[id(block)], []
        first = None
        pending = []
        buffer = []
        terminated = False

        def attach(vid):
            nonlocal first, pending
            if first is None:
                first = vid
                if block.stmts:
                    self.memo[id(block)] = vid
            self.patch(pending, vid)
            pending = []

        def flush_basic():
            nonlocal buffer
            if buffer:
                v = self.new(BASIC, stmts=tuple(buffer))
                buffer = []
                attach(v.id)
                return [(v.id, "next")]
            return None

        for stmt in block.stmts:
            if terminated:
                break  # unreachable after a return or all-returning branch
            if isinstance(stmt, Decl):
                continue
            if isinstance(stmt, (Assign, CurAssign)):
                buffer.append(stmt)
                continue
            if isinstance(stmt, CallStmt):
                v = self.new(
                    CALL,
                    stmts=tuple(buffer),
                    callee=stmt.callee,
                    site=self.site_alloc.take(),
                    ret_target=stmt.target,
                    args=tuple(stmt.args),
                )
                buffer = []
                attach(v.id)
                rs = self.new(RETURN_SITE, callee=stmt.callee, site=v.site)
                self.edge(v.id, rs.id, "skip")
                self.calls.append((v.id, rs.id, stmt.callee))
                pending = [(rs.id, "next")]
            elif isinstance(stmt, If):
                p = flush_basic()
                if p is not None:
                    pending = p
                v = self.new(BRANCH, cond=stmt.cond)
                attach(v.id)
                tfirst, tdang = self.emit_block(stmt.then)
                efirst, edang = self.emit_block(stmt.orelse)
                if tfirst is None and efirst is None:
                    # keep the two arms distinguishable as vertex sequences
                    synth = self.new(BASIC, stmts=())
                    self.edge(v.id, synth.id, "T")
                    pending = [(synth.id, "next"), (v.id, "false")]
                else:
                    if tfirst is not None:
                        self.edge(v.id, tfirst, "T")
                    if efirst is not None:
                        self.edge(v.id, efirst, "F")
                    pending = list(tdang) + list(edang)
                    if tfirst is None:
                        pending.append((v.id, "true"))
                    if efirst is None:
                        pending.append((v.id, "false"))
                if not pending:
                    terminated = True
            elif isinstance(stmt, While):
                p = flush_basic()
                if p is not None:
                    pending = p
                v = self.new(BRANCH, cond=stmt.cond, loop_bound=stmt.bound)
                attach(v.id)
                bfirst, bdang = self.emit_block(stmt.body)
                if bfirst is None:
                    self.edge(v.id, v.id, "T")
                else:
                    self.edge(v.id, bfirst, "T")
                    self.patch(bdang, v.id)
                pending = [(v.id, "false")]
            elif isinstance(stmt, Return):
                v = self.new(BASIC, stmts=tuple(buffer + [stmt]))
                buffer = []
                attach(v.id)
                self.returns.append(v.id)
                pending = []
                terminated = True
            else:
                raise TypeError(f"unexpected statement {stmt!r}")

        if not terminated:
            p = flush_basic()
            if p is not None:
                pending = p
        return first, pending


def _assemble(flavor, vertices, edges, entry, exit_v, proc_entry=None, proc_exit=None, retsites=None) -> CfGraph:
    g = CfGraph(
        flavor=flavor,
        vertices={v.id: v for v in vertices},
        entry=entry,
        exit=exit_v,
        proc_entry=dict(proc_entry or {}),
        proc_exit=dict(proc_exit or {}),
        retsite_of_call=dict(retsites or {}),
    )
    buckets = {}
    for idx, (src, dst, label) in enumerate(edges):
        key = (src, dst)
        if key in g.labels:
            raise ValueError(f"parallel edge {src}->{dst}")
        g.labels[key] = label
        buckets.setdefault(src, []).append((_LABEL_ORDER[label], idx, dst))
    for src, outs in buckets.items():
        outs.sort()
        g.succ[src] = [dst for _, _, dst in outs]
    for v in g.vertices:
        g.succ.setdefault(v, [])
    return g


def build_cfg(proc: Procedure) -> CfGraph:
    """Per Def-1 style CFG of one procedure, with call->return-site edges."""
    builder = _ProcBuilder(proc, _IdAlloc(), _IdAlloc())
    entry, exit_v = builder.build()
    g = _assemble(
        "procedure",
        builder.vertices,
        builder.edges,
        entry,
        exit_v,
        {proc.name: entry},
        {proc.name: exit_v},
        {c: r for c, r, _ in builder.calls},
    )
    validate(g)
    return g


def _build_program(program: Program, include_skip: bool) -> CfGraph:
    alloc = _IdAlloc()
    site_alloc = _IdAlloc()
    entry_global = Vertex(id=alloc.take(), kind=ENTRY_GLOBAL)
    vertices = [entry_global]
    edges = []
    proc_entry, proc_exit = {}, {}
    calls = []
    for proc in program.procedures.values():
        builder = _ProcBuilder(proc, alloc, site_alloc)
        entry, exit_v = builder.build()
        proc_entry[proc.name] = entry
        proc_exit[proc.name] = exit_v
        vertices.extend(builder.vertices)
        for src, dst, label in builder.edges:
            if label == "skip" and not include_skip:
                continue
            edges.append((src, dst, label))
        calls.extend(builder.calls)
    exit_global = Vertex(id=alloc.take(), kind=EXIT_GLOBAL)
    vertices.append(exit_global)

    edges.append((entry_global.id, proc_entry[program.entry], ""))
    edges.append((proc_exit[program.entry], exit_global.id, ""))
    for call_v, retsite, callee in calls:
        edges.append((call_v, proc_entry[callee], "call"))
        edges.append((proc_exit[callee], retsite, "ret"))

    g = _assemble(
        "eip" if include_skip else "ip",
        vertices,
        edges,
        entry_global.id,
        exit_global.id,
        proc_entry,
        proc_exit,
        {c: r for c, r, _ in calls},
    )
    validate(g)
    return g


def build_ip_cfg(program: Program) -> CfGraph:
    """Inter-procedural CFG: callees wired in, no shortcut edges."""
    return _build_program(program, include_skip=False)


def build_eip_cfg(program: Program) -> CfGraph:
    """Extended inter-procedural CFG: ip edges plus call->return-site shortcuts."""
    return _build_program(program, include_skip=True)


def validate(g: CfGraph):
    """Structural invariants shared by all flavors."""
    indeg = {v: 0 for v in g.vertices}
    for _, dst in g.edges():
        indeg[dst] += 1
    for v in g.vertices.values():
        outs = g.succ[v.id]
        if v.kind == BRANCH:
            if len(outs) != 2:
                raise AssertionError(f"branch {v.id} has out-degree {len(outs)}")
            if g.labels[(v.id, outs[0])] != "T" or g.labels[(v.id, outs[1])] != "F":
                raise AssertionError(f"branch {v.id} successors not ordered T,F")
        if v.id == g.entry and indeg[v.id] != 0:
            raise AssertionError("entry vertex has incoming edges")
        if v.id == g.exit and outs:
            raise AssertionError("exit vertex has outgoing edges")
        if v.kind == CALL and g.flavor == "eip" and len(outs) != 2:
            raise AssertionError(f"call vertex {v.id} has out-degree {len(outs)} in eip")
    # every vertex lies on some entry->exit walk of its own procedure (an
    # uncalled procedure is globally dead but still internally connected)
    sources = {g.entry, *g.proc_entry.values()}
    sinks = {g.exit, *g.proc_exit.values()}
    reach_fwd = _reachable_multi(g.succ, sources)
    pred = {v: [] for v in g.vertices}
    for src, dst in g.edges():
        pred[dst].append(src)
    reach_bwd = _reachable_multi(pred, sinks)
    stranded = set(g.vertices) - (reach_fwd & reach_bwd)
    if stranded:
        raise AssertionError(f"vertices not on any entry->exit path: {sorted(stranded)}")


def _reachable_multi(adj, starts):
    seen = set(starts)
    stack = list(starts)
    while stack:
        v = stack.pop()
        for w in adj.get(v, []):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def export_dot(g: CfGraph, edge_probs: Optional[dict] = None) -> str:
    """Deterministic DOT text; branch edges labeled T/F, shortcuts dashed."""
    shapes = {
        BRANCH: "diamond",
        CALL: "box",
        RETURN_SITE: "box",
        ENTRY: "ellipse",
        EXIT: "ellipse",
        ENTRY_GLOBAL: "doublecircle",
        EXIT_GLOBAL: "doublecircle",
        BASIC: "box",
    }
    lines = [f"digraph {g.flavor} {{"]
    for vid in sorted(g.vertices):
        v = g.vertices[vid]
        label = v.label().replace('"', "'")
        lines.append(f'  n{vid} [label="{vid}: {label}", shape={shapes[v.kind]}];')
    for src, dst in g.edges():
        label = g.labels[(src, dst)]
        attrs = []
        text = label if label in ("T", "F") else ""
        if edge_probs is not None and (src, dst) in edge_probs:
            prob = edge_probs[(src, dst)]
            text = f"{text} {prob}".strip()
        if text:
            attrs.append(f'label="{text}"')
        if label == "skip" and g.flavor == "eip":
            attrs.append("style=dashed")
        suffix = f" [{', '.join(attrs)}]" if attrs else ""
        lines.append(f"  n{src} -> n{dst}{suffix};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_json(g: CfGraph, edge_probs: Optional[dict] = None) -> str:
    payload = {
        "flavor": g.flavor,
        "vertices": [
            {"id": vid, "kind": g.vertices[vid].kind, "label": g.vertices[vid].label()}
            for vid in sorted(g.vertices)
        ],
        "edges": [
            [src, dst, g.labels[(src, dst)]]
            + ([float(edge_probs[(src, dst)])] if edge_probs and (src, dst) in edge_probs else [])
            for src, dst in g.edges()
        ],
    }
    return json.dumps(payload, indent=2)
