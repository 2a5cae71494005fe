"""Flat bytecode form of a MiniC program, aligned with its EIP-CFG.

The VM walks the graph vertex by vertex: each vertex owns a (possibly empty)
run of register ops plus one terminator.  Executing a program therefore
yields the EIP-CFG vertex sequence directly; calls always enter the callee,
and a callee exit returns to the return site of the innermost pending call.

Frames are slices of one flat slot array: slot 0 holds the return value,
then parameters, declared locals, two branch-operand slots, the argument
staging area, and expression scratch.  Slot tags (const / input byte /
opaque) let the trace VM record branch constraints over concrete input-byte
indices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cfg as cfgmod
from .cfg import CfGraph
from .minic import (
    Assign,
    BinOp,
    ByteRef,
    Const,
    CurAssign,
    CurRef,
    Decl,
    DEFAULT_LOOP_BOUND,
    Program,
    Return,
    Var,
    _walk_stmts,
)

# vertex kinds
VK = {"entry": 0, "exit": 1, "basic": 2, "branch": 3, "call": 4,
      "return_site": 5, "entry_global": 6, "exit_global": 7}

# terminators
T_HALT, T_JMP, T_BRANCH, T_CALL, T_RETPOP = 0, 1, 2, 3, 4

# ops: (code, a, b, c)
OP_LOADI = 0    # slot[a] = b
OP_COPY = 1     # slot[a] = slot[b]
OP_ADD = 2      # slot[a] = slot[b] + slot[c]
OP_SUB = 3      # slot[a] = slot[b] - slot[c]
OP_LOADIN = 4   # slot[a] = in[b + cur*c]  (c: 0 absolute, 1 cursor-relative)
OP_LOADCUR = 5  # slot[a] = cur
OP_SETCUR = 6   # cur = slot[a]

RELOP_CODE = {"eq": 0, "neq": 1, "lt": 2, "le": 3, "gt": 4, "ge": 5}
RELOP_NAME = {v: k for k, v in RELOP_CODE.items()}
# mirrored relop for swapping comparison sides
RELOP_MIRROR = np.array([0, 1, 4, 5, 2, 3], dtype=np.int64)

# constraint kinds recorded by the trace VM
CONS_BYTE_LIT, CONS_BYTE_BYTE, CONS_OPAQUE = 0, 1, 2

# slot tag kinds
TAG_CONST, TAG_BYTE, TAG_OPAQUE = 0, 1, 2


@dataclass
class Compiled:
    program: Program
    graph: CfGraph
    n_vertices: int
    input_len: int
    byte_domain: int
    start: int
    vkind: np.ndarray          # int8[nv]
    vops_lo: np.ndarray        # int32[nv]
    vops_hi: np.ndarray        # int32[nv]
    ops: np.ndarray            # int64[n_ops, 4]
    tkind: np.ndarray          # int8[nv]
    targs: np.ndarray          # int64[nv, 6]
    vframe: np.ndarray         # int64[nv]: frame size of the owning procedure
    main_frame: int
    total_slots: int
    max_depth: int
    # coverage edge tables
    edge_list: list            # canonical (src, dst) order; index = edge id
    n_edges: int
    jump_edge: np.ndarray      # int64[nv]
    br_t_edge: np.ndarray
    br_f_edge: np.ndarray
    call_edge: np.ndarray
    ret_edge: np.ndarray       # indexed by return-site vertex
    retpop_fallback_edge: np.ndarray

    def vm_args(self):
        """Positional argument pack shared by the VM kernels."""
        return (
            self.vkind, self.vops_lo, self.vops_hi, self.ops,
            self.tkind, self.targs, self.vframe,
            self.start, self.input_len, self.total_slots, self.max_depth,
        )

    def edge_args(self):
        return (
            self.jump_edge, self.br_t_edge, self.br_f_edge,
            self.call_edge, self.ret_edge, self.retpop_fallback_edge,
        )


class _FrameLayout:
    """Slot assignment for one procedure."""

    def __init__(self, proc, graph):
        self.var_slot = {}
        next_slot = 1  # slot 0 = return value
        for name in proc.params:
            self.var_slot[name] = next_slot
            next_slot += 1
        for vid, v in graph.vertices.items():
            if v.proc != proc.name:
                continue
            for stmt in v.stmts:
                if isinstance(stmt, Assign) and stmt.target not in self.var_slot:
                    self.var_slot[stmt.target] = next_slot
                    next_slot += 1
            if v.kind == cfgmod.CALL and v.ret_target and v.ret_target not in self.var_slot:
                self.var_slot[v.ret_target] = next_slot
                next_slot += 1
        # walk declarations too, so never-assigned locals still resolve
        for stmt in _walk_stmts(proc.body):
            if isinstance(stmt, Decl) and stmt.name not in self.var_slot:
                self.var_slot[stmt.name] = next_slot
                next_slot += 1
        self.branch_lhs = next_slot
        self.branch_rhs = next_slot + 1
        self.arg_base = next_slot + 2
        self.max_args = max(
            [len(v.args) for v in graph.vertices.values()
             if v.proc == proc.name and v.kind == cfgmod.CALL] or [0]
        )
        self.scratch_base = self.arg_base + self.max_args
        self.max_scratch = 0

    def frame_size(self):
        return self.scratch_base + self.max_scratch


class _Emitter:
    def __init__(self, layout: _FrameLayout):
        self.layout = layout
        self.ops = []
        self.scratch_ptr = 0

    def reset_scratch(self):
        self.scratch_ptr = 0

    def take_scratch(self):
        slot = self.layout.scratch_base + self.scratch_ptr
        self.scratch_ptr += 1
        self.layout.max_scratch = max(self.layout.max_scratch, self.scratch_ptr)
        return slot

    def expr(self, e, dst: int):
        if isinstance(e, Const):
            self.ops.append((OP_LOADI, dst, e.value, 0))
        elif isinstance(e, Var):
            self.ops.append((OP_COPY, dst, self.layout.var_slot[e.name], 0))
        elif isinstance(e, ByteRef):
            self.ops.append((OP_LOADIN, dst, e.offset, 1 if e.cursor_rel else 0))
        elif isinstance(e, CurRef):
            self.ops.append((OP_LOADCUR, dst, 0, 0))
        elif isinstance(e, BinOp):
            a = self.take_scratch()
            self.expr(e.lhs, a)
            b = self.take_scratch()
            self.expr(e.rhs, b)
            self.ops.append(((OP_ADD if e.op == "+" else OP_SUB), dst, a, b))
        else:
            raise TypeError(f"cannot compile expression {e!r}")

    def stmt(self, s):
        self.reset_scratch()
        if isinstance(s, Assign):
            self.expr(s.value, self.layout.var_slot[s.target])
        elif isinstance(s, CurAssign):
            t = self.take_scratch()
            self.expr(s.value, t)
            self.ops.append((OP_SETCUR, t, 0, 0))
        elif isinstance(s, Return):
            if s.value is not None:
                self.expr(s.value, 0)
            # value defaults to the zero-initialized slot 0
        else:
            raise TypeError(f"cannot compile statement {s!r}")


def compile_program(program: Program, graph: CfGraph = None, default_loop_bound: int = DEFAULT_LOOP_BOUND) -> Compiled:
    if graph is None:
        graph = cfgmod.build_eip_cfg(program)
    if graph.flavor != "eip":
        raise ValueError("the VM executes the eip flavor")

    layouts = {name: _FrameLayout(proc, graph) for name, proc in program.procedures.items()}
    nv = max(graph.vertices) + 1

    vkind = np.zeros(nv, dtype=np.int8)
    vops_lo = np.zeros(nv, dtype=np.int32)
    vops_hi = np.zeros(nv, dtype=np.int32)
    tkind = np.zeros(nv, dtype=np.int8)
    targs = np.full((nv, 6), -1, dtype=np.int64)
    vframe = np.zeros(nv, dtype=np.int64)
    all_ops = []

    emitters = {name: _Emitter(layout) for name, layout in layouts.items()}

    # two passes: ops first (frame sizes depend on scratch usage), then targs
    op_slices = {}
    for vid in sorted(graph.vertices):
        v = graph.vertices[vid]
        vkind[vid] = VK[v.kind]
        lo = len(all_ops)
        if v.proc is not None:
            em = emitters[v.proc]
            em.ops = all_ops
            for stmt in v.stmts:
                em.stmt(stmt)
            if v.kind == cfgmod.BRANCH:
                em.reset_scratch()
                em.expr(v.cond.lhs, em.layout.branch_lhs)
                em.expr(v.cond.rhs, em.layout.branch_rhs)
            elif v.kind == cfgmod.CALL:
                em.reset_scratch()
                for i, arg in enumerate(v.args):
                    em.expr(arg, em.layout.arg_base + i)
        op_slices[vid] = (lo, len(all_ops))

    frame_size = {name: layout.frame_size() for name, layout in layouts.items()}

    for vid in sorted(graph.vertices):
        v = graph.vertices[vid]
        vops_lo[vid], vops_hi[vid] = op_slices[vid]
        if v.proc is not None:
            vframe[vid] = frame_size[v.proc]
        outs = graph.succ[vid]
        if v.kind == cfgmod.EXIT_GLOBAL:
            tkind[vid] = T_HALT
        elif v.kind == cfgmod.EXIT:
            tkind[vid] = T_RETPOP
            fallback = [d for d in outs if graph.vertices[d].kind == cfgmod.EXIT_GLOBAL]
            targs[vid, 0] = fallback[0] if fallback else -1
        elif v.kind == cfgmod.BRANCH:
            tkind[vid] = T_BRANCH
            layout = layouts[v.proc]
            bound = v.loop_bound if v.loop_bound is not None else default_loop_bound
            targs[vid] = (
                RELOP_CODE[v.cond.op],
                layout.branch_lhs,
                layout.branch_rhs,
                outs[0],
                outs[1],
                bound if _is_loop_header(graph, vid) else -1,
            )
        elif v.kind == cfgmod.CALL:
            tkind[vid] = T_CALL
            layout = layouts[v.proc]
            callee_entry = next(d for d in outs if graph.labels[(vid, d)] == "call")
            retsite = graph.retsite_of_call[vid]
            dst = layout.var_slot[v.ret_target] if v.ret_target else -1
            targs[vid] = (
                callee_entry,
                retsite,
                dst,
                frame_size[v.callee],
                len(v.args),
                layout.arg_base,
            )
        else:
            tkind[vid] = T_JMP
            targs[vid, 0] = outs[0] if outs else -1

    ops = np.array(all_ops, dtype=np.int64).reshape(-1, 4) if all_ops else np.zeros((0, 4), dtype=np.int64)

    # edge tables for coverage
    edge_list = list(graph.edges())
    edge_id = {e: i for i, e in enumerate(edge_list)}
    jump_edge = np.full(nv, -1, dtype=np.int64)
    br_t_edge = np.full(nv, -1, dtype=np.int64)
    br_f_edge = np.full(nv, -1, dtype=np.int64)
    call_edge = np.full(nv, -1, dtype=np.int64)
    ret_edge = np.full(nv, -1, dtype=np.int64)
    retpop_fallback_edge = np.full(nv, -1, dtype=np.int64)
    for vid in sorted(graph.vertices):
        v = graph.vertices[vid]
        outs = graph.succ[vid]
        if v.kind == cfgmod.BRANCH:
            br_t_edge[vid] = edge_id[(vid, outs[0])]
            br_f_edge[vid] = edge_id[(vid, outs[1])]
        elif v.kind == cfgmod.CALL:
            callee_entry = next(d for d in outs if graph.labels[(vid, d)] == "call")
            call_edge[vid] = edge_id[(vid, callee_entry)]
            retsite = graph.retsite_of_call[vid]
            exit_v = graph.proc_exit[v.callee]
            ret_edge[retsite] = edge_id[(exit_v, retsite)]
        elif v.kind == cfgmod.EXIT:
            fallback = [d for d in outs if graph.vertices[d].kind == cfgmod.EXIT_GLOBAL]
            if fallback:
                retpop_fallback_edge[vid] = edge_id[(vid, fallback[0])]
        elif outs:
            jump_edge[vid] = edge_id[(vid, outs[0])]

    n_procs = len(program.procedures)
    total_slots = sum(frame_size.values()) + frame_size[program.entry] + 8

    return Compiled(
        program=program,
        graph=graph,
        n_vertices=nv,
        input_len=program.input_len,
        byte_domain=program.byte_domain,
        start=graph.entry,
        vkind=vkind,
        vops_lo=vops_lo,
        vops_hi=vops_hi,
        ops=ops,
        tkind=tkind,
        targs=targs,
        vframe=vframe,
        main_frame=frame_size[program.entry],
        total_slots=total_slots,
        max_depth=n_procs + 2,
        edge_list=edge_list,
        n_edges=len(edge_list),
        jump_edge=jump_edge,
        br_t_edge=br_t_edge,
        br_f_edge=br_f_edge,
        call_edge=call_edge,
        ret_edge=ret_edge,
        retpop_fallback_edge=retpop_fallback_edge,
    )


def _is_loop_header(graph: CfGraph, vid: int) -> bool:
    """A branch whose true-subtree can re-enter it (While compiles this way)."""
    t_target = graph.succ[vid][0]
    seen = set()
    stack = [t_target]
    while stack:
        v = stack.pop()
        if v == vid:
            return True
        if v in seen:
            continue
        seen.add(v)
        for w in graph.succ.get(v, []):
            # stay within the procedure; call/ret wiring cannot loop back
            if graph.vertices[w].proc == graph.vertices[vid].proc:
                stack.append(w)
    return False
