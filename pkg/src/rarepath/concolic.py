"""Concrete execution with symbolic constraint collection, and the solver.

``execute`` runs a program on concrete input bytes and returns the EIP-CFG
vertex sequence together with one record per branch evaluation.  Branch
records carry the condition resolved to concrete input-byte indices where
possible:

* ``byte_lit``  -- in[a] <op> b
* ``byte_byte`` -- in[a] <op> in[b]
* ``opaque``    -- the condition involves a value the input bytes do not
  express directly (a call result, the cursor itself, derived arithmetic,
  or an out-of-range read); such a branch cannot be negated.

``negated_path`` turns a trace prefix plus one negated branch into a
``PathConstraint``; ``is_feasible``/``solve`` decide conjunctions of byte
constraints by per-byte domain narrowing plus an exact backtracking search
over the (tiny) clusters of bytes linked by byte-vs-byte comparisons, so the
decision is complete, and witnesses are the lexicographically smallest
satisfying assignment with unconstrained bytes left at 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import backend as backend_mod
from .bytecode import (
    CONS_BYTE_BYTE,
    CONS_BYTE_LIT,
    CONS_OPAQUE,
    Compiled,
    RELOP_NAME,
    compile_program,
)
from .cfg import BRANCH
from .minic import NEGATED_OP, OP_SYMBOL, Program

DEFAULT_STEP_BUDGET = 10**5

_KIND_NAME = {CONS_BYTE_LIT: "byte_lit", CONS_BYTE_BYTE: "byte_byte", CONS_OPAQUE: "opaque"}

TERM_NAMES = {0: "normal", 1: "bound_exceeded", 2: "bound_exceeded"}


class InfeasibleError(ValueError):
    """solve() was called on an unsatisfiable path constraint."""


@dataclass(frozen=True)
class TraceConstraint:
    vertex: int
    step: int           # position of the branch vertex in the trace
    kind: str           # byte_lit | byte_byte | opaque
    op: str             # relop of the recorded condition (byte on the left)
    a: int              # byte index (byte_lit, byte_byte)
    b: int              # literal (byte_lit) or second byte index (byte_byte)
    taken: bool

    def text(self) -> str:
        if self.kind == "byte_lit":
            body = f"in[{self.a}] {OP_SYMBOL[self.op]} {hex(self.b)}"
        elif self.kind == "byte_byte":
            body = f"in[{self.a}] {OP_SYMBOL[self.op]} in[{self.b}]"
        else:
            body = f"<opaque branch {self.vertex}>"
        return body if self.taken else f"not({body})"


@dataclass
class ExecTrace:
    vertices: tuple
    constraints: tuple
    terminated: str  # "normal" | "bound_exceeded"

    def constraint_at_step(self, step: int) -> Optional[TraceConstraint]:
        for c in self.constraints:
            if c.step == step:
                return c
        return None


@dataclass(frozen=True)
class Conjunct:
    kind: str  # byte_lit | byte_byte
    op: str
    a: int
    b: int

    def text(self) -> str:
        rhs = hex(self.b) if self.kind == "byte_lit" else f"in[{self.b}]"
        return f"in[{self.a}] {OP_SYMBOL[self.op]} {rhs}"


@dataclass(frozen=True)
class PathConstraint:
    conjuncts: tuple
    unsat_negation: bool = False  # the negated branch was not byte-expressible

    def text(self) -> str:
        parts = [c.text() for c in self.conjuncts]
        if self.unsat_negation:
            parts.append("<negation of a non-input branch>")
        return " && ".join(parts) if parts else "<empty>"


def pad_input(data: bytes, length: int) -> bytes:
    """Fix the logical input to exactly `length` bytes, zero padded."""
    return (bytes(data) + b"\x00" * length)[:length]


def random_input(length: int, rng_seed: int, domain: int = 256) -> bytes:
    from ._kernels import rng_next, rng_seed_state

    state = rng_seed_state(rng_seed)
    out = bytearray()
    for _ in range(length):
        state = rng_next(state)
        out.append(state % domain)
    return bytes(out)


def execute(compiled: Compiled, data: bytes, step_budget: int = DEFAULT_STEP_BUDGET,
            backend=None) -> ExecTrace:
    """Deterministic concrete run; the trace is an inter-path (or a prefix)."""
    vm = backend or backend_mod.get_backend()
    inp = np.frombuffer(pad_input(data, compiled.input_len), dtype=np.uint8).copy()
    trace_out = np.empty(step_budget + 2, dtype=np.int64)
    cons_out = np.empty((step_budget + 2, 7), dtype=np.int64)
    nt, nc, term = vm.run_trace(
        *compiled.vm_args(), inp, step_budget, trace_out, cons_out
    )
    constraints = []
    for i in range(nc):
        vertex, kind, a, b, relop, taken, step = cons_out[i]
        constraints.append(
            TraceConstraint(
                vertex=int(vertex),
                step=int(step),
                kind=_KIND_NAME[int(kind)],
                op=RELOP_NAME[int(relop)],
                a=int(a),
                b=int(b),
                taken=bool(taken),
            )
        )
    return ExecTrace(
        vertices=tuple(int(v) for v in trace_out[:nt]),
        constraints=tuple(constraints),
        terminated=TERM_NAMES[int(term)],
    )


def compile_for_execution(program: Program) -> Compiled:
    return compile_program(program)


# ---------------------------------------------------------------------------
# Path negation
# ---------------------------------------------------------------------------

def _effective(c: TraceConstraint, negate: bool) -> Optional[Conjunct]:
    """The conjunct this branch evaluation imposes (or None if opaque)."""
    if c.kind == "opaque":
        return None
    as_recorded = c.taken != negate
    op = c.op if as_recorded else NEGATED_OP[c.op]
    return Conjunct(kind=c.kind, op=op, a=c.a, b=c.b)


def negated_path(trace: ExecTrace, index: int) -> PathConstraint:
    """Constraint prefix of the trace with the branch entering vertex
    ``trace.vertices[index]`` negated.

    Opaque prefix constraints are dropped: they are implied by re-execution.
    If the negated branch itself is opaque the result is marked unsatisfiable.
    """
    if not 1 <= index < len(trace.vertices):
        raise ValueError(f"index {index} out of range for trace of length {len(trace.vertices)}")
    target = trace.constraint_at_step(index - 1)
    if target is None:
        raise ValueError(f"index {index} does not follow a branch vertex")
    conjuncts = []
    for c in trace.constraints:
        if c.step >= index - 1:
            break
        eff = _effective(c, negate=False)
        if eff is not None:
            conjuncts.append(eff)
    neg = _effective(target, negate=True)
    if neg is None:
        return PathConstraint(conjuncts=tuple(conjuncts), unsat_negation=True)
    conjuncts.append(neg)
    return PathConstraint(conjuncts=tuple(conjuncts))


# ---------------------------------------------------------------------------
# Feasibility and solving
# ---------------------------------------------------------------------------

_OP_FUNC = {
    "eq": lambda a, b: a == b,
    "neq": lambda a, b: a != b,
    "lt": lambda a, b: a < b,
    "le": lambda a, b: a <= b,
    "gt": lambda a, b: a > b,
    "ge": lambda a, b: a >= b,
}


def _narrow(pc: PathConstraint, length: int, domain: int):
    """Per-byte candidate masks after unary narrowing, plus binary groups."""
    masks = np.ones((length, domain), dtype=bool)
    values = np.arange(domain)
    binary = []
    for c in pc.conjuncts:
        if not 0 <= c.a < length or (c.kind == "byte_byte" and not 0 <= c.b < length):
            raise ValueError(f"conjunct {c.text()} references an invalid byte index")
        if c.kind == "byte_lit":
            masks[c.a] &= _OP_FUNC[c.op](values, c.b)
        else:
            binary.append(c)
    return masks, binary


def _components(binary, length):
    parent = list(range(length))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for c in binary:
        ra, rb = find(c.a), find(c.b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for c in binary:
        groups.setdefault(find(c.a), []).append(c)
    members = {}
    for i in range(length):
        root = find(i)
        if root in groups:
            members.setdefault(root, set()).add(i)
    return [(sorted(members[r]), groups[r]) for r in sorted(groups)]


def _solve_component(byte_ids, constraints, masks):
    """Lexicographically smallest assignment of a linked byte cluster."""
    order = byte_ids  # ascending byte index = lexicographic minimality
    cons_by_pair = constraints
    assignment = {}

    def consistent(idx, val):
        for c in cons_by_pair:
            if c.a == idx and c.b in assignment:
                if not _OP_FUNC[c.op](val, assignment[c.b]):
                    return False
            elif c.b == idx and c.a in assignment:
                if not _OP_FUNC[c.op](assignment[c.a], val):
                    return False
        return True

    def search(pos):
        if pos == len(order):
            return True
        idx = order[pos]
        for val in np.flatnonzero(masks[idx]):
            val = int(val)
            if consistent(idx, val):
                assignment[idx] = val
                if search(pos + 1):
                    return True
                del assignment[idx]
        return False

    return assignment if search(0) else None


def is_feasible(pc: PathConstraint, length: int, domain: int = 256) -> bool:
    """True iff some input of the given length satisfies every conjunct."""
    if pc.unsat_negation:
        return False
    masks, binary = _narrow(pc, length, domain)
    if not masks.any(axis=1).all():
        return False
    for byte_ids, constraints in _components(binary, length):
        if _solve_component(byte_ids, constraints, masks) is None:
            return False
    return True


def solve(pc: PathConstraint, length: int, domain: int = 256) -> bytes:
    """Deterministic witness: smallest value per byte, unconstrained bytes 0."""
    if pc.unsat_negation:
        raise InfeasibleError("constraint negates a non-input branch")
    masks, binary = _narrow(pc, length, domain)
    out = bytearray(length)
    in_component = set()
    for byte_ids, constraints in _components(binary, length):
        assignment = _solve_component(byte_ids, constraints, masks)
        if assignment is None:
            raise InfeasibleError(f"unsatisfiable: {pc.text()}")
        for idx, val in assignment.items():
            out[idx] = val
            in_component.add(idx)
    for idx in range(length):
        if idx in in_component:
            continue
        candidates = np.flatnonzero(masks[idx])
        if candidates.size == 0:
            raise InfeasibleError(f"byte {idx} has an empty domain: {pc.text()}")
        out[idx] = int(candidates[0])
    return bytes(out)
