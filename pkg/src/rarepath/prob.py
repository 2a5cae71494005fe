"""Edge probability scores for the EIP-CFG.

Two analyses feed the score function:

* dependency analysis marks the branches whose outcome can be influenced by
  the program input (an over-approximation: anything that transitively reads
  an input byte, or a value derived from one, counts);
* branch selectivity counts, per branch condition, the fraction of the
  operand-domain product on which the condition holds.

Scores: single-successor edges get 1; an input-dependent branch gets
(selectivity, 1 - selectivity) on its (true, false) edges; input-independent
branches and call vertices get 1 on both outgoing edges.  Branches whose
condition cannot be counted (it references a procedure return value or other
derived quantity) score 0.5/0.5.

Selectivities are exact rationals.  ``paper`` mode additionally rounds each
selectivity to three decimals before any product is taken, which reproduces
the reference figures that quote 1/256 as 0.004.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .cfg import BRANCH, CALL, CfGraph
from .minic import (
    AtomicCond,
    BinOp,
    ByteRef,
    CallStmt,
    Const,
    CurRef,
    If,
    Program,
    Return,
    Var,
    While,
    _walk_stmts,
)

UNCOUNTABLE_SELECTIVITY = Fraction(1, 2)


@dataclass(frozen=True)
class Selectivity:
    value: Fraction
    countable: bool
    domain_size: Optional[int] = None
    sat_count: Optional[int] = None


@dataclass
class DepResult:
    input_dependent: frozenset
    reasons: dict


# ---------------------------------------------------------------------------
# Dependency analysis
# ---------------------------------------------------------------------------

def _expr_reads_input(expr) -> bool:
    if isinstance(expr, ByteRef):
        return True
    if isinstance(expr, BinOp):
        return _expr_reads_input(expr.lhs) or _expr_reads_input(expr.rhs)
    return False


def _expr_var_names(expr):
    if isinstance(expr, Var):
        yield expr.name
    elif isinstance(expr, BinOp):
        yield from _expr_var_names(expr.lhs)
        yield from _expr_var_names(expr.rhs)


def _call_order(program: Program):
    """Procedures ordered callees-first (call graph is acyclic)."""
    callees = {
        name: {s.callee for s in _walk_stmts(p.body) if isinstance(s, CallStmt)}
        for name, p in program.procedures.items()
    }
    done, order = set(), []

    def visit(name):
        if name in done:
            return
        for c in sorted(callees[name]):
            visit(c)
        done.add(name)
        order.append(name)

    for name in program.procedures:
        visit(name)
    return order


def analyze_dependency(program: Program, g: CfGraph) -> DepResult:
    """Forward taint from input bytes through assignments and return values.

    A procedure's return value is treated as tainted when any returned
    expression is tainted or when the procedure contains an input-dependent
    branch (the returned value is then selected by the input).
    """
    tainted_vars = {name: set() for name in program.procedures}
    taint_reason = {name: {} for name in program.procedures}
    ret_tainted = {}
    ret_reason = {}

    def expr_tainted(expr, proc_name):
        if _expr_reads_input(expr):
            return "reads the input"
        for var in _expr_var_names(expr):
            if var in tainted_vars[proc_name]:
                return f"uses {var} ({taint_reason[proc_name][var]})"
        return None

    def cond_tainted(cond: AtomicCond, proc_name):
        for side in (cond.lhs, cond.rhs):
            why = expr_tainted(side, proc_name)
            if why:
                return why
        return None

    for name in _call_order(program):
        proc = program.procedures[name]
        changed = True
        while changed:
            changed = False
            for stmt in _walk_stmts(proc.body):
                if isinstance(stmt, CallStmt) and stmt.target is not None:
                    if ret_tainted.get(stmt.callee) and stmt.target not in tainted_vars[name]:
                        tainted_vars[name].add(stmt.target)
                        taint_reason[name][stmt.target] = (
                            f"assigned from {stmt.callee}() whose return value is "
                            f"input-dependent: {ret_reason[stmt.callee]}"
                        )
                        changed = True
                elif hasattr(stmt, "target") and hasattr(stmt, "value"):
                    why = expr_tainted(stmt.value, name)
                    if why and stmt.target not in tainted_vars[name]:
                        tainted_vars[name].add(stmt.target)
                        taint_reason[name][stmt.target] = f"assigned a value that {why}"
                        changed = True
        # return-value taint
        why = None
        for stmt in _walk_stmts(proc.body):
            if isinstance(stmt, Return) and stmt.value is not None:
                why = expr_tainted(stmt.value, name)
                if why:
                    why = f"returns a value that {why}"
                    break
        if why is None:
            for stmt in _walk_stmts(proc.body):
                if isinstance(stmt, (If, While)) and cond_tainted(stmt.cond, name):
                    why = "its returns are selected by an input-dependent branch"
                    break
        ret_tainted[name] = why is not None
        ret_reason[name] = why

    dependent = set()
    reasons = {}
    for vid in g.branch_vertices():
        vertex = g.vertices[vid]
        why = cond_tainted(vertex.cond, vertex.proc)
        if why:
            dependent.add(vid)
            reasons[vid] = f"condition {vertex.cond} {why}"
    return DepResult(input_dependent=frozenset(dependent), reasons=reasons)


def analyze_var_origins(program: Program) -> dict:
    """Per procedure, variables that only ever hold plain input-byte copies.

    Used to give such variables the byte domain during model counting; any
    other assignment (arithmetic, call result, parameter) makes the variable
    uncountable.
    """
    origins = {}
    for name, proc in program.procedures.items():
        assigns = {}
        for stmt in _walk_stmts(proc.body):
            if isinstance(stmt, CallStmt) and stmt.target is not None:
                assigns.setdefault(stmt.target, set()).add("opaque")
            elif hasattr(stmt, "target") and hasattr(stmt, "value"):
                if isinstance(stmt.value, ByteRef):
                    assigns.setdefault(stmt.target, set()).add("byte")
                elif isinstance(stmt.value, Const):
                    assigns.setdefault(stmt.target, set()).add("const")
                elif isinstance(stmt.value, Var):
                    assigns.setdefault(stmt.target, set()).add(("copy", stmt.value.name))
                else:
                    assigns.setdefault(stmt.target, set()).add("opaque")
        resolved = {}

        def resolve(var, seen=()):
            if var in resolved:
                return resolved[var]
            if var in seen or var not in assigns or var in proc.params:
                return "opaque"
            kinds = set()
            for k in assigns[var]:
                if isinstance(k, tuple):
                    kinds.add(resolve(k[1], seen + (var,)))
                else:
                    kinds.add(k)
            out = kinds.pop() if len(kinds) == 1 else "opaque"
            resolved[var] = out
            return out

        origins[name] = {var: resolve(var) for var in assigns}
    return origins


# ---------------------------------------------------------------------------
# Branch selectivity (model counting)
# ---------------------------------------------------------------------------

def _classify_operand(operand, var_origin):
    """-> ("byte", key) | ("const", value) | ("opaque", None)."""
    if isinstance(operand, Const):
        return ("const", operand.value)
    if isinstance(operand, ByteRef):
        return ("byte", ("in", operand.cursor_rel, operand.offset))
    if isinstance(operand, Var):
        if var_origin.get(operand.name) == "byte":
            return ("byte", ("var", operand.name))
        return ("opaque", None)
    return ("opaque", None)  # cur and anything derived


def _count_vs_const(op: str, c: int, domain: int) -> int:
    """Closed-form |{v in 0..domain-1 : v op c}|."""
    below = min(max(c, 0), domain)  # values strictly less than c
    at_most = min(max(c + 1, 0), domain)
    if op == "eq":
        return 1 if 0 <= c < domain else 0
    if op == "neq":
        return domain - (1 if 0 <= c < domain else 0)
    if op == "lt":
        return below
    if op == "le":
        return at_most
    if op == "gt":
        return domain - at_most
    if op == "ge":
        return domain - below
    raise ValueError(op)


_NUMPY_OPS = {
    "eq": np.equal,
    "neq": np.not_equal,
    "lt": np.less,
    "le": np.less_equal,
    "gt": np.greater,
    "ge": np.greater_equal,
}

_MIRROR = {"eq": "eq", "neq": "neq", "lt": "gt", "gt": "lt", "le": "ge", "ge": "le"}


def _count_var_vs_var(op: str, domain: int) -> int:
    """Satisfying pairs over two independent byte variables, by enumeration."""
    values = np.arange(domain)
    return int(np.count_nonzero(_NUMPY_OPS[op](values[:, None], values[None, :])))


def _eval_op(op: str, a: int, b: int) -> bool:
    return {
        "eq": a == b,
        "neq": a != b,
        "lt": a < b,
        "le": a <= b,
        "gt": a > b,
        "ge": a >= b,
    }[op]


def selectivity(cond: AtomicCond, var_origins: Optional[dict] = None, byte_domain: int = 256) -> Selectivity:
    """Fraction of the condition's operand-domain product that satisfies it.

    Conditions that reference values outside the countable fragment (call
    results, cursor-valued comparisons, derived arithmetic) are uncountable
    and fall back to 1/2.
    """
    origins = var_origins or {}
    lk, lv = _classify_operand(cond.lhs, origins)
    rk, rv = _classify_operand(cond.rhs, origins)
    if lk == "opaque" or rk == "opaque":
        return Selectivity(UNCOUNTABLE_SELECTIVITY, countable=False)
    if lk == "const" and rk == "const":
        sat = 1 if _eval_op(cond.op, lv, rv) else 0
        return Selectivity(Fraction(sat, 1), countable=True, domain_size=1, sat_count=sat)
    if lk == "byte" and rk == "const":
        sat = _count_vs_const(cond.op, rv, byte_domain)
        return Selectivity(Fraction(sat, byte_domain), True, byte_domain, sat)
    if lk == "const" and rk == "byte":
        sat = _count_vs_const(_MIRROR[cond.op], lv, byte_domain)
        return Selectivity(Fraction(sat, byte_domain), True, byte_domain, sat)
    # byte vs byte
    if lv == rv:  # the same byte on both sides: one free variable
        sat = {"eq": byte_domain, "le": byte_domain, "ge": byte_domain}.get(cond.op, 0)
        return Selectivity(Fraction(sat, byte_domain), True, byte_domain, sat)
    domain = byte_domain * byte_domain
    sat = _count_var_vs_var(cond.op, byte_domain)
    return Selectivity(Fraction(sat, domain), True, domain, sat)


def round_paper(value: Fraction) -> Fraction:
    """Round a selectivity to three decimals, half away from zero."""
    return Fraction((value * 1000 + Fraction(1, 2)).__floor__(), 1000)


# ---------------------------------------------------------------------------
# Probabilistic control flow graph
# ---------------------------------------------------------------------------

@dataclass
class ProbCfg:
    graph: CfGraph
    dep: DepResult
    selectivities: dict  # branch vertex id -> Selectivity
    f_exact: dict = field(default_factory=dict)  # (src, dst) -> Fraction
    f_paper: dict = field(default_factory=dict)

    def edge_score(self, src: int, dst: int, mode: str = "exact") -> Fraction:
        table = self.f_exact if mode == "exact" else self.f_paper
        return table[(src, dst)]


def build_prob_cfg(program: Program, g: CfGraph, dep: Optional[DepResult] = None) -> ProbCfg:
    """Assign a probability score to every edge of an EIP graph."""
    if g.flavor != "eip":
        raise ValueError("probability scores are defined on the eip flavor")
    if dep is None:
        dep = analyze_dependency(program, g)
    origins = analyze_var_origins(program)
    sels = {}
    f_exact, f_paper = {}, {}
    one = Fraction(1)
    for vid, vertex in g.vertices.items():
        outs = g.succ[vid]
        if vertex.kind == BRANCH:
            sel = selectivity(vertex.cond, origins.get(vertex.proc, {}), program.byte_domain)
            sels[vid] = sel
            t_edge, f_edge = (vid, outs[0]), (vid, outs[1])
            if vid in dep.input_dependent:
                s_exact = sel.value
                s_paper = round_paper(sel.value)
                f_exact[t_edge], f_exact[f_edge] = s_exact, one - s_exact
                f_paper[t_edge], f_paper[f_edge] = s_paper, one - s_paper
            else:
                for e in (t_edge, f_edge):
                    f_exact[e] = f_paper[e] = one
        else:
            # straight-line, call and return plumbing edges all score 1
            for dst in outs:
                f_exact[(vid, dst)] = f_paper[(vid, dst)] = one
    return ProbCfg(graph=g, dep=dep, selectivities=sels, f_exact=f_exact, f_paper=f_paper)


def selectivity_report(program: Program, g: CfGraph, dep: Optional[DepResult] = None) -> list:
    """JSON-ready selectivity summary, one record per branch vertex."""
    if dep is None:
        dep = analyze_dependency(program, g)
    origins = analyze_var_origins(program)
    out = []
    for vid in g.branch_vertices():
        vertex = g.vertices[vid]
        sel = selectivity(vertex.cond, origins.get(vertex.proc, {}), program.byte_domain)
        out.append(
            {
                "branch_id": vid,
                "proc": vertex.proc,
                "cond_text": str(vertex.cond),
                "dependent": vid in dep.input_dependent,
                "selectivity_num": sel.value.numerator,
                "selectivity_den": sel.value.denominator,
                "countable": sel.countable,
                "domain_size": sel.domain_size,
                "sat_count": sel.sat_count,
            }
        )
    return out
