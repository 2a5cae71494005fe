"""MiniC frontend: lexer, parser, desugaring, and the AST.

MiniC is a tiny imperative language over a single fixed-length byte-array
input and a global integer cursor.  Programs are a set of non-recursive
procedures; branch conditions compare simple operands (input bytes, scalar
variables, integer literals).  The parser desugars ``&&`` and ``||`` into
nested single-condition branches, preserving short-circuit order, so every
branch in the resulting AST carries one atomic comparison.

Grammar (see README for the full reference)::

    program   := item*
    item      := "input" "[" INT "]" ";"  |  "proc" IDENT "(" params? ")" block
    params    := "int" IDENT ("," "int" IDENT)*
    block     := "{" stmt* "}"
    stmt      := "int" IDENT ";"
               | "cur" "=" expr ";"
               | IDENT "=" IDENT "(" args? ")" ";"
               | IDENT "=" expr ";"
               | "call" IDENT "(" args? ")" ";"
               | "if" "(" cond ")" block ("else" block)?
               | "while" ("[" INT "]")? "(" cond ")" block
               | "return" expr? ";"
    expr      := term (("+" | "-") term)*
    term      := INT | CHAR | IDENT | "cur" | "in" "[" index "]"
    index     := "cur" (("+" | "-") INT)? | INT
    cond      := andc ("||" andc)* ;  andc := catom ("&&" catom)*
    catom     := "(" cond ")" | operand RELOP operand

Conditions compare *simple operands* only; arithmetic lives in assignments.
A procedure that falls off the end of its body returns 0.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

DEFAULT_INPUT_LEN = 16
DEFAULT_LOOP_BOUND = 64

REL_OPS = ("eq", "neq", "lt", "le", "gt", "ge")
OP_SYMBOL = {"eq": "==", "neq": "!=", "lt": "<", "le": "<=", "gt": ">", "ge": ">="}
SYMBOL_OP = {v: k for k, v in OP_SYMBOL.items()}
NEGATED_OP = {"eq": "neq", "neq": "eq", "lt": "ge", "ge": "lt", "le": "gt", "gt": "le"}
MIRRORED_OP = {"eq": "eq", "neq": "neq", "lt": "gt", "gt": "lt", "le": "ge", "ge": "le"}


class MiniCError(Exception):
    """Syntax or semantic error in a MiniC source file."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {message}" if line else message)


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class CurRef:
    def __str__(self):
        return "cur"


@dataclass(frozen=True)
class ByteRef:
    """A read of the program input: ``in[k]`` or ``in[cur+k]``."""

    cursor_rel: bool
    offset: int

    def __str__(self):
        if not self.cursor_rel:
            return f"in[{self.offset}]"
        if self.offset == 0:
            return "in[cur]"
        sign = "+" if self.offset > 0 else "-"
        return f"in[cur{sign}{abs(self.offset)}]"


@dataclass(frozen=True)
class BinOp:
    op: str  # "+" or "-"
    lhs: "Expr"
    rhs: "Expr"

    def __str__(self):
        return f"{self.lhs} {self.op} {self.rhs}"


Expr = Union[Const, Var, CurRef, ByteRef, BinOp]
Operand = Union[Const, Var, ByteRef, CurRef]


@dataclass(frozen=True)
class AtomicCond:
    """A single comparison of two simple operands; no boolean connectives."""

    op: str  # one of REL_OPS
    lhs: Operand
    rhs: Operand

    def __str__(self):
        return f"{self.lhs} {OP_SYMBOL[self.op]} {self.rhs}"

    def negated(self) -> "AtomicCond":
        return AtomicCond(NEGATED_OP[self.op], self.lhs, self.rhs)


# Surface-only condition tree; lowered away by desugaring.
@dataclass(frozen=True)
class BoolOp:
    op: str  # "&&" or "||"
    lhs: Union["BoolOp", AtomicCond]
    rhs: Union["BoolOp", AtomicCond]


Cond = Union[BoolOp, AtomicCond]


@dataclass(eq=True)
class Block:
    stmts: list = field(default_factory=list)


@dataclass(eq=True)
class Decl:
    name: str


@dataclass(eq=True)
class Assign:
    target: str
    value: Expr


@dataclass(eq=True)
class CurAssign:
    value: Expr


@dataclass(eq=True)
class If:
    cond: AtomicCond
    then: Block
    orelse: Block


@dataclass(eq=True)
class While:
    cond: AtomicCond
    body: Block
    bound: Optional[int] = None


@dataclass(eq=True)
class CallStmt:
    callee: str
    args: list
    target: Optional[str] = None  # variable receiving the return value


@dataclass(eq=True)
class Return:
    value: Optional[Expr] = None


Stmt = Union[Decl, Assign, CurAssign, If, While, CallStmt, Return]


@dataclass(eq=True)
class Procedure:
    name: str
    params: list
    body: Block


@dataclass(eq=True)
class Program:
    procedures: dict
    entry: str
    input_len: int
    byte_domain: int = 256


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>\#[^\n]*)
  | (?P<char>'(?:[^'\\\n])')
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|&&|\|\||[-+=<>(){}\[\];,])
    """,
    re.VERBOSE,
)

KEYWORDS = {"input", "proc", "int", "if", "else", "while", "call", "return", "in", "cur"}


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "ident", "kw", "op", "eof"
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list:
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise MiniCError(f"unexpected character {source[pos]!r}", line, col)
        text = m.group(0)
        kind = m.lastgroup
        if kind == "ws" or kind == "comment":
            pass
        elif kind == "char":
            tokens.append(Token("int", str(ord(text[1])), line, col))
        elif kind == "ident":
            tokens.append(Token("kw" if text in KEYWORDS else "ident", text, line, col))
        else:
            tokens.append(Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def error(self, message: str, tok: Optional[Token] = None):
        tok = tok or self.peek()
        raise MiniCError(message, tok.line, tok.col)

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text:
            self.error(f"expected {text!r}, found {tok.text!r}", tok)
        return tok

    def accept(self, text: str) -> bool:
        if self.peek().text == text:
            self.next()
            return True
        return False

    # -- toplevel ----------------------------------------------------------

    def parse_program(self, byte_domain: int) -> Program:
        input_len = None
        procedures = {}
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.text == "input":
                if input_len is not None:
                    self.error("duplicate input declaration", tok)
                self.next()
                self.expect("[")
                input_len = self.parse_int()
                self.expect("]")
                self.expect(";")
                if input_len < 1:
                    self.error("input length must be >= 1", tok)
            elif tok.text == "proc":
                proc = self.parse_proc()
                if proc.name in procedures:
                    self.error(f"duplicate procedure {proc.name!r}", tok)
                procedures[proc.name] = proc
            else:
                self.error(f"expected 'input' or 'proc', found {tok.text!r}", tok)
        if "main" not in procedures:
            raise MiniCError("program has no 'main' procedure")
        program = Program(
            procedures=procedures,
            entry="main",
            input_len=input_len if input_len is not None else DEFAULT_INPUT_LEN,
            byte_domain=byte_domain,
        )
        _validate(program)
        return program

    def parse_int(self) -> int:
        tok = self.next()
        if tok.kind != "int":
            self.error(f"expected integer, found {tok.text!r}", tok)
        return int(tok.text)

    def parse_ident(self) -> str:
        tok = self.next()
        if tok.kind != "ident":
            self.error(f"expected identifier, found {tok.text!r}", tok)
        return tok.text

    def parse_proc(self) -> Procedure:
        self.expect("proc")
        name = self.parse_ident()
        self.expect("(")
        params = []
        if not self.accept(")"):
            while True:
                self.expect("int")
                params.append(self.parse_ident())
                if not self.accept(","):
                    break
            self.expect(")")
        body = self.parse_block()
        return Procedure(name=name, params=params, body=body)

    # -- statements --------------------------------------------------------

    def parse_block(self) -> Block:
        self.expect("{")
        stmts = []
        while not self.accept("}"):
            if self.peek().kind == "eof":
                self.error("unterminated block")
            stmts.append(self.parse_stmt())
        return Block(stmts)

    def parse_stmt(self) -> Stmt:
        tok = self.peek()
        if tok.text == "int":
            self.next()
            name = self.parse_ident()
            self.expect(";")
            return Decl(name)
        if tok.text == "cur":
            self.next()
            self.expect("=")
            value = self.parse_expr()
            self.expect(";")
            return CurAssign(value)
        if tok.text == "call":
            self.next()
            name = self.parse_ident()
            args = self.parse_args()
            self.expect(";")
            return CallStmt(callee=name, args=args)
        if tok.text == "if":
            self.next()
            self.expect("(")
            cond = self.parse_cond()
            self.expect(")")
            then = self.parse_block()
            orelse = self.parse_block() if self.accept("else") else Block([])
            return _lower_if(cond, then, orelse)
        if tok.text == "while":
            self.next()
            bound = None
            if self.accept("["):
                bound = self.parse_int()
                self.expect("]")
            self.expect("(")
            cond = self.parse_cond()
            self.expect(")")
            if not isinstance(cond, AtomicCond):
                self.error("while conditions must be a single comparison", tok)
            body = self.parse_block()
            return While(cond=cond, body=body, bound=bound)
        if tok.text == "return":
            self.next()
            value = None
            if self.peek().text != ";":
                value = self.parse_expr()
            self.expect(";")
            return Return(value)
        if tok.kind == "ident":
            target = self.parse_ident()
            self.expect("=")
            if self.peek().kind == "ident" and self.peek(1).text == "(":
                callee = self.parse_ident()
                args = self.parse_args()
                self.expect(";")
                return CallStmt(callee=callee, args=args, target=target)
            value = self.parse_expr()
            self.expect(";")
            return Assign(target, value)
        self.error(f"expected statement, found {tok.text!r}", tok)

    def parse_args(self) -> list:
        self.expect("(")
        args = []
        if not self.accept(")"):
            while True:
                args.append(self.parse_expr())
                if not self.accept(","):
                    break
            self.expect(")")
        return args

    # -- expressions and conditions ----------------------------------------

    def parse_expr(self) -> Expr:
        expr = self.parse_term()
        while self.peek().text in ("+", "-"):
            op = self.next().text
            expr = BinOp(op, expr, self.parse_term())
        return expr

    def parse_term(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return Const(int(tok.text))
        if tok.text == "cur":
            self.next()
            return CurRef()
        if tok.text == "in":
            return self.parse_byteref()
        if tok.kind == "ident":
            self.next()
            return Var(tok.text)
        self.error(f"expected expression, found {tok.text!r}", tok)

    def parse_byteref(self) -> ByteRef:
        self.expect("in")
        self.expect("[")
        tok = self.peek()
        if tok.text == "cur":
            self.next()
            offset = 0
            if self.peek().text in ("+", "-"):
                sign = -1 if self.next().text == "-" else 1
                offset = sign * self.parse_int()
            self.expect("]")
            return ByteRef(cursor_rel=True, offset=offset)
        offset = self.parse_int()
        self.expect("]")
        return ByteRef(cursor_rel=False, offset=offset)

    def parse_cond(self) -> Cond:
        cond = self.parse_and()
        while self.peek().text == "||":
            self.next()
            cond = BoolOp("||", cond, self.parse_and())
        return cond

    def parse_and(self) -> Cond:
        cond = self.parse_catom()
        while self.peek().text == "&&":
            self.next()
            cond = BoolOp("&&", cond, self.parse_catom())
        return cond

    def parse_catom(self) -> Cond:
        if self.peek().text == "(":
            self.next()
            cond = self.parse_cond()
            self.expect(")")
            return cond
        lhs = self.parse_operand()
        tok = self.next()
        if tok.text not in SYMBOL_OP:
            self.error(f"expected comparison operator, found {tok.text!r}", tok)
        rhs = self.parse_operand()
        return AtomicCond(SYMBOL_OP[tok.text], lhs, rhs)

    def parse_operand(self) -> Operand:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return Const(int(tok.text))
        if tok.text == "in":
            return self.parse_byteref()
        if tok.text == "cur":
            self.next()
            return CurRef()
        if tok.kind == "ident":
            self.next()
            return Var(tok.text)
        self.error(f"expected comparison operand, found {tok.text!r}", tok)


def _lower_if(cond: Cond, then: Block, orelse: Block) -> If:
    """Desugar a compound condition into nested atomic branches.

    Short-circuit order is preserved.  The arm that both branches of a
    connective fall through to is *shared by object identity*, so the CFG
    builder can emit it once.
    """
    if isinstance(cond, AtomicCond):
        return If(cond, then, orelse)
    if cond.op == "&&":
        inner = _lower_if(cond.rhs, then, orelse)
        return _lower_if(cond.lhs, Block([inner]), orelse)
    # "||": the then-arm is shared
    inner = _lower_if(cond.rhs, then, orelse)
    return _lower_if(cond.lhs, then, Block([inner]))


# ---------------------------------------------------------------------------
# Semantic validation
# ---------------------------------------------------------------------------

def _walk_stmts(block: Block):
    for stmt in block.stmts:
        yield stmt
        if isinstance(stmt, If):
            yield from _walk_stmts(stmt.then)
            yield from _walk_stmts(stmt.orelse)
        elif isinstance(stmt, While):
            yield from _walk_stmts(stmt.body)


def _expr_vars(expr: Expr):
    if isinstance(expr, Var):
        yield expr.name
    elif isinstance(expr, BinOp):
        yield from _expr_vars(expr.lhs)
        yield from _expr_vars(expr.rhs)


def _validate(program: Program):
    # call graph acyclicity and callee resolution
    calls = {}
    for name, proc in program.procedures.items():
        callees = set()
        for stmt in _walk_stmts(proc.body):
            if isinstance(stmt, CallStmt):
                target = program.procedures.get(stmt.callee)
                if target is None:
                    raise MiniCError(f"call to undefined procedure {stmt.callee!r} in {name!r}")
                if len(stmt.args) != len(target.params):
                    raise MiniCError(
                        f"call to {stmt.callee!r} in {name!r} passes {len(stmt.args)} "
                        f"arguments, expected {len(target.params)}"
                    )
                callees.add(stmt.callee)
        calls[name] = callees

    state = {}  # 0 = visiting, 1 = done

    def visit(name, chain):
        if state.get(name) == 1:
            return
        if state.get(name) == 0:
            cycle = " -> ".join(chain + [name])
            raise MiniCError(f"recursion detected: {cycle}")
        state[name] = 0
        for callee in sorted(calls[name]):
            visit(callee, chain + [name])
        state[name] = 1

    for name in program.procedures:
        visit(name, [])

    # scope and index checks
    for name, proc in program.procedures.items():
        known = set(proc.params)
        for stmt in _walk_stmts(proc.body):
            if isinstance(stmt, Decl):
                known.add(stmt.name)
        def check_expr(expr):
            for var in _expr_vars(expr):
                if var not in known:
                    raise MiniCError(f"unbound variable {var!r} in {name!r}")
            for ref in _expr_byterefs(expr):
                if not ref.cursor_rel and not 0 <= ref.offset < program.input_len:
                    raise MiniCError(
                        f"input index {ref.offset} out of range 0..{program.input_len - 1} in {name!r}"
                    )
        for stmt in _walk_stmts(proc.body):
            if isinstance(stmt, Assign):
                check_expr(stmt.value)
                if stmt.target not in known:
                    raise MiniCError(f"unbound variable {stmt.target!r} in {name!r}")
            elif isinstance(stmt, CurAssign):
                check_expr(stmt.value)
            elif isinstance(stmt, (If, While)):
                check_expr(stmt.cond.lhs)
                check_expr(stmt.cond.rhs)
            elif isinstance(stmt, CallStmt):
                for arg in stmt.args:
                    check_expr(arg)
                if stmt.target is not None and stmt.target not in known:
                    raise MiniCError(f"unbound variable {stmt.target!r} in {name!r}")
            elif isinstance(stmt, Return) and stmt.value is not None:
                check_expr(stmt.value)


def _expr_byterefs(expr):
    if isinstance(expr, ByteRef):
        yield expr
    elif isinstance(expr, BinOp):
        yield from _expr_byterefs(expr.lhs)
        yield from _expr_byterefs(expr.rhs)


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def parse(source: str, byte_domain: int = 256) -> Program:
    """Parse MiniC source into a validated Program with atomic branches."""
    return _Parser(source).parse_program(byte_domain)


def parse_file(path, byte_domain: int = 256) -> Program:
    with open(path, "r", encoding="utf-8") as handle:
        return parse(handle.read(), byte_domain)


def list_branches(program: Program):
    """All atomic branches in source order: (procedure, branch id, condition)."""
    out = []
    branch_id = 0
    for name, proc in program.procedures.items():
        for stmt in _walk_stmts(proc.body):
            if isinstance(stmt, (If, While)):
                out.append((name, branch_id, stmt.cond))
                branch_id += 1
    return out


def unparse(program: Program) -> str:
    """Render a Program back to (desugared) MiniC source."""
    lines = [f"input[{program.input_len}];", ""]
    for proc in program.procedures.values():
        params = ", ".join(f"int {p}" for p in proc.params)
        lines.append(f"proc {proc.name}({params}) {{")
        _unparse_block(proc.body, lines, 1)
        lines.append("}")
        lines.append("")
    return "\n".join(lines)


def _unparse_block(block: Block, lines: list, depth: int):
    pad = "    " * depth
    for stmt in block.stmts:
        if isinstance(stmt, Decl):
            lines.append(f"{pad}int {stmt.name};")
        elif isinstance(stmt, Assign):
            lines.append(f"{pad}{stmt.target} = {stmt.value};")
        elif isinstance(stmt, CurAssign):
            lines.append(f"{pad}cur = {stmt.value};")
        elif isinstance(stmt, CallStmt):
            args = ", ".join(str(a) for a in stmt.args)
            if stmt.target is None:
                lines.append(f"{pad}call {stmt.callee}({args});")
            else:
                lines.append(f"{pad}{stmt.target} = {stmt.callee}({args});")
        elif isinstance(stmt, If):
            lines.append(f"{pad}if ({stmt.cond}) {{")
            _unparse_block(stmt.then, lines, depth + 1)
            if stmt.orelse.stmts:
                lines.append(f"{pad}}} else {{")
                _unparse_block(stmt.orelse, lines, depth + 1)
            lines.append(f"{pad}}}")
        elif isinstance(stmt, While):
            bound = f" [{stmt.bound}]" if stmt.bound is not None else ""
            lines.append(f"{pad}while{bound} ({stmt.cond}) {{")
            _unparse_block(stmt.body, lines, depth + 1)
            lines.append(f"{pad}}}")
        elif isinstance(stmt, Return):
            if stmt.value is None:
                lines.append(f"{pad}return;")
            else:
                lines.append(f"{pad}return {stmt.value};")
