"""AST for the modeling language: classes, statements, expressions, query."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Pos:
    line: int
    col: int


# --- expressions -----------------------------------------------------------


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class Literal(Expr):
    value: object


@dataclass(frozen=True)
class Name(Expr):
    ident: str


@dataclass(frozen=True)
class ChainExpr(Expr):
    parts: tuple[str, ...]


@dataclass(frozen=True)
class Interp(Expr):
    # alternating literal strings and embedded expressions
    parts: tuple[object, ...]


@dataclass(frozen=True)
class ObservedValues(Expr):
    column: str
    by: str | None = None


@dataclass(frozen=True)
class IndexExpr(Expr):
    base: Expr
    key: Expr


@dataclass(frozen=True)
class SliceExpr(Expr):
    base: Expr
    lo: int
    hi: int  # 1-based inclusive


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class MethodCall(Expr):
    base: Expr
    name: str
    args: tuple[Expr, ...]


@dataclass(frozen=True)
class Ternary(Expr):
    cond: Expr
    then: Expr
    other: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


# --- statements ------------------------------------------------------------


@dataclass
class Statement:
    name: str
    pos: Pos = field(compare=False, default=None)


@dataclass
class ReferenceStmt(Statement):
    target_class: str = ""


@dataclass
class AttributeStmt(Statement):
    dist_name: str = ""
    args: tuple[Expr, ...] = ()
    preferring: Expr | None = None


@dataclass
class ParameterStmt(Statement):
    dist_name: str = ""
    args: tuple[Expr, ...] = ()
    indexed: bool = False


@dataclass
class DeterministicStmt(Statement):
    expr: Expr = None


@dataclass
class IndexHint:
    attr: str
    mode: str  # "on" (aggressive) or "by" (identity-linked)
    pos: Pos = field(compare=False, default=None)


@dataclass
class ClassDecl:
    name: str
    statements: list[Statement] = field(default_factory=list)
    # half-open statement index ranges of user `subproblem begin..end` blocks
    subproblem_spans: list[tuple[int, int]] = field(default_factory=list)
    index_hints: list[IndexHint] = field(default_factory=list)
    pos: Pos = field(compare=False, default=None)


@dataclass
class PreambleStmt:
    kind: str  # "let" | "derive"
    name: str
    expr: Expr = None
    derive_fn: str = ""
    derive_column: str = ""
    pos: Pos = field(compare=False, default=None)


@dataclass
class QueryDecl:
    bindings: list[tuple[tuple[str, ...], str]] = field(default_factory=list)
    obs_class: str = ""
    pos: Pos = field(compare=False, default=None)


@dataclass
class Program:
    preamble: list[PreambleStmt]
    classes: list[ClassDecl]
    query: QueryDecl
    source_name: str = "<string>"

    def class_named(self, name: str) -> ClassDecl:
        for c in self.classes:
            if c.name == name:
                return c
        raise KeyError(name)


def walk_expr(e: Expr):
    """Yield e and every sub-expression."""
    yield e
    if isinstance(e, Interp):
        for p in e.parts:
            if isinstance(p, Expr):
                yield from walk_expr(p)
    elif isinstance(e, IndexExpr):
        yield from walk_expr(e.base)
        yield from walk_expr(e.key)
    elif isinstance(e, SliceExpr):
        yield from walk_expr(e.base)
    elif isinstance(e, Call):
        for a in e.args:
            yield from walk_expr(a)
    elif isinstance(e, MethodCall):
        yield from walk_expr(e.base)
        for a in e.args:
            yield from walk_expr(a)
    elif isinstance(e, Ternary):
        yield from walk_expr(e.cond)
        yield from walk_expr(e.then)
        yield from walk_expr(e.other)
    elif isinstance(e, BinOp):
        yield from walk_expr(e.left)
        yield from walk_expr(e.right)
    elif isinstance(e, Neg):
        yield from walk_expr(e.operand)
