"""Pretty-printer emitting parseable model source from an AST."""

from __future__ import annotations

from .ast import (
    AttributeStmt,
    BinOp,
    Call,
    ChainExpr,
    ClassDecl,
    DeterministicStmt,
    Expr,
    IndexExpr,
    Interp,
    Literal,
    MethodCall,
    Name,
    Neg,
    ObservedValues,
    ParameterStmt,
    PreambleStmt,
    Program,
    ReferenceStmt,
    SliceExpr,
    Ternary,
)


def _quote_col(name: str) -> str:
    if name.isidentifier():
        return name
    return f'"{name}"'


def format_expr(e: Expr) -> str:
    if isinstance(e, Literal):
        if isinstance(e.value, str):
            return '"' + e.value.replace('"', '\\"') + '"'
        return repr(e.value)
    if isinstance(e, Name):
        return e.ident
    if isinstance(e, ChainExpr):
        return ".".join(e.parts)
    if isinstance(e, ObservedValues):
        if e.by is None:
            return f"observed_values[:{_quote_col(e.column)}]"
        return f"observed_values[:{_quote_col(e.column)} by :{_quote_col(e.by)}]"
    if isinstance(e, IndexExpr):
        return f"{format_expr(e.base)}[{format_expr(e.key)}]"
    if isinstance(e, SliceExpr):
        return f"{format_expr(e.base)}[{e.lo}:{e.hi}]"
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, MethodCall):
        args = ", ".join(format_expr(a) for a in e.args)
        return f"{format_expr(e.base)}.{e.name}({args})"
    if isinstance(e, Ternary):
        return f"({format_expr(e.cond)} ? {format_expr(e.then)} : {format_expr(e.other)})"
    if isinstance(e, BinOp):
        return f"({format_expr(e.left)} {e.op} {format_expr(e.right)})"
    if isinstance(e, Neg):
        return f"(-{format_expr(e.operand)})"
    if isinstance(e, Interp):
        buf = ['"']
        for p in e.parts:
            if isinstance(p, str):
                buf.append(p.replace('"', '\\"'))
            else:
                buf.append("$(" + format_expr(p) + ")")
        buf.append('"')
        return "".join(buf)
    raise TypeError(f"cannot format {e!r}")


def format_program(program: Program) -> str:
    lines: list[str] = []
    for p in program.preamble:
        lines.append(_format_preamble(p))
    if program.preamble:
        lines.append("")
    for c in program.classes:
        lines.extend(_format_class(c))
        lines.append("")
    bindings = ", ".join(
        f"{'.'.join(chain)} as {_quote_col(col)}" for chain, col in program.query.bindings
    )
    lines.append(f"observe {bindings} from {program.query.obs_class}")
    return "\n".join(lines) + "\n"


def _format_preamble(p: PreambleStmt) -> str:
    if p.kind == "derive":
        return f"derive {p.name} = {p.derive_fn}(:{_quote_col(p.derive_column)})"
    return f"let {p.name} = {format_expr(p.expr)}"


def _format_statement(s) -> str:
    if isinstance(s, ReferenceStmt):
        return f"{s.name} ~ {s.target_class}"
    if isinstance(s, ParameterStmt):
        idx = "[_]" if s.indexed else ""
        args = ", ".join(format_expr(a) for a in s.args)
        return f"parameter {s.name}{idx} ~ {s.dist_name}({args})"
    if isinstance(s, AttributeStmt):
        args = ", ".join(format_expr(a) for a in s.args)
        out = f"{s.name} ~ {s.dist_name}({args})"
        if s.preferring is not None:
            out += f" preferring {format_expr(s.preferring)}"
        return out
    if isinstance(s, DeterministicStmt):
        return f"{s.name} = {format_expr(s.expr)}"
    raise TypeError(f"cannot format {s!r}")


def _format_class(c: ClassDecl) -> list[str]:
    lines = [f"class {c.name}"]
    spans = sorted(c.subproblem_spans)
    span_starts = {s: e for s, e in spans}
    i = 0
    n = len(c.statements)
    while i < n:
        if i in span_starts:
            end = span_starts[i]
            lines.append("  subproblem begin")
            for j in range(i, end):
                lines.append("    " + _format_statement(c.statements[j]))
            lines.append("  end")
            i = end
        else:
            lines.append("  " + _format_statement(c.statements[i]))
            i += 1
    for h in c.index_hints:
        lines.append(f"  index {h.mode} {h.attr}")
    lines.append("end")
    return lines
