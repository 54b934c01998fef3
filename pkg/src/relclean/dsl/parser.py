"""Recursive-descent parser producing the model AST."""

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
    IndexHint,
    Interp,
    Literal,
    MethodCall,
    Name,
    Neg,
    ObservedValues,
    ParameterStmt,
    Pos,
    PreambleStmt,
    Program,
    QueryDecl,
    ReferenceStmt,
    SliceExpr,
    Ternary,
)
from .lexer import DslError, Token, tokenize

_CMP_OPS = ("==", "!=", "<=", ">=", "<", ">")


class Parser:
    def __init__(self, tokens: list[Token], source_name: str):
        self.tokens = tokens
        self.i = 0
        self.source_name = source_name

    # -- token helpers -----------------------------------------------------

    def cur(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        j = min(self.i + k, len(self.tokens) - 1)
        return self.tokens[j]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "EOF":
            self.i += 1
        return t

    def expect(self, kind: str, what: str | None = None) -> Token:
        t = self.cur()
        if t.kind != kind:
            expected = what or repr(kind)
            raise DslError(
                f"expected {expected}, found {t.text!r}", t.pos, self.source_name
            )
        return self.advance()

    def skip_separators(self):
        while self.cur().kind in ("NEWLINE", ";"):
            self.advance()

    def end_of_statement(self):
        t = self.cur()
        if t.kind in ("NEWLINE", ";", "EOF"):
            self.skip_separators()
            return
        if t.kind == "end":
            return
        raise DslError(f"unexpected {t.text!r} after statement", t.pos, self.source_name)

    # -- program structure ---------------------------------------------------

    def parse_program(self) -> Program:
        self.skip_separators()
        preamble = []
        while self.cur().kind in ("let", "derive"):
            preamble.append(self.parse_preamble_stmt())
            self.skip_separators()
        classes = []
        if self.cur().kind != "class":
            raise DslError(
                "expected class declaration", self.cur().pos, self.source_name
            )
        while self.cur().kind == "class":
            classes.append(self.parse_class())
            self.skip_separators()
        query = self.parse_query()
        self.skip_separators()
        if self.cur().kind != "EOF":
            raise DslError(
                f"unexpected {self.cur().text!r} after query",
                self.cur().pos,
                self.source_name,
            )
        return Program(preamble, classes, query, self.source_name)

    def parse_preamble_stmt(self) -> PreambleStmt:
        t = self.advance()
        name = self.expect("NAME").text
        self.expect("=")
        if t.kind == "derive":
            fn = self.expect("NAME").text
            self.expect("(")
            self.expect(":")
            col = self.column_name()
            self.expect(")")
            self.end_of_statement()
            return PreambleStmt("derive", name, derive_fn=fn, derive_column=col, pos=t.pos)
        expr = self.parse_expr()
        self.end_of_statement()
        return PreambleStmt("let", name, expr=expr, pos=t.pos)

    def column_name(self) -> str:
        t = self.cur()
        if t.kind in ("NAME", "STRING"):
            self.advance()
            return t.text
        raise DslError("expected column name", t.pos, self.source_name)

    def parse_class(self) -> ClassDecl:
        start = self.expect("class")
        name = self.expect("NAME", "class name").text
        decl = ClassDecl(name=name, pos=start.pos)
        self.skip_separators()
        while self.cur().kind != "end":
            if self.cur().kind == "EOF":
                raise DslError(
                    f"missing 'end' for class {name}", start.pos, self.source_name
                )
            if self.cur().kind == "subproblem":
                self.advance()
                self.expect("begin")
                self.skip_separators()
                span_start = len(decl.statements)
                while self.cur().kind != "end":
                    if self.cur().kind == "EOF":
                        raise DslError(
                            "missing 'end' for subproblem", start.pos, self.source_name
                        )
                    self.parse_class_statement(decl)
                self.advance()  # end of subproblem
                decl.subproblem_spans.append((span_start, len(decl.statements)))
                self.skip_separators()
                continue
            self.parse_class_statement(decl)
        self.advance()  # end of class
        return decl

    def parse_class_statement(self, decl: ClassDecl):
        t = self.cur()
        if t.kind == "index":
            self.advance()
            mode = self.cur().kind
            if mode not in ("on", "by"):
                raise DslError("expected 'on' or 'by' after index", self.cur().pos, self.source_name)
            self.advance()
            attr = self.expect("NAME").text
            decl.index_hints.append(IndexHint(attr=attr, mode=mode, pos=t.pos))
            self.end_of_statement()
            return
        if t.kind == "parameter":
            self.advance()
            name = self.expect("NAME").text
            indexed = False
            if self.cur().kind == "[":
                self.advance()
                self.expect("_")
                self.expect("]")
                indexed = True
            self.expect("~")
            dist, args = self.parse_dist_call()
            decl.statements.append(
                ParameterStmt(name=name, pos=t.pos, dist_name=dist, args=args, indexed=indexed)
            )
            self.end_of_statement()
            return
        name_tok = self.expect("NAME", "statement")
        if self.cur().kind == "~":
            self.advance()
            target = self.expect("NAME", "distribution or class name")
            if self.cur().kind == "(":
                self.i -= 1
                dist, args = self.parse_dist_call()
                preferring = None
                if self.cur().kind == "preferring":
                    self.advance()
                    preferring = self.parse_expr()
                decl.statements.append(
                    AttributeStmt(
                        name=name_tok.text,
                        pos=name_tok.pos,
                        dist_name=dist,
                        args=args,
                        preferring=preferring,
                    )
                )
            else:
                decl.statements.append(
                    ReferenceStmt(name=name_tok.text, pos=name_tok.pos, target_class=target.text)
                )
            self.end_of_statement()
            return
        if self.cur().kind == "=":
            self.advance()
            expr = self.parse_expr()
            decl.statements.append(
                DeterministicStmt(name=name_tok.text, pos=name_tok.pos, expr=expr)
            )
            self.end_of_statement()
            return
        raise DslError(
            f"expected '~' or '=' after {name_tok.text!r}", self.cur().pos, self.source_name
        )

    def parse_dist_call(self) -> tuple[str, tuple[Expr, ...]]:
        name = self.expect("NAME", "distribution name").text
        self.expect("(")
        args = []
        if self.cur().kind != ")":
            args.append(self.parse_expr())
            while self.cur().kind == ",":
                self.advance()
                args.append(self.parse_expr())
        self.expect(")")
        return name, tuple(args)

    def parse_query(self) -> QueryDecl:
        start = self.expect("observe", "query ('observe ... from Class')")
        bindings = []
        while True:
            chain = [self.expect("NAME", "slot chain").text]
            while self.cur().kind == ".":
                self.advance()
                chain.append(self.expect("NAME").text)
            self.expect("as")
            col = self.column_name()
            bindings.append((tuple(chain), col))
            if self.cur().kind == ",":
                self.advance()
                self.skip_separators()
                continue
            break
        self.expect("from")
        obs_class = self.expect("NAME", "observation class").text
        return QueryDecl(bindings=bindings, obs_class=obs_class, pos=start.pos)

    # -- expressions --------------------------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_ternary()

    def parse_ternary(self) -> Expr:
        cond = self.parse_compare()
        if self.cur().kind == "?":
            self.advance()
            then = self.parse_ternary()
            self.expect(":")
            other = self.parse_ternary()
            return Ternary(cond, then, other)
        return cond

    def parse_compare(self) -> Expr:
        left = self.parse_additive()
        if self.cur().kind in _CMP_OPS:
            op = self.advance().kind
            right = self.parse_additive()
            return BinOp(op, left, right)
        return left

    def parse_additive(self) -> Expr:
        left = self.parse_multiplicative()
        while self.cur().kind in ("+", "-"):
            op = self.advance().kind
            right = self.parse_multiplicative()
            left = BinOp(op, left, right)
        return left

    def parse_multiplicative(self) -> Expr:
        left = self.parse_unary()
        while self.cur().kind in ("*", "/"):
            op = self.advance().kind
            right = self.parse_unary()
            left = BinOp(op, left, right)
        return left

    def parse_unary(self) -> Expr:
        if self.cur().kind == "-":
            self.advance()
            return Neg(self.parse_unary())
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        e = self.parse_primary()
        while True:
            t = self.cur()
            if t.kind == ".":
                # dotted access: extend chains, otherwise method call
                self.advance()
                name = self.expect("NAME").text
                if self.cur().kind == "(":
                    self.advance()
                    args = []
                    if self.cur().kind != ")":
                        args.append(self.parse_expr())
                        while self.cur().kind == ",":
                            self.advance()
                            args.append(self.parse_expr())
                    self.expect(")")
                    e = MethodCall(e, name, tuple(args))
                elif isinstance(e, Name):
                    e = ChainExpr((e.ident, name))
                elif isinstance(e, ChainExpr):
                    e = ChainExpr(e.parts + (name,))
                else:
                    raise DslError("dotted access on a non-chain expression", t.pos, self.source_name)
                continue
            if t.kind == "[":
                if self.peek().kind == "NUMBER" and self.peek(2).kind == ":":
                    self.advance()
                    lo = int(self.expect("NUMBER").value)
                    self.expect(":")
                    hi = int(self.expect("NUMBER").value)
                    self.expect("]")
                    e = SliceExpr(e, lo, hi)
                else:
                    self.advance()
                    key = self.parse_expr()
                    self.expect("]")
                    e = IndexExpr(e, key)
                continue
            break
        return e

    def parse_primary(self) -> Expr:
        t = self.cur()
        if t.kind == "NUMBER":
            self.advance()
            return Literal(t.value)
        if t.kind == "STRING":
            self.advance()
            return self.parse_interpolation(t)
        if t.kind == "observed_values":
            self.advance()
            self.expect("[")
            self.expect(":")
            col = self.column_name()
            by = None
            if self.cur().kind == "by":
                self.advance()
                self.expect(":")
                by = self.column_name()
            self.expect("]")
            return ObservedValues(column=col, by=by)
        if t.kind == "NAME":
            self.advance()
            if self.cur().kind == "(":
                self.advance()
                args = []
                if self.cur().kind != ")":
                    args.append(self.parse_expr())
                    while self.cur().kind == ",":
                        self.advance()
                        args.append(self.parse_expr())
                self.expect(")")
                return Call(t.text, tuple(args))
            return Name(t.text)
        if t.kind == "(":
            self.advance()
            e = self.parse_expr()
            self.expect(")")
            return e
        raise DslError(f"expected expression, found {t.text!r}", t.pos, self.source_name)

    def parse_interpolation(self, tok: Token) -> Expr:
        text = tok.text
        if "$" not in text:
            return Literal(text)
        parts: list[object] = []
        buf = []
        i = 0
        n = len(text)
        while i < n:
            c = text[i]
            if c == "$" and i + 1 < n:
                if buf:
                    parts.append("".join(buf))
                    buf = []
                if text[i + 1] == "(":
                    depth = 1
                    j = i + 2
                    while j < n and depth:
                        if text[j] == "(":
                            depth += 1
                        elif text[j] == ")":
                            depth -= 1
                        j += 1
                    if depth:
                        raise DslError("unterminated $( in string", tok.pos, self.source_name)
                    inner = text[i + 2 : j - 1]
                    sub = parse_expression(inner, self.source_name)
                    parts.append(sub)
                    i = j
                else:
                    j = i + 1
                    while j < n and (text[j].isalnum() or text[j] == "_"):
                        j += 1
                    if j == i + 1:
                        buf.append("$")
                        i += 1
                        continue
                    ident = text[i + 1 : j]
                    parts.append(Name(ident))
                    i = j
                continue
            buf.append(c)
            i += 1
        if buf:
            parts.append("".join(buf))
        return Interp(tuple(parts))


def parse_program(source: str, source_name: str = "<string>") -> Program:
    """Parse model source text into an AST. Raises DslError on failure."""
    tokens = tokenize(source, source_name)
    return Parser(tokens, source_name).parse_program()


def parse_expression(source: str, source_name: str = "<string>") -> Expr:
    tokens = tokenize(source, source_name)
    p = Parser(tokens, source_name)
    e = p.parse_expr()
    p.skip_separators()
    if p.cur().kind != "EOF":
        raise DslError(
            f"unexpected {p.cur().text!r} in expression", p.cur().pos, source_name
        )
    return e
