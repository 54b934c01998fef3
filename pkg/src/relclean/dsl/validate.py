"""Semantic validation: scoping, acyclicity, dependency analysis.

Produces a `Model`: the annotated program the inference engine consumes.
Beyond error checking this computes, per class, the declaration-order
dependency info of every statement (own-attribute reads, slot-chain reads,
parameter uses), the subproblem plan, and the observation-constraint links
used for candidate hashing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..dists import lookup as dist_lookup
from .ast import (
    AttributeStmt,
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
    ObservedValues,
    ParameterStmt,
    Program,
    ReferenceStmt,
    SliceExpr,
    walk_expr,
)
from .lexer import DslError

BUILTIN_FNS = {
    "lowercase",
    "uppercase",
    "size",
    "ones",
    "round",
    "abs",
    "min",
    "max",
    "concat",
    "transformations",
    "first_last",
}

DERIVE_FNS = {"first_last", "lowercase", "uppercase", "identity", "prefix2", "prefix3"}


@dataclass
class ParamUse:
    name: str
    key: Expr | None


@dataclass
class StmtInfo:
    own_deps: list[str] = field(default_factory=list)
    chain_deps: list[tuple[str, ...]] = field(default_factory=list)
    param_uses: list[ParamUse] = field(default_factory=list)
    observed_tables: list[ObservedValues] = field(default_factory=list)


@dataclass
class ObsLink:
    path: tuple[str, ...]  # slot path from the observation class
    attr: str
    column: str


class ClassInfo:
    def __init__(self, decl: ClassDecl):
        self.decl = decl
        self.name = decl.name
        self.refs: dict[str, str] = {}
        self.ref_order: list[str] = []
        self.attr_stmts: dict[str, AttributeStmt | DeterministicStmt] = {}
        self.attr_order: list[str] = []
        self.params: dict[str, ParameterStmt] = {}
        self.stmt_infos: dict[str, StmtInfo] = {}
        self.subproblems: list[list[str]] = []
        self.index_hints: list[IndexHint] = decl.index_hints
        self.enumerability: dict[str, str] = {}

    def statement_names(self) -> list[str]:
        out = []
        for s in self.decl.statements:
            if not isinstance(s, ParameterStmt):
                out.append(s.name)
        return out

    def is_ref(self, name: str) -> bool:
        return name in self.refs


class Model:
    """Validated program with the static analysis the engine needs."""

    def __init__(self, program: Program):
        self.program = program
        self.classes: dict[str, ClassInfo] = {}
        self.obs_class: str = program.query.obs_class
        self.topo_leaves_first: list[str] = []
        self.query_bindings: list[tuple[tuple[str, ...], str, str, str]] = []
        self.column_kinds: dict[str, str] = {}
        self.obs_links: dict[tuple[str, ...], list[ObsLink]] = {}
        # columns linked to latent attributes through exactly one noise CPD;
        # usable for hashing only under aggressive `index on` hints
        self.noisy_links: dict[tuple[str, ...], list[ObsLink]] = {}
        self.readers: dict[tuple[str, str], list[tuple[str, str, tuple[str, ...]]]] = {}
        self.param_readers: dict[tuple[str, str], list[tuple[str, str]]] = {}
        self.keyed_tables: list[tuple[str, str]] = []  # (value column, key column)

    def class_info(self, name: str) -> ClassInfo:
        return self.classes[name]

    def chain_target_class(self, start_class: str, slots: tuple[str, ...]) -> str:
        cls = start_class
        for s in slots:
            cls = self.classes[cls].refs[s]
        return cls


def _err(msg, pos, source):
    raise DslError(msg, pos, source)


def validate(program: Program) -> Model:
    src = program.source_name
    model = Model(program)

    # class naming and membership
    seen = set()
    for decl in program.classes:
        if decl.name in seen:
            _err(f"duplicate class name {decl.name!r}", decl.pos, src)
        seen.add(decl.name)
        model.classes[decl.name] = ClassInfo(decl)

    if program.query.obs_class not in model.classes:
        _err(
            f"unknown observation class {program.query.obs_class!r}",
            program.query.pos,
            src,
        )

    preamble_names = set()
    for p in program.preamble:
        if p.name in preamble_names:
            _err(f"duplicate preamble binding {p.name!r}", p.pos, src)
        preamble_names.add(p.name)
        if p.kind == "derive" and p.derive_fn not in DERIVE_FNS:
            _err(f"unknown derive function {p.derive_fn!r}", p.pos, src)

    # first pass: member declarations per class
    for decl in program.classes:
        info = model.classes[decl.name]
        names = set()
        for s in decl.statements:
            if s.name in names:
                _err(f"duplicate name {s.name!r} in class {decl.name}", s.pos, src)
            names.add(s.name)
            if isinstance(s, ReferenceStmt):
                if s.target_class not in model.classes:
                    _err(f"unknown target class {s.target_class!r}", s.pos, src)
                info.refs[s.name] = s.target_class
                info.ref_order.append(s.name)
            elif isinstance(s, ParameterStmt):
                info.params[s.name] = s
            else:
                info.attr_stmts[s.name] = s
                info.attr_order.append(s.name)

    # class dependency graph must be acyclic; topological order, leaves first
    order: list[str] = []
    state: dict[str, int] = {}

    def visit(cname: str, stack: list[str]):
        st = state.get(cname, 0)
        if st == 1:
            cycle = " -> ".join(stack + [cname])
            _err(f"cyclic class dependency: {cycle}", model.classes[cname].decl.pos, src)
        if st == 2:
            return
        state[cname] = 1
        for tgt in model.classes[cname].refs.values():
            visit(tgt, stack + [cname])
        state[cname] = 2
        order.append(cname)

    for decl in program.classes:
        visit(decl.name, [])
    model.topo_leaves_first = order

    # second pass: statement expressions, scoping, dependency info
    for decl in program.classes:
        info = model.classes[decl.name]
        declared: set[str] = set()
        declared_params = set(info.params)
        for s in decl.statements:
            if isinstance(s, ParameterStmt):
                _check_dist(s, src)
                for a in s.args:
                    _collect_info(model, info, a, declared, declared_params, s, src, hyper=True)
                continue
            si = StmtInfo()
            if isinstance(s, AttributeStmt):
                dist = _check_dist(s, src)
                for a in s.args:
                    _collect(model, info, a, declared, declared_params, si, s, src)
                if s.preferring is not None:
                    _collect(model, info, s.preferring, declared, declared_params, si, s, src)
                if dist.domain_kind == "finite":
                    info.enumerability[s.name] = "finite"
                elif s.preferring is not None:
                    info.enumerability[s.name] = "hinted"
                else:
                    info.enumerability[s.name] = "open"
            elif isinstance(s, DeterministicStmt):
                _collect(model, info, s.expr, declared, declared_params, si, s, src)
                info.enumerability[s.name] = "det"
            info.stmt_infos[s.name] = si
            declared.add(s.name)

        for hint in info.index_hints:
            if hint.attr not in info.attr_stmts:
                _err(
                    f"index hint names unknown attribute {hint.attr!r}", hint.pos, src
                )

        info.subproblems = _subproblem_plan(decl)

    # readers map: who reads (class, attr) through which slot path
    for decl in program.classes:
        info = model.classes[decl.name]
        for sname, si in info.stmt_infos.items():
            for pu in si.param_uses:
                model.param_readers.setdefault((decl.name, pu.name), []).append(
                    (decl.name, sname)
                )
            for dep in si.own_deps:
                model.readers.setdefault((decl.name, dep), []).append(
                    (decl.name, sname, ())
                )
            for path in si.chain_deps:
                slots, attr = path[:-1], path[-1]
                target = model.chain_target_class(decl.name, slots)
                model.readers.setdefault((target, attr), []).append(
                    (decl.name, sname, slots)
                )

    # query bindings
    cols = set()
    for chain, col in program.query.bindings:
        if col in cols:
            _err(f"duplicate query column {col!r}", program.query.pos, src)
        cols.add(col)
        slots, attr = chain[:-1], chain[-1]
        cls = model.obs_class
        for s in slots:
            cinfo = model.classes[cls]
            if s not in cinfo.refs:
                _err(
                    f"query chain {'.'.join(chain)}: {s!r} is not a reference slot of {cls}",
                    program.query.pos,
                    src,
                )
            cls = cinfo.refs[s]
        if attr not in model.classes[cls].attr_stmts:
            _err(
                f"query chain {'.'.join(chain)}: class {cls} has no attribute {attr!r}",
                program.query.pos,
                src,
            )
        model.query_bindings.append((slots, attr, col, cls))
        if slots:
            model.obs_links.setdefault(slots, []).append(
                ObsLink(path=slots, attr=attr, column=col)
            )
        else:
            stmt = model.classes[cls].attr_stmts[attr]
            if isinstance(stmt, AttributeStmt):
                dist = dist_lookup(stmt.dist_name)
                if dist.center_arg is not None and dist.center_arg < len(stmt.args):
                    center = stmt.args[dist.center_arg]
                    if isinstance(center, ChainExpr) and len(center.parts) > 1:
                        cslots, cattr = center.parts[:-1], center.parts[-1]
                        model.noisy_links.setdefault(tuple(cslots), []).append(
                            ObsLink(path=tuple(cslots), attr=cattr, column=col)
                        )
        model.column_kinds[col] = _column_kind(model, cls, attr)

    # keyed observed-value tables needed at ingestion
    tables = set()
    for decl in program.classes:
        info = model.classes[decl.name]
        for si in info.stmt_infos.values():
            for ov in si.observed_tables:
                if ov.by is not None:
                    tables.add((ov.column, ov.by))
    for p in program.preamble:
        if p.kind == "let" and p.expr is not None:
            for e in walk_expr(p.expr):
                if isinstance(e, ObservedValues) and e.by is not None:
                    tables.add((e.column, e.by))
    model.keyed_tables = sorted(tables)
    return model


def _check_dist(s, src):
    try:
        dist = dist_lookup(s.dist_name)
    except KeyError:
        _err(f"unknown distribution {s.dist_name!r}", s.pos, src)
    if not dist.check_arity(len(s.args)):
        lo, hi = dist.arity
        _err(
            f"{s.dist_name} takes {lo}..{hi} arguments, got {len(s.args)}",
            s.pos,
            src,
        )
    return dist


def _collect(model, info, expr, declared, declared_params, si, stmt, src):
    """Validate one expression in class scope and record its dependencies."""
    _collect_info(model, info, expr, declared, declared_params, stmt, src, si=si)


def _collect_info(model, info, expr, declared, declared_params, stmt, src, si=None, hyper=False):
    preamble = {p.name for p in model.program.preamble}

    def walk(e: Expr):
        if isinstance(e, Literal):
            return
        if isinstance(e, ObservedValues):
            if si is not None:
                si.observed_tables.append(e)
            return
        if isinstance(e, Name):
            n = e.ident
            if n in preamble:
                return
            if n in declared_params:
                if si is not None:
                    si.param_uses.append(ParamUse(n, None))
                return
            if hyper:
                _err(f"hyperprior argument references {n!r}", stmt.pos, src)
            if n in info.refs:
                _err(
                    f"reference slot {n!r} used where a value is required",
                    stmt.pos,
                    src,
                )
            if n in info.attr_stmts:
                if n not in declared:
                    _err(
                        f"attribute {n!r} used before its definition", stmt.pos, src
                    )
                if si is not None:
                    si.own_deps.append(n)
                return
            _err(f"unknown name {n!r}", stmt.pos, src)
        if isinstance(e, ChainExpr):
            first = e.parts[0]
            if first not in info.refs:
                _err(
                    f"{first!r} is not a reference slot of class {info.name}",
                    stmt.pos,
                    src,
                )
            if first not in declared:
                _err(
                    f"reference slot {first!r} used before its definition",
                    stmt.pos,
                    src,
                )
            cls = info.refs[first]
            for part in e.parts[1:-1]:
                cinfo = model.classes[cls]
                if part not in cinfo.refs:
                    _err(
                        f"{part!r} is not a reference slot of class {cls}",
                        stmt.pos,
                        src,
                    )
                cls = cinfo.refs[part]
            last = e.parts[-1]
            if len(e.parts) > 1:
                if last not in model.classes[cls].attr_stmts:
                    _err(f"class {cls} has no attribute {last!r}", stmt.pos, src)
            if si is not None:
                si.chain_deps.append(tuple(e.parts))
            return
        if isinstance(e, IndexExpr):
            if isinstance(e.base, Name) and e.base.ident in declared_params:
                if not info.params[e.base.ident].indexed:
                    _err(
                        f"parameter {e.base.ident!r} is not an indexed collection",
                        stmt.pos,
                        src,
                    )
                if si is not None:
                    si.param_uses.append(ParamUse(e.base.ident, e.key))
                walk(e.key)
                return
            walk(e.base)
            walk(e.key)
            return
        if isinstance(e, SliceExpr):
            if e.lo < 1 or e.hi < e.lo:
                _err("slice bounds are 1-based and inclusive", stmt.pos, src)
            walk(e.base)
            return
        if isinstance(e, Call):
            if e.fn not in BUILTIN_FNS:
                _err(f"unknown function {e.fn!r}", stmt.pos, src)
            for a in e.args:
                walk(a)
            return
        if isinstance(e, MethodCall):
            walk(e.base)
            for a in e.args:
                walk(a)
            return
        if isinstance(e, Interp):
            for p in e.parts:
                if isinstance(p, Expr):
                    walk(p)
            return
        for kind in ("cond", "then", "other", "left", "right", "operand"):
            if hasattr(e, kind):
                walk(getattr(e, kind))

    walk(expr)


def _subproblem_plan(decl: ClassDecl) -> list[list[str]]:
    """Ordered statement groups: user blocks, plus each contiguous run of
    unblocked statements; one whole-class group when there are no hints."""
    stmts = [s for s in decl.statements if not isinstance(s, ParameterStmt)]
    index_of = {}
    pos = 0
    for s in decl.statements:
        if isinstance(s, ParameterStmt):
            pos += 1
            continue
        index_of[pos] = s.name
        pos += 1
    names_in_order = [s.name for s in stmts]
    if not decl.subproblem_spans:
        return [names_in_order] if names_in_order else []

    # map raw statement indices (spans use them) to non-parameter positions
    raw_names = []
    for s in decl.statements:
        raw_names.append(None if isinstance(s, ParameterStmt) else s.name)
    groups: list[list[str]] = []
    covered = [False] * len(decl.statements)
    spans = sorted(decl.subproblem_spans)
    cursor = 0
    for start, endex in spans:
        run = [raw_names[i] for i in range(cursor, start) if raw_names[i] is not None]
        if run:
            groups.append(run)
        block = [raw_names[i] for i in range(start, endex) if raw_names[i] is not None]
        if block:
            groups.append(block)
        cursor = endex
    tail = [raw_names[i] for i in range(cursor, len(decl.statements)) if raw_names[i] is not None]
    if tail:
        groups.append(tail)
    return groups


def _column_kind(model: Model, cls: str, attr: str, depth: int = 0) -> str:
    """Infer the value kind of the dataset column bound to cls.attr."""
    from ..values import (
        KIND_REAL,
        KIND_STRING,
        KIND_TIMESTAMP,
    )

    if depth > 8:
        return KIND_STRING
    stmt = model.classes[cls].attr_stmts[attr]
    if isinstance(stmt, DeterministicStmt):
        return KIND_STRING
    dist = dist_lookup(stmt.dist_name)
    if dist.name in ("typos", "string_prior", "unmodeled", "number_code_prior"):
        return KIND_STRING
    if dist.name == "time_prior":
        return KIND_TIMESTAMP
    if dist.name in ("normal", "transformed_normal"):
        return KIND_REAL
    if dist.name == "maybe_swap":
        center = stmt.args[0]
        if isinstance(center, ChainExpr):
            slots, a = center.parts[:-1], center.parts[-1]
            try:
                tcls = model.chain_target_class(cls, slots)
                return _column_kind(model, tcls, a, depth + 1)
            except KeyError:
                return KIND_STRING
        if isinstance(center, Name) and center.ident in model.classes[cls].attr_stmts:
            return _column_kind(model, cls, center.ident, depth + 1)
        return KIND_STRING
    return KIND_STRING


def subproblem_plan(info: ClassInfo) -> list[list[str]]:
    """The validated subproblem decomposition for a class."""
    return info.subproblems
