"""Bayesian-network representation of one re-proposal problem.

A net covers one subproblem of one object: chain nodes for reference
slots reachable from it, attribute nodes for every attribute of every
class along those chains, and deterministic nodes. Token values stand
for structure choices: `NewToken(path)` seats a reference at a fresh
object, `OTHER` is the preferred-values escape hatch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..dsl.ast import AttributeStmt, DeterministicStmt
from ..exprs import Scope


class NewToken:
    """Seating choice that creates a new object for the chain at `path`."""

    __slots__ = ("path",)

    def __init__(self, path: tuple[str, ...]):
        self.path = path

    def __eq__(self, other):
        return isinstance(other, NewToken) and other.path == self.path

    def __hash__(self):
        return hash(("NEW", self.path))

    def __repr__(self):
        return f"NEW({'.'.join(self.path)})"


class OtherToken:
    __slots__ = ()

    def __repr__(self):
        return "OTHER"


OTHER = OtherToken()


def node_name(path: tuple[str, ...], attr: str | None = None) -> str:
    parts = list(path)
    if attr is not None:
        parts.append(attr)
    return ".".join(parts) if parts else "<root>"


@dataclass
class Node:
    name: str
    kind: str  # "chain" | "attr" | "det"
    path: tuple[str, ...]  # chain: slot path; attr/det: owner's chain path
    attr: str | None  # attr name (attr/det nodes)
    owner_cls: str  # class declaring the statement / reference
    target_cls: str | None  # chain nodes: target class
    stmt: object = None
    parents: list[str] = field(default_factory=list)
    domain: list = field(default_factory=list)
    observed: object = None
    is_observed: bool = False
    prior_sampled: bool = False
    # chain extras
    same_class_earlier: list[str] = field(default_factory=list)
    frozen_counts: dict = None
    frozen_total: int = 0
    frozen_tables: int = 0
    # attr extras
    hinted: bool = False
    preferred: list = None

    @property
    def domain_size(self) -> int:
        return len(self.domain)

    def lookup(self, value):
        if not hasattr(self, "_index"):
            self._index = {v: i for i, v in enumerate(self.domain)}
        return self._index.get(value)


@dataclass
class PendingTerm:
    """A fixed attribute value acting as an observation: its density term
    is re-scored against net-node values during enumeration."""

    cls: str
    oid: int
    attr: str
    value: object


@dataclass
class Net:
    root_cls: str
    root_oid: int
    sp_names: list[str]
    nodes: list[Node] = field(default_factory=list)
    by_name: dict[str, Node] = field(default_factory=dict)
    pending: list[PendingTerm] = field(default_factory=list)
    exact: bool = True  # no OTHER / prior-sampled surrogates involved

    def add(self, node: Node):
        self.nodes.append(node)
        self.by_name[node.name] = node

    def node(self, name: str) -> Node | None:
        return self.by_name.get(name)

    def describe(self) -> str:
        """Text DAG dump: node, domain size, parents."""
        lines = []
        for n in self.nodes:
            obs = f" obs={n.observed!r}" if n.is_observed else ""
            ps = f" prior-sampled" if n.prior_sampled else ""
            lines.append(
                f"{n.name} [{n.kind}] |domain|={n.domain_size}"
                f" parents={','.join(n.parents) or '-'}{obs}{ps}"
            )
        return "\n".join(lines) + "\n"


class NetScope(Scope):
    """Expression scope that resolves through the trace but intercepts
    references that land on net nodes.

    In collect mode (`values is None`) referenced node names accumulate in
    `hits`; clamped nodes resolve to their observed value. In evaluate mode
    node references read from the `values` assignment."""

    def __init__(self, trace, net: Net, anchor, values=None):
        # anchor: ("path", owner_path) for in-net statements, or
        #         ("object", cls, oid) for external pending statements.
        self.trace = trace
        self.net = net
        self.anchor = anchor
        self.values = values
        self.hits: list[str] = []

    def _node_value(self, name: str):
        node = self.net.by_name[name]
        if node.is_observed:
            return node.observed
        if self.values is not None:
            if name in self.values:
                return self.values[name]
            raise KeyError(f"node {name} missing from assignment")
        self.hits.append(name)
        return node.domain[0] if node.domain else None

    def _root_attr(self, ident: str):
        trace = self.trace
        name = node_name((), ident)
        if name in self.net.by_name:
            return self._node_value(name)
        obj = trace.objects[self.net.root_cls].get(self.net.root_oid)
        if obj is not None and ident in obj.attrs:
            return obj.attrs[ident]
        raise KeyError(f"{self.net.root_cls}.{ident} unavailable")

    def lookup_name(self, ident: str):
        trace = self.trace
        if self.anchor[0] == "path":
            owner_path = self.anchor[1]
            cls = (
                self.net.root_cls
                if not owner_path
                else trace.model.chain_target_class(self.net.root_cls, owner_path)
            )
            info = trace.model.classes[cls]
            if ident in info.params:
                return trace.param_entry(cls, ident)
            if ident in info.attr_stmts:
                name = node_name(owner_path, ident)
                if name in self.net.by_name:
                    return self._node_value(name)
                if not owner_path:
                    return self._root_attr(ident)
                raise KeyError(f"{name} not in net")
            return trace.preamble_env[ident]
        cls, oid = self.anchor[1], self.anchor[2]
        info = trace.model.classes[cls]
        if ident in info.params:
            return trace.param_entry(cls, ident)
        obj = trace.objects[cls][oid]
        if ident in obj.attrs:
            return obj.attrs[ident]
        if ident in info.attr_stmts and isinstance(
            info.attr_stmts[ident], DeterministicStmt
        ):
            # re-evaluate deterministic attrs symbolically
            from ..exprs import evaluate

            sub = NetScope(self.trace, self.net, self.anchor, self.values)
            out = evaluate(info.attr_stmts[ident].expr, sub)
            self.hits.extend(sub.hits)
            return out
        if ident in trace.preamble_env:
            return trace.preamble_env[ident]
        raise KeyError(f"{cls}.{ident} unavailable")

    def lookup_chain(self, parts: tuple[str, ...]):
        trace = self.trace
        if self.anchor[0] == "path":
            full = tuple(self.anchor[1]) + tuple(parts)
            name = node_name(full[:-1], full[-1])
            if name in self.net.by_name:
                return self._node_value(name)
            # chain resolved through concrete trace objects from the root
            return self._navigate(self.net.root_cls, self.net.root_oid, full)
        cls, oid = self.anchor[1], self.anchor[2]
        return self._navigate(cls, oid, tuple(parts))

    def _navigate(self, cls: str, oid: int, parts: tuple[str, ...]):
        trace = self.trace
        root_key = (self.net.root_cls, self.net.root_oid)
        path_here: tuple[str, ...] | None = None
        if (cls, oid) == root_key:
            path_here = ()
        for i, slot in enumerate(parts[:-1]):
            if path_here is not None:
                name = node_name(path_here + (slot,))
                if name in self.net.by_name:
                    return self._chain_onward(name, parts[i + 1 :])
            obj = trace.objects[cls][oid]
            if slot not in obj.slots:
                raise KeyError(f"{cls}.{slot} unassigned during net evaluation")
            oid = obj.slots[slot]
            cls = trace.model.classes[cls].refs[slot]
            if (cls, oid) == root_key:
                path_here = ()
            elif path_here is not None:
                path_here = path_here + (slot,)
        tail = parts[-1]
        if path_here is not None:
            name = node_name(path_here, tail)
            if name in self.net.by_name:
                return self._node_value(name)
        obj = trace.objects[cls][oid]
        if tail in obj.attrs:
            return obj.attrs[tail]
        raise KeyError(f"{cls}.{tail} unassigned during net evaluation")

    def _chain_onward(self, name: str, rest: tuple[str, ...]):
        """Continue a chain through an in-net chain node's sampled target."""
        value = self._node_value(name)
        node = self.net.by_name[name]
        if isinstance(value, NewToken):
            base = value.path
            full = base + tuple(rest)
            nm = node_name(full[:-1], full[-1])
            if nm in self.net.by_name:
                return self._node_value(nm)
            raise KeyError(f"{nm} not in net (new-object chain)")
        return self._navigate(node.target_cls, value, tuple(rest))

    def observed_table(self, column: str, by: str | None):
        return self.trace.observed_table(column, by)
