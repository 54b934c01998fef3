"""Log-space factor construction for proposal networks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from ..dists import lookup as dist_lookup
from ..dsl.ast import DeterministicStmt
from ..exprs import evaluate
from ..trace import Trace
from .net import OTHER, Net, NetScope, NewToken, Node, OtherToken, node_name

NEG = -np.inf

# damping applied to the OTHER token's downstream-likelihood surrogate so a
# concrete preferred value explaining the data always dominates the escape
# hatch (section: adaptive mixture proposals)
OTHER_LIKELIHOOD_DAMPING = 0.1


@dataclass
class Factor:
    scope: tuple[str, ...]
    table: np.ndarray

    def value_at(self, net: Net, assignment: dict) -> float:
        idx = []
        for name in self.scope:
            node = net.by_name[name]
            i = node.lookup(assignment[name]) if not node.is_observed else 0
            if i is None:
                return NEG
            idx.append(i)
        return float(self.table[tuple(idx)])


def _latent_scope(net: Net, names) -> tuple[str, ...]:
    return tuple(n for n in names if not net.by_name[n].is_observed)


def _squeeze_observed(net: Net, scope, table):
    """Index out observed axes (their domains have one value)."""
    keep = []
    idx = []
    for i, name in enumerate(scope):
        if net.by_name[name].is_observed:
            idx.append(0)
        else:
            idx.append(slice(None))
            keep.append(name)
    return tuple(keep), table[tuple(idx)]


def build_factors(trace: Trace, net: Net) -> list[Factor]:
    factors = []
    for node in net.nodes:
        if node.prior_sampled:
            continue
        if node.kind == "chain":
            f = _chain_factor(trace, net, node)
        elif node.kind == "det":
            f = _det_factor(trace, net, node)
        else:
            f = _attr_factor(trace, net, node)
        if f is not None:
            factors.append(f)
    for pend in net.pending:
        f = _pending_factor(trace, net, pend)
        if f is not None:
            factors.append(f)
    return factors


# -- chain nodes --------------------------------------------------------------


def _chain_factor(trace, net, node: Node) -> Factor:
    parent_names = list(node.parents)
    parent_nodes = [net.by_name[p] for p in parent_names]
    shape = [p.domain_size for p in parent_nodes] + [node.domain_size]
    table = np.full(shape, NEG)
    state = trace.crp[node.target_cls]
    s, d = state.strength, state.discount

    pchain = None
    earlier = []
    for p in parent_nodes:
        if p.kind == "chain" and p.name == node_name(node.path[:-1]):
            pchain = p
        else:
            earlier.append(p)

    combos = list(product(*[range(p.domain_size) for p in parent_nodes]))
    for combo in combos:
        values = {p.name: p.domain[ci] for p, ci in zip(parent_nodes, combo)}
        if pchain is not None:
            pv = values[pchain.name]
            if not isinstance(pv, NewToken):
                target = trace.objects[pchain.target_cls][pv].slots.get(node.path[-1])
                j = node.lookup(target)
                if j is not None:
                    table[combo + (j,)] = 0.0
                continue
            if pv.path != node.path[:-1]:
                raise RuntimeError("nested chain under a shared new object")
        # CRP seating with counts adjusted for co-proposed seatings
        add: dict = {}
        token_counts: dict = {}
        for e in earlier:
            ev = values[e.name]
            if isinstance(ev, NewToken):
                token_counts[ev] = token_counts.get(ev, 0) + 1
            else:
                add[ev] = add.get(ev, 0) + 1
        extra_tables = len(token_counts)
        denom = math.log(node.frozen_total + len(earlier) + s)
        for j, v in enumerate(node.domain):
            if isinstance(v, NewToken):
                if v.path == node.path:
                    k = node.frozen_tables + extra_tables
                    table[combo + (j,)] = math.log(s + d * k) - denom
                else:
                    # share a table opened by an earlier co-proposed chain;
                    # only valid if that chain actually opened it
                    n = token_counts.get(v, 0)
                    if n > 0:
                        table[combo + (j,)] = math.log(n - d) - denom
            else:
                n = node.frozen_counts.get(v, 0) + add.get(v, 0)
                if n > 0:
                    table[combo + (j,)] = math.log(n - d) - denom
    scope, table = _squeeze_observed(net, tuple(parent_names) + (node.name,), table)
    return Factor(scope, table)


# -- deterministic nodes -------------------------------------------------------


def _det_factor(trace, net, node: Node) -> Factor:
    parent_names = list(node.parents)
    parent_nodes = [net.by_name[p] for p in parent_names]
    shape = [p.domain_size for p in parent_nodes] + [node.domain_size]
    table = np.full(shape, NEG)
    owner = net.by_name[node_name(node.path)] if node.path else None
    for combo in product(*[range(p.domain_size) for p in parent_nodes]):
        values = {p.name: p.domain[ci] for p, ci in zip(parent_nodes, combo)}
        v = _det_value(trace, net, node, values, owner)
        j = node.lookup(v)
        if j is not None:
            table[combo + (j,)] = 0.0
        elif node.is_observed and v == node.observed:
            table[combo + (0,)] = 0.0
    scope, table = _squeeze_observed(net, tuple(parent_names) + (node.name,), table)
    return Factor(scope, table)


def _det_value(trace, net, node, values, owner):
    if owner is not None:
        ov = values[owner.name]
        if not isinstance(ov, NewToken):
            return trace.objects[owner.target_cls][ov].attrs.get(node.attr)
    scope = NetScope(trace, net, ("path", tuple(node.path)), values=values)
    trace_peek = _peek_params(trace)
    try:
        return evaluate(node.stmt.expr, scope)
    finally:
        _unpeek_params(trace, trace_peek)


# -- attribute nodes -----------------------------------------------------------


def _attr_factor(trace, net, node: Node) -> Factor | None:
    stmt = node.stmt
    dist = dist_lookup(stmt.dist_name)
    parent_names = list(node.parents)
    parent_nodes = [net.by_name[p] for p in parent_names]
    owner = None
    copy_srcs = {}
    dep_nodes = []
    for p in parent_nodes:
        if p.kind == "chain" and p.name == node_name(node.path):
            owner = p
        elif p.kind in ("attr", "det") and node.path and p.attr == node.attr and p.path != node.path:
            copy_srcs[NewToken(p.path)] = p
        else:
            dep_nodes.append(p)

    dep_names = [p.name for p in dep_nodes]
    dep_shape = [p.domain_size for p in dep_nodes]
    n_dom = node.domain_size
    owner_size = owner.domain_size if owner is not None else 1
    shape = dep_shape + ([owner_size] if owner is not None else []) + [n_dom]
    table = np.full(shape, NEG)

    # copy rows for concrete owner candidates are dep-independent
    copy_plane = None
    if owner is not None:
        copy_plane = np.full((owner_size, n_dom), NEG)
        for i, ov in enumerate(owner.domain):
            if isinstance(ov, NewToken):
                continue
            v = trace.objects[owner.target_cls][ov].attrs.get(node.attr)
            j = node.lookup(v)
            if j is not None:
                copy_plane[i, j] = 0.0

    trace_peek = _peek_params(trace)
    try:
        for combo in product(*[range(p.domain_size) for p in dep_nodes]):
            values = {p.name: p.domain[ci] for p, ci in zip(dep_nodes, combo)}
            row = _dist_row(trace, net, node, dist, stmt, values)
            if owner is not None:
                plane = copy_plane.copy()
                for i, ov in enumerate(owner.domain):
                    if not isinstance(ov, NewToken):
                        continue
                    if ov.path == node.path:
                        plane[i, :] = row
                    else:
                        src = copy_srcs.get(ov)
                        if src is not None:
                            sv = values.get(src.name)
                            j = node.lookup(sv)
                            plane[i, :] = NEG
                            if j is not None:
                                plane[i, j] = 0.0
                table[combo] = plane
            else:
                table[combo] = row
    finally:
        _unpeek_params(trace, trace_peek)

    order = dep_names + ([owner.name] if owner is not None else []) + [node.name]
    scope, table = _squeeze_observed(net, tuple(order), table)
    if not scope:
        # fully observed with constant parents: constant likelihood factor
        return Factor((), table)
    return Factor(scope, table)


def _dist_row(trace, net, node: Node, dist, stmt, values) -> np.ndarray:
    """Log-mass over the node's domain given concrete dependency values."""
    row = np.full(node.domain_size, NEG)
    scope = NetScope(trace, net, ("path", tuple(node.path)), values=values)

    # center parent carrying OTHER: surrogate masses
    center_other = False
    if dist.center_arg is not None and dist.center_arg < len(stmt.args):
        from .build import _center_parent

        cname = _center_parent(trace.model, net, node.path, stmt, dist)
        if cname is not None and isinstance(values.get(cname), OtherToken):
            center_other = True
    if center_other:
        if node.is_observed:
            v = node.observed
            lp = _other_surrogate(trace, net, node, dist, stmt, v)
            row[0] = lp
            return row
        j = node.lookup(OTHER)
        if j is not None:
            row[j] = 0.0
        return row

    try:
        args = tuple(evaluate(a, scope) for a in stmt.args)
    except KeyError:
        return row

    if node.is_observed:
        row[0] = Trace.term_logp(dist, args, node.observed)
        return row

    if node.hinted:
        pref = node.preferred or []
        logs = np.array([Trace.term_logp(dist, args, v) for v in pref])
        total = float(np.exp(np.clip(logs, -745, 50)).sum()) if len(logs) else 0.0
        residual = max(1.0 - total, 1e-300)
        for v, lp in zip(pref, logs):
            j = node.lookup(v)
            if j is not None:
                row[j] = lp
        j = node.lookup(OTHER)
        if j is not None:
            row[j] = math.log(residual)
        return row

    # finite support
    for j, v in enumerate(node.domain):
        if isinstance(v, (OtherToken, NewToken)):
            continue
        row[j] = Trace.term_logp(dist, args, v)
    return row


def _other_surrogate(trace, net, node, dist, stmt, observed_value) -> float:
    """Likelihood surrogate for a noise channel whose center is OTHER:
    damping * prior(obs under the center's own prior) * channel(obs | obs)."""
    lp = math.log(OTHER_LIKELIHOOD_DAMPING)
    center = stmt.args[dist.center_arg]
    from .build import _center_parent

    cname = _center_parent(trace.model, net, node.path, stmt, dist)
    cnode = net.by_name.get(cname)
    if cnode is not None and cnode.stmt is not None and cnode.kind == "attr":
        cdist = dist_lookup(cnode.stmt.dist_name)
        cscope = NetScope(trace, net, ("path", tuple(cnode.path)))
        try:
            cargs = tuple(evaluate(a, cscope) for a in cnode.stmt.args)
            if not cscope.hits:
                lp += cdist.logpdf(cargs, observed_value)
        except KeyError:
            pass
    # channel mass at an exact match
    try:
        scope = NetScope(trace, net, ("path", tuple(node.path)))
        args = list(stmt.args)
        dummy_args = []
        for i, a in enumerate(stmt.args):
            if i == dist.center_arg:
                dummy_args.append(observed_value)
            else:
                dummy_args.append(evaluate(a, scope))
        lp += Trace.term_logp(dist, tuple(dummy_args), observed_value)
    except KeyError:
        pass
    return lp


# -- pending (detached dependent) terms ----------------------------------------


def _pending_factor(trace, net, pend) -> Factor | None:
    stmt = trace.model.classes[pend.cls].attr_stmts[pend.attr]
    if isinstance(stmt, DeterministicStmt):
        return None
    dist = dist_lookup(stmt.dist_name)
    # dependency collection by a probe evaluation
    probe = NetScope(trace, net, ("object", pend.cls, pend.oid))
    try:
        for a in stmt.args:
            evaluate(a, probe)
    except KeyError:
        pass
    dep_names = list(dict.fromkeys(probe.hits))
    dep_names = [d for d in dep_names if not net.by_name[d].is_observed]
    dep_nodes = [net.by_name[d] for d in dep_names]
    if not dep_nodes:
        return None
    if any(n.prior_sampled for n in dep_nodes):
        return None  # excluded from enumeration; recovered by exact weights
    shape = [p.domain_size for p in dep_nodes]
    table = np.full(shape, NEG)
    trace_peek = _peek_params(trace)
    try:
        for combo in product(*[range(p.domain_size) for p in dep_nodes]):
            values = {p.name: p.domain[ci] for p, ci in zip(dep_nodes, combo)}
            # OTHER center: damped surrogate
            other_center = False
            if dist.center_arg is not None:
                try:
                    center_val = _arg_value(trace, net, pend, stmt.args[dist.center_arg], values)
                except KeyError:
                    center_val = None
                if isinstance(center_val, OtherToken):
                    other_center = True
            if other_center:
                table[combo] = math.log(OTHER_LIKELIHOOD_DAMPING) + Trace.term_logp(
                    dist,
                    _args_with_center(trace, net, pend, stmt, dist, values, pend.value),
                    pend.value,
                )
                continue
            scope = NetScope(trace, net, ("object", pend.cls, pend.oid), values=values)
            try:
                args = tuple(evaluate(a, scope) for a in stmt.args)
            except KeyError:
                continue
            table[combo] = Trace.term_logp(dist, args, pend.value)
    finally:
        _unpeek_params(trace, trace_peek)
    return Factor(tuple(dep_names), table)


def _arg_value(trace, net, pend, arg, values):
    scope = NetScope(trace, net, ("object", pend.cls, pend.oid), values=values)
    return evaluate(arg, scope)


def _args_with_center(trace, net, pend, stmt, dist, values, center_value):
    out = []
    for i, a in enumerate(stmt.args):
        if i == dist.center_arg:
            out.append(center_value)
        else:
            out.append(_arg_value(trace, net, pend, a, values))
    return tuple(out)


# -- parameter peeking ----------------------------------------------------------


def _peek_params(trace):
    from ..trace import ParamCollection

    flagged = []
    for entry in trace.params.values():
        if isinstance(entry, ParamCollection):
            entry.peek_mode = True
            flagged.append(entry)
    return flagged


def _unpeek_params(trace, flagged):
    for entry in flagged:
        entry.peek_mode = False
