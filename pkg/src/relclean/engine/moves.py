"""Executing sampled proposals against a trace.

`sample_and_apply` draws from an enumerated net, concretizes structure
tokens (creating objects), replaces OTHER tokens by prior draws, applies
everything to the trace, and returns both the exact proposal density and
the exact model density delta -- their difference is the SMC/MH weight
correction (zero for exact nets).
"""

from __future__ import annotations

import math

from ..compiler.net import OTHER, Net, NetScope, NewToken, OtherToken
from ..dists import lookup as dist_lookup
from ..dsl.ast import DeterministicStmt
from ..exprs import evaluate
from ..trace import Fragment, Trace

REJECTION_CAP = 10_000


class MoveError(Exception):
    pass


def _residual(dist, args, preferred) -> float:
    total = 0.0
    for v in preferred:
        lp = Trace.term_logp(dist, args, v)
        if lp > -700:
            total += math.exp(lp)
    return max(1.0 - total, 1e-300)


def _replacement_draw(trace, dist, args, preferred, rng):
    pref = set(preferred or ())
    support = dist.support(args)
    if support is not None:
        comp = [v for v in support if v not in pref]
        if not comp:
            raise MoveError("OTHER drawn but the preferred values cover the support")
        weights = [math.exp(Trace.term_logp(dist, args, v)) for v in comp]
        total = sum(weights)
        r = rng.random() * total
        acc = 0.0
        for v, w in zip(comp, weights):
            acc += w
            if r <= acc:
                return v
        return comp[-1]
    for _ in range(REJECTION_CAP):
        v = dist.sample(args, rng)
        if v not in pref:
            return v
    raise MoveError("rejection sampling for an OTHER replacement did not terminate")


def sample_and_apply(trace: Trace, net: Net, enum, rng, external=None):
    """Returns (logp_delta, logq, assignment) after mutating the trace."""
    tokens = enum.sample(rng)
    score_before = trace.score
    logq = enum.logq(tokens)
    logq += apply_assignment(trace, net, tokens, rng)
    if external:
        _recompute_external(trace, external)
    return trace.score - score_before, logq, tokens


def apply_assignment(trace: Trace, net: Net, assignment: dict, rng) -> float:
    """Apply a token assignment; returns the log-density of replacement and
    prior-sampled draws made along the way (the q-adjustment)."""
    model = trace.model
    objmap: dict[tuple, tuple] = {(): (net.root_cls, net.root_oid, True)}
    logq_adjust = 0.0

    for node in net.nodes:
        if node.kind == "chain":
            v = assignment.get(node.name)
            parent_path = node.path[:-1]
            pcls, poid, pcreated = objmap[parent_path]
            slot = node.path[-1]
            if isinstance(v, NewToken):
                if v.path == node.path:
                    toid = trace.create_object(node.target_cls)
                    objmap[node.path] = (node.target_cls, toid, True)
                else:
                    tcls, toid, _ = objmap[v.path]
                    objmap[node.path] = (tcls, toid, False)
                if pcreated:
                    trace.set_slot(pcls, poid, slot, toid)
            else:
                if pcreated:
                    if v is None:
                        raise MoveError(f"chain {node.name} missing from assignment")
                    trace.set_slot(pcls, poid, slot, v)
                    objmap[node.path] = (node.target_cls, v, False)
                else:
                    actual = trace.objects[pcls][poid].slots[slot]
                    objmap[node.path] = (node.target_cls, actual, False)
            continue

        ocls, ooid, created = objmap[node.path] if node.path else objmap[()]
        if not created:
            continue
        if isinstance(node.stmt, DeterministicStmt):
            trace.set_attr(ocls, ooid, node.attr)
            continue
        if node.prior_sampled:
            stmt = node.stmt
            dist = dist_lookup(stmt.dist_name)
            args = trace.eval_args(ocls, ooid, stmt)
            v = dist.sample(args, rng)
            logq_adjust += Trace.term_logp(dist, args, v)
            trace.set_attr(ocls, ooid, node.attr, v)
            continue
        v = assignment[node.name] if not node.is_observed else node.observed
        if isinstance(v, OtherToken):
            stmt = node.stmt
            dist = dist_lookup(stmt.dist_name)
            args = trace.eval_args(ocls, ooid, stmt)
            pref = node.preferred or []
            v = _replacement_draw(trace, dist, args, pref, rng)
            logq_adjust += Trace.term_logp(dist, args, v) - math.log(
                _residual(dist, args, pref)
            )
        trace.set_attr(ocls, ooid, node.attr, v)
    return logq_adjust


def _recompute_external(trace: Trace, external):
    """Re-score detached dependent terms against the new parent values."""
    model = trace.model

    def sort_key(item):
        cls, oid, attr = item
        info = model.classes[cls]
        return (cls, oid, info.attr_order.index(attr))

    for cls, oid, attr in sorted(external, key=sort_key):
        obj = trace.objects[cls].get(oid)
        if obj is None or attr in obj.terms:
            continue
        if attr in obj.attrs:
            # deterministic values refresh against new parents
            stmt = model.classes[cls].attr_stmts[attr]
            if isinstance(stmt, DeterministicStmt):
                del obj.attrs[attr]
                trace.set_attr(cls, oid, attr)
            else:
                trace.recompute_term(cls, oid, attr)


def old_assignment_of_fragment(trace: Trace, net: Net, frag: Fragment):
    """Tokenized and concrete node assignments describing the detached
    state, for evaluating the reverse proposal density."""
    model = trace.model
    removed = {(scls, soid): (dict(attrs), dict(slots)) for scls, soid, attrs, slots in frag.subtree}
    path_obj: dict[tuple, tuple] = {}

    root_slots = dict(frag.root_slots)
    root_attrs = dict(frag.root_attrs)

    tokens: dict = {}
    concrete: dict = {}
    extras: list[tuple] = []  # (node, old_value) for OTHER / prior-sampled

    def resolve_chain(node):
        parent_path = node.path[:-1]
        slot = node.path[-1]
        if parent_path:
            pstate = path_obj.get(parent_path)
            if pstate is None:
                return
            kind, pcls, poid = pstate
            if kind == "existing":
                target = trace.objects[pcls][poid].slots.get(slot)
            else:
                target = removed[(pcls, poid)][1].get(slot)
        else:
            target = root_slots.get(slot)
        if target is None:
            return
        tcls = node.target_cls
        if (tcls, target) in removed:
            tokens[node.name] = NewToken(node.path)
            concrete[node.name] = NewToken(node.path)
            path_obj[node.path] = ("removed", tcls, target)
        else:
            tokens[node.name] = target
            concrete[node.name] = target
            path_obj[node.path] = ("existing", tcls, target)

    def attr_value(node):
        if not node.path:
            return root_attrs.get(node.attr)
        state = path_obj.get(node.path)
        if state is None:
            return None
        kind, acls, aoid = state
        if kind == "existing":
            return trace.objects[acls][aoid].attrs.get(node.attr)
        return removed[(acls, aoid)][0].get(node.attr)

    for node in net.nodes:
        if node.kind == "chain":
            resolve_chain(node)
            continue
        if node.is_observed:
            tokens[node.name] = node.observed
            concrete[node.name] = node.observed
            continue
        v = attr_value(node)
        if v is None:
            continue
        concrete[node.name] = v
        if node.prior_sampled:
            extras.append((node, v))
            continue
        if node.lookup(v) is not None:
            tokens[node.name] = v
        elif node.hinted:
            tokens[node.name] = OTHER
            extras.append((node, v))
        else:
            tokens[node.name] = v  # will score -inf; flags a modeling hole
    return tokens, concrete, extras


def assignment_logq(trace: Trace, net: Net, enum, tokens, concrete, extras) -> float:
    """Exact proposal density of a concrete old/new assignment."""
    logq = enum.logq(tokens)
    for node, v in extras:
        stmt = node.stmt
        dist = dist_lookup(stmt.dist_name)
        scope = NetScope(trace, net, ("path", tuple(node.path)), values=concrete)
        args = tuple(evaluate(a, scope) for a in stmt.args)
        lp = Trace.term_logp(dist, args, v)
        if node.prior_sampled:
            logq += lp
        else:
            logq += lp - math.log(_residual(dist, args, node.preferred or []))
    return logq
