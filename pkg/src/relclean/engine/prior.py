"""Prior (ancestral) proposals over increments and object blocks.

Implements the sequential generative process: reference slots seat by the
CRP (recursively creating parent objects on NEW), attributes sample from
their distributions in declaration order. Observed cells force their
attribute values; forced choices contribute model density but no proposal
density, so `logp - logq` is the importance weight.
"""

from __future__ import annotations

import math

from ..crp import NEW
from ..dists import lookup as dist_lookup
from ..dsl.ast import DeterministicStmt, ParameterStmt, ReferenceStmt
from ..trace import Fragment, Trace, detach_variables, reinsert_fragment


def _seat_from_prior(trace: Trace, target_cls: str, rng):
    state = trace.crp[target_cls]
    denom = state.total + state.strength
    ids = list(state.counts.keys())
    weights = [(state.counts[i] - state.discount) / denom for i in ids]
    weights.append((state.strength + state.discount * state.n_tables) / denom)
    r = rng.random() * sum(weights)
    acc = 0.0
    for i, w in zip(ids + [NEW], weights):
        acc += w
        if r <= acc:
            return i
    return NEW


def prior_propose_variables(
    trace: Trace,
    cls: str,
    oid: int,
    names,
    rng,
    clamps: dict[tuple, object] | None = None,
    path: tuple = (),
) -> float:
    """Fill the named variables of one object from the prior, recursively
    creating new referents. `clamps` maps (slots..., attr) paths to forced
    values. Returns the log-density of the sampled (non-forced) choices."""
    clamps = clamps or {}
    model = trace.model
    info = model.classes[cls]
    logq = 0.0
    names = set(names)
    for stmt in info.decl.statements:
        sname = stmt.name
        if sname not in names or isinstance(stmt, ParameterStmt):
            continue
        if isinstance(stmt, ReferenceStmt):
            target_cls = info.refs[sname]
            pick = _seat_from_prior(trace, target_cls, rng)
            if pick is NEW:
                toid = trace.create_object(target_cls)
                logq += trace.set_slot(cls, oid, sname, toid)
                logq += prior_propose_variables(
                    trace,
                    target_cls,
                    toid,
                    model.classes[target_cls].statement_names(),
                    rng,
                    clamps,
                    path + (sname,),
                )
            else:
                logq += trace.set_slot(cls, oid, sname, pick)
        elif isinstance(stmt, DeterministicStmt):
            trace.set_attr(cls, oid, sname)
        elif hasattr(stmt, "dist_name"):
            forced = clamps.get(path + (sname,))
            if forced is not None:
                trace.set_attr(cls, oid, sname, forced)
            else:
                args = trace.eval_args(cls, oid, stmt)
                dist = dist_lookup(stmt.dist_name)
                if dist.name == "unmodeled":
                    raise RuntimeError(
                        f"{cls}.{sname} is unmodeled and has no observed value to take"
                    )
                v = dist.sample(args, rng)
                logq += trace.set_attr(cls, oid, sname, v)
    return logq


def replay_fragment(
    trace: Trace, frag: Fragment, clamps: dict[tuple, object] | None = None
) -> float:
    """Reinsert a fragment in generative order, returning the log-density
    the prior proposer would have assigned to exactly these choices."""
    from ..trace import ObjectRec

    clamps = clamps or {}
    model = trace.model
    removed = {}
    for scls, soid, attrs, slots in frag.subtree:
        trace.objects[scls][soid] = ObjectRec(cls=scls, oid=soid)
        removed[(scls, soid)] = (dict(attrs), dict(slots))
    logq = 0.0

    def fill(cls, oid, attrs, slots, restrict, path):
        nonlocal logq
        info = model.classes[cls]
        for stmt in info.decl.statements:
            sname = stmt.name
            if restrict is not None and sname not in restrict:
                continue
            if isinstance(stmt, ParameterStmt):
                continue
            if isinstance(stmt, ReferenceStmt):
                if sname not in slots:
                    continue
                target = slots[sname]
                tcls = info.refs[sname]
                logq += trace.set_slot(cls, oid, sname, target)
                if (tcls, target) in removed:
                    sattrs, sslots = removed.pop((tcls, target))
                    fill(tcls, target, sattrs, sslots, None, path + (sname,))
            elif isinstance(stmt, DeterministicStmt):
                if sname in attrs:
                    trace.set_attr(cls, oid, sname)
            elif hasattr(stmt, "dist_name"):
                if sname not in attrs:
                    continue
                lp = trace.set_attr(cls, oid, sname, attrs[sname])
                if clamps.get(path + (sname,)) is None:
                    logq += lp

    root_attrs = dict(frag.root_attrs)
    root_slots = dict(frag.root_slots)
    fill(frag.cls, frag.oid, root_attrs, root_slots, frag.detached, ())
    for ecls, eoid, eattr, term in frag.external:
        trace.restore_term(ecls, eoid, eattr, term)
    return logq


def prior_mh_move(
    trace: Trace, cls: str, oid: int, names, rng, clamps=None
) -> bool:
    """Metropolis-Hastings with the sequential prior as proposal over one
    variable block. Returns True on acceptance."""
    from .moves import _recompute_external

    frag_old = detach_variables(trace, cls, oid, names)
    logp_old = frag_old.logp_removed
    base = trace.score
    logq_new = prior_propose_variables(trace, cls, oid, names, rng, clamps)
    _recompute_external(trace, [(c, o, a) for c, o, a, _ in frag_old.external])
    logp_new = trace.score - base
    log_alpha = logp_new - logp_old - logq_new  # + logq_old added below

    frag_new = detach_variables(trace, cls, oid, names)
    logq_old = replay_fragment(trace, frag_old, clamps)  # back to the old state
    log_alpha += logq_old

    if math.log(max(rng.random(), 1e-300)) < log_alpha:
        detach_variables(trace, cls, oid, names)
        reinsert_fragment(trace, frag_new)
        return True
    return False
