"""Object-wise blocked rejuvenation and conjugate parameter updates.

A sweep loops over every live object in reverse topological class order
(leaves first) and re-proposes each of the object's subproblems against
everything else, using the compiled enumeration proposals. Exact nets are
Gibbs moves (always accepted); nets with preferred-values surrogates go
through a Metropolis-Hastings correction.
"""

from __future__ import annotations

import math

from ..compiler import build_factors, build_net, enumerate_net
from ..compiler.net import PendingTerm, node_name
from ..dists import Posterior, lookup as dist_lookup
from ..trace import (
    NonConjParam,
    Trace,
    detach_variables,
    reinsert_fragment,
)
from .moves import (
    assignment_logq,
    old_assignment_of_fragment,
    sample_and_apply,
)
from .particle import Particle, SmcConfig


def rows_reaching(trace: Trace, cls: str, oid: int):
    """(row, slot path from the observation object to this object) pairs."""
    model = trace.model
    out = []
    stack = [(cls, oid, ())]
    seen = {(cls, oid, ())}
    while stack:
        ccls, coid, down = stack.pop()
        obj = trace.objects[ccls][coid]
        if obj.row is not None:
            out.append((obj.row, down))
        for rcls, rid, rslot in obj.inbound:
            state = (rcls, rid, (rslot,) + down)
            if state not in seen:
                seen.add(state)
                stack.append(state)
    return out


def rejuv_clamps(trace: Trace, cls: str, oid: int, names) -> dict[str, object]:
    """Dataset cells that pin net nodes of a rejuvenation proposal: query
    bindings whose chains pass from an observation row into the re-proposed
    variables of this object."""
    model = trace.model
    names = set(names)
    clamps: dict[str, object] = {}
    for row, prefix in rows_reaching(trace, cls, oid):
        k = len(prefix)
        for slots, attr, col, _tcls in model.query_bindings:
            if len(slots) < k or tuple(slots[:k]) != prefix:
                continue
            rest = tuple(slots[k:])
            first = rest[0] if rest else attr
            if first not in names:
                continue
            cell = trace.dataset.cell(row, col)
            if cell is None:
                continue
            name = node_name(rest, attr)
            if name in clamps and clamps[name] != cell:
                raise RuntimeError(
                    f"conflicting observations for {name} while rejuvenating {cls}#{oid}"
                )
            clamps[name] = cell
    return clamps


def rejuvenate_subproblem(trace: Trace, cls: str, oid: int, names, rng, config) -> bool:
    """One blocked move over a subproblem of one object. Returns True when
    the move was accepted (always, for exact nets)."""
    obj = trace.objects[cls][oid]
    clamps = rejuv_clamps(trace, cls, oid, names)
    frag = detach_variables(trace, cls, oid, names)
    pending = []
    for ecls, eoid, eattr, _term in frag.external:
        eobj = trace.objects[ecls].get(eoid)
        if eobj is not None and eattr in eobj.attrs:
            pending.append(PendingTerm(ecls, eoid, eattr, eobj.attrs[eattr]))
    external_keys = [(c, o, a) for c, o, a, _ in frag.external]
    net = build_net(
        trace,
        cls,
        oid,
        names,
        row=obj.row,
        pending=pending,
        clamps=clamps,
    )
    factors = build_factors(trace, net)
    enum = enumerate_net(net, factors)

    if net.exact:
        sample_and_apply(trace, net, enum, rng, external=external_keys)
        return True

    old_tokens, old_concrete, old_extras = old_assignment_of_fragment(trace, net, frag)
    logq_old = assignment_logq(trace, net, enum, old_tokens, old_concrete, old_extras)
    base = trace.score
    logp_new, logq_new, _ = sample_and_apply(trace, net, enum, rng, external=external_keys)
    log_alpha = (logp_new - frag.logp_removed) + (logq_old - logq_new)
    if math.log(max(rng.random(), 1e-300)) < log_alpha:
        return True
    detach_variables(trace, cls, oid, names)
    reinsert_fragment(trace, frag)
    return False


def rejuvenate_object(particle_or_trace, cls: str, oid: int, rng=None, config=None):
    """Re-propose every subproblem of one object."""
    if isinstance(particle_or_trace, Particle):
        trace = particle_or_trace.trace
        rng = rng or particle_or_trace.rng
    else:
        trace = particle_or_trace
    config = config or SmcConfig()
    accepted = False
    for group in trace.model.classes[cls].subproblems:
        if config.kernel == "pgibbs":
            from .pgibbs import csmc_object_subproblem

            accepted = csmc_object_subproblem(trace, cls, oid, group, rng, config) or accepted
        else:
            accepted = rejuvenate_subproblem(trace, cls, oid, group, rng, config) or accepted
    return accepted


def rejuvenation_sweep(particle: Particle, config: SmcConfig | None = None, progress=None):
    """Visit every live object, leaves-first classes, ascending ids."""
    config = config or SmcConfig()
    trace = particle.trace
    count = 0
    for cls in trace.model.topo_leaves_first:
        for oid in sorted(trace.objects[cls].keys()):
            if oid not in trace.objects[cls]:
                continue  # collected earlier in this sweep
            rejuvenate_object(particle, cls, oid, particle.rng, config)
            count += 1
            if progress is not None:
                progress("move", count, [particle])
    gibbs_update_parameters(particle)
    return count


def gibbs_update_parameters(particle_or_trace, rng=None):
    """Resample conjugate parameters from their analytic posteriors; update
    non-conjugate parameters by prior-proposal Metropolis-Hastings."""
    if isinstance(particle_or_trace, Particle):
        trace = particle_or_trace.trace
        rng = rng or particle_or_trace.rng
    else:
        trace = particle_or_trace
    values = {}
    for cls, name, key, entry in trace.all_param_entries():
        if isinstance(entry, Posterior):
            values[(cls, name, key)] = entry.sample_value(rng)
        elif isinstance(entry, NonConjParam):
            _prior_mh_param(trace, cls, name, entry, rng)
            values[(cls, name, key)] = entry.value
    trace.param_draws = values
    return values


def _prior_mh_param(trace: Trace, cls: str, name: str, entry: NonConjParam, rng):
    from ..dsl.ast import DeterministicStmt

    # readers, expanded through deterministic attributes
    queue = list(trace.model.param_readers.get((cls, name), []))
    seen = set(queue)
    stmt_targets = []
    while queue:
        rcls, rattr = queue.pop()
        if isinstance(trace.model.classes[rcls].attr_stmts.get(rattr), DeterministicStmt):
            for ncls, nattr, path in trace.model.readers.get((rcls, rattr), []):
                if not path and (ncls, nattr) not in seen:
                    seen.add((ncls, nattr))
                    queue.append((ncls, nattr))
        else:
            stmt_targets.append((rcls, rattr))
    affected = []
    for rcls, rattr in stmt_targets:
        for oid, obj in trace.objects[rcls].items():
            if rattr in obj.terms:
                affected.append((rcls, oid, rattr))
    dist = dist_lookup(entry.stmt.dist_name)
    proposal = dist.sample(entry.hyper_args, rng)
    old_value = entry.value
    base = trace.score
    terms = [(k, trace.drop_term(*k)) for k in affected]
    entry.value = proposal
    for (rcls, oid, rattr), _ in terms:
        trace.recompute_term(rcls, oid, rattr)
    log_alpha = trace.score - base
    if math.log(max(rng.random(), 1e-300)) >= log_alpha:
        for (rcls, oid, rattr), _ in terms:
            trace.drop_term(rcls, oid, rattr)
        entry.value = old_value
        for (rcls, oid, rattr), _ in terms:
            trace.recompute_term(rcls, oid, rattr)
