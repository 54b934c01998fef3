"""The mutable latent-database trace.

Holds per-class object maps, CRP seating counts, parameter sufficient
statistics, observation-hashing value indexes, and an incrementally
maintained joint log-density. `detach` produces a fragment that reinserts
exactly, so rejected rejuvenation moves restore the trace bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .crp import CrpState, crp_total_logprob
from .dists import Posterior, lookup as dist_lookup, make_posterior
from .dists.base import Dist
from .dsl.ast import AttributeStmt, DeterministicStmt, ParameterStmt
from .dsl.validate import Model
from .exprs import Scope, evaluate
from .dataio import Dataset

CONJUGATE_HYPERPRIORS = {"beta", "dirichlet", "normal"}


class TraceError(Exception):
    pass


@dataclass
class ObjectRec:
    cls: str
    oid: int
    attrs: dict = field(default_factory=dict)
    slots: dict = field(default_factory=dict)
    inbound: set = field(default_factory=set)  # (referrer cls, id, slot)
    row: int | None = None  # observation pin
    terms: dict = field(default_factory=dict)  # attr -> TermRec

    @property
    def refcount(self) -> int:
        return len(self.inbound) + (1 if self.row is not None else 0)


class ParamCollection:
    """Lazily instantiated map of keyed parameter entries.

    In peek mode (used while evaluating hypothetical proposal combinations)
    unknown keys get a throwaway prior entry instead of a stored one."""

    def __init__(self, trace, cls, stmt):
        self.trace = trace
        self.cls = cls
        self.stmt = stmt
        self.entries: dict = {}
        self.peek_mode = False
        self._peek_entry = None

    def entry(self, key):
        e = self.entries.get(key)
        if e is None:
            if self.peek_mode:
                if self._peek_entry is None:
                    self._peek_entry = self.trace._new_param_entry(self.cls, self.stmt)
                e = self._peek_entry
            else:
                e = self.trace._new_param_entry(self.cls, self.stmt)
                self.entries[key] = e
        return e.value if isinstance(e, NonConjParam) else e


class ObjScope(Scope):
    """Expression scope rooted at one object."""

    def __init__(self, trace, cls: str, oid: int):
        self.trace = trace
        self.cls = cls
        self.oid = oid

    def lookup_name(self, ident: str):
        trace = self.trace
        info = trace.model.classes[self.cls]
        if ident in info.params:
            return trace.param_entry(self.cls, ident)
        obj = trace.objects[self.cls][self.oid]
        if ident in obj.attrs:
            return obj.attrs[ident]
        if ident in trace.preamble_env:
            return trace.preamble_env[ident]
        raise KeyError(f"{self.cls}.{ident} not assigned")

    def lookup_chain(self, parts: tuple[str, ...]):
        trace = self.trace
        cls, oid = self.cls, self.oid
        for slot in parts[:-1]:
            obj = trace.objects[cls][oid]
            if slot not in obj.slots:
                raise KeyError(f"{cls}.{slot} not assigned")
            oid = obj.slots[slot]
            cls = trace.model.classes[cls].refs[slot]
        tail = parts[-1]
        obj = trace.objects[cls][oid]
        if tail in obj.attrs:
            return obj.attrs[tail]
        raise KeyError(f"{cls}.{tail} not assigned")

    def observed_table(self, column: str, by: str | None):
        return self.trace.observed_table(column, by)


class PreambleScope(Scope):
    def __init__(self, trace):
        self.trace = trace

    def lookup_name(self, ident: str):
        return self.trace.preamble_env[ident]

    def observed_table(self, column: str, by: str | None):
        return self.trace.observed_table(column, by)


class Trace:
    def __init__(self, model: Model, dataset: Dataset, rng=None):
        self.model = model
        self.dataset = dataset
        self.rng = rng
        self.objects: dict[str, dict[int, ObjectRec]] = {c: {} for c in model.classes}
        self.next_id: dict[str, int] = {c: 0 for c in model.classes}
        self.crp: dict[str, CrpState] = {c: CrpState() for c in model.classes}
        self.params: dict[tuple[str, str], object] = {}
        self.value_index: dict[tuple[str, str], dict] = {}
        self.score = 0.0
        self.preamble_env: dict[str, object] = {}
        self._indexed_attrs: set[tuple[str, str]] = set()
        for cname, info in model.classes.items():
            for hint in info.index_hints:
                self._indexed_attrs.add((cname, hint.attr))
                self.value_index[(cname, hint.attr)] = {}
        self._init_preamble()

    # -- environment --------------------------------------------------------

    def _init_preamble(self):
        scope = PreambleScope(self)
        for p in self.model.program.preamble:
            if p.kind == "let":
                self.preamble_env[p.name] = evaluate(p.expr, scope)

    def observed_table(self, column: str, by: str | None):
        if by is None:
            return self.dataset.observed_set(column)
        return self.dataset.keyed_table(column, by)

    # -- parameters ----------------------------------------------------------

    def _new_param_entry(self, cls: str, stmt: ParameterStmt):
        scope = PreambleScope(self)
        args = tuple(evaluate(a, scope) for a in stmt.args)
        if stmt.dist_name in CONJUGATE_HYPERPRIORS:
            return make_posterior(stmt.dist_name, args)
        # non-conjugate hyperprior: explicit value drawn from the prior
        dist = dist_lookup(stmt.dist_name)
        if self.rng is None:
            raise TraceError(f"sampling parameter {stmt.name} requires an rng")
        return NonConjParam(stmt, args, dist.sample(args, self.rng))

    def param_entry(self, cls: str, name: str):
        """Entry as seen by expressions: posteriors and collections pass
        through, explicit-value parameters unwrap to their value."""
        entry = self.raw_param_entry(cls, name)
        return entry.value if isinstance(entry, NonConjParam) else entry

    def raw_param_entry(self, cls: str, name: str):
        key = (cls, name)
        entry = self.params.get(key)
        if entry is None:
            stmt = self.model.classes[cls].params[name]
            if stmt.indexed:
                entry = ParamCollection(self, cls, stmt)
            else:
                entry = self._new_param_entry(cls, stmt)
            self.params[key] = entry
        return entry

    def all_param_entries(self):
        """Yield (cls, name, key_or_None, entry) for instantiated entries."""
        for (cls, name), entry in self.params.items():
            if isinstance(entry, ParamCollection):
                for k, e in entry.entries.items():
                    yield cls, name, k, e
            else:
                yield cls, name, None, entry

    # -- objects -------------------------------------------------------------

    def create_object(self, cls: str, row: int | None = None) -> int:
        oid = self.next_id[cls]
        self.next_id[cls] = oid + 1
        self.objects[cls][oid] = ObjectRec(cls=cls, oid=oid, row=row)
        return oid

    def delete_object(self, cls: str, oid: int):
        obj = self.objects[cls][oid]
        if obj.attrs or obj.slots or obj.inbound or obj.row is not None:
            raise TraceError(f"deleting non-empty object {cls}#{oid}")
        del self.objects[cls][oid]

    def obj(self, cls: str, oid: int) -> ObjectRec:
        return self.objects[cls][oid]

    def scope(self, cls: str, oid: int) -> ObjScope:
        return ObjScope(self, cls, oid)

    # -- attribute/slot mutation ---------------------------------------------

    def eval_args(self, cls: str, oid: int, stmt: AttributeStmt):
        scope = ObjScope(self, cls, oid)
        return tuple(evaluate(a, scope) for a in stmt.args)

    @staticmethod
    def term_logp(dist: Dist, args, value):
        """Collapsed-aware log-density of an attribute value (no mutation)."""
        slot = _posterior_slot(dist, args)
        if slot is None:
            return dist.logpdf(args, value)
        dist.bind_posterior(slot, args)
        event = dist.stat_event(slot, args, value)
        return args[slot].pred(event) + dist.stat_extra_logp(slot, args, value)

    def set_attr(self, cls: str, oid: int, attr: str, value=None) -> float:
        obj = self.objects[cls][oid]
        if attr in obj.attrs:
            raise TraceError(f"{cls}#{oid}.{attr} already assigned")
        stmt = self.model.classes[cls].attr_stmts[attr]
        if isinstance(stmt, DeterministicStmt):
            value = evaluate(stmt.expr, ObjScope(self, cls, oid))
            obj.attrs[attr] = value
            obj.terms[attr] = ("det",)
            logp = 0.0
        else:
            args = self.eval_args(cls, oid, stmt)
            dist = dist_lookup(stmt.dist_name)
            slot = _posterior_slot(dist, args)
            if slot is not None:
                dist.bind_posterior(slot, args)
                event = dist.stat_event(slot, args, value)
                extra = dist.stat_extra_logp(slot, args, value)
                logp = args[slot].add(event) + extra
                obj.terms[attr] = ("stat", args[slot], event, extra)
            else:
                logp = dist.logpdf(args, value)
                obj.terms[attr] = ("plain", logp)
            obj.attrs[attr] = value
        if (cls, attr) in self._indexed_attrs:
            self.value_index[(cls, attr)].setdefault(value, set()).add(oid)
        self.score += logp
        return logp

    def unset_attr(self, cls: str, oid: int, attr: str) -> float:
        obj = self.objects[cls][oid]
        if attr not in obj.attrs:
            raise TraceError(f"{cls}#{oid}.{attr} not assigned")
        term = obj.terms.pop(attr)
        value = obj.attrs.pop(attr)
        if term[0] == "det":
            logp = 0.0
        elif term[0] == "stat":
            _, post, event, extra = term
            logp = post.remove(event) + extra
        else:
            logp = term[1]
        if (cls, attr) in self._indexed_attrs:
            bucket = self.value_index[(cls, attr)].get(value)
            if bucket is not None:
                bucket.discard(oid)
                if not bucket:
                    del self.value_index[(cls, attr)][value]
        self.score -= logp
        return logp

    def drop_term(self, cls: str, oid: int, attr: str) -> tuple:
        """Remove an attribute's score term but keep its value (the value
        becomes a pending observation during rejuvenation)."""
        obj = self.objects[cls][oid]
        term = obj.terms.pop(attr)
        if term[0] == "det":
            logp = 0.0
        elif term[0] == "stat":
            _, post, event, extra = term
            logp = post.remove(event) + extra
        else:
            logp = term[1]
        self.score -= logp
        return term

    def restore_term(self, cls: str, oid: int, attr: str, term: tuple) -> float:
        obj = self.objects[cls][oid]
        if term[0] == "det":
            obj.terms[attr] = term
            return 0.0
        if term[0] == "stat":
            _, post, event, extra = term
            logp = post.add(event) + extra
            obj.terms[attr] = term
        else:
            logp = term[1]
            obj.terms[attr] = term
        self.score += logp
        return logp

    def recompute_term(self, cls: str, oid: int, attr: str) -> float:
        """Score an attribute's existing value against its current parents."""
        obj = self.objects[cls][oid]
        stmt = self.model.classes[cls].attr_stmts[attr]
        if isinstance(stmt, DeterministicStmt):
            obj.attrs[attr] = evaluate(stmt.expr, ObjScope(self, cls, oid))
            obj.terms[attr] = ("det",)
            return 0.0
        value = obj.attrs[attr]
        args = self.eval_args(cls, oid, stmt)
        dist = dist_lookup(stmt.dist_name)
        slot = _posterior_slot(dist, args)
        if slot is not None:
            dist.bind_posterior(slot, args)
            event = dist.stat_event(slot, args, value)
            extra = dist.stat_extra_logp(slot, args, value)
            logp = args[slot].add(event) + extra
            obj.terms[attr] = ("stat", args[slot], event, extra)
        else:
            logp = dist.logpdf(args, value)
            obj.terms[attr] = ("plain", logp)
        self.score += logp
        return logp

    def set_slot(self, cls: str, oid: int, slot: str, target: int) -> float:
        obj = self.objects[cls][oid]
        if slot in obj.slots:
            raise TraceError(f"{cls}#{oid}.{slot} already assigned")
        tcls = self.model.classes[cls].refs[slot]
        tobj = self.objects[tcls].get(target)
        if tobj is None:
            raise TraceError(f"dangling reference {tcls}#{target}")
        state = self.crp[tcls]
        logp = state.seat_logp(target) if state.counts.get(target) else state.seat_logp(None)
        state.seat(target)
        obj.slots[slot] = target
        tobj.inbound.add((cls, oid, slot))
        self.score += logp
        return logp

    def unset_slot(self, cls: str, oid: int, slot: str) -> float:
        obj = self.objects[cls][oid]
        target = obj.slots.pop(slot)
        tcls = self.model.classes[cls].refs[slot]
        state = self.crp[tcls]
        logp = state.unseat_logp(target)
        state.unseat(target)
        self.objects[tcls][target].inbound.discard((cls, oid, slot))
        self.score -= logp
        return logp

    # -- candidate hashing ----------------------------------------------------

    def candidate_targets(self, row: int, slot_path: tuple[str, ...]):
        """Hashed candidate object ids for the reference at `slot_path` of
        observation `row`; None means unconstrained (ALL)."""
        tcls = self.model.chain_target_class(self.model.obs_class, slot_path)
        hints = {h.attr: h.mode for h in self.model.classes[tcls].index_hints}
        if not hints:
            return None
        result = None
        links = list(self.model.obs_links.get(slot_path, ()))
        noisy = self.model.noisy_links.get(slot_path, ())
        for link, is_noisy in [(l, False) for l in links] + [(l, True) for l in noisy]:
            mode = hints.get(link.attr)
            if mode is None:
                continue
            if is_noisy and mode != "on":
                continue
            cell = self.dataset.cell(row, link.column)
            if cell is None:
                continue
            bucket = self.value_index[(tcls, link.attr)].get(cell, set())
            result = set(bucket) if result is None else (result & bucket)
        return result

    # -- detach / reinsert -----------------------------------------------------

    def _dep_templates(self, rcls: str, path: tuple[str, ...]):
        """Statements of class `rcls` whose chain deps extend `path`, with the
        step taken immediately after reaching the path's end object."""
        cache = getattr(self, "_dep_template_cache", None)
        if cache is None:
            cache = self._dep_template_cache = {}
        key = (rcls, path)
        hit = cache.get(key)
        if hit is not None:
            return hit
        out = []
        for sname, si in self.model.classes[rcls].stmt_infos.items():
            for dep in si.chain_deps:
                if len(dep) > len(path) and tuple(dep[: len(path)]) == path:
                    out.append((sname, dep[len(path)]))
        cache[key] = out
        return out

    def affected_external_terms(self, cls: str, oid: int, detached: set[str]):
        """Terms outside the detached variable set whose parent chains read a
        detached attribute or traverse a detached reference slot."""
        out = []
        seen = set()

        def note(rcls, rid, sname):
            key = (rcls, rid, sname)
            if key in seen:
                return
            seen.add(key)
            robj = self.objects[rcls].get(rid)
            if robj is not None and sname in robj.terms:
                out.append(key)

        # the object's own remaining statements reading detached variables
        info = self.model.classes[cls]
        for sname, si in info.stmt_infos.items():
            if sname in detached:
                continue
            if any(d in detached for d in si.own_deps) or any(
                dep[0] in detached for dep in si.chain_deps
            ):
                note(cls, oid, sname)

        # ancestors reaching this object through inbound reference edges
        stack = [(cls, oid, ())]
        visited = {(cls, oid, ())}
        while stack:
            ccls, coid, down_path = stack.pop()
            obj = self.objects[ccls][coid]
            for rcls, rid, rslot in obj.inbound:
                path = (rslot,) + down_path
                for sname, next_step in self._dep_templates(rcls, path):
                    if next_step in detached:
                        note(rcls, rid, sname)
                state = (rcls, rid, path)
                if state not in visited:
                    visited.add(state)
                    stack.append(state)
        return out

    def reachable_only_through(self, cls: str, oid: int, via_slots=None):
        """Objects kept alive solely by the given object's (detached) slots."""
        obj = self.objects[cls][oid]
        out = []
        for slot, target in obj.slots.items():
            if via_slots is not None and slot not in via_slots:
                continue
            tcls = self.model.classes[cls].refs[slot]
            tobj = self.objects[tcls][target]
            if tobj.inbound == {(cls, oid, slot)} and tobj.row is None:
                out.append((tcls, target))
                out.extend(self.reachable_only_through(tcls, target))
        return out

    # -- integrity -------------------------------------------------------------

    def recompute_score(self) -> float:
        """From-scratch joint log-density of the current trace state."""
        total = 0.0
        for cls, state in self.crp.items():
            total += crp_total_logprob(state)
        # rebuild parameter stats from raw events
        rebuilt: dict[int, object] = {}
        for cls, name, key, entry in self.all_param_entries():
            if isinstance(entry, Posterior):
                fresh = make_posterior(
                    self.model.classes[cls].params[name].dist_name,
                    tuple(
                        evaluate(a, PreambleScope(self))
                        for a in self.model.classes[cls].params[name].args
                    ),
                )
                if hasattr(entry, "support") and entry.support is not None:
                    fresh.bind_support(entry.support)
                if hasattr(entry, "obs_sigma") and entry.obs_sigma is not None:
                    fresh.obs_sigma = entry.obs_sigma
                rebuilt[id(entry)] = fresh
        for cls, objs in self.objects.items():
            for oid, obj in objs.items():
                for attr, term in obj.terms.items():
                    if term[0] == "det":
                        continue
                    if term[0] == "stat":
                        _, post, event, extra = term
                        rebuilt[id(post)].add(event)
                        total += extra
                    else:
                        stmt = self.model.classes[cls].attr_stmts[attr]
                        args = self.eval_args(cls, oid, stmt)
                        dist = dist_lookup(stmt.dist_name)
                        total += dist.logpdf(args, obj.attrs[attr])
        for fresh in rebuilt.values():
            total += fresh.log_marginal()
        return total

    def check_integrity(self, tol: float = 1e-6):
        # score
        fresh = self.recompute_score()
        if not math.isclose(fresh, self.score, abs_tol=tol, rel_tol=1e-9):
            raise TraceError(f"cached score {self.score} != recomputed {fresh}")
        # counts vs slots
        counts: dict[str, dict[int, int]] = {c: {} for c in self.model.classes}
        for cls, objs in self.objects.items():
            info = self.model.classes[cls]
            for oid, obj in objs.items():
                for slot, target in obj.slots.items():
                    tcls = info.refs[slot]
                    counts[tcls][target] = counts[tcls].get(target, 0) + 1
        for cls, state in self.crp.items():
            if counts[cls] != state.counts:
                raise TraceError(f"CRP counts for {cls} out of sync")
        # reference counts and GC soundness
        for cls, objs in self.objects.items():
            for oid, obj in objs.items():
                expected = counts[cls].get(oid, 0)
                if len(obj.inbound) != expected:
                    raise TraceError(f"{cls}#{oid} inbound {len(obj.inbound)} != {expected}")
                if obj.refcount == 0:
                    raise TraceError(f"{cls}#{oid} survives with refcount 0")
        # index coherence
        for (cls, attr), index in self.value_index.items():
            scan: dict = {}
            for oid, obj in self.objects[cls].items():
                if attr in obj.attrs:
                    scan.setdefault(obj.attrs[attr], set()).add(oid)
            if scan != index:
                raise TraceError(f"value index for {cls}.{attr} out of sync")
        return True

    # -- debugging ---------------------------------------------------------------

    def dump(self) -> str:
        """Deterministic text serialization for golden-file comparisons."""
        lines = []
        for cls in sorted(self.objects):
            state = self.crp[cls]
            lines.append(f"class {cls} (N={state.total} K={state.n_tables})")
            for oid in sorted(self.objects[cls]):
                obj = self.objects[cls][oid]
                slots = " ".join(f"{s}->{t}" for s, t in sorted(obj.slots.items()))
                attrs = " ".join(f"{a}={obj.attrs[a]!r}" for a in sorted(obj.attrs))
                pin = f" row={obj.row}" if obj.row is not None else ""
                lines.append(
                    f"  #{oid} n={state.counts.get(oid, 0)} refs={obj.refcount}{pin} {slots} | {attrs}"
                )
        return "\n".join(lines) + "\n"


class NonConjParam:
    """Explicit-value parameter entry for non-conjugate hyperpriors."""

    def __init__(self, stmt: ParameterStmt, hyper_args, value):
        self.stmt = stmt
        self.hyper_args = hyper_args
        self.value = value


@dataclass
class Fragment:
    """Everything removed by a detach, in reversal order."""

    cls: str
    oid: int
    detached: set
    root_attrs: list  # (attr, value) in declaration order
    root_slots: list  # (slot, target) in declaration order
    subtree: list  # (cls, oid, [(attr, value)], [(slot, target)]) root-first
    external: list  # (cls, oid, attr, term record)
    logp_removed: float = 0.0


def detach_variables(trace: Trace, cls: str, oid: int, names=None) -> Fragment:
    """Erase the named attributes/slots of one object, the score terms that
    depend on them, and any objects reachable only through the erased slots.
    Values of dependent attributes stay in place (they act as observations
    for re-proposal). Returns the fragment for exact reinsertion."""
    info = trace.model.classes[cls]
    obj = trace.objects[cls][oid]
    if names is None:
        names = [n for n in info.statement_names()]
    detached = {n for n in names if n in obj.attrs or n in obj.slots}
    score_before = trace.score

    external = []
    for ecls, eoid, eattr in trace.affected_external_terms(cls, oid, detached):
        term = trace.drop_term(ecls, eoid, eattr)
        external.append((ecls, eoid, eattr, term))

    subtree_pairs = trace.reachable_only_through(cls, oid, via_slots=detached)

    root_attrs = []
    root_slots = []
    for name in reversed(info.statement_names()):
        if name not in detached:
            continue
        if name in obj.attrs:
            root_attrs.append((name, obj.attrs[name]))
            trace.unset_attr(cls, oid, name)
        elif name in obj.slots:
            root_slots.append((name, obj.slots[name]))
            trace.unset_slot(cls, oid, name)
    root_attrs.reverse()
    root_slots.reverse()

    subtree = []
    for scls, soid in subtree_pairs:
        sobj = trace.objects[scls][soid]
        sinfo = trace.model.classes[scls]
        attrs = []
        slots = []
        for name in reversed(sinfo.statement_names()):
            if name in sobj.attrs:
                attrs.append((name, sobj.attrs[name]))
                trace.unset_attr(scls, soid, name)
            elif name in sobj.slots:
                slots.append((name, sobj.slots[name]))
                trace.unset_slot(scls, soid, name)
        attrs.reverse()
        slots.reverse()
        subtree.append((scls, soid, attrs, slots))
        trace.delete_object(scls, soid)

    frag = Fragment(
        cls=cls,
        oid=oid,
        detached=detached,
        root_attrs=root_attrs,
        root_slots=root_slots,
        subtree=subtree,
        external=external,
    )
    frag.logp_removed = score_before - trace.score
    return frag


def detach_object(trace: Trace, cls: str, oid: int) -> Fragment:
    """Whole-object detach: every attribute and reference slot."""
    return detach_variables(trace, cls, oid, None)


def reinsert_fragment(trace: Trace, frag: Fragment) -> float:
    """Exactly undo a detach. Returns the total log-density restored."""
    before = trace.score
    # recreate removed subtree objects (same ids), leaves first
    for scls, soid, attrs, slots in reversed(frag.subtree):
        trace.objects[scls][soid] = ObjectRec(cls=scls, oid=soid)
    # restore slots/attrs root-first so chain parents resolve
    obj_order = [(frag.cls, frag.oid, frag.root_attrs, frag.root_slots)] + frag.subtree
    for scls, soid, attrs, slots in obj_order:
        for slot, target in slots:
            trace.set_slot(scls, soid, slot, target)
    # attributes deepest-first so chain parents resolve during evaluation
    for scls, soid, attrs, slots in reversed(obj_order):
        sinfo = trace.model.classes[scls]
        values = dict(attrs)
        for name in sinfo.attr_order:
            if name in values:
                stmt = sinfo.attr_stmts[name]
                if isinstance(stmt, DeterministicStmt):
                    trace.set_attr(scls, soid, name)
                else:
                    trace.set_attr(scls, soid, name, values[name])
    for ecls, eoid, eattr, term in frag.external:
        trace.restore_term(ecls, eoid, eattr, term)
    return trace.score - before


def apply_fragment_score(trace: Trace, frag: Fragment) -> float:
    """Score removed by a detach (positive number)."""
    return frag.logp_removed


def _posterior_slot(dist: Dist, args) -> int | None:
    for i in dist.conjugate_slots:
        if i < len(args) and isinstance(args[i], Posterior):
            return i
    return None
