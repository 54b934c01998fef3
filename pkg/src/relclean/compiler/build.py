"""Constructing proposal networks from a trace and a subproblem.

One net covers one subproblem of one object: nodes for the subproblem's
attributes and reference slots plus the full closure of attributes and
slots reachable through those references. Dataset cells clamp their nodes;
dependent attribute values that were detached act as pending likelihoods.
"""

from __future__ import annotations

from ..dists import lookup as dist_lookup
from ..dsl.ast import AttributeStmt, DeterministicStmt, ReferenceStmt
from ..dsl.validate import Model
from .net import OTHER, Net, NetScope, NewToken, Node, PendingTerm, node_name


class CompileError(Exception):
    pass


def _dep_parent_names(model: Model, net: Net, owner_path, owner_cls, sname):
    """Net-node names for a statement's own/chain dependencies."""
    si = model.classes[owner_cls].stmt_infos[sname]
    out = []
    for dep in si.own_deps:
        nm = node_name(owner_path, dep)
        if nm in net.by_name:
            out.append(nm)
        elif owner_path:
            raise CompileError(f"dependency {nm} missing from net")
    for parts in si.chain_deps:
        nm = node_name(tuple(owner_path) + tuple(parts[:-1]), parts[-1])
        if nm in net.by_name:
            out.append(nm)
        elif owner_path:
            # chains from closure classes always stay inside the net
            raise CompileError(f"dependency {nm} missing from net")
    # deduplicate, preserve order
    seen = set()
    uniq = []
    for nm in out:
        if nm not in seen:
            seen.add(nm)
            uniq.append(nm)
    return uniq


def build_net(
    trace,
    root_cls: str,
    root_oid: int,
    sp_names: list[str],
    row: int | None = None,
    pending: list[PendingTerm] | None = None,
    clamps: dict[str, object] | None = None,
) -> Net:
    model: Model = trace.model
    net = Net(root_cls=root_cls, root_oid=root_oid, sp_names=list(sp_names))
    net.pending = [p for p in (pending or [])]
    info = model.classes[root_cls]

    clamp_map: dict[str, object] = dict(clamps or {})
    if row is not None:
        for slots, attr, col, _cls in model.query_bindings:
            cell = trace.dataset.cell(row, col)
            if cell is None:
                continue
            clamp_map.setdefault(node_name(slots, attr), cell)

    def add_chain(path: tuple[str, ...], owner_cls: str):
        slot = path[-1]
        target_cls = model.classes[owner_cls].refs[slot]
        name = node_name(path)
        node = Node(
            name=name,
            kind="chain",
            path=path,
            attr=None,
            owner_cls=owner_cls,
            target_cls=target_cls,
        )
        # co-proposed chains with the same target class, in processing order
        node.same_class_earlier = [
            n.name for n in net.nodes if n.kind == "chain" and n.target_cls == target_cls
        ]
        parents = []
        if len(path) > 1:
            parents.append(node_name(path[:-1]))
        parents.extend(node.same_class_earlier)
        node.parents = parents

        # frozen seating counts (restricted to the domain below)
        state = trace.crp[target_cls]
        node.frozen_total = state.total
        node.frozen_tables = state.n_tables

        candidates = None
        if row is not None:
            candidates = trace.candidate_targets(row, path)
        if candidates is None:
            ids = sorted(trace.objects[target_cls].keys())
        else:
            ids = sorted(candidates)
        # parents' existing targets are forced by the copy case
        if len(path) > 1:
            pnode = net.by_name[node_name(path[:-1])]
            forced = set(ids)
            for pv in pnode.domain:
                if isinstance(pv, NewToken):
                    continue
                pobj = trace.objects[pnode.target_cls][pv]
                tgt = pobj.slots.get(slot)
                if tgt is not None:
                    forced.add(tgt)
            ids = sorted(forced)
        node.frozen_counts = {i: state.counts.get(i, 0) for i in ids}
        domain: list = list(ids)
        for earlier in node.same_class_earlier:
            ep = net.by_name[earlier]
            if len(path) > 1:
                raise CompileError(
                    "shared new objects across nested chains are not supported"
                )
            domain.append(NewToken(ep.path))
        domain.append(NewToken(path))
        node.domain = domain
        net.add(node)

        # closure: target class statements in declaration order
        tinfo = model.classes[target_cls]
        for s in tinfo.decl.statements:
            if isinstance(s, ReferenceStmt):
                add_chain(path + (s.name,), target_cls)
            elif isinstance(s, (AttributeStmt, DeterministicStmt)):
                add_attr(path, target_cls, s)

    def add_attr(owner_path: tuple[str, ...], owner_cls: str, stmt):
        name = node_name(owner_path, stmt.name)
        node = Node(
            name=name,
            kind="det" if isinstance(stmt, DeterministicStmt) else "attr",
            path=owner_path,
            attr=stmt.name,
            owner_cls=owner_cls,
            target_cls=None,
            stmt=stmt,
        )
        parents = []
        if owner_path:
            owner_node = net.by_name[node_name(owner_path)]
            parents.append(owner_node.name)
            for earlier in owner_node.same_class_earlier:
                ep = net.by_name[earlier]
                copy_src = node_name(ep.path, stmt.name)
                if copy_src in net.by_name:
                    parents.append(copy_src)
        else:
            owner_node = None
        parents.extend(_dep_parent_names(model, net, owner_path, owner_cls, stmt.name))
        node.parents = parents

        observed = clamp_map.get(name)
        if observed is not None:
            node.observed = observed
            node.is_observed = True
            node.domain = [observed]
            net.add(node)
            return

        copies = []
        if owner_node is not None:
            for pv in owner_node.domain:
                if isinstance(pv, NewToken):
                    continue
                v = trace.objects[owner_node.target_cls][pv].attrs.get(stmt.name)
                if v is not None:
                    copies.append(v)

        if isinstance(stmt, DeterministicStmt):
            node.domain = _det_domain(trace, net, node, copies)
            net.add(node)
            return

        dist = dist_lookup(stmt.dist_name)
        enum_kind = model.classes[owner_cls].enumerability[stmt.name]
        domain: list = []
        seen = set()

        def push(v):
            if v not in seen:
                seen.add(v)
                domain.append(v)

        for v in copies:
            push(v)
        if enum_kind == "finite":
            support = _finite_support(trace, net, owner_path, stmt, dist, node)
            for v in support:
                push(v)
        elif enum_kind == "hinted":
            scope = NetScope(trace, net, ("path", tuple(owner_path)))
            from ..exprs import evaluate

            xs = evaluate(stmt.preferring, scope)
            if scope.hits:
                raise CompileError(
                    f"preferred values of {name} depend on co-proposed latents"
                )
            node.hinted = True
            node.preferred = list(dict.fromkeys(xs))
            for v in node.preferred:
                push(v)
            push(OTHER)
            net.exact = False
        else:  # open: prior-sampled unless only copies matter
            node.prior_sampled = True
            node.hinted = False
            net.exact = False
            # when a noise-channel parent is hinted the OTHER token cascades
        if node.prior_sampled and copies:
            # reference-copied values still enumerable; keep them plus OTHER
            node.prior_sampled = False
            node.hinted = True
            node.preferred = []
            push(OTHER)
        # cascade: a hinted/escaped center parent forces an OTHER escape here
        center = _center_parent(model, net, owner_path, stmt, dist)
        if center is not None and not node.prior_sampled:
            cnode = net.by_name.get(center)
            if cnode is not None and not cnode.is_observed and OTHER in cnode.domain:
                push(OTHER)
                node.hinted = True
                if node.preferred is None:
                    node.preferred = []
                net.exact = False
        node.domain = domain
        net.add(node)

    for sname in sp_names:
        decl_stmt = None
        for s in info.decl.statements:
            if s.name == sname:
                decl_stmt = s
                break
        if decl_stmt is None:
            raise CompileError(f"{root_cls} has no statement {sname!r}")
        if isinstance(decl_stmt, ReferenceStmt):
            add_chain((sname,), root_cls)
        else:
            add_attr((), root_cls, decl_stmt)

    if any(n.prior_sampled for n in net.nodes):
        net.exact = False
    return net


def _det_domain(trace, net, node, copies):
    """Deterministic-node domain: copied values plus evaluations over the
    dependency combinations (new-object branches)."""
    from itertools import product

    from ..exprs import evaluate
    from .factors import _peek_params, _unpeek_params

    domain = list(dict.fromkeys(copies))
    seen = set(id(v) for v in domain)
    seen_eq = set()
    for v in domain:
        try:
            seen_eq.add(v)
        except TypeError:
            pass
    dep_nodes = [net.by_name[p] for p in node.parents if net.by_name[p].kind != "chain" or net.by_name[p].name != node_name(node.path)]
    total = 1
    for dn in dep_nodes:
        total *= max(dn.domain_size, 1)
    if total > 20000:
        raise CompileError(f"deterministic node {node.name} has too many input combinations")
    flagged = _peek_params(trace)
    try:
        for combo in product(*[dn.domain for dn in dep_nodes]):
            values = dict(zip([dn.name for dn in dep_nodes], combo))
            scope = NetScope(trace, net, ("path", tuple(node.path)), values=values)
            try:
                v = evaluate(node.stmt.expr, scope)
            except KeyError:
                continue
            try:
                if v in seen_eq:
                    continue
                seen_eq.add(v)
            except TypeError:
                if id(v) in seen:
                    continue
                seen.add(id(v))
            domain.append(v)
    finally:
        _unpeek_params(trace, flagged)
    return domain


def _finite_support(trace, net, owner_path, stmt, dist, node):
    """Union of the distribution's support over dependency combinations."""
    from ..exprs import evaluate
    from itertools import product

    scope = NetScope(trace, net, ("path", tuple(owner_path)))
    try:
        args = tuple(evaluate(a, scope) for a in stmt.args)
    except KeyError:
        args = None
    if args is not None and not scope.hits:
        return dist.support(args)
    # args depend on in-net nodes: union supports over their domains
    dep_names = list(dict.fromkeys(scope.hits))
    dep_nodes = [net.by_name[d] for d in dep_names]
    support: list = []
    seen = set()
    combos = product(*[dn.domain for dn in dep_nodes])
    count = 0
    for combo in combos:
        count += 1
        if count > 10000:
            raise CompileError(f"support of {node.name} too large to enumerate")
        values = dict(zip(dep_names, combo))
        s2 = NetScope(trace, net, ("path", tuple(owner_path)), values=values)
        try:
            args = tuple(evaluate(a, s2) for a in stmt.args)
        except KeyError:
            continue
        sup = dist.support(args)
        if sup is None:
            continue
        for v in sup:
            if isinstance(v, OTHER.__class__) or isinstance(v, NewToken):
                continue
            if v not in seen:
                seen.add(v)
                support.append(v)
    return support


def _center_parent(model, net, owner_path, stmt, dist) -> str | None:
    if dist.center_arg is None or dist.center_arg >= len(stmt.args):
        return None
    from ..dsl.ast import ChainExpr, Name

    arg = stmt.args[dist.center_arg]
    if isinstance(arg, Name):
        return node_name(owner_path, arg.ident)
    if isinstance(arg, ChainExpr):
        full = tuple(owner_path) + tuple(arg.parts)
        return node_name(full[:-1], full[-1])
    return None
