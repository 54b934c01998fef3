"""Exact enumeration of proposal networks by variable elimination.

Factors live in log space. Elimination follows a min-fill ordering; each
step stores the pre-marginalization product factor so an exact joint
sample can be drawn backward afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .factors import Factor
from .net import Net

DEFAULT_BUDGET = 1_000_000


class EnumerationBudgetError(Exception):
    """Raised when a clique exceeds the state budget; the fix is a finer
    subproblem decomposition in the model program."""


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - safe), axis=axis)) + np.squeeze(safe, axis=axis)
    collapsed = np.squeeze(m, axis=axis)
    return np.where(np.isfinite(collapsed), out, collapsed)


def _combine(net: Net, factors: list[Factor], budget: int) -> Factor:
    scope: list[str] = []
    for f in factors:
        for v in f.scope:
            if v not in scope:
                scope.append(v)
    sizes = [net.by_name[v].domain_size for v in scope]
    total = 1
    for s in sizes:
        total *= s
    if total > budget:
        raise EnumerationBudgetError(
            f"clique over {scope} has {total} joint states (budget {budget}); "
            "split the subproblem with additional hints"
        )
    table = np.zeros(sizes)
    for f in factors:
        idx = [scope.index(v) for v in f.scope]
        expand = [slice(None) if i in idx else None for i in range(len(scope))]
        # build the transposed view aligned with the combined scope order
        perm = sorted(range(len(f.scope)), key=lambda k: scope.index(f.scope[k]))
        t = np.transpose(f.table, perm)
        shape = [net.by_name[v].domain_size if v in f.scope else 1 for v in scope]
        table = table + t.reshape(shape)
    return Factor(tuple(scope), table)


@dataclass
class EnumResult:
    net: Net
    factors: list[Factor]
    log_z: float
    steps: list[tuple[str, Factor]] = field(default_factory=list)
    latents: list[str] = field(default_factory=list)

    def sample(self, rng) -> dict:
        """Draw a joint assignment of all latent nodes from the posterior."""
        assignment: dict = {}
        for name, factor in reversed(self.steps):
            idx = []
            for v in factor.scope:
                if v == name:
                    idx.append(slice(None))
                else:
                    node = self.net.by_name[v]
                    idx.append(node.lookup(assignment[v]))
            axis_pos = factor.scope.index(name)
            logits = factor.table[tuple(idx)]
            m = logits.max()
            if not np.isfinite(m):
                raise RuntimeError(f"no admissible value for node {name}")
            p = np.exp(logits - m)
            p = p / p.sum()
            node = self.net.by_name[name]
            j = int(rng.choice(len(p), p=p))
            assignment[name] = node.domain[j]
        for n in self.net.nodes:
            if n.is_observed:
                assignment[n.name] = n.observed
        return assignment

    def logq(self, assignment: dict) -> float:
        """Joint log-probability of a full latent assignment under the net."""
        total = 0.0
        for f in self.factors:
            total += f.value_at(self.net, assignment)
        return total - self.log_z

    def marginal(self, name: str) -> np.ndarray:
        """Posterior marginal over one node (fresh elimination)."""
        res = eliminate(self.net, self.factors, keep=(name,))
        f = _combine(self.net, res, DEFAULT_BUDGET)
        if f.scope != (name,):
            perm_f = f
            if not f.scope:
                raise RuntimeError(f"node {name} has no latent axis")
        logits = f.table
        m = logits.max()
        p = np.exp(logits - m)
        return p / p.sum()


def eliminate(net: Net, factors: list[Factor], keep=()) -> list[Factor]:
    """Eliminate all latent variables not in `keep`; returns final factors."""
    return _run(net, factors, keep, DEFAULT_BUDGET, None)


def enumerate_net(net: Net, factors: list[Factor], budget: int = DEFAULT_BUDGET) -> EnumResult:
    steps: list[tuple[str, Factor]] = []
    final = _run(net, factors, (), budget, steps)
    log_z = 0.0
    for f in final:
        if f.scope:
            raise RuntimeError("unexpected free variable after elimination")
        log_z += float(f.table)
    latents = [
        n.name for n in net.nodes if not n.is_observed and not n.prior_sampled
    ]
    return EnumResult(net=net, factors=factors, log_z=log_z, steps=steps, latents=latents)


def _run(net: Net, factors: list[Factor], keep, budget, steps):
    live = [f for f in factors]
    variables = []
    seen = set()
    for f in live:
        for v in f.scope:
            if v not in seen:
                seen.add(v)
                variables.append(v)
    to_eliminate = [v for v in variables if v not in keep]

    # neighbor structure for min-fill
    neighbors: dict[str, set[str]] = {v: set() for v in variables}
    for f in live:
        for a in f.scope:
            for b in f.scope:
                if a != b:
                    neighbors[a].add(b)

    remaining = set(to_eliminate)
    order: list[str] = []
    while remaining:
        best = None
        best_fill = None
        for v in sorted(remaining):
            nb = [u for u in neighbors[v] if u in remaining or u in keep or True]
            nb = [u for u in neighbors[v] if u != v]
            fill = 0
            for i in range(len(nb)):
                for j in range(i + 1, len(nb)):
                    if nb[j] not in neighbors[nb[i]]:
                        fill += 1
            if best_fill is None or fill < best_fill:
                best_fill = fill
                best = v
        order.append(best)
        remaining.discard(best)
        nb = list(neighbors[best])
        for i in range(len(nb)):
            for j in range(i + 1, len(nb)):
                neighbors[nb[i]].add(nb[j])
                neighbors[nb[j]].add(nb[i])
        for u in nb:
            neighbors[u].discard(best)
        neighbors.pop(best, None)

    for v in order:
        related = [f for f in live if v in f.scope]
        rest = [f for f in live if v not in f.scope]
        if not related:
            continue
        combined = _combine(net, related, budget)
        if steps is not None:
            steps.append((v, combined))
        axis = combined.scope.index(v)
        marg = _logsumexp(combined.table, axis)
        new_scope = tuple(u for u in combined.scope if u != v)
        live = rest + [Factor(new_scope, marg)]
    return live
