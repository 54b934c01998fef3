"""Two-parameter Chinese-restaurant-process structure prior.

References into a class are customers; each table is one latent object.
An existing object with n inbound references attracts the next reference
with probability proportional to ``n - d``; a new object is created with
probability proportional to ``s + d*K`` where K counts live objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# fixed at the hyperprior means (Gamma(1,1), Beta(1,1)); not inferred
DEFAULT_STRENGTH = 1.0
DEFAULT_DISCOUNT = 0.5

NEW = None  # sentinel seating target


@dataclass
class CrpState:
    strength: float = DEFAULT_STRENGTH
    discount: float = DEFAULT_DISCOUNT
    counts: dict[int, int] = field(default_factory=dict)
    total: int = 0

    @property
    def n_tables(self) -> int:
        return len(self.counts)

    def seat_logp(self, target) -> float:
        """Log-probability of seating the next customer at `target`
        (an existing object id, or NEW)."""
        denom = self.total + self.strength
        if target is NEW:
            return math.log(self.strength + self.discount * self.n_tables) - math.log(denom)
        n = self.counts.get(target)
        if n is None:
            return -math.inf
        return math.log(n - self.discount) - math.log(denom)

    def seat(self, target) -> None:
        if target is NEW:
            raise ValueError("seat() needs a concrete object id")
        self.counts[target] = self.counts.get(target, 0) + 1
        self.total += 1

    def unseat(self, target) -> None:
        n = self.counts.get(target, 0)
        if n <= 0:
            raise ValueError(f"unseating object {target} with no customers")
        if n == 1:
            del self.counts[target]
        else:
            self.counts[target] = n - 1
        self.total -= 1

    def unseat_logp(self, target) -> float:
        """Log seating probability of one customer at `target` treating it
        as the last seated (exchangeability makes the total order-free)."""
        n = self.counts.get(target, 0)
        if n <= 0:
            raise ValueError(f"object {target} has no customers")
        denom = self.total - 1 + self.strength
        if n == 1:
            return math.log(self.strength + self.discount * (self.n_tables - 1)) - math.log(denom)
        return math.log(n - 1 - self.discount) - math.log(denom)


def seat_probabilities(state: CrpState) -> list[tuple[object, float]]:
    """Seating distribution for the next customer: existing objects plus NEW."""
    out = []
    denom = state.total + state.strength
    for oid, n in state.counts.items():
        out.append((oid, (n - state.discount) / denom))
    out.append((NEW, (state.strength + state.discount * state.n_tables) / denom))
    return out


def partition_logprob(strength: float, discount: float, block_sizes) -> float:
    """Exchangeable partition probability of labeled references grouped into
    blocks of the given sizes."""
    sizes = [b for b in block_sizes if b > 0]
    n = sum(sizes)
    if n == 0:
        return 0.0
    total = 0.0
    for k in range(len(sizes)):
        total += math.log(strength + k * discount)
    for b in sizes:
        for j in range(1, b):
            total += math.log(j - discount)
    for i in range(n):
        total -= math.log(strength + i)
    return total


def crp_total_logprob(state: CrpState) -> float:
    """EPPF of the current seating arrangement (from-scratch recompute)."""
    return partition_logprob(state.strength, state.discount, state.counts.values())


# --- schema-level skeleton generation (test oracle) -------------------------


def generate_skeleton(model, n_rows: int, rng, strength=DEFAULT_STRENGTH, discount=DEFAULT_DISCOUNT):
    """Batch skeleton draw: object sets per class plus slot assignments.

    Classes are processed after all referring classes; the references into
    each class are partitioned by one CRP draw and each block becomes an
    object.  Returns ({class: [ids]}, {(class, obj, slot): target_id}).
    """
    obs = model.obs_class
    objects: dict[str, list[int]] = {obs: list(range(n_rows))}
    slots: dict[tuple[str, int, str], int] = {}
    # referrers first: reverse of leaves-first order
    order = [c for c in reversed(model.topo_leaves_first) if c != obs]
    for cls in order:
        refs = []
        for rcls, rids in list(objects.items()):
            rinfo = model.classes[rcls]
            for slot, tgt in rinfo.refs.items():
                if tgt == cls:
                    for rid in rids:
                        refs.append((rcls, rid, slot))
        state = CrpState(strength, discount)
        ids: list[int] = []
        for ref in refs:
            probs = seat_probabilities(state)
            targets = [t for t, _ in probs]
            p = [pr for _, pr in probs]
            pick = targets[rng.choice(len(targets), p=p)]
            if pick is NEW:
                pick = len(ids)
                ids.append(pick)
            state.seat(pick)
            slots[ref] = pick
        objects[cls] = ids
    return objects, slots
