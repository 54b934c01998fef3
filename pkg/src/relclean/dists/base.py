"""Distribution registry and shared distribution interface.

Each primitive distribution is a singleton object exposing `logpdf`,
`sample`, and (for finite families) `support`.  Distribution arguments
arrive already evaluated; a conjugate argument slot may hold a live
`Posterior` from the trace parameter store instead of a number, in which
case `logpdf` computes the collapsed posterior predictive.
"""

from __future__ import annotations

DOMAIN_FINITE = "finite"
DOMAIN_COUNTABLE = "countable"
DOMAIN_CONTINUOUS = "continuous"


class Dist:
    """Base class for primitive distributions."""

    name: str = ""
    domain_kind: str = DOMAIN_COUNTABLE
    arity: tuple[int, int] = (0, 0)  # (min args, max args)
    # arg index -> conjugate family name ("dirichlet" | "beta" | "normal")
    conjugate_slots: dict[int, str] = {}
    # argument whose value is the clean/true center for noise channels
    center_arg: int | None = None

    def logpdf(self, args, x) -> float:
        raise NotImplementedError

    def sample(self, args, rng):
        raise NotImplementedError

    def support(self, args):
        """Finite support as a list of values, or None."""
        return None

    def stat_event(self, slot: int, args, x):
        """Observation to record against the conjugate parameter in `slot`."""
        raise NotImplementedError

    def stat_extra_logp(self, slot: int, args, x) -> float:
        """Log-probability term beyond the event's predictive (e.g. an
        emission constant or change-of-variable factor)."""
        return 0.0

    def bind_posterior(self, slot: int, args) -> None:
        """Attach any support metadata to a posterior argument."""
        return None

    def clean_value(self, args, x):
        """In-place cleaned version of x (e.g. inverse unit corruption), or
        None when cleaning means following the center argument upstream."""
        return None

    def check_arity(self, n: int) -> bool:
        lo, hi = self.arity
        return lo <= n <= hi


REGISTRY: dict[str, Dist] = {}


def register(dist: Dist) -> Dist:
    REGISTRY[dist.name] = dist
    return dist


def lookup(name: str) -> Dist:
    if name not in REGISTRY:
        raise KeyError(f"unknown distribution '{name}'")
    return REGISTRY[name]
