"""Clock-time prior: uniform over minute-of-day timestamps."""

from __future__ import annotations

import math

from ..values import Minute, parse_minute
from .base import Dist, register

MINUTES_PER_DAY = 24 * 60


class TimePrior(Dist):
    name = "time_prior"
    domain_kind = "countable"
    arity = (0, 0)

    def logpdf(self, args, x):
        if isinstance(x, Minute):
            return -math.log(MINUTES_PER_DAY)
        if isinstance(x, str):
            return -math.log(MINUTES_PER_DAY) if parse_minute(x) is not None else -math.inf
        return -math.inf

    def sample(self, args, rng):
        return Minute(int(rng.integers(MINUTES_PER_DAY)))


register(TimePrior())
