"""Primitive conditional probability distributions.

Importing this package populates the registry with the core, string, and
time distributions.
"""

from .base import DOMAIN_CONTINUOUS, DOMAIN_FINITE, Dist, REGISTRY, lookup
from .core import TRANSFORMATIONS, Transformation, get_transformation
from .stats import (
    BetaBernoulli,
    DirichletCategorical,
    NormalNormal,
    Posterior,
    make_posterior,
)
from . import core as _core  # noqa: F401  (registers distributions)
from . import strings as _strings  # noqa: F401
from . import times as _times  # noqa: F401

__all__ = [
    "DOMAIN_CONTINUOUS",
    "DOMAIN_FINITE",
    "Dist",
    "REGISTRY",
    "lookup",
    "TRANSFORMATIONS",
    "Transformation",
    "get_transformation",
    "BetaBernoulli",
    "DirichletCategorical",
    "NormalNormal",
    "Posterior",
    "make_posterior",
]
