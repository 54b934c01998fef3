"""Proposal compiler: subproblem nets, exact enumeration, caching."""

from .build import CompileError, build_net
from .factors import Factor, build_factors
from .net import OTHER, Net, NewToken, Node, PendingTerm
from .ve import EnumerationBudgetError, EnumResult, enumerate_net

__all__ = [
    "CompileError",
    "build_net",
    "Factor",
    "build_factors",
    "OTHER",
    "Net",
    "NewToken",
    "Node",
    "PendingTerm",
    "EnumerationBudgetError",
    "EnumResult",
    "enumerate_net",
]
