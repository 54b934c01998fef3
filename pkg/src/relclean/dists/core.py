"""Categorical, numeric, and error-channel primitive distributions."""

from __future__ import annotations

import math

import numpy as np

from .base import (
    DOMAIN_CONTINUOUS,
    DOMAIN_FINITE,
    Dist,
    register,
)
from .stats import BetaBernoulli, DirichletCategorical, NormalNormal, Posterior

LOG_2PI = math.log(2.0 * math.pi)

_index_maps: dict[int, dict] = {}


def _index_map(values) -> dict:
    """Value -> index map, memoized on the identity of the (frozen) list."""
    key = id(values)
    m = _index_maps.get(key)
    if m is None or len(m) != len(values):
        m = {v: i for i, v in enumerate(values)}
        _index_maps[key] = m
    return m


class Transformation:
    """Invertible unit corruption applied on top of a Gaussian draw."""

    def __init__(self, name, forward, backward, log_backward_deriv):
        self.name = name
        self.forward = forward
        self.backward = backward
        self.log_backward_deriv = log_backward_deriv

    def __repr__(self):
        return f"Transformation({self.name})"


TRANSFORMATIONS = {
    "identity": Transformation("identity", lambda y: y, lambda x: x, 0.0),
    "thousands": Transformation(
        "thousands", lambda y: y / 1000.0, lambda x: x * 1000.0, math.log(1000.0)
    ),
}


def get_transformation(token) -> Transformation:
    if isinstance(token, Transformation):
        return token
    t = TRANSFORMATIONS.get(token)
    if t is None:
        raise ValueError(f"unknown transformation token {token!r}")
    return t


class Discrete(Dist):
    name = "discrete"
    domain_kind = DOMAIN_FINITE
    arity = (2, 2)
    conjugate_slots = {1: "dirichlet"}

    def logpdf(self, args, x):
        values, weights = args
        if isinstance(weights, DirichletCategorical):
            weights.ensure_support(values)
            return weights.pred_logp(x)
        idx = _index_map(values).get(x)
        if idx is None:
            return -math.inf
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if w[idx] <= 0:
            return -math.inf
        return math.log(w[idx]) - math.log(total)

    def sample(self, args, rng):
        values, weights = args
        if isinstance(weights, DirichletCategorical):
            weights.ensure_support(values)
            probs = np.array(
                [math.exp(weights.pred_logp(v)) for v in values], dtype=float
            )
        else:
            probs = np.asarray(weights, dtype=float)
        probs = probs / probs.sum()
        return values[int(rng.choice(len(values), p=probs))]

    def support(self, args):
        return list(args[0])

    def stat_event(self, slot, args, x):
        return x

    def bind_posterior(self, slot, args):
        args[1].ensure_support(args[0])


class Uniform(Dist):
    name = "uniform"
    domain_kind = DOMAIN_FINITE
    arity = (1, 1)

    def logpdf(self, args, x):
        values = args[0]
        if x not in _index_map(values):
            return -math.inf
        return -math.log(len(values))

    def sample(self, args, rng):
        values = args[0]
        return values[int(rng.integers(len(values)))]

    def support(self, args):
        return list(args[0])


class Bernoulli(Dist):
    name = "bernoulli"
    domain_kind = DOMAIN_FINITE
    arity = (1, 1)
    conjugate_slots = {0: "beta"}

    def _p(self, args) -> float:
        p = args[0]
        if isinstance(p, BetaBernoulli):
            return p.mean()
        return float(p)

    def logpdf(self, args, x):
        p = self._p(args)
        if x is True:
            return math.log(p) if p > 0 else -math.inf
        if x is False:
            return math.log1p(-p) if p < 1 else -math.inf
        return -math.inf

    def sample(self, args, rng):
        return bool(rng.random() < self._p(args))

    def support(self, args):
        return [False, True]

    def stat_event(self, slot, args, x):
        return bool(x)


class MaybeSwap(Dist):
    """Return the true value with probability 1-p, else uniform from `ys`."""

    name = "maybe_swap"
    domain_kind = DOMAIN_FINITE
    arity = (3, 3)
    conjugate_slots = {2: "beta"}
    center_arg = 0

    def _p(self, args) -> float:
        p = args[2]
        if isinstance(p, BetaBernoulli):
            return p.mean()
        return float(p)

    def logpdf(self, args, x):
        truth, ys, _ = args
        ys = list(ys)
        p = self._p(args)
        if not ys:
            return 0.0 if x == truth else -math.inf
        k = len(ys)
        in_ys = x in set(ys)
        if x == truth:
            mass = (1.0 - p) + (p / k if in_ys else 0.0)
        elif in_ys:
            mass = p / k
        else:
            mass = 0.0
        return math.log(mass) if mass > 0 else -math.inf

    def sample(self, args, rng):
        truth, ys, _ = args
        ys = list(ys)
        p = self._p(args)
        if ys and rng.random() < p:
            return ys[int(rng.integers(len(ys)))]
        return truth

    def support(self, args):
        truth, ys, _ = args
        out = [truth]
        seen = {truth}
        for y in ys:
            if y not in seen:
                out.append(y)
                seen.add(y)
        return out

    def stat_event(self, slot, args, x):
        # x == truth counts as "no swap"; a swap reproducing the truth is
        # rare enough that the approximation keeps updates deterministic.
        return x != args[0]

    def stat_extra_logp(self, slot, args, x):
        # two-part code: swap events pay the uniform choice over ys
        if x != args[0]:
            ys = list(args[1])
            if x not in set(ys):
                return -math.inf
            return -math.log(len(ys))
        return 0.0


class Normal(Dist):
    name = "normal"
    domain_kind = DOMAIN_CONTINUOUS
    arity = (2, 2)
    conjugate_slots = {0: "normal"}

    def logpdf(self, args, x):
        mean, sd = args
        if not isinstance(x, (int, float)):
            return -math.inf
        if isinstance(mean, NormalNormal):
            return mean.pred_logp(float(x), float(sd))
        sd = float(sd)
        return -0.5 * LOG_2PI - math.log(sd) - 0.5 * ((float(x) - float(mean)) / sd) ** 2

    def sample(self, args, rng):
        mean, sd = args
        if isinstance(mean, NormalNormal):
            mu_n, sd_n = mean.posterior_params()
            scale = math.sqrt(sd_n * sd_n + float(sd) * float(sd))
            return float(rng.normal(mu_n, scale))
        return float(rng.normal(float(mean), float(sd)))

    def stat_event(self, slot, args, x):
        return (float(x), float(args[1]))


class TransformedNormal(Dist):
    """Gaussian draw pushed through an invertible unit transformation."""

    name = "transformed_normal"
    domain_kind = DOMAIN_CONTINUOUS
    arity = (3, 3)
    conjugate_slots = {0: "normal"}

    def logpdf(self, args, x):
        mean, sd, unit = args
        if not isinstance(x, (int, float)):
            return -math.inf
        t = get_transformation(unit)
        y = t.backward(float(x))
        if isinstance(mean, NormalNormal):
            base = mean.pred_logp(y, float(sd))
        else:
            sdv = float(sd)
            base = -0.5 * LOG_2PI - math.log(sdv) - 0.5 * ((y - float(mean)) / sdv) ** 2
        return base + t.log_backward_deriv

    def sample(self, args, rng):
        mean, sd, unit = args
        t = get_transformation(unit)
        if isinstance(mean, NormalNormal):
            mu_n, sd_n = mean.posterior_params()
            scale = math.sqrt(sd_n * sd_n + float(sd) * float(sd))
            y = float(rng.normal(mu_n, scale))
        else:
            y = float(rng.normal(float(mean), float(sd)))
        return t.forward(y)

    def stat_event(self, slot, args, x):
        t = get_transformation(args[2])
        return (t.backward(float(x)), float(args[1]))

    def stat_extra_logp(self, slot, args, x):
        return get_transformation(args[2]).log_backward_deriv

    def clean_value(self, args, x):
        t = get_transformation(args[2])
        return t.backward(float(x))


class Beta(Dist):
    name = "beta"
    domain_kind = DOMAIN_CONTINUOUS
    arity = (2, 2)

    def logpdf(self, args, x):
        a, b = float(args[0]), float(args[1])
        if not isinstance(x, (int, float)) or not (0.0 < x < 1.0):
            return -math.inf
        from math import lgamma

        return (
            (a - 1) * math.log(x)
            + (b - 1) * math.log1p(-x)
            + lgamma(a + b)
            - lgamma(a)
            - lgamma(b)
        )

    def sample(self, args, rng):
        return float(rng.beta(float(args[0]), float(args[1])))


class Dirichlet(Dist):
    name = "dirichlet"
    domain_kind = DOMAIN_CONTINUOUS
    arity = (1, 1)

    def logpdf(self, args, x):
        from math import lgamma

        alpha = np.asarray(args[0], dtype=float)
        x = np.asarray(x, dtype=float)
        if x.shape != alpha.shape or abs(x.sum() - 1.0) > 1e-9 or np.any(x <= 0):
            return -math.inf
        return float(
            np.sum((alpha - 1) * np.log(x)) + lgamma(alpha.sum()) - np.sum([lgamma(a) for a in alpha])
        )

    def sample(self, args, rng):
        return rng.dirichlet(np.asarray(args[0], dtype=float))


class Gamma(Dist):
    name = "gamma"
    domain_kind = DOMAIN_CONTINUOUS
    arity = (2, 2)

    def logpdf(self, args, x):
        from math import lgamma

        shape, rate = float(args[0]), float(args[1])
        if not isinstance(x, (int, float)) or x <= 0:
            return -math.inf
        return shape * math.log(rate) - lgamma(shape) + (shape - 1) * math.log(x) - rate * x

    def sample(self, args, rng):
        return float(rng.gamma(float(args[0]), 1.0 / float(args[1])))


class Unmodeled(Dist):
    """Observed-only attribute with no probabilistic model (improper)."""

    name = "unmodeled"
    domain_kind = DOMAIN_COUNTABLE = "countable"
    arity = (0, 0)

    def logpdf(self, args, x):
        return 0.0

    def sample(self, args, rng):
        raise RuntimeError("unmodeled attributes can only take observed values")


class NumberCodePrior(Dist):
    """Uniform prior over fixed-length digit codes."""

    name = "number_code_prior"
    domain_kind = "countable"
    arity = (0, 1)

    def logpdf(self, args, x):
        if not isinstance(x, str) or not x.isdigit():
            return -math.inf
        if args and len(x) != int(args[0]):
            return -math.inf
        return -len(x) * math.log(10.0)

    def sample(self, args, rng):
        n = int(args[0]) if args else 10
        return "".join(str(int(d)) for d in rng.integers(0, 10, size=n))


register(Discrete())
register(Uniform())
register(Bernoulli())
register(MaybeSwap())
register(Normal())
register(TransformedNormal())
register(Beta())
register(Dirichlet())
register(Gamma())
register(Unmodeled())
register(NumberCodePrior())
