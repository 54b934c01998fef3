"""Sufficient statistics for the conjugate families.

Each posterior object tracks the statistics of the observations currently
incorporated in one trace.  `add`/`remove` are exact inverses, and
`log_marginal` is the closed-form marginal likelihood of the recorded
observation multiset, so the trace score stays order-independent.
"""

from __future__ import annotations

import math
from math import lgamma

import numpy as np


def _lbeta(a: float, b: float) -> float:
    return lgamma(a) + lgamma(b) - lgamma(a + b)


class Posterior:
    family = ""

    def pred(self, event) -> float:
        """Posterior-predictive log-probability of one event."""
        raise NotImplementedError

    def add(self, event) -> float:
        """Record an event; returns its predictive log-prob before recording."""
        raise NotImplementedError

    def remove(self, event) -> float:
        """Un-record an event; returns its predictive log-prob afterwards."""
        raise NotImplementedError

    def log_marginal(self) -> float:
        raise NotImplementedError

    def sample_value(self, rng):
        """Draw an explicit parameter value from the analytic posterior."""
        raise NotImplementedError


class DirichletCategorical(Posterior):
    """Dirichlet prior over category probabilities; categorical draws."""

    family = "dirichlet"

    def __init__(self, alpha, support=None):
        # alpha: scalar symmetric concentration, or vector paired with an
        # explicit support list bound on first use.
        self.alpha_vec = None
        self.support = None
        if np.ndim(alpha) == 0:
            self.alpha0 = float(alpha)
            self.alpha_total = None
        else:
            vec = np.asarray(alpha, dtype=float)
            if support is not None:
                self.bind_support(support, vec)
            else:
                self.alpha_vec = vec
                self.alpha0 = float(vec[0]) if np.all(vec == vec[0]) else None
            self.alpha_total = float(vec.sum())
        self.counts: dict = {}
        self.n = 0
        self._n_categories = None if self.support is None else len(self.support)

    def bind_support(self, support, alpha_vec=None):
        self.support = list(support)
        self._n_categories = len(self.support)
        if alpha_vec is not None:
            if len(alpha_vec) != len(self.support):
                raise ValueError("dirichlet alpha length does not match category count")
            self._alpha_of = {v: float(a) for v, a in zip(self.support, alpha_vec)}
            self.alpha_total = float(np.sum(alpha_vec))
        else:
            self._alpha_of = None

    def ensure_support(self, support):
        if self.support is None:
            self.bind_support(support, self.alpha_vec)
            if self.alpha_total is None:
                self.alpha_total = self.alpha0 * len(self.support)
        elif len(support) != self._n_categories:
            raise ValueError("categorical support size changed between uses")

    def _alpha(self, x) -> float:
        if self.alpha_vec is not None or self.alpha0 is None:
            return self._alpha_of[x]
        return self.alpha0

    def add(self, event) -> float:
        logp = self.pred_logp(event)
        self.counts[event] = self.counts.get(event, 0) + 1
        self.n += 1
        return logp

    def remove(self, event) -> float:
        c = self.counts.get(event, 0)
        if c <= 0:
            raise ValueError(f"removing unobserved category {event!r}")
        if c == 1:
            del self.counts[event]
        else:
            self.counts[event] = c - 1
        self.n -= 1
        return self.pred_logp(event)

    def pred(self, event) -> float:
        return self.pred_logp(event)

    def pred_logp(self, x) -> float:
        if self.support is not None and x not in set(self.support):
            return -math.inf
        a = self._alpha(x)
        return math.log(a + self.counts.get(x, 0)) - math.log(self.alpha_total + self.n)

    def log_marginal(self) -> float:
        total = lgamma(self.alpha_total) - lgamma(self.alpha_total + self.n)
        for x, c in self.counts.items():
            a = self._alpha(x)
            total += lgamma(a + c) - lgamma(a)
        return total

    def sample_value(self, rng):
        alphas = np.array(
            [self._alpha(v) + self.counts.get(v, 0) for v in self.support], dtype=float
        )
        return rng.dirichlet(alphas)


class BetaBernoulli(Posterior):
    family = "beta"

    def __init__(self, a: float, b: float):
        self.a = float(a)
        self.b = float(b)
        self.successes = 0
        self.failures = 0

    def pred(self, event) -> float:
        m = self.mean()
        return math.log(m) if event else math.log1p(-m)

    def add(self, event) -> float:
        logp = self.pred(event)
        if event:
            self.successes += 1
        else:
            self.failures += 1
        return logp

    def remove(self, event) -> float:
        if event:
            if self.successes <= 0:
                raise ValueError("removing unobserved success")
            self.successes -= 1
        else:
            if self.failures <= 0:
                raise ValueError("removing unobserved failure")
            self.failures -= 1
        return self.pred(event)

    def mean(self) -> float:
        return (self.a + self.successes) / (self.a + self.b + self.successes + self.failures)

    def log_marginal(self) -> float:
        return _lbeta(self.a + self.successes, self.b + self.failures) - _lbeta(self.a, self.b)

    def sample_value(self, rng):
        return float(rng.beta(self.a + self.successes, self.b + self.failures))


class NormalNormal(Posterior):
    """Normal prior on a mean; normal observations with known sd."""

    family = "normal"

    def __init__(self, mu0: float, sigma0: float):
        self.mu0 = float(mu0)
        self.sigma0 = float(sigma0)
        self.obs_sigma = None  # fixed by the first observation's statement
        self.n = 0
        self.sum = 0.0
        self.sumsq = 0.0

    def _check_sigma(self, sigma: float):
        if self.obs_sigma is None:
            self.obs_sigma = float(sigma)
        elif abs(self.obs_sigma - sigma) > 1e-12 * max(1.0, abs(sigma)):
            raise ValueError("normal-normal parameter used with differing observation sd")

    def pred(self, event) -> float:
        x, sigma = event
        return self.pred_logp(x, sigma)

    def add(self, event) -> float:
        x, sigma = event
        self._check_sigma(sigma)
        logp = self.pred_logp(x, sigma)
        self.n += 1
        self.sum += x
        self.sumsq += x * x
        return logp

    def remove(self, event) -> float:
        x, sigma = event
        if self.n <= 0:
            raise ValueError("removing from empty normal stats")
        self.n -= 1
        self.sum -= x
        self.sumsq -= x * x
        return self.pred_logp(x, sigma)

    def posterior_params(self):
        tau0 = 1.0 / (self.sigma0 * self.sigma0)
        if self.n == 0 or self.obs_sigma is None:
            return self.mu0, math.sqrt(1.0 / tau0)
        tau = 1.0 / (self.obs_sigma * self.obs_sigma)
        tau_n = tau0 + self.n * tau
        mu_n = (tau0 * self.mu0 + tau * self.sum) / tau_n
        return mu_n, math.sqrt(1.0 / tau_n)

    def pred_logp(self, x: float, sigma: float) -> float:
        self._check_sigma(sigma)
        mu_n, sd_n = self.posterior_params()
        var = sd_n * sd_n + sigma * sigma
        return -0.5 * math.log(2.0 * math.pi * var) - 0.5 * (x - mu_n) ** 2 / var

    def log_marginal(self) -> float:
        if self.n == 0:
            return 0.0
        tau0 = 1.0 / (self.sigma0 * self.sigma0)
        tau = 1.0 / (self.obs_sigma * self.obs_sigma)
        tau_n = tau0 + self.n * tau
        m = (tau0 * self.mu0 + tau * self.sum) / tau_n
        return (
            0.5 * self.n * (math.log(tau) - math.log(2.0 * math.pi))
            + 0.5 * (math.log(tau0) - math.log(tau_n))
            - 0.5 * (tau0 * self.mu0 * self.mu0 + tau * self.sumsq - tau_n * m * m)
        )

    def sample_value(self, rng):
        mu_n, sd_n = self.posterior_params()
        return float(rng.normal(mu_n, sd_n))


def make_posterior(family: str, hyper_args) -> Posterior:
    if family == "dirichlet":
        return DirichletCategorical(hyper_args[0])
    if family == "beta":
        return BetaBernoulli(hyper_args[0], hyper_args[1])
    if family == "normal":
        return NormalNormal(hyper_args[0], hyper_args[1])
    raise ValueError(f"no conjugate family named {family!r}")
