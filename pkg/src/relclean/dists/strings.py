"""String-valued priors and the typo noise channel.

`string_prior(min, max)` draws a length uniformly and characters from a
bigram Markov chain whose transition table ships with the package.
`typos(center[, strictness])` corrupts a string with a negative-binomial
number of uniform edits; its likelihood runs on the numba DP kernel with
a global (truth, observed) pair cache.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from ..strpool import ALPHABET_SIZE, POOL
from .base import DOMAIN_COUNTABLE, Dist, register
from .kernels import (
    bigram_string_logprob,
    typo_log_likelihood,
    typo_log_likelihood_batch,
)

_DATA_PATH = Path(__file__).with_name("bigram_data.txt")
# probability reserved for out-of-alphabet characters in every conditional
OOV_MASS = 1e-6
_SMOOTH = 0.5

TYPO_STOP_PROB = 0.9  # negative-binomial continue/stop parameter


def default_strictness(length: int) -> int:
    """Negative-binomial r parameter: grows with the string length."""
    return max(1, math.ceil(length / 10))


def _load_bigram_tables():
    counts = np.zeros((ALPHABET_SIZE, ALPHABET_SIZE), dtype=float)
    from ..strpool import _CODE_OF

    with open(_DATA_PATH, "r", encoding="utf-8") as f:
        for line in f:
            if len(line) < 4:
                continue
            a, b, cnt = line[0], line[1], line[3:].strip()
            ca = _CODE_OF.get(a, 0)
            cb = _CODE_OF.get(b, 0)
            counts[ca, cb] += int(cnt)

    # transition log-probs: smoothed over in-alphabet codes, OOV_MASS for
    # the fold-in "other" code 0
    trans = np.empty((ALPHABET_SIZE, ALPHABET_SIZE), dtype=float)
    for a in range(ALPHABET_SIZE):
        row = counts[a, 1:] + _SMOOTH
        row = row / row.sum() * (1.0 - OOV_MASS)
        trans[a, 0] = math.log(OOV_MASS)
        trans[a, 1:] = np.log(row)

    start_counts = counts.sum(axis=0)[1:] + counts.sum(axis=1)[1:] + _SMOOTH
    start = start_counts / start_counts.sum() * (1.0 - OOV_MASS)
    start_logp = np.empty(ALPHABET_SIZE, dtype=float)
    start_logp[0] = math.log(OOV_MASS)
    start_logp[1:] = np.log(start)
    return start_logp, trans


START_LOGP, TRANS_LOGP = _load_bigram_tables()

# cumulative tables for sampling (in-alphabet only, renormalized)
_START_P = np.exp(START_LOGP[1:])
_START_P = _START_P / _START_P.sum()
_TRANS_P = np.exp(TRANS_LOGP[:, 1:])
_TRANS_P = _TRANS_P / _TRANS_P.sum(axis=1, keepdims=True)


class StringPrior(Dist):
    name = "string_prior"
    domain_kind = DOMAIN_COUNTABLE
    arity = (2, 2)

    def logpdf(self, args, x):
        lo, hi = int(args[0]), int(args[1])
        if not isinstance(x, str):
            return -math.inf
        sid = POOL.intern(x)
        codes = POOL.codes(sid)
        n = codes.shape[0]
        if n < lo or n > hi:
            return -math.inf
        return -math.log(hi - lo + 1) + bigram_string_logprob(codes, START_LOGP, TRANS_LOGP)

    def sample(self, args, rng):
        from ..strpool import ALPHABET

        lo, hi = int(args[0]), int(args[1])
        n = int(rng.integers(lo, hi + 1))
        if n == 0:
            return ""
        chars = []
        c = int(rng.choice(len(_START_P), p=_START_P))
        chars.append(ALPHABET[c])
        for _ in range(n - 1):
            c = int(rng.choice(len(_START_P), p=_TRANS_P[c + 1]))
            chars.append(ALPHABET[c])
        return "".join(chars)

    def batch_logpdf(self, args, values):
        return np.array([self.logpdf(args, v) for v in values], dtype=float)


# (truth_sid, obs_sid, r) -> log-likelihood
_TYPO_CACHE: dict[tuple[int, int, int], float] = {}


def typos_logpdf_interned(truth_sid: int, obs_sid: int, r: int) -> float:
    key = (truth_sid, obs_sid, r)
    v = _TYPO_CACHE.get(key)
    if v is None:
        v = typo_log_likelihood(
            POOL.codes(truth_sid), POOL.codes(obs_sid), ALPHABET_SIZE, float(r), TYPO_STOP_PROB, 0
        )
        _TYPO_CACHE[key] = v
    return v


def typos_batch(truth_sids: list[int], obs_sid: int, strictness: int | None) -> np.ndarray:
    """Vector of typo log-likelihoods of one observation against many truths."""
    out = np.empty(len(truth_sids), dtype=float)
    missing: list[int] = []
    missing_pos: list[int] = []
    for i, tsid in enumerate(truth_sids):
        r = strictness if strictness is not None else default_strictness(
            POOL.codes(tsid).shape[0]
        )
        v = _TYPO_CACHE.get((tsid, obs_sid, r))
        if v is None:
            missing.append(tsid)
            missing_pos.append(i)
        else:
            out[i] = v
    if missing:
        buf, offsets = POOL.pack(missing)
        rs = np.array(
            [
                float(
                    strictness
                    if strictness is not None
                    else default_strictness(POOL.codes(t).shape[0])
                )
                for t in missing
            ]
        )
        res = np.empty(len(missing), dtype=float)
        typo_log_likelihood_batch(
            buf, offsets, POOL.codes(obs_sid), ALPHABET_SIZE, rs, TYPO_STOP_PROB, res
        )
        for j, (tsid, pos) in enumerate(zip(missing, missing_pos)):
            r = int(rs[j])
            _TYPO_CACHE[(tsid, obs_sid, r)] = res[j]
            out[pos] = res[j]
    return out


class Typos(Dist):
    name = "typos"
    domain_kind = DOMAIN_COUNTABLE
    arity = (1, 2)
    center_arg = 0

    def _r(self, args, truth: str) -> int:
        if len(args) > 1 and args[1] is not None:
            return int(args[1])
        return default_strictness(len(truth))

    def logpdf(self, args, x):
        truth = args[0]
        if not isinstance(x, str) or not isinstance(truth, str):
            return -math.inf
        return typos_logpdf_interned(
            POOL.intern(truth), POOL.intern(x), self._r(args, truth)
        )

    def sample(self, args, rng):
        from ..strpool import ALPHABET

        truth = args[0]
        r = self._r(args, truth)
        n_typos = int(rng.negative_binomial(r, TYPO_STOP_PROB))
        s = list(truth)
        for _ in range(n_typos):
            op = int(rng.integers(4))
            if op == 0:  # insert
                pos = int(rng.integers(len(s) + 1))
                s.insert(pos, ALPHABET[int(rng.integers(len(ALPHABET)))])
            elif op == 1 and s:  # delete
                del s[int(rng.integers(len(s)))]
            elif op == 2 and s:  # substitute
                pos = int(rng.integers(len(s)))
                cur = s[pos]
                choices = [c for c in ALPHABET if c != cur]
                s[pos] = choices[int(rng.integers(len(choices)))]
            elif op == 3 and len(s) >= 2:  # transpose
                pos = int(rng.integers(len(s) - 1))
                s[pos], s[pos + 1] = s[pos + 1], s[pos]
        return "".join(s)

    def batch_logpdf(self, args, values):
        truth = args[0]
        strict = int(args[1]) if len(args) > 1 and args[1] is not None else None
        tsid = POOL.intern(truth)
        r = strict if strict is not None else default_strictness(len(truth))
        return np.array(
            [typos_logpdf_interned(tsid, POOL.intern(v), r) if isinstance(v, str) else -math.inf for v in values]
        )

    def batch_loglik(self, args_list, obs) -> np.ndarray:
        """Likelihood of one observed string under many center values."""
        obs_sid = POOL.intern(obs)
        sids = []
        strict = None
        for args in args_list:
            sids.append(POOL.intern(args[0]))
            strict = int(args[1]) if len(args) > 1 and args[1] is not None else None
        return typos_batch(sids, obs_sid, strict)


register(StringPrior())
register(Typos())
