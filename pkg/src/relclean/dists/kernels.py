"""Hot numeric kernels for string likelihoods.

Every kernel is written once as plain numpy/python and compiled with
``numba.njit`` when available.  Setting ``RELCLEAN_NO_NUMBA=1`` (or numba
being absent) selects the pure-python path; results are identical either
way, only speed differs.  ``scripts/benchmark_kernels.py`` compares the
two paths.
"""

from __future__ import annotations

import math
import os

import numpy as np

_DISABLED = os.environ.get("RELCLEAN_NO_NUMBA", "").lower() in ("1", "true", "yes")

USING_NUMBA = False
if not _DISABLED:
    try:
        from numba import njit

        USING_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass

if not USING_NUMBA:

    def njit(*args, **kwargs):
        if args and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


@njit(cache=True)
def _neg_binom_pmf(t, r, p):
    # number of typos t given r failures-to-stop with success prob p
    logc = math.lgamma(t + r) - math.lgamma(r) - math.lgamma(t + 1.0)
    return math.exp(logc + r * math.log(p) + t * math.log1p(-p))


@njit(cache=True)
def banded_edit_distance(a, b, band):
    """Levenshtein distance between code arrays, give up beyond `band`."""
    n, m = a.shape[0], b.shape[0]
    if abs(n - m) > band:
        return band + 1
    big = band + 1
    prev = np.empty(m + 1, dtype=np.int64)
    cur = np.empty(m + 1, dtype=np.int64)
    for j in range(m + 1):
        prev[j] = j if j <= band else big
    for i in range(1, n + 1):
        lo = max(1, i - band)
        hi = min(m, i + band)
        for j in range(m + 1):
            cur[j] = big
        if i - band <= 0:
            cur[0] = i
        best = cur[0]
        for j in range(lo, hi + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            v = prev[j - 1] + cost
            if prev[j] + 1 < v:
                v = prev[j] + 1
            if cur[j - 1] + 1 < v:
                v = cur[j - 1] + 1
            if v > big:
                v = big
            cur[j] = v
            if v < best:
                best = v
        if best > band:
            return band + 1
        for j in range(m + 1):
            prev[j] = cur[j]
    return prev[m] if prev[m] <= band else band + 1


@njit(cache=True)
def typo_log_likelihood(truth, obs, alphabet_size, r, p, max_extra):
    """Log-probability that the typo channel maps `truth` to `obs`.

    `truth` and `obs` are int32 code arrays. The channel draws a typo count
    from NegBinomial(r, p) and applies that many uniform-position edits
    (insert / delete / substitute / transpose-adjacent, equiprobable).
    The alignment DP is exact for <=1 typo; beyond that it marginalizes
    over minimal-style alignment paths with per-edit count tracking.
    """
    n, m = truth.shape[0], obs.shape[0]
    a = float(alphabet_size)
    # per-operation weights; position counts approximated on truth length
    w_sub = 0.25 * (1.0 / max(n, 1)) * (1.0 / max(a - 1.0, 1.0))
    w_del = 0.25 * (1.0 / max(n, 1))
    w_ins = 0.25 * (1.0 / (n + 1.0)) * (1.0 / a)
    w_tr = 0.25 * (1.0 / max(n - 1, 1))

    dist = banded_edit_distance(truth, obs, 6)
    if dist > 6:
        # far pair: bound by the delete-all / insert-all rebuild path
        t = n + m
        if t == 0:
            return math.log(_neg_binom_pmf(0, r, p))
        mass = _neg_binom_pmf(t, r, p)
        logmass = math.log(mass) if mass > 0 else -745.0
        return logmass + n * math.log(w_del) + m * math.log(w_ins)

    tmax = dist + 3
    f = np.zeros((n + 1, m + 1, tmax + 1))
    f[0, 0, 0] = 1.0
    for i in range(n + 1):
        for j in range(m + 1):
            for t in range(tmax + 1):
                v = f[i, j, t]
                if v == 0.0:
                    continue
                if i < n and j < m and truth[i] == obs[j]:
                    f[i + 1, j + 1, t] += v
                if t < tmax:
                    if i < n and j < m and truth[i] != obs[j]:
                        f[i + 1, j + 1, t + 1] += v * w_sub
                    if i < n:
                        f[i + 1, j, t + 1] += v * w_del
                    if j < m:
                        f[i, j + 1, t + 1] += v * w_ins
                    if (
                        i + 1 < n
                        and j + 1 < m
                        and truth[i] == obs[j + 1]
                        and truth[i + 1] == obs[j]
                        and truth[i] != truth[i + 1]
                    ):
                        f[i + 2, j + 2, t + 1] += v * w_tr
    total = 0.0
    for t in range(tmax + 1):
        total += _neg_binom_pmf(t, r, p) * f[n, m, t]
    if total <= 0.0:
        t = n + m
        mass = _neg_binom_pmf(t, r, p)
        logmass = math.log(mass) if mass > 0 else -745.0
        return logmass + n * math.log(w_del) + m * math.log(w_ins)
    return math.log(total)


@njit(cache=True)
def typo_log_likelihood_batch(
    truth_buf, truth_offsets, obs, alphabet_size, r_arr, p, out
):
    """Fill `out[k]` with the typo log-likelihood of obs given the k-th
    packed truth string. `r_arr[k]` carries the per-truth negbin r."""
    k = truth_offsets.shape[0] - 1
    for idx in range(k):
        t = truth_buf[truth_offsets[idx] : truth_offsets[idx + 1]]
        out[idx] = typo_log_likelihood(t, obs, alphabet_size, r_arr[idx], p, 0)


@njit(cache=True)
def bigram_string_logprob(codes, start_logp, trans_logp):
    """Markov-chain log-probability of a code array (length term excluded)."""
    n = codes.shape[0]
    if n == 0:
        return 0.0
    total = start_logp[codes[0]]
    for i in range(1, n):
        total += trans_logp[codes[i - 1], codes[i]]
    return total


@njit(cache=True)
def bigram_string_logprob_batch(buf, offsets, start_logp, trans_logp, out):
    k = offsets.shape[0] - 1
    for idx in range(k):
        out[idx] = bigram_string_logprob(buf[offsets[idx] : offsets[idx + 1]], start_logp, trans_logp)
