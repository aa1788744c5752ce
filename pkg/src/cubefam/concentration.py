"""Hypergeometric concentration: sampling, tail bounds, recursive constants.

Numerics policy: probability inequalities are checked in binary64 with an
explicit 3-sigma margin (Monte-Carlo cannot refute a true bound, only
flag suspicion), while the recursive constants eta and c stay exact
rationals and the threshold sizes m0 are exact integers.  The quantities
that overflow binary64 -- mass bounds of order exp(1/c) and threshold
indices of order 1/c -- go through mpmath, whose exponent range is
unbounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

import mpmath as mp
import numpy as np

from .errors import PreconditionError

_BATCH_ROWS = 16384
_MP_DPS = 60
# Comparisons against 1 in the m* search get this one-sided slack, so a
# value within guard of the boundary is treated as failing the inequality
# and m* only ever moves up (a larger threshold is still a valid one).
_GUARD = "1e-30"


def _ceil_fraction(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def _mpf(x) -> mp.mpf:
    if isinstance(x, Fraction):
        return mp.mpf(x.numerator) / mp.mpf(x.denominator)
    return mp.mpf(x)


def sample_uniform_subsets(n: int, m: int, trials: int, seed: int) -> np.ndarray:
    """(trials, m) array of uniform m-subsets of {0..n-1}, row-sorted not.

    Each row is the prefix of an independently shuffled 0..n-1; shuffles
    run in fixed-size batches on counter-based streams jumped off
    ``seed``, so output depends only on (n, m, trials, seed).
    """
    if not 0 <= m <= n:
        raise PreconditionError(f"need 0 <= m <= n, got m={m}, n={n}")
    if trials < 0:
        raise PreconditionError("trials must be nonnegative")
    base = np.random.Philox(key=seed)
    out = np.empty((trials, m), dtype=np.int32)
    row = 0
    chunk_idx = 0
    while row < trials:
        rows = min(_BATCH_ROWS, trials - row)
        gen = np.random.Generator(base.jumped(chunk_idx))
        mat = np.tile(np.arange(n, dtype=np.int32), (rows, 1))
        gen.permuted(mat, axis=1, out=mat)
        out[row : row + rows] = mat[:, :m]
        row += rows
        chunk_idx += 1
    return out


def hypergeometric_sample(m: int, k: int, n: int, seed: int) -> int:
    """One draw of Z = |X cap {0..k-1}| for X uniform in the m-subsets of [n].

    X comes from a partial Fisher-Yates shuffle: swap a uniform later
    element into each of the first m positions.
    """
    if not (0 <= m <= n and 0 <= k <= n):
        raise PreconditionError(f"need max(m, k) <= n, got m={m}, k={k}, n={n}")
    rng = np.random.Generator(np.random.Philox(key=seed))
    arr = np.arange(n)
    for i in range(m):
        j = i + int(rng.integers(0, n - i))
        arr[i], arr[j] = arr[j], arr[i]
    return int((arr[:m] < k).sum())


def tail_bound(m: int, t) -> float:
    """Upper bound exp(-2 t^2 / m) for the upper tail at offset t."""
    if m < 1:
        raise PreconditionError("need m >= 1")
    if t < 0:
        raise PreconditionError("tail offset must be nonnegative")
    return math.exp(-2 * float(t) ** 2 / m)


@dataclass(frozen=True)
class MonteCarloReport:
    """Outcome of an empirical check of a probability inequality.

    verdict is "pass" / "fail" / "inconclusive" (plus "hypothesis-failed"
    where the inequality's own hypotheses were not met); "fail" only
    flags suspicion -- empirical frequency above bound + 3 sigma.
    """

    lemma: str
    params: dict
    trials: int
    seed: int
    hits: int
    empirical: float
    bound: float
    margin: float
    verdict: str


def _three_sigma(bound: float, trials: int) -> float:
    return 3.0 * math.sqrt(max(bound * (1.0 - bound), 0.0) / trials)


def verify_tail_bound(
    m: int, k: int, n: int, t, trials: int, seed: int
) -> MonteCarloReport:
    """Estimate P(Z >= km/n + t) and compare with exp(-2 t^2 / m).

    The threshold comparison is exact (integer Z against a rational
    threshold); only the frequency-vs-bound comparison is floating.
    """
    bound = tail_bound(m, t)
    params = {"m": m, "k": k, "n": n, "t": float(t)}
    if trials == 0:
        return MonteCarloReport(
            "tail", params, 0, seed, 0, 0.0, bound, 0.0, "inconclusive"
        )
    subs = sample_uniform_subsets(n, m, trials, seed)
    z = (subs < k).sum(axis=1)
    z_min = _ceil_fraction(Fraction(k * m, n) + Fraction(t))
    hits = int((z >= z_min).sum())
    empirical = hits / trials
    margin = _three_sigma(bound, trials)
    verdict = "pass" if empirical <= bound + margin else "fail"
    return MonteCarloReport(
        "tail", params, trials, seed, hits, empirical, bound, margin, verdict
    )


@dataclass(frozen=True)
class ConcentrationConstants:
    """The (eta, c, m0) triple attached to a trace tolerance (eps, r)."""

    eps: Fraction
    r: int
    eta: Fraction
    c: Fraction
    m0: int


_constants_cache: dict = {}


def concentration_constants(eps, r: int) -> ConcentrationConstants:
    """Constants (eta, c, m0) by direct recursion on r.

    Base cases: r=0 gives (1/2, 1, 0) and r=1 gives (eps/2, eps^2/2, 1).
    For r >= 2 the tolerance halves, eta multiplies, c halves the
    smaller branch, and m0 additionally clears m*, the least threshold
    past which exp(-c1 m) + m exp(-c2 (m-1)) stays below exp(-c m).
    eta and c are exact rationals; m0 is an exact integer (it can be
    enormous for small eps -- the search is logarithmic in its value).
    """
    eps = Fraction(eps)
    if not 0 < eps <= 1:
        raise PreconditionError(f"tolerance must be in (0, 1], got {eps}")
    if r < 0:
        raise PreconditionError("order r must be nonnegative")
    key = (eps, r)
    hit = _constants_cache.get(key)
    if hit is not None:
        return hit
    if r == 0:
        out = ConcentrationConstants(eps, 0, Fraction(1, 2), Fraction(1), 0)
    elif r == 1:
        out = ConcentrationConstants(eps, 1, eps / 2, eps * eps / 2, 1)
    else:
        single = concentration_constants(eps / 2, 1)
        lower = concentration_constants(eps / 2, r - 1)
        eta = lower.eta * single.eta
        c = min(single.c, lower.c) / 2
        m_star = _dominance_threshold(single.c, lower.c, c)
        m0 = max(single.m0, lower.m0 + 1, m_star)
        out = ConcentrationConstants(eps, r, eta, c, m0)
    _constants_cache[key] = out
    return out


def _dominance_threshold(c1: Fraction, c2: Fraction, c: Fraction) -> int:
    """Least m with exp(-c1 m') + m' exp(-c2 (m'-1)) <= exp(-c m') for all m' >= m.

    Divide through by exp(-c m): the ratio R(m) = exp(-(c1-c) m)
    + m exp(c2) exp(-(c2-c) m) must stay <= 1.  Both exponent gaps are
    positive (c is half the smaller constant), so R(m) -> 0, and its
    derivative is negative once m >= 1/(c2-c): past that point R is
    strictly decreasing, which is the dominance certificate that lets a
    doubling-plus-bisection search stand in for an infinite scan.
    """
    g1 = c1 - c
    g2 = c2 - c
    if g1 <= 0 or g2 <= 0:
        raise PreconditionError("dominance certificate needs positive exponent gaps")
    m_dec = int(Fraction(1) / g2) + 1
    with mp.workdps(_MP_DPS):
        guard = mp.mpf(_GUARD)
        gg1, gg2, cc2 = _mpf(g1), _mpf(g2), _mpf(c2)

        def ok(m: int) -> bool:
            mm = mp.mpf(m)
            ratio = mp.exp(-gg1 * mm) + mm * mp.exp(cc2) * mp.exp(-gg2 * mm)
            return ratio <= 1 - guard

        if ok(m_dec):
            # R(1) = exp(-g1) + exp(c) > 1, so this walk always stops.
            m = m_dec
            while m > 1 and ok(m - 1):
                m -= 1
            return m
        lo, hi = m_dec, 2 * m_dec
        while not ok(hi):
            lo, hi = hi, hi * 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(mid):
                hi = mid
            else:
                lo = mid
        return hi


def fat_mass_bound(eps, r: int) -> mp.mpf:
    """The mass bound m0 + 1/(1 - exp(-c)) attached to (eps, r).

    Returned as an mpmath float: c can be small enough that the result
    has no binary64 representation.
    """
    consts = concentration_constants(eps, r)
    with mp.workdps(_MP_DPS):
        return mp.mpf(consts.m0) + 1 / (-mp.expm1(-_mpf(consts.c)))


def _mask_to_indices(mask: int, n: int) -> list:
    out = []
    for pos in range(mask.bit_length()):
        if mask & (1 << pos):
            if pos >= n:
                raise PreconditionError(f"mask bit {pos} outside ground of size {n}")
            out.append(pos)
    return out


def verify_trace_probability(
    n: int,
    m: int,
    r: int,
    eps,
    T: Iterable[int],
    trials: int,
    seed: int,
) -> MonteCarloReport:
    """Estimate P(|X^{(r)} cap T| > eps C(m,r)) for X uniform in [n]^{(m)}.

    T is given as bitmasks over positions 0..n-1 (n may exceed the
    family modules' 64-element cap; masks are plain integers here).
    Hypotheses |T| <= eta(eps, r) C(n, r) and m >= m0(eps, r) and n >= m
    are checked first; a violation yields a "hypothesis-failed" report
    rather than an error, since the caller may be probing the boundary.
    """
    eps = Fraction(eps)
    consts = concentration_constants(eps, r)
    t_list = sorted(set(T))
    for mask in t_list:
        if mask.bit_count() != r:
            raise PreconditionError(f"member {mask:#x} of T is not an r-subset")
    with mp.workdps(_MP_DPS):
        bound_mp = mp.exp(-_mpf(consts.c) * m) if m >= 0 else mp.mpf(1)
        bound = float(bound_mp) if bound_mp > mp.mpf("1e-300") else 0.0
    params = {"n": n, "m": m, "r": r, "eps": str(eps), "T_size": len(t_list)}
    hypothesis_ok = (
        Fraction(len(t_list)) <= consts.eta * math.comb(n, r)
        and m >= consts.m0
        and n >= m
    )
    if not hypothesis_ok:
        return MonteCarloReport(
            "trace", params, trials, seed, 0, 0.0, bound, 0.0, "hypothesis-failed"
        )
    if trials == 0:
        return MonteCarloReport(
            "trace", params, 0, seed, 0, 0.0, bound, 0.0, "inconclusive"
        )

    thr = Fraction(eps) * math.comb(m, r)
    count_min = thr.numerator // thr.denominator + 1  # least integer > thr
    t_idx = np.array(
        [_mask_to_indices(mask, n) for mask in t_list], dtype=np.int64
    ).reshape(len(t_list), r)

    hits = 0
    done = 0
    chunk_idx = 0
    base = np.random.Philox(key=seed)
    while done < trials:
        rows = min(_BATCH_ROWS, trials - done)
        gen = np.random.Generator(base.jumped(chunk_idx))
        mat = np.tile(np.arange(n, dtype=np.int32), (rows, 1))
        gen.permuted(mat, axis=1, out=mat)
        picked = np.zeros((rows, n), dtype=bool)
        np.put_along_axis(picked, mat[:, :m], True, axis=1)
        if len(t_list):
            inside = picked[:, t_idx].all(axis=2).sum(axis=1)
            hits += int((inside >= count_min).sum())
        done += rows
        chunk_idx += 1

    empirical = hits / trials
    margin = _three_sigma(bound, trials)
    verdict = "pass" if empirical <= bound + margin else "fail"
    return MonteCarloReport(
        "trace", params, trials, seed, hits, empirical, bound, margin, verdict
    )
