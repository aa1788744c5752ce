"""Pivots, anti-pivots, flexibility, fatness, and their mass bounds.

An r-pivot of a base set A records that swapping some r-subset X out of
A (for an equal-sized Y from outside) lands in the family; the landing
set is the witness.  Anti-pivots move a set in instead of out.  Witness
existence depends only on members of the family of size |A|, a fact the
exhaustive bound search below exploits.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

import mpmath as mp

from .concentration import concentration_constants, fat_mass_bound
from .errors import PreconditionError
from .families import (
    SetFamily,
    lubell_mass,
    mask_elements,
    mask_size,
)


@dataclass(frozen=True)
class PivotRecord:
    base: int
    moved: int       # X (subset of base) for pivots, Y (outside base) for anti-pivots
    witness: int     # member of the family, equal in size to base
    kind: str        # "pivot" | "anti-pivot"
    r: int


@dataclass(frozen=True)
class PivotSet:
    """All r-(anti-)pivots of one base set, each with one chosen witness."""

    base: int
    r: int
    kind: str
    pivots: tuple                 # moved-set masks, ascending
    witness_of: dict = field(compare=False)

    def __len__(self):
        return len(self.pivots)

    def records(self) -> list:
        return [
            PivotRecord(self.base, x, self.witness_of[x], self.kind, self.r)
            for x in self.pivots
        ]


def _r_subsets(mask: int, r: int) -> Iterable[int]:
    bits = [1 << e for e in range(mask.bit_length()) if mask & (1 << e)]
    for combo in itertools.combinations(bits, r):
        sub = 0
        for b in combo:
            sub |= b
        yield sub


def _lex_min(masks: Iterable[int]) -> int:
    return min(masks, key=mask_elements)


def _enumerate(member_set, universe: int, A: int, r: int, anti: bool) -> PivotSet:
    kind = "anti-pivot" if anti else "pivot"
    if A & ~universe:
        raise PreconditionError("base set leaves the universe")
    if r < 0:
        raise PreconditionError("order r must be nonnegative")
    outside = universe & ~A
    if r == 0:
        # The empty swap: witnessed by A itself, present or not.
        if A in member_set:
            return PivotSet(A, 0, kind, (0,), {0: A})
        return PivotSet(A, 0, kind, (), {})
    moved_pool = outside if anti else A
    other_pool = A if anti else outside
    found = {}
    for moved in _r_subsets(moved_pool, r):
        hits = []
        for other in _r_subsets(other_pool, r):
            x, y = (other, moved) if anti else (moved, other)
            b = (A & ~x) | y
            if b in member_set:
                hits.append(b)
        if hits:
            found[moved] = _lex_min(hits)
    pivots = tuple(sorted(found))
    return PivotSet(A, r, kind, pivots, {x: found[x] for x in pivots})


def enumerate_pivots(fam: SetFamily, A: int, r: int) -> PivotSet:
    """The r-subsets X of A swappable for some outside Y into the family.

    A itself need not belong to the family (only the witness must),
    except in the r=0 convention where A is its own witness.  r > |A|
    yields an empty result, not an error.
    """
    return _enumerate(fam.member_set, fam.ground.full_mask, A, r, False)


def enumerate_anti_pivots(fam: SetFamily, A: int, r: int) -> PivotSet:
    """Same with roles swapped: outside r-sets Y swappable into A."""
    return _enumerate(fam.member_set, fam.ground.full_mask, A, r, True)


def pivots_in_universe(member_set, universe: int, A: int, r: int, anti: bool = False) -> PivotSet:
    """Enumeration kernel against an explicit universe mask.

    The extraction pipeline works on interval sub-universes in original
    coordinates; everything else should prefer the SetFamily wrappers.
    """
    return _enumerate(member_set, universe, A, r, anti)


def validate_record(fam: SetFamily, rec: PivotRecord) -> None:
    """Raise unless ``rec`` satisfies the structural pivot invariants."""
    if rec.kind not in ("pivot", "anti-pivot"):
        raise PreconditionError(f"bad record kind {rec.kind!r}")
    if rec.r < 0:
        raise PreconditionError("record order must be nonnegative")
    if rec.witness not in fam.member_set:
        raise PreconditionError("witness is not a family member")
    full = fam.ground.full_mask
    if (rec.base | rec.moved | rec.witness) & ~full:
        raise PreconditionError("record leaves the ground set")
    if rec.r == 0:
        if rec.moved != 0 or rec.witness != rec.base:
            raise PreconditionError("0-swap records must move nothing and witness the base")
        return
    if mask_size(rec.moved) != rec.r:
        raise PreconditionError("moved set has the wrong size")
    x = rec.base & ~rec.witness       # what left the base
    y = rec.witness & ~rec.base       # what came in
    if mask_size(x) != rec.r or mask_size(y) != rec.r:
        raise PreconditionError("witness is not an r-swap of the base")
    expected = x if rec.kind == "pivot" else y
    if rec.moved != expected:
        raise PreconditionError("moved set does not match the witness decomposition")


def observation_check(fam: SetFamily, rec: PivotRecord) -> bool:
    """Test oracle: comparabilities with the witness factor through the swap.

    For a pivot record, every family member F below the base satisfies
    F below witness iff F misses X.  For an anti-pivot record, every F
    above the base satisfies witness below F iff F covers Y.  Always
    true for structurally valid records; anything else is a bug.
    """
    validate_record(fam, rec)
    b, w = rec.base, rec.witness
    if rec.kind == "pivot":
        for f in fam.members:
            if f & ~b:
                continue
            if (f & ~w == 0) != (f & rec.moved == 0):
                return False
    else:
        for f in fam.members:
            if b & ~f:
                continue
            if (w & ~f == 0) != (rec.moved & ~f == 0):
                return False
    return True


def _flex_threshold(gamma: Fraction, pool_size: int, r: int) -> Fraction:
    # Count needed for flexibility; never vacuous (at least one swap must
    # exist even when the proportional demand rounds to zero).
    return max(Fraction(1), (1 - gamma) * math.comb(pool_size, r))


def _count_reaches(member_set, universe, A, r, anti, need: int) -> bool:
    """Early-exit check: does the pivot count reach ``need``?"""
    if r == 0:
        return (1 if A in member_set else 0) >= need
    outside = universe & ~A
    moved_pool = outside if anti else A
    other_pool = A if anti else outside
    pool = list(_r_subsets(moved_pool, r))
    count = 0
    for idx, moved in enumerate(pool):
        if count + (len(pool) - idx) < need:
            return False
        for other in _r_subsets(other_pool, r):
            x, y = (other, moved) if anti else (moved, other)
            if (A & ~x) | y in member_set:
                count += 1
                break
        if count >= need:
            return True
    return count >= need


def is_flexible(
    fam: SetFamily, A: int, gamma, r: int, *, anti: bool = False
) -> bool:
    """Does A have at least max(1, (1-gamma) C(pool, r)) r-(anti-)pivots?

    The threshold is compared in exact rational arithmetic; the pool is
    A itself for pivots and its complement for anti-pivots.
    """
    return flexible_in_universe(
        fam.member_set, fam.ground.full_mask, A, gamma, r, anti=anti
    )


def flexible_in_universe(
    member_set, universe: int, A: int, gamma, r: int, *, anti: bool = False
) -> bool:
    gamma = Fraction(gamma)
    if not 0 < gamma <= 1:
        raise PreconditionError(f"gamma must be in (0, 1], got {gamma}")
    if A & ~universe:
        raise PreconditionError("base set leaves the universe")
    pool = mask_size(universe & ~A) if anti else mask_size(A)
    thr = _flex_threshold(gamma, pool, r)
    need = -((-thr.numerator) // thr.denominator)     # ceil: counts are integers
    return _count_reaches(member_set, universe, A, r, anti, need)


@dataclass(frozen=True)
class FatnessQuery:
    """Is at least a (1-eps) fraction of X's r-subsets inside S?

    ``r`` may be omitted when S is nonempty (inferred from its members);
    an empty S needs it spelled out.
    """

    X: int
    S: frozenset
    eps: Fraction
    r: Optional[int] = None

    def resolved_r(self) -> int:
        sizes = {mask_size(s) for s in self.S}
        if len(sizes) > 1:
            raise PreconditionError(f"S mixes subset sizes {sorted(sizes)}")
        if sizes:
            r = sizes.pop()
            if self.r is not None and self.r != r:
                raise PreconditionError("declared r disagrees with S")
            return r
        if self.r is None:
            raise PreconditionError("empty S: the order r must be given")
        return self.r


def is_fat(q: FatnessQuery) -> bool:
    eps = Fraction(q.eps)
    if eps <= 0:
        raise PreconditionError(f"fatness tolerance must be positive, got {eps}")
    r = q.resolved_r()
    total = math.comb(mask_size(q.X), r)
    if len(q.S) < total:
        count = sum(1 for s in q.S if s & ~q.X == 0)
    else:
        count = sum(1 for t in _r_subsets(q.X, r) if t in q.S)
    return count >= (1 - eps) * total


@dataclass(frozen=True)
class MassBoundReport:
    """Outcome of checking a mass bound against its hypotheses.

    ``satisfied`` is None when the hypotheses failed (the bound then
    says nothing); the bound itself may exceed binary64 range, hence
    the loose type.
    """

    hypothesis_ok: bool
    detail: str
    mass: Fraction
    bound: object
    satisfied: Optional[bool]


def flexibility_mass_bound(gamma, r: int) -> Fraction:
    """The bound r + 2 r^2 / gamma on the mass of flexibility-free families."""
    gamma = Fraction(gamma)
    if not 0 < gamma <= 1:
        raise PreconditionError(f"gamma must be in (0, 1], got {gamma}")
    if r < 0:
        raise PreconditionError("order r must be nonnegative")
    return r + Fraction(2 * r * r) / gamma


def verify_flexibility_bound(fam: SetFamily, gamma, r: int) -> MassBoundReport:
    """Check: no flexible member and small members force small mass."""
    gamma = Fraction(gamma)
    bound = flexibility_mass_bound(gamma, r)
    mass = lubell_mass(fam)
    n = fam.ground.n
    oversized = [a for a in fam.members if 2 * mask_size(a) > n]
    if oversized:
        return MassBoundReport(
            False,
            f"{len(oversized)} members exceed half the ground size",
            mass, bound, None,
        )
    flexible = [a for a in fam.members if is_flexible(fam, a, gamma, r)]
    if flexible:
        return MassBoundReport(
            False, f"{len(flexible)} members are flexible", mass, bound, None
        )
    return MassBoundReport(True, "hypothesis holds", mass, bound, mass <= bound)


def verify_fat_mass_bound(
    fam: SetFamily, S: Iterable[int], eps, r: Optional[int] = None
) -> MassBoundReport:
    """Check: an almost-complete S with no fat member forces small mass.

    The bound is the mpmath value of m0 + 1/(1 - exp(-c)); the mass
    comparison runs at mpmath precision.
    """
    eps = Fraction(eps)
    s_set = frozenset(S)
    probe = FatnessQuery(0, s_set, eps, r)
    r = probe.resolved_r()
    n = fam.ground.n
    consts = concentration_constants(eps, r)
    bound = fat_mass_bound(eps, r)
    mass = lubell_mass(fam)
    if Fraction(len(s_set)) < (1 - consts.eta) * math.comb(n, r):
        return MassBoundReport(
            False,
            f"S keeps less than a (1 - {consts.eta}) fraction of the r-sets",
            mass, bound, None,
        )
    fat = [
        a for a in fam.members if is_fat(FatnessQuery(a, s_set, eps, r))
    ]
    if fat:
        return MassBoundReport(
            False, f"{len(fat)} members are fat", mass, bound, None
        )
    with mp.workdps(60):
        ok = mp.mpf(mass.numerator) / mp.mpf(mass.denominator) <= bound
    return MassBoundReport(True, "hypothesis holds", mass, bound, bool(ok))


# ---------------------------------------------------------------------------
# Search for the worst case of the flexibility bound.  Witnesses share the
# base's size, so flexibility decomposes layer by layer and the global
# maximum is a sum of independent per-layer maxima.


def max_flexfree_layer(n: int, k: int, gamma, r: int) -> tuple:
    """Exhaustive max count of a k-layer family with no flexible member.

    Depth-first over the C(n,k) masks, maintaining the distinct pivot
    swap-sets of every chosen member; counts only grow when members are
    added, so a threshold hit prunes the whole include-branch.
    """
    gamma = Fraction(gamma)
    if not 0 < gamma <= 1:
        raise PreconditionError(f"gamma must be in (0, 1], got {gamma}")
    if r == 0:
        # Every member 0-witnesses itself, so only the empty family
        # avoids flexibility (matching the bound's value of 0).
        return 0, ()
    thr = _flex_threshold(gamma, k, r)
    limit = -((-thr.numerator) // thr.denominator)    # ceil(thr): forbidden count
    masks = [m for m in _r_subsets((1 << n) - 1, k)] if k else [0]
    chosen: list = []
    swaps: list = []                                  # parallel: sets of pivot X-masks
    best_count = 0
    best_masks: tuple = ()

    def add_ok(c: int) -> Optional[list]:
        # Returns the per-member swap additions, or None if some count
        # would reach the forbidden threshold.
        additions = []
        c_swaps = set()
        for i, a in enumerate(chosen):
            x = a & ~c
            if mask_size(x) != r:
                continue
            adds_a = x not in swaps[i]
            if adds_a and len(swaps[i]) + 1 >= limit:
                return None
            c_swaps.add(c & ~a)
            additions.append((i, x) if adds_a else None)
        if len(c_swaps) >= limit:
            return None
        additions.append(c_swaps)
        return additions

    def dfs(idx: int) -> None:
        nonlocal best_count, best_masks
        if len(chosen) + (len(masks) - idx) <= best_count:
            return
        if idx == len(masks):
            if len(chosen) > best_count:
                best_count = len(chosen)
                best_masks = tuple(chosen)
            return
        c = masks[idx]
        additions = add_ok(c)
        if additions is not None:
            c_swaps = additions.pop()
            for entry in additions:
                if entry is not None:
                    swaps[entry[0]].add(entry[1])
            chosen.append(c)
            swaps.append(c_swaps)
            dfs(idx + 1)
            chosen.pop()
            swaps.pop()
            for entry in additions:
                if entry is not None:
                    swaps[entry[0]].discard(entry[1])
        dfs(idx + 1)

    dfs(0)
    return best_count, best_masks


def max_flexfree_mass(n: int, gamma, r: int) -> tuple:
    """Exact maximum mass over families with no flexible member, sizes <= n/2.

    Returns (mass, masks).  Exhaustive -- intended for small n; the
    per-layer searches are independent, which is what makes it feasible.
    """
    total = Fraction(0)
    family: list = []
    for k in range(n // 2 + 1):
        count, masks = max_flexfree_layer(n, k, gamma, r)
        total += Fraction(count, math.comb(n, k))
        family.extend(masks)
    return total, tuple(sorted(family))


def hillclimb_flexfree_mass(
    n: int, gamma, r: int, seed: int, restarts: int = 20
) -> tuple:
    """Randomized greedy lower bound on the same maximum, for larger n."""
    gamma = Fraction(gamma)
    if r == 0:
        return Fraction(0), ()
    rng = random.Random(seed)
    best = Fraction(0)
    best_masks: tuple = ()
    for _ in range(restarts):
        total = Fraction(0)
        fam_masks: list = []
        for k in range(n // 2 + 1):
            thr = _flex_threshold(gamma, k, r)
            limit = -((-thr.numerator) // thr.denominator)
            pool = [m for m in _r_subsets((1 << n) - 1, k)] if k else [0]
            rng.shuffle(pool)
            layer: list = []
            swaps: dict = {}
            for c in pool:
                c_swaps = {c & ~a for a in layer if mask_size(c & ~a) == r}
                if len(c_swaps) >= limit:
                    continue
                if any(
                    len(swaps[a] | {a & ~c}) >= limit
                    for a in layer
                    if mask_size(a & ~c) == r
                ):
                    continue
                for a in layer:
                    if mask_size(a & ~c) == r:
                        swaps[a].add(a & ~c)
                swaps[c] = c_swaps
                layer.append(c)
            total += Fraction(len(layer), math.comb(n, k))
            fam_masks.extend(layer)
        if total > best:
            best = total
            best_masks = tuple(sorted(fam_masks))
    return best, best_masks
