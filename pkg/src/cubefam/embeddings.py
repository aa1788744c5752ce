"""Down-set embeddings and randomized cube location in dense truncated families.

Two routes into a host family are provided.  The deterministic one maps a
poset injectively onto down-sets, so any induced copy of a (truncated)
cube pulls back to an induced copy of the poset.  The randomized one
locates an m-dimensional cube inside a family containing almost all of
the nonempty small subsets of [n]: sample a Bernoulli vertex set, delete
one vertex from every missing subset it contains, and shrink.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np

from .errors import CertificationError, PreconditionError, SearchBudgetExceeded
from .families import (
    MAX_GROUND,
    SetFamily,
    mask_elements,
    mask_size,
)
from .posets import (
    CUBE_DIM_CAP,
    EmbeddingMap,
    FinitePoset,
    contains_subposet,
    family_as_poset,
    verify_embedding_masks,
)

DEFAULT_EMBED_ATTEMPTS = 200
DEFAULT_ORACLE_BUDGET = 2_000_000


@dataclass(frozen=True)
class DenseTruncatedFamily:
    """Subsets of [n] of size <= m ("up") or >= n-m ("down"), with gaps.

    ``present`` holds the member masks.  The class-membership test at
    tolerance eps is ``dense_class_check``: every layer within the
    truncation must retain a (1-eps) fraction of its binomial count.
    """

    n: int
    m: int
    orientation: str
    present: frozenset

    def __post_init__(self):
        if not 0 <= self.m <= self.n <= MAX_GROUND:
            raise PreconditionError(
                f"need 0 <= m <= n <= {MAX_GROUND}, got m={self.m}, n={self.n}"
            )
        if self.orientation not in ("up", "down"):
            raise PreconditionError(f"orientation must be 'up' or 'down'")
        full = (1 << self.n) - 1
        for mask in self.present:
            if mask & ~full:
                raise PreconditionError(f"mask {mask:#x} leaves the ground set")
            size = mask_size(mask)
            if self.orientation == "up" and size > self.m:
                raise PreconditionError(f"mask of size {size} above truncation {self.m}")
            if self.orientation == "down" and size < self.n - self.m:
                raise PreconditionError(f"mask of size {size} below co-truncation")

    @classmethod
    def from_family(cls, fam: SetFamily, m: int, orientation: str = "up"):
        return cls(fam.ground.n, m, orientation, frozenset(fam.members))

    def layer_count(self, size: int) -> int:
        return sum(1 for mask in self.present if mask_size(mask) == size)

    def complemented(self) -> "DenseTruncatedFamily":
        """The elementwise-complement family, with orientation flipped."""
        full = (1 << self.n) - 1
        flipped = "down" if self.orientation == "up" else "up"
        return DenseTruncatedFamily(
            self.n, self.m, flipped, frozenset(full ^ mask for mask in self.present)
        )


def dense_class_check(fam: DenseTruncatedFamily, eps) -> bool:
    """True iff every truncation layer keeps at least a (1-eps) fraction."""
    eps = Fraction(eps)
    if not 0 < eps <= 1:
        raise PreconditionError(f"tolerance must be in (0, 1], got {eps}")
    for i in range(fam.m + 1):
        size = i if fam.orientation == "up" else fam.n - i
        if fam.layer_count(size) < (1 - eps) * math.comb(fam.n, i):
            return False
    return True


def universality_epsilon(m: int) -> Fraction:
    """Density tolerance 1/(2m)^(m+1) under which cube location succeeds."""
    if m < 1:
        raise PreconditionError("tolerance formula needs m >= 1")
    return Fraction(1, (2 * m) ** (m + 1))


def downset_embedding(p: FinitePoset) -> EmbeddingMap:
    """Map element x to the mask of its down-set {z : z <= x}.

    Always an induced embedding into the nonempty subsets of [p.k]:
    inclusion of down-sets reproduces the order, and the reflexive bit
    keeps incomparable elements on incomparable masks.
    """
    images = tuple((1 << x) | p.below[x] for x in range(p.k))
    emb = EmbeddingMap(images, "induced", "masks", target_n=p.k)
    if not verify_embedding_masks(p, images, "induced"):
        raise CertificationError("down-set map failed the induced check")
    return emb


@dataclass(frozen=True)
class CubeEmbedResult:
    """Outcome of randomized cube location.

    ``mask`` is the certified m-subset of [n] (None iff exhausted).
    """

    mask: Optional[int]
    status: str             # "ok" | "exhausted"
    attempts_used: int
    seed: int


def bernoulli_subset_mask(rng: np.random.Generator, n: int, p: float) -> int:
    """One Bernoulli(p) draw per element of [n], packed into a mask."""
    draws = rng.random(n) < p
    mask = 0
    for pos in np.flatnonzero(draws):
        mask |= 1 << int(pos)
    return mask


def _subsets_below(mask: int, m: int) -> Iterable[int]:
    """Sub-masks of ``mask`` with at most m bits, by size then element order."""
    bits = [1 << e for e in range(mask.bit_length()) if mask & (1 << e)]
    for size in range(min(m, len(bits)) + 1):
        for combo in itertools.combinations(bits, size):
            sub = 0
            for b in combo:
                sub |= b
            yield sub


def _certify_cube_copy(fam: DenseTruncatedFamily, x_mask: int, m: int) -> None:
    full = (1 << fam.n) - 1
    for sub in _subsets_below(x_mask, m):
        member = sub if fam.orientation == "up" else full ^ sub
        if member not in fam.present:
            raise CertificationError(
                f"cube certificate broken: {member:#x} missing from family"
            )


def randomized_cube_embed(
    fam: DenseTruncatedFamily,
    m: int,
    seed: int,
    max_attempts: int = DEFAULT_EMBED_ATTEMPTS,
) -> CubeEmbedResult:
    """Find an m-subset X of [n] all of whose small subsets lie in ``fam``.

    For an "up" family the guarantee is S in fam for every S subseteq X
    with |S| <= m; for a "down" family it is [n]\\S in fam.  Per attempt:
    draw each element with probability 2m/n, delete the smallest element
    of each missing subset still contained (missing subsets processed by
    size, then element order), then keep the m smallest surviving
    elements.  Attempts use independent counter-based streams jumped off
    ``seed``, so results are reproducible.

    Raises PreconditionError when the family is too sparse or n < 2m --
    deliberately distinct from running out of attempts, which returns an
    exhausted result instead.
    """
    if not 1 <= m <= fam.m:
        raise PreconditionError(f"need 1 <= m <= truncation {fam.m}, got m={m}")
    if fam.n < 2 * m:
        raise PreconditionError(f"need n >= 2m, got n={fam.n}, m={m}")
    if not dense_class_check(fam, universality_epsilon(m)):
        raise PreconditionError(
            f"family is not dense enough at tolerance {universality_epsilon(m)}"
        )
    if max_attempts < 1:
        raise PreconditionError("need at least one attempt")

    up = fam if fam.orientation == "up" else fam.complemented()
    n = fam.n
    p = 2 * m / n
    base = np.random.Philox(key=seed)

    for attempt in range(max_attempts):
        rng = np.random.Generator(base.jumped(attempt))
        x_mask = bernoulli_subset_mask(rng, n, p)
        bad = [sub for sub in _subsets_below(x_mask, m) if sub not in up.present]
        for sub in bad:
            if sub & x_mask == sub:    # still intact; drop its smallest element
                x_mask ^= sub & -sub
        if mask_size(x_mask) < m:
            continue
        shrunk = 0
        for _ in range(m):
            low = x_mask & -x_mask
            shrunk |= low
            x_mask ^= low
        _certify_cube_copy(fam, shrunk, m)
        return CubeEmbedResult(shrunk, "ok", attempt + 1, seed)
    return CubeEmbedResult(None, "exhausted", max_attempts, seed)


def _upper_cube_poset(k: int) -> FinitePoset:
    """Nonempty subsets of [k] under strict inclusion; element i is mask i+1."""
    pairs = []
    for s in range(1, 1 << k):
        for t in range(1, 1 << k):
            if s != t and s & t == s:
                pairs.append((s - 1, t - 1))
    return FinitePoset((1 << k) - 1, pairs)


def _expand_onto(bits: list, small_mask: int) -> int:
    out = 0
    for j in range(small_mask.bit_length()):
        if small_mask & (1 << j):
            out |= 1 << bits[j]
    return out


def find_pattern_via_universality(
    host_fam: SetFamily,
    pattern: FinitePoset,
    *,
    seed: int = 0x5EED,
    attempts: int = DEFAULT_EMBED_ATTEMPTS,
    node_budget: Optional[int] = DEFAULT_ORACLE_BUDGET,
    stats: Optional[dict] = None,
) -> Optional[EmbeddingMap]:
    """Induced copy of ``pattern`` among the members of ``host_fam``.

    A pattern on k elements embeds into the nonempty subsets of [k] by
    down-sets, so one full k-cube inside the host yields the pattern.
    When the host is dense among the small (or co-small) subsets, the
    cube comes from randomized location; otherwise a backtracking search
    finds the nonempty part of the cube directly (k <= 5), or in the last
    resort the pattern itself.  The composed map is re-verified pairwise;
    None means not found within the given budgets.

    When ``stats`` is a dict, "attempts_used" is written into it: the
    number of randomized draws consumed (0 for purely oracle routes).
    """
    k = pattern.k
    n = host_fam.ground.n
    if stats is not None:
        stats["attempts_used"] = 0
    if k == 0:
        return EmbeddingMap((), "induced", "masks", target_n=n)
    if k > len(host_fam):
        return None
    psi = downset_embedding(pattern).images
    members = host_fam.members
    member_set = host_fam.member_set
    full = (1 << n) - 1

    def certified(images: tuple) -> Optional[EmbeddingMap]:
        if any(img not in member_set for img in images):
            raise CertificationError("composed image left the host family")
        if not verify_embedding_masks(pattern, images, "induced"):
            raise CertificationError("composed map failed the induced check")
        return EmbeddingMap(images, "induced", "masks", target_n=n)

    # Randomized route: host dense among small subsets, or among co-small
    # subsets (then locate the dual pattern in the complement and flip).
    if n >= 2 * k:
        small = frozenset(a for a in members if mask_size(a) <= k)
        dtf = DenseTruncatedFamily(n, k, "up", small)
        if dense_class_check(dtf, universality_epsilon(k)):
            res = randomized_cube_embed(dtf, k, seed, attempts)
            if stats is not None:
                stats["attempts_used"] += res.attempts_used
            if res.mask is not None:
                bits = mask_elements(res.mask)
                bits = [e - 1 for e in bits]
                return certified(tuple(_expand_onto(bits, s) for s in psi))
        cosmall = frozenset(full ^ a for a in members if mask_size(a) >= n - k)
        dtf = DenseTruncatedFamily(n, k, "up", cosmall)
        if dense_class_check(dtf, universality_epsilon(k)):
            res = randomized_cube_embed(dtf, k, seed, attempts)
            if stats is not None:
                stats["attempts_used"] += res.attempts_used
            if res.mask is not None:
                bits = [e - 1 for e in mask_elements(res.mask)]
                dual_psi = downset_embedding(pattern.dual()).images
                return certified(
                    tuple(full ^ _expand_onto(bits, s) for s in dual_psi)
                )

    # Oracle route: search for the nonempty cube part, then compose.
    host_poset = family_as_poset(host_fam)
    if k <= CUBE_DIM_CAP:
        try:
            emb = contains_subposet(
                host_poset, _upper_cube_poset(k), "induced", node_budget
            )
        except SearchBudgetExceeded:
            emb = None
        if emb is not None:
            return certified(tuple(members[emb.images[s - 1]] for s in psi))
    # No cube found (the pattern may still fit without one): search for
    # the pattern itself.
    try:
        emb = contains_subposet(host_poset, pattern, "induced", node_budget)
    except SearchBudgetExceeded:
        return None
    if emb is None:
        return None
    return certified(tuple(members[emb.images[x]] for x in range(k)))
