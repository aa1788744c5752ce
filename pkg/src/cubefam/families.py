"""Ground sets, subset masks, set families and the exact Lubell mass.

Subsets of [n] = {1, .., n} are plain Python ints used as bit masks: bit
i-1 set means element i is in the subset.  Masses are `fractions.Fraction`
throughout -- several downstream checks are exact equalities and would be
meaningless in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

from .errors import ParseError, PreconditionError

MAX_GROUND = 64

#: Exact rational type used for every mass computation.
Rational = Fraction


def mask_size(mask: int) -> int:
    return mask.bit_count()


def mask_from_elements(elements: Iterable[int], n: int) -> int:
    """Build a mask from 1-based element indices."""
    mask = 0
    for e in elements:
        if not 1 <= e <= n:
            raise PreconditionError(f"element {e} outside ground set [{n}]")
        mask |= 1 << (e - 1)
    return mask


def mask_elements(mask: int) -> tuple[int, ...]:
    """1-based, sorted element indices of a mask."""
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length())
        mask ^= low
    return tuple(out)


def compress_mask(mask: int, universe: int) -> int:
    """Re-index ``mask`` (a subset of ``universe``) onto contiguous low bits.

    The i-th lowest bit of the result corresponds to the i-th lowest set
    bit of ``universe``.
    """
    out = 0
    i = 0
    u = universe
    while u:
        low = u & -u
        if mask & low:
            out |= 1 << i
        i += 1
        u ^= low
    return out


def expand_mask(bits: int, universe: int) -> int:
    """Inverse of :func:`compress_mask`."""
    out = 0
    i = 0
    u = universe
    while u:
        low = u & -u
        if bits & (1 << i):
            out |= low
        i += 1
        u ^= low
    return out


@dataclass(frozen=True)
class GroundSet:
    """The ground set [n].  Masks of members must fit in ``n`` bits."""

    n: int

    def __post_init__(self):
        if not 0 <= self.n <= MAX_GROUND:
            raise PreconditionError(
                f"ground set size must be in [0, {MAX_GROUND}], got {self.n}"
            )

    @property
    def full_mask(self) -> int:
        return (1 << self.n) - 1


class SetFamily:
    """An immutable, duplicate-free family of subsets of [n].

    Iteration order is ascending mask value.  ``layers`` groups members by
    size, which is the shape every mass computation wants.
    """

    __slots__ = ("ground", "_members", "_member_set")

    def __init__(self, n: int | GroundSet, members: Iterable[int] = ()):
        ground = n if isinstance(n, GroundSet) else GroundSet(n)
        member_set = frozenset(int(m) for m in members)
        full = ground.full_mask
        for m in member_set:
            if m < 0 or m & ~full:
                raise PreconditionError(
                    f"mask {m:#x} has bits outside the {ground.n}-bit ground set"
                )
        object.__setattr__(self, "ground", ground)
        object.__setattr__(self, "_members", tuple(sorted(member_set)))
        object.__setattr__(self, "_member_set", member_set)

    def __setattr__(self, *_):
        raise AttributeError("SetFamily is immutable")

    @property
    def n(self) -> int:
        return self.ground.n

    @property
    def members(self) -> tuple[int, ...]:
        return self._members

    @property
    def member_set(self) -> frozenset[int]:
        return self._member_set

    @property
    def layers(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {}
        for m in self._members:
            out.setdefault(mask_size(m), []).append(m)
        return {k: tuple(v) for k, v in out.items()}

    def layer(self, k: int) -> tuple[int, ...]:
        return tuple(m for m in self._members if mask_size(m) == k)

    def __contains__(self, mask: int) -> bool:
        return mask in self._member_set

    def __len__(self) -> int:
        return len(self._members)

    def __iter__(self) -> Iterator[int]:
        return iter(self._members)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SetFamily):
            return NotImplemented
        return self.n == other.n and self._member_set == other._member_set

    def __hash__(self) -> int:
        return hash((self.n, self._member_set))

    def __repr__(self) -> str:
        return f"SetFamily(n={self.n}, members={len(self._members)})"


def full_power_set(n: int) -> SetFamily:
    return SetFamily(n, range(1 << n))


def _check_interval(fam: SetFamily, B: int, A: int) -> None:
    full = fam.ground.full_mask
    if A & ~full or B & ~full:
        raise PreconditionError("interval endpoints must live inside the ground set")
    if B & ~A:
        raise PreconditionError(
            f"lower endpoint {mask_elements(B)} is not a subset of upper endpoint"
            f" {mask_elements(A)}"
        )


def lubell_mass(fam: SetFamily) -> Fraction:
    """Sum over members F of 1/C(n, |F|), exactly.

    Equals the expected number of members met by a uniformly random
    maximal chain in the lattice of subsets of [n].
    """
    n = fam.n
    total = Fraction(0)
    for size, masks in fam.layers.items():
        total += Fraction(len(masks), math.comb(n, size))
    return total


def interval_members(fam: SetFamily, B: int, A: int) -> list[int]:
    """Members F with B <= F <= A, unshifted."""
    _check_interval(fam, B, A)
    return [m for m in fam.members if (m & B) == B and not (m & ~A)]


def restrict_interval(fam: SetFamily, B: int, A: int) -> SetFamily:
    """The family {F \\ B : F in fam, B <= F <= A} over ground set A \\ B.

    The result is re-indexed onto contiguous low bits so that it is an
    ordinary family over a ground set of size |A \\ B|.
    """
    universe = A & ~B
    shifted = [compress_mask(m & ~B, universe) for m in interval_members(fam, B, A)]
    return SetFamily(mask_size(universe), shifted)


def relative_lubell(fam: SetFamily, B: int, A: int) -> Fraction:
    """Expected hits of a uniform maximal chain of the interval [B, A].

    Identical, by construction, to ``lubell_mass(restrict_interval(fam, B, A))``.
    """
    _check_interval(fam, B, A)
    width = mask_size(A & ~B)
    total = Fraction(0)
    for m in interval_members(fam, B, A):
        total += Fraction(1, math.comb(width, mask_size(m & ~B)))
    return total


def complement_family(fam: SetFamily) -> SetFamily:
    """Replace every member by its complement in the ground set."""
    full = fam.ground.full_mask
    return SetFamily(fam.n, (full & ~m for m in fam.members))


def split_half(fam: SetFamily) -> tuple[SetFamily, SetFamily]:
    """(F_minus, F_plus): members of size <= n/2 and >= n/2.

    For even n the middle layer lands in both halves, matching both
    non-strict inequalities; consequently l(F_minus) + l(F_plus) >= l(F).
    """
    n = fam.n
    lower = [m for m in fam.members if 2 * mask_size(m) <= n]
    upper = [m for m in fam.members if 2 * mask_size(m) >= n]
    return SetFamily(n, lower), SetFamily(n, upper)


# ---------------------------------------------------------------------------
# Family file format.
#
# Line 1:            n=<int>
# Following lines:   comma separated, sorted, 1-based element indices
#                    ("-" denotes the empty set)
# Duplicate lines are data errors, not merges.


def parse_family(lines: Iterable[str]) -> SetFamily:
    it = iter(lines)
    try:
        header = next(it).strip()
    except StopIteration:
        raise ParseError("empty family input: missing 'n=<int>' header") from None
    if not header.startswith("n="):
        raise ParseError(f"expected 'n=<int>' header, got {header!r}")
    try:
        n = int(header[2:])
    except ValueError:
        raise ParseError(f"bad ground set size in header {header!r}") from None
    if not 0 <= n <= MAX_GROUND:
        raise ParseError(f"ground set size {n} outside [0, {MAX_GROUND}]")

    seen: set[int] = set()
    for lineno, raw in enumerate(it, start=2):
        line = raw.strip()
        if not line:
            continue
        mask = parse_subset_literal(line, n)
        if mask in seen:
            raise ParseError(f"line {lineno}: duplicate subset {line!r}")
        seen.add(mask)
    return SetFamily(n, seen)


def parse_subset_literal(text: str, n: int) -> int:
    """Parse one subset line: "-" or "1,3,4" (sorted, 1-based)."""
    text = text.strip()
    if text == "-":
        return 0
    parts = text.split(",")
    try:
        elements = [int(p) for p in parts]
    except ValueError:
        raise ParseError(f"bad subset literal {text!r}") from None
    if elements != sorted(set(elements)):
        raise ParseError(f"subset literal {text!r} must be sorted and duplicate-free")
    try:
        return mask_from_elements(elements, n)
    except PreconditionError as exc:
        raise ParseError(str(exc)) from None


def format_subset(mask: int) -> str:
    if mask == 0:
        return "-"
    return ",".join(str(e) for e in mask_elements(mask))


def format_family(fam: SetFamily) -> str:
    lines = [f"n={fam.n}"]
    lines.extend(format_subset(m) for m in fam.members)  # ascending mask order
    return "\n".join(lines) + "\n"


def read_family(path) -> SetFamily:
    with open(path, "r", encoding="ascii") as fh:
        return parse_family(fh)


def write_family(fam: SetFamily, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_family(fam))
