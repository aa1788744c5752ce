"""Finite posets, standard constructions and containment testing.

The strict order of a poset on k elements is stored as k bitmask rows:
``above[i]`` has bit j set iff i < j.  This keeps the transitivity and
duality checks cheap and the backtracking search allocation-free.

``contains_subposet`` is the independent oracle the rest of the package
uses to validate every embedding it produces, so it re-verifies its own
output before returning it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import (
    CertificationError,
    ParseError,
    PreconditionError,
    SearchBudgetExceeded,
)
from .families import SetFamily, mask_size

CUBE_DIM_CAP = 5
TRUNCATED_ELEMENT_BUDGET = 1 << 20


class FinitePoset:
    __slots__ = ("k", "above", "below")

    def __init__(self, k: int, pairs: Iterable[tuple[int, int]] = (), *, close: bool = False):
        """Poset on elements 0..k-1 with strict relation given by ``pairs``.

        With ``close=True`` the transitive closure of ``pairs`` is taken;
        otherwise the relation must already be transitive.  Irreflexivity
        and antisymmetry are always enforced.
        """
        if k < 0:
            raise PreconditionError("element count must be nonnegative")
        above = [0] * k
        for i, j in pairs:
            if not (0 <= i < k and 0 <= j < k):
                raise PreconditionError(f"relation ({i},{j}) outside 0..{k - 1}")
            if i == j:
                raise PreconditionError(f"reflexive relation ({i},{i})")
            above[i] |= 1 << j
        if close:
            _transitive_close(above)
        for i in range(k):
            if above[i] & (1 << i):
                raise PreconditionError(f"cycle through element {i}")
            for j in _bits(above[i]):
                if above[j] & (1 << i):
                    raise PreconditionError(f"antisymmetry violated on ({i},{j})")
                if above[j] & ~above[i]:
                    raise PreconditionError(
                        f"relation not transitive at ({i},{j}); pass close=True"
                    )
        below = [0] * k
        for i in range(k):
            for j in _bits(above[i]):
                below[j] |= 1 << i
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "above", tuple(above))
        object.__setattr__(self, "below", tuple(below))

    def __setattr__(self, *_):
        raise AttributeError("FinitePoset is immutable")

    def lt(self, i: int, j: int) -> bool:
        return bool(self.above[i] & (1 << j))

    def leq(self, i: int, j: int) -> bool:
        return i == j or self.lt(i, j)

    def comparable(self, i: int, j: int) -> bool:
        return i == j or self.lt(i, j) or self.lt(j, i)

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.k) for j in _bits(self.above[i])]

    def cover_pairs(self) -> list[tuple[int, int]]:
        """Pairs i < j with nothing strictly between (the Hasse diagram)."""
        out = []
        for i in range(self.k):
            for j in _bits(self.above[i]):
                if not (self.above[i] & self.below[j]):
                    out.append((i, j))
        return sorted(out)

    def dual(self) -> "FinitePoset":
        return FinitePoset(self.k, [(j, i) for i, j in self.pairs()])

    def is_chain(self) -> bool:
        return all(self.comparable(i, j) for i in range(self.k) for j in range(i + 1, self.k))

    def canonical_key(self) -> tuple:
        """Minimum relabeling of the relation; equal keys <=> isomorphic.

        Brute force over permutations -- only sensible for small k.
        """
        if self.k > 8:
            raise PreconditionError("canonical form is brute-force, k <= 8 only")
        best = None
        for perm in itertools.permutations(range(self.k)):
            rel = tuple(
                sorted((perm[i], perm[j]) for i, j in self.pairs())
            )
            if best is None or rel < best:
                best = rel
        return (self.k, best)

    def __eq__(self, other):
        if not isinstance(other, FinitePoset):
            return NotImplemented
        return self.k == other.k and self.above == other.above

    def __hash__(self):
        return hash((self.k, self.above))

    def __repr__(self):
        return f"FinitePoset(k={self.k}, relations={sum(a.bit_count() for a in self.above)})"


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _transitive_close(above: list[int]) -> None:
    k = len(above)
    changed = True
    while changed:
        changed = False
        for i in range(k):
            acc = above[i]
            for j in _bits(above[i]):
                acc |= above[j]
            if acc != above[i]:
                above[i] = acc
                changed = True


def _check_orientation(orientation: str) -> str:
    if orientation not in ("up", "down"):
        raise PreconditionError(f"orientation must be 'up' or 'down', got {orientation!r}")
    return orientation


def make_chain(k: int) -> FinitePoset:
    """Total order on k elements, 0 < 1 < ... < k-1."""
    if k < 1:
        raise PreconditionError("a chain has at least one element")
    return FinitePoset(k, [(i, j) for i in range(k) for j in range(i + 1, k)])


def make_v() -> FinitePoset:
    """One bottom element below two incomparable tops (a < b, a < c)."""
    return FinitePoset(3, [(0, 1), (0, 2)])


def make_cube(m: int, orientation: str = "up") -> FinitePoset:
    """The 2^m subsets of an m-set ordered by inclusion (or reverse).

    Element index s stands for the subset with mask s, so the "up" cube
    has s < t iff s is a proper subset of t.
    """
    _check_orientation(orientation)
    if not 0 <= m <= CUBE_DIM_CAP:
        raise PreconditionError(f"cube dimension must be in [0, {CUBE_DIM_CAP}], got {m}")
    pairs = []
    for s in range(1 << m):
        for t in range(1 << m):
            if s != t and (s & t) == s:
                pairs.append((s, t) if orientation == "up" else (t, s))
    return FinitePoset(1 << m, pairs)


def make_truncated_cube(n: int, m: int, orientation: str = "up") -> FinitePoset:
    """All subsets of [n] of size <= m, by inclusion ("up") or reverse ("down").

    Element order is ascending mask value; ``truncated_cube_elements`` gives
    the mask of each element index.
    """
    _check_orientation(orientation)
    if not 0 <= m <= n:
        raise PreconditionError(f"need 0 <= m <= n, got m={m}, n={n}")
    count = sum(math.comb(n, i) for i in range(m + 1))
    if count > TRUNCATED_ELEMENT_BUDGET:
        raise PreconditionError(
            f"{count} elements exceed the {TRUNCATED_ELEMENT_BUDGET} element budget"
        )
    elements = truncated_cube_elements(n, m)
    index = {mask: i for i, mask in enumerate(elements)}
    pairs = []
    for s in elements:
        for t in elements:
            if s != t and (s & t) == s:
                pairs.append((index[s], index[t]) if orientation == "up" else (index[t], index[s]))
    return FinitePoset(count, pairs)


def truncated_cube_elements(n: int, m: int) -> list[int]:
    return [mask for mask in range(1 << n) if mask_size(mask) <= m]


def family_as_poset(fam: SetFamily) -> FinitePoset:
    """The members of ``fam`` ordered by inclusion; element i is fam.members[i]."""
    members = fam.members
    pairs = []
    for i, a in enumerate(members):
        for j, b in enumerate(members):
            if a != b and (a & b) == a:
                pairs.append((i, j))
    return FinitePoset(len(members), pairs)


def height(p: FinitePoset) -> int:
    """Size of the largest chain (counted in elements)."""
    if p.k == 0:
        return 0
    memo = [0] * p.k

    order = sorted(range(p.k), key=lambda i: p.below[i].bit_count())
    for i in order:
        best = 0
        for j in _bits(p.below[i]):
            best = max(best, memo[j])
        memo[i] = best + 1
    return max(memo)


@dataclass(frozen=True)
class EmbeddingMap:
    """An injective order map, either into poset indices or subset masks.

    ``kind`` says how to read ``images``: "indices" means host-poset
    element indices, "masks" means subsets of a ground set of size
    ``target_n``.  ``mode`` records what the map claims to preserve.
    """

    images: tuple[int, ...]
    mode: str          # "weak" | "induced"
    kind: str          # "indices" | "masks"
    target_n: Optional[int] = None

    def __post_init__(self):
        if self.mode not in ("weak", "induced"):
            raise PreconditionError(f"bad mode {self.mode!r}")
        if self.kind not in ("indices", "masks"):
            raise PreconditionError(f"bad kind {self.kind!r}")
        if len(set(self.images)) != len(self.images):
            raise PreconditionError("embedding images must be injective")


def verify_embedding_indices(
    host: FinitePoset, pattern: FinitePoset, images: Sequence[int], mode: str
) -> bool:
    """Definitional pairwise check of an index embedding.  No shortcuts."""
    if len(images) != pattern.k or len(set(images)) != len(images):
        return False
    if any(not 0 <= h < host.k for h in images):
        return False
    for x in range(pattern.k):
        for y in range(pattern.k):
            if x == y:
                continue
            if pattern.lt(x, y) and not host.lt(images[x], images[y]):
                return False
            if mode == "induced" and not pattern.lt(x, y):
                # x,y incomparable or y < x; forbid spurious images[x] < images[y]
                if not pattern.lt(y, x) and host.lt(images[x], images[y]):
                    return False
    return True


def verify_embedding_masks(pattern: FinitePoset, images: Sequence[int], mode: str) -> bool:
    """Pairwise check of a mask embedding against strict inclusion."""
    if len(images) != pattern.k or len(set(images)) != len(images):
        return False
    for x in range(pattern.k):
        for y in range(pattern.k):
            if x == y:
                continue
            mx, my = images[x], images[y]
            subset = mx != my and (mx & my) == mx
            if pattern.lt(x, y) and not subset:
                return False
            if mode == "induced" and not pattern.lt(x, y) and not pattern.lt(y, x) and subset:
                return False
    return True


def contains_subposet(
    host: FinitePoset,
    pattern: FinitePoset,
    mode: str = "induced",
    node_budget: Optional[int] = None,
) -> Optional[EmbeddingMap]:
    """Backtracking search for a weak or induced copy of ``pattern`` in ``host``.

    Returns a certified EmbeddingMap, or None if no copy exists.  If the
    node budget runs out first, raises SearchBudgetExceeded -- an explicit
    third outcome, distinct from absence.

    Pattern elements are assigned in decreasing comparability degree;
    host candidates are pruned by chain-length compatibility (an element
    with a chain of length a below it needs an image with at least that
    much room below).
    """
    if mode not in ("weak", "induced"):
        raise PreconditionError(f"bad mode {mode!r}")
    if pattern.k > host.k:
        return None
    if pattern.k == 0:
        return EmbeddingMap((), mode, "indices")

    # static assignment order: high comparability degree first
    degree = [
        (pattern.above[v] | pattern.below[v]).bit_count() for v in range(pattern.k)
    ]
    order = sorted(range(pattern.k), key=lambda v: (-degree[v], v))

    p_down = _chain_room(pattern, use_below=True)
    p_up = _chain_room(pattern, use_below=False)
    h_down = _chain_room(host, use_below=True)
    h_up = _chain_room(host, use_below=False)

    assignment: dict[int, int] = {}
    used: set[int] = set()
    nodes = 0

    def feasible(v: int, h: int) -> bool:
        if h_down[h] < p_down[v] or h_up[h] < p_up[v]:
            return False
        for u, hu in assignment.items():
            if pattern.lt(u, v):
                if not host.lt(hu, h):
                    return False
            elif pattern.lt(v, u):
                if not host.lt(h, hu):
                    return False
            elif mode == "induced" and (host.lt(hu, h) or host.lt(h, hu)):
                return False
        return True

    def search(depth: int) -> bool:
        nonlocal nodes
        if depth == pattern.k:
            return True
        v = order[depth]
        for h in range(host.k):
            if h in used:
                continue
            nodes += 1
            if node_budget is not None and nodes > node_budget:
                raise SearchBudgetExceeded(
                    f"subposet search exceeded {node_budget} nodes", nodes=nodes
                )
            if feasible(v, h):
                assignment[v] = h
                used.add(h)
                if search(depth + 1):
                    return True
                del assignment[v]
                used.remove(h)
        return False

    if not search(0):
        return None
    images = tuple(assignment[v] for v in range(pattern.k))
    if not verify_embedding_indices(host, pattern, images, mode):
        raise CertificationError("search returned a map that fails re-verification")
    return EmbeddingMap(images, mode, "indices")


def _chain_room(p: FinitePoset, use_below: bool) -> list[int]:
    """For each element, the largest chain strictly below (or above) it."""
    rel = p.below if use_below else p.above
    memo = [-1] * p.k

    def go(i: int) -> int:
        if memo[i] >= 0:
            return memo[i]
        best = 0
        for j in _bits(rel[i]):
            best = max(best, go(j) + 1)
        memo[i] = best
        return best

    for i in range(p.k):
        go(i)
    return memo


def enumerate_posets(k: int) -> list[FinitePoset]:
    """All posets on k elements, one per isomorphism class.

    Every finite poset has a linear extension, so it suffices to scan
    relations contained in the upper triangle and deduplicate by
    canonical key.  Counts for k = 1..5: 1, 2, 5, 16, 63.
    """
    if not 0 <= k <= 5:
        raise PreconditionError("exhaustive poset enumeration supported for k <= 5")
    slots = [(i, j) for i in range(k) for j in range(i + 1, k)]
    seen: dict[tuple, FinitePoset] = {}
    for choice in range(1 << len(slots)):
        pairs = [slots[b] for b in range(len(slots)) if choice & (1 << b)]
        above = [0] * k
        for i, j in pairs:
            above[i] |= 1 << j
        ok = True
        for i in range(k):
            for j in _bits(above[i]):
                if above[j] & ~above[i]:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        p = FinitePoset(k, pairs)
        seen.setdefault(p.canonical_key(), p)
    return [seen[key] for key in sorted(seen)]


# ---------------------------------------------------------------------------
# Poset file format: "k=<int>" header, then cover lines "<i> < <j>" (0-based).
# The transitive closure is taken on load; the writer emits covers only.


def parse_poset(lines: Iterable[str]) -> FinitePoset:
    it = iter(lines)
    try:
        header = next(it).strip()
    except StopIteration:
        raise ParseError("empty poset input: missing 'k=<int>' header") from None
    if not header.startswith("k="):
        raise ParseError(f"expected 'k=<int>' header, got {header!r}")
    try:
        k = int(header[2:])
    except ValueError:
        raise ParseError(f"bad element count in header {header!r}") from None
    pairs = []
    for lineno, raw in enumerate(it, start=2):
        line = raw.strip()
        if not line:
            continue
        parts = line.split("<")
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected '<i> < <j>', got {line!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ParseError(f"line {lineno}: bad cover relation {line!r}") from None
        pairs.append((i, j))
    try:
        return FinitePoset(k, pairs, close=True)
    except PreconditionError as exc:
        raise ParseError(f"relation list is not a poset: {exc}") from None


def format_poset(p: FinitePoset) -> str:
    lines = [f"k={p.k}"]
    lines.extend(f"{i} < {j}" for i, j in p.cover_pairs())
    return "\n".join(lines) + "\n"


def read_poset(path) -> FinitePoset:
    with open(path, "r", encoding="ascii") as fh:
        return parse_poset(fh)


def write_poset(p: FinitePoset, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_poset(p))
