"""The extraction pipeline: from a massive family to an induced pattern copy.

One step of the iteration halves the family by size, discards the
members that are inflexible or miss the accumulated pivot strata, and
takes a centred element of what survives; repeating at most 2m+1 times
drives either the flexibility order a or the anti-flexibility order b up
to m.  The pivot strata collected along the way, restricted to the final
gap X, form a dense truncated poset whose witnesses live in the original
family; locating a cube in it and composing with the down-set embedding
yields a certified induced copy of the pattern.

Two modes: "paper" uses the exact constant cascade (whose mass threshold
is astronomically large -- the mode exists to report honest constants
and to reject honestly), "override" accepts surrogate constants so the
same code paths run at desk scale.  Every emitted embedding is verified
pairwise regardless of mode; constants change what is attempted, never
what is accepted.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import mpmath as mp
import numpy as np

from .concentration import concentration_constants, fat_mass_bound
from .embeddings import (
    DEFAULT_EMBED_ATTEMPTS,
    CubeEmbedResult,
    DenseTruncatedFamily,
    dense_class_check,
    downset_embedding,
    randomized_cube_embed,
    universality_epsilon,
)
from .errors import CertificationError, PreconditionError
from .families import SetFamily, lubell_mass, mask_elements, mask_size
from .pivots import (
    FatnessQuery,
    PivotSet,
    flexibility_mass_bound,
    flexible_in_universe,
    is_fat,
    pivots_in_universe,
)
from .posets import EmbeddingMap, FinitePoset, verify_embedding_masks

_SOS_BIT_CAP = 20          # ground sizes up to this use the subset-sum tables
_PAIRWISE_CAP = 2000       # full pairwise certification below this, sampled above
_MP_DPS = 60

STATUS_OK = "ok"
STATUS_NO_MASS = "insufficient mass"
STATUS_AGGRESSIVE = "constants too aggressive"
STATUS_NO_BRANCH = "no branch"
STATUS_SMALL_X = "X too small"
STATUS_NOT_DENSE = "not dense enough"
STATUS_EXHAUSTED = "embed exhausted"

CASE_FLEX = "up"           # a-increment: new top boundary, pivot stratum
CASE_ANTI = "down"         # b-increment: new bottom boundary, anti-pivot stratum


def _mpf(x) -> mp.mpf:
    if isinstance(x, Fraction):
        return mp.mpf(x.numerator) / mp.mpf(x.denominator)
    return mp.mpf(x)


def _mass_of_sizes(sizes: Iterable[int], width: int) -> Fraction:
    counts: dict = {}
    for s in sizes:
        counts[s] = counts.get(s, 0) + 1
    return sum(
        (Fraction(c, math.comb(width, s)) for s, c in counts.items()),
        Fraction(0),
    )


def _family_mass(shifted: Iterable[int], u: int) -> Fraction:
    return _mass_of_sizes((mask_size(f) for f in shifted), u)


# ---------------------------------------------------------------------------
# Centred elements.


class _DownMassIndex:
    """Per-member count of family members below each subset.

    Small grounds get exact subset-sum tables (one zeta transform per
    member size); larger grounds fall back to the quadratic scan.
    """

    def __init__(self, shifted: Sequence[int], universe: int):
        self.universe = universe
        self.members = list(shifted)
        self.bits = [e - 1 for e in mask_elements(universe)]
        self.u = len(self.bits)
        self.tables: Optional[list] = None
        if self.u <= _SOS_BIT_CAP:
            pos = {p: i for i, p in enumerate(self.bits)}
            comp = []
            for f in self.members:
                c = 0
                for e in mask_elements(f):
                    c |= 1 << pos[e - 1]
                comp.append(c)
            self._compressed = comp
            self._pos = pos
            max_size = max((mask_size(f) for f in self.members), default=0)
            tables = []
            for s in range(max_size + 1):
                arr = np.zeros(1 << self.u, dtype=np.int64)
                idx = [c for c in comp if c.bit_count() == s]
                if idx:
                    np.add.at(arr, np.array(idx, dtype=np.int64), 1)
                for i in range(self.u):
                    view = arr.reshape(-1, 2, 1 << i)
                    view[:, 1, :] += view[:, 0, :]
                tables.append(arr)
            self.tables = tables

    def compress(self, mask: int) -> int:
        c = 0
        for e in mask_elements(mask):
            c |= 1 << self._pos[e - 1]
        return c

    def mass_below(self, A: int) -> Fraction:
        """The relative mass of the family inside the interval below A."""
        a = mask_size(A)
        if self.tables is not None:
            c = self.compress(A)
            total = Fraction(0)
            for s in range(min(a, len(self.tables) - 1) + 1):
                cnt = int(self.tables[s][c])
                if cnt:
                    total += Fraction(cnt, math.comb(a, s))
            return total
        return _mass_of_sizes(
            (mask_size(f) for f in self.members if f & ~A == 0), a
        )


def _centred(shifted: Sequence[int], universe: int, direction: str) -> tuple:
    """A member whose one-sided relative mass covers the whole family's.

    Existence: a uniform maximal chain hits the family l(F) times in
    expectation, and conditioning on the lowest (resp. highest) hit only
    concentrates the count -- so some member must carry at least the
    average.  Deterministic tie-break: smallest size, then smallest mask.
    """
    members = sorted(set(shifted), key=lambda f: (mask_size(f), f))
    if not members:
        raise PreconditionError("centred element of an empty family")
    u = mask_size(universe)
    total = _family_mass(members, u)
    if direction == "down":
        index = _DownMassIndex(members, universe)
        for a_mask in members:
            m = index.mass_below(a_mask)
            if m >= total:
                return a_mask, m
    elif direction == "up":
        comp = [universe ^ f for f in members]
        index = _DownMassIndex(comp, universe)
        for b_mask in members:
            m = index.mass_below(universe ^ b_mask)
            if m >= total:
                return b_mask, m
    else:
        raise PreconditionError(f"direction must be 'down' or 'up', got {direction!r}")
    raise CertificationError("no centred element found; the averaging argument failed")


def centred_element(fam: SetFamily, direction: str = "down") -> int:
    """Member A with mass below it (or above, direction "up") >= l(F)."""
    if len(fam) == 0:
        raise PreconditionError("centred element of an empty family")
    mask, _ = _centred(fam.members, fam.ground.full_mask, direction)
    return mask


# ---------------------------------------------------------------------------
# The constant cascade.


@dataclass(frozen=True)
class ConstantCascade:
    """The tower of tolerances and mass constants driving the iteration.

    eps_j decreases through the 2m+1 possible steps; q dominates every
    fat-stratum mass, p every inflexible-stratum mass.  In paper mode q
    and the threshold are mpmath values (they exceed binary64); override
    mode carries exact rationals.
    """

    m: int
    mode: str                  # "paper" | "override"
    eps_j: tuple               # Fractions, entry j-1 holds eps_j
    q_j: tuple                 # per-level maxima (paper mode only)
    q: object
    p: Fraction
    threshold: object

    def eps_level(self, j: int) -> Fraction:
        if not 1 <= j <= 2 * self.m + 1:
            raise PreconditionError(f"tolerance level {j} out of range")
        return self.eps_j[j - 1]

    def step_floor(self, d: int):
        """Mass that must survive after step d (telescopes by halving)."""
        return cond5_floor(self.m, d, self.q, self.p)

    def step_demand(self):
        """Mass a single step consumes: the dichotomy needs > 4mq + 2p."""
        if isinstance(self.q, Fraction):
            return 4 * self.m * self.q + 2 * self.p
        with mp.workdps(_MP_DPS):
            return 4 * self.m * self.q + 2 * _mpf(self.p)


def cond5_floor(m: int, d: int, q, p):
    if isinstance(q, Fraction):
        qp = 2 * m * q + p
    else:
        with mp.workdps(_MP_DPS):
            qp = 2 * m * q + _mpf(p)
    k = 2 * m - d
    return (1 << k) * (2 * m + 1) + sum((1 << i) * qp for i in range(1, k + 1))


def _threshold_formula(m: int, q, p):
    if isinstance(q, Fraction):
        demand = 4 * m * q + 2 * p
    else:
        with mp.workdps(_MP_DPS):
            demand = 4 * m * q + 2 * _mpf(p)
    return (1 << (2 * m + 1)) * (2 * m + 1) + sum(
        (1 << i) * demand for i in range(1, 2 * m + 2)
    )


def compute_cascade(m: int, eps) -> ConstantCascade:
    """Exact cascade: eta shrinks the tolerance, h and f cap the strata.

    All eps_j and p are exact rationals; q and the threshold are mpmath
    (finite for every m, but far beyond binary64 already at m = 2).
    """
    if m < 1:
        raise PreconditionError("pattern size m must be at least 1")
    eps = Fraction(eps)
    if not 0 < eps <= 1:
        raise PreconditionError(f"tolerance must be in (0, 1], got {eps}")
    eps_j = [eps]
    for _ in range(2, 2 * m + 2):
        prev = eps_j[-1]
        eps_j.append(
            min([prev] + [concentration_constants(prev, i).eta for i in range(m + 1)])
        )
    with mp.workdps(_MP_DPS):
        q_j = tuple(
            max(fat_mass_bound(eps_j[j - 2], i) for i in range(m + 1))
            for j in range(2, 2 * m + 2)
        )
        q = max(q_j)
        p = max(
            flexibility_mass_bound(eps_j[j - 1], i)
            for j in range(1, 2 * m + 2)
            for i in range(m + 1)
        )
        threshold = _threshold_formula(m, q, p)
    return ConstantCascade(m, "paper", tuple(eps_j), q_j, q, p, threshold)


def override_cascade(m: int, q, p, eps=None) -> ConstantCascade:
    """Surrogate cascade with user constants, for desk-scale runs."""
    if m < 1:
        raise PreconditionError("pattern size m must be at least 1")
    q, p = Fraction(q), Fraction(p)
    if q < 0 or p < 0:
        raise PreconditionError("surrogate constants must be nonnegative")
    eps = universality_epsilon(m) if eps is None else Fraction(eps)
    if not 0 < eps <= 1:
        raise PreconditionError(f"tolerance must be in (0, 1], got {eps}")
    eps_j = (eps,) * (2 * m + 1)
    return ConstantCascade(m, "override", eps_j, (), q, p, _threshold_formula(m, q, p))


# ---------------------------------------------------------------------------
# One step of the iteration.


@dataclass(frozen=True)
class StepOutcome:
    """Result of the one-step dichotomy on an interval family."""

    status: str                      # STATUS_OK / STATUS_NO_MASS / STATUS_AGGRESSIVE
    case: Optional[str]              # CASE_FLEX | CASE_ANTI
    element: Optional[int]           # Y: new boundary part, within the universe
    stratum: Optional[PivotSet]      # pivots (case up) / anti-pivots (case down)
    mass: Optional[Fraction]         # one-sided mass at the centred element
    fallback: bool = False


def _prune_and_centre(
    member_set: frozenset,
    universe: int,
    eps: Fraction,
    r: int,
    fats: Sequence[tuple],
) -> Optional[tuple]:
    """Case worker: keep the small half, drop inflexible and slim members,
    centre what remains.  Returns (Y, mass) or None if nothing survives."""
    u = mask_size(universe)
    lower = [f for f in member_set if 2 * mask_size(f) <= u]
    lower_set = frozenset(lower)
    survivors = []
    for f in lower:
        if not flexible_in_universe(lower_set, universe, f, eps, r):
            continue
        if any(
            not is_fat(FatnessQuery(f, s_masks, eps, s_r)) for s_r, s_masks in fats
        ):
            continue
        survivors.append(f)
    if not survivors:
        return None
    return _centred(survivors, universe, "down")


def intermediate_step(
    fam: SetFamily,
    d: int,
    a: int,
    b: int,
    fats: Sequence,
    cascade: ConstantCascade,
    *,
    allow_fallback: Optional[bool] = None,
) -> StepOutcome:
    """One dichotomy step on ``fam`` (public form: universe = whole ground)."""
    return _step(
        frozenset(fam.members),
        fam.ground.full_mask,
        d,
        a,
        b,
        _normalize_fats(fats),
        cascade,
        allow_fallback=allow_fallback,
    )


def _normalize_fats(fats: Sequence) -> list:
    out = []
    for entry in fats:
        if isinstance(entry, PivotSet):
            out.append((entry.r, frozenset(entry.pivots)))
        else:
            r, masks = entry
            out.append((int(r), frozenset(masks)))
    return out


def _mass_ge(mass: Fraction, floor) -> bool:
    if isinstance(floor, (Fraction, int)):
        return mass >= floor
    with mp.workdps(_MP_DPS):
        return _mpf(mass) >= floor


def _mass_gt(mass: Fraction, floor) -> bool:
    if isinstance(floor, (Fraction, int)):
        return mass > floor
    with mp.workdps(_MP_DPS):
        return _mpf(mass) > floor


def _step(
    member_set: frozenset,
    universe: int,
    d: int,
    a: int,
    b: int,
    fats: list,
    cascade: ConstantCascade,
    *,
    allow_fallback: Optional[bool] = None,
) -> StepOutcome:
    m = cascade.m
    if not 0 <= d <= 2 * m:
        raise PreconditionError(f"step index d={d} out of range [0, {2 * m}]")
    if len(fats) != d:
        raise PreconditionError(f"expected {d} pivot strata, got {len(fats)}")
    if allow_fallback is None:
        allow_fallback = cascade.mode == "override"
    u = mask_size(universe)
    mass = _family_mass(member_set, u)
    if not _mass_gt(mass, cascade.step_demand()):
        return StepOutcome(STATUS_NO_MASS, None, None, None, None)
    eps = cascade.eps_level(2 * m + 1 - d)

    lower_mass = _mass_of_sizes(
        (mask_size(f) for f in member_set if 2 * mask_size(f) <= u), u
    )
    upper_mass = _mass_of_sizes(
        (mask_size(f) for f in member_set if 2 * mask_size(f) >= u), u
    )
    prefer_flex = lower_mass >= mass / 2
    comp_set = frozenset(universe ^ f for f in member_set)

    order = [CASE_FLEX] if prefer_flex else [CASE_ANTI]
    if allow_fallback:
        order.append(CASE_ANTI if prefer_flex else CASE_FLEX)

    for which, case in enumerate(order):
        if case == CASE_FLEX:
            got = _prune_and_centre(member_set, universe, eps, a, fats)
            if got is None:
                continue
            y, y_mass = got
            stratum = pivots_in_universe(member_set, universe, y, a, anti=False)
            need = max(Fraction(1), (1 - eps) * math.comb(mask_size(y), a))
            if Fraction(len(stratum.pivots)) < need:
                raise CertificationError(
                    "stratum count contradicts the flexibility that selected it"
                )
            return StepOutcome(STATUS_OK, CASE_FLEX, y, stratum, y_mass, which > 0)
        # Anti case: identical worker on the complemented family, then
        # un-complement.  A swap-out of the complement is a swap-in of
        # the original, so the stratum transfers verbatim.
        got = _prune_and_centre(comp_set, universe, eps, b, fats)
        if got is None:
            continue
        y_tilde, y_mass = got
        y_prime = universe ^ y_tilde
        stratum = pivots_in_universe(member_set, universe, y_prime, b, anti=True)
        need = max(Fraction(1), (1 - eps) * math.comb(mask_size(y_tilde), b))
        if Fraction(len(stratum.pivots)) < need:
            raise CertificationError(
                "anti-stratum count contradicts the flexibility that selected it"
            )
        return StepOutcome(STATUS_OK, CASE_ANTI, y_prime, stratum, y_mass, which > 0)

    if cascade.mode == "paper":
        raise CertificationError(
            "mass above the demand but both case workers came back empty"
        )
    return StepOutcome(STATUS_AGGRESSIVE, None, None, None, None)


# ---------------------------------------------------------------------------
# The full sequence builder.


@dataclass(frozen=True)
class TraceStep:
    index: int
    case: str
    a: int
    b: int
    A: int
    B: int
    family_size: int
    family_members: Optional[tuple]      # kept when small, else None
    stratum_r: int
    stratum_base: int                    # A_d for "up" steps, B_d for "down"
    stratum: tuple                       # moved-set masks, original coordinates
    stratum_witness: dict                # moved mask -> witness, original coordinates
    step_mass: Fraction
    cond5_ok: Optional[bool]
    fallback: bool


@dataclass(frozen=True)
class ExtractionTrace:
    mode: str
    m: int
    n: int
    status: str
    steps: tuple
    t: int                               # final step index (-1 if none)
    branch: Optional[str]                # CASE_FLEX (a hit m) | CASE_ANTI (b hit m)
    warnings: tuple
    initial_mass: Fraction
    threshold: object


_TRACE_MEMBER_CAP = 1024


def build_sequences(fam: SetFamily, m: int, cascade) -> ExtractionTrace:
    """Iterate the dichotomy until the flexibility order reaches m.

    Structural claims of every step -- boundary membership, nesting,
    stratum witnesses, fatness of the running gap -- are re-verified
    before the step is accepted, in both modes.  The per-step mass floor
    is a hard requirement under paper constants and a recorded warning
    under overrides.
    """
    if isinstance(cascade, dict):
        cascade = override_cascade(m, **cascade)
    if cascade.m != m:
        raise PreconditionError(f"cascade built for m={cascade.m}, asked for m={m}")
    n = fam.ground.n
    warnings: list = []
    mass0 = lubell_mass(fam)
    if not _mass_ge(mass0, cascade.threshold):
        if cascade.mode == "paper":
            return ExtractionTrace(
                cascade.mode, m, n, STATUS_NO_MASS, (), -1, None, (), mass0,
                cascade.threshold,
            )
        warnings.append("initial mass below the configured threshold")

    members = frozenset(fam.members)
    A, B = fam.ground.full_mask, 0
    a = b = -1
    steps: list = []
    strata: list = []          # (r_i, frozenset moved masks) in original coordinates
    status = STATUS_OK
    branch = None

    for d in range(2 * m + 1):
        if a == m or b == m:
            break
        universe = A & ~B
        shifted = frozenset(f & universe for f in members)
        # The fatness hypothesis for this step is the previous step's
        # verified gap-fatness, restricted to the current universe.
        fats = [
            (r_i, frozenset(s for s in masks if s & ~universe == 0))
            for r_i, masks in strata
        ]
        if d >= 1:
            eps_hyp = cascade.eps_level(2 * m + 2 - d)
            for r_i, masks in fats:
                if not is_fat(FatnessQuery(universe, masks, eps_hyp, r_i)):
                    raise CertificationError(
                        f"step {d}: stratum of order {r_i} lost fatness in the gap"
                    )
        out = _step(shifted, universe, d, a + 1, b + 1, fats, cascade)
        if out.status != STATUS_OK:
            status = out.status
            break
        if out.fallback:
            warnings.append(f"step {d}: preferred half failed, fell back")

        if out.case == CASE_FLEX:
            a += 1
            new_A, new_B = B | out.element, B
            base = new_A
        else:
            b += 1
            new_A, new_B = A, B | out.element
            base = new_B
        witness_orig = {x: w | B for x, w in out.stratum.witness_of.items()}
        new_members = frozenset(
            f for f in members if new_B & ~f == 0 and f & ~new_A == 0
        )

        # --- structural re-verification (hard in both modes) ---
        if (B & ~new_B) or (new_A & ~A) or (new_B & ~new_A):
            raise CertificationError(f"step {d}: boundary nesting broken")
        if base not in members:
            raise CertificationError(f"step {d}: new boundary not a family member")
        gap = new_A & ~new_B
        r_d = a if out.case == CASE_FLEX else b
        for x, w in witness_orig.items():
            if w not in members:
                raise CertificationError(f"step {d}: stratum witness left the family")
            moved_out, moved_in = base & ~w, w & ~base
            expected = moved_out if out.case == CASE_FLEX else moved_in
            if (
                mask_size(moved_out) != r_d
                or mask_size(moved_in) != r_d
                or x != expected
            ):
                raise CertificationError(f"step {d}: witness for {x:#x} malformed")
        eps_step = cascade.eps_level(2 * m + 1 - d)
        for r_i, masks in fats + [(r_d, frozenset(out.stratum.pivots))]:
            if not is_fat(FatnessQuery(gap, masks, eps_step, r_i)):
                raise CertificationError(f"step {d}: new gap not fat for order {r_i}")

        step_mass = _mass_of_sizes(
            (mask_size(f & gap) for f in new_members), mask_size(gap)
        )
        # The centred element was chosen inside the pruned survivor family,
        # a subfamily of the interval: its one-sided mass is a lower bound.
        if step_mass < out.mass:
            raise CertificationError(
                f"step {d}: interval mass fell below the centred mass"
            )
        floor = cascade.step_floor(d)
        cond5 = _mass_ge(step_mass, floor)
        if not cond5:
            if cascade.mode == "paper":
                raise CertificationError(f"step {d}: mass floor violated")
            warnings.append(f"step {d}: mass floor not met (override mode)")

        steps.append(
            TraceStep(
                d, out.case, a, b, new_A, new_B,
                len(new_members),
                tuple(sorted(new_members)) if len(new_members) <= _TRACE_MEMBER_CAP else None,
                r_d, base,
                tuple(sorted(out.stratum.pivots)),
                witness_orig,
                step_mass, cond5, out.fallback,
            )
        )
        strata.append((r_d, frozenset(out.stratum.pivots)))
        members, A, B = new_members, new_A, new_B

    if a == m:
        branch = CASE_FLEX
    elif b == m:
        branch = CASE_ANTI
    elif status == STATUS_OK:
        status = STATUS_NO_BRANCH    # unreachable when steps all succeed
    t = steps[-1].index if steps else -1
    return ExtractionTrace(
        cascade.mode, m, n, status, tuple(steps), t, branch, tuple(warnings),
        mass0, cascade.threshold,
    )


# ---------------------------------------------------------------------------
# Witness assembly.


@dataclass(frozen=True)
class WitnessAssembly:
    """The pivot strata on the final gap X and their witness family."""

    status: str
    branch: Optional[str]
    X: int
    m: int
    eps: Fraction
    levels: dict                     # k -> tuple of moved-set masks within X
    psi: dict                        # moved-set mask -> witness mask
    W: tuple
    dense_ok: Optional[bool]


def _pairs_to_check(v: list, rng_seed: int = 2_718_281) -> Iterable[tuple]:
    if len(v) <= _PAIRWISE_CAP:
        yield from itertools.combinations(range(len(v)), 2)
        return
    rng = random.Random(rng_seed)
    total = 200_000
    n = len(v)
    for _ in range(total):
        i = rng.randrange(n)
        j = rng.randrange(n - 1)
        if j >= i:
            j += 1
        yield (i, j) if i < j else (j, i)


def assemble_witnesses(
    trace: ExtractionTrace, fam: SetFamily, eps: Optional[Fraction] = None
) -> WitnessAssembly:
    """Restrict the strata to X = A_t \\ B_t and certify the witness map.

    The map sends each stratum member x to its recorded witness w_x.
    Certification is definitional: injectivity, then for every pair the
    comparability of (x, y) -- reverse inclusion on the a-branch,
    inclusion on the b-branch -- must match strict inclusion of
    (w_x, w_y).  Any mismatch raises with the offending pair.  With a
    tolerance the per-order counts on X are also checked for density.
    """
    if trace.status != STATUS_OK or trace.branch is None:
        raise PreconditionError(f"trace did not complete (status {trace.status!r})")
    m = trace.m
    last = trace.steps[-1]
    X = last.A & ~last.B
    eps = None if eps is None else Fraction(eps)
    case = trace.branch
    picked = [s for s in trace.steps if s.case == case]
    if [s.a if case == CASE_FLEX else s.b for s in picked] != list(range(m + 1)):
        raise CertificationError("branch steps do not carry orders 0..m")
    if mask_size(X) < 2 * m:
        if trace.mode == "paper":
            raise CertificationError("final gap smaller than 2m under paper constants")
        return WitnessAssembly(STATUS_SMALL_X, case, X, m, eps, {}, {}, (), None)

    levels: dict = {}
    psi: dict = {}
    member_set = fam.member_set
    for s in picked:
        k = s.a if case == CASE_FLEX else s.b
        inside = tuple(sorted(x for x in s.stratum if x & ~X == 0))
        levels[k] = inside
        for x in inside:
            w = s.stratum_witness[x]
            if w not in member_set:
                raise CertificationError(f"witness {w:#x} is not in the family")
            if x in psi:
                raise CertificationError(f"stratum member {x:#x} appears twice")
            psi[x] = w

    v = sorted(psi, key=lambda x: (mask_size(x), x))
    images = [psi[x] for x in v]
    if len(set(images)) != len(images):
        raise CertificationError("witness map is not injective")
    for i, j in _pairs_to_check(v):
        x, y = v[i], v[j]
        if case == CASE_FLEX:        # reverse inclusion on the strata side
            x_lt_y = y & ~x == 0 and x != y
            y_lt_x = x & ~y == 0 and x != y
        else:
            x_lt_y = x & ~y == 0 and x != y
            y_lt_x = y & ~x == 0 and x != y
        wx, wy = psi[x], psi[y]
        w_lt = wx & ~wy == 0 and wx != wy
        w_gt = wy & ~wx == 0 and wx != wy
        if (x_lt_y, y_lt_x) != (w_lt, w_gt):
            raise CertificationError(
                f"order mismatch at pair ({mask_elements(x)}, {mask_elements(y)})"
            )
    dense_ok = None
    if eps is not None:
        ux = mask_size(X)
        dense_ok = all(
            len(levels.get(k, ())) >= (1 - eps) * math.comb(ux, k)
            for k in range(m + 1)
        )
    return WitnessAssembly(
        STATUS_OK, case, X, m, eps, levels, psi,
        tuple(sorted(set(images))), dense_ok,
    )


# ---------------------------------------------------------------------------
# End-to-end extraction.


@dataclass(frozen=True)
class ExtractionResult:
    status: str
    mode: str
    map: Optional[EmbeddingMap]
    trace: Optional[ExtractionTrace]
    assembly: Optional[WitnessAssembly]
    embed: Optional[CubeEmbedResult]
    detail: str = ""


def _compress_onto(bits: list, mask: int) -> int:
    out = 0
    for i, p in enumerate(bits):
        if mask >> p & 1:
            out |= 1 << i
    return out


def _expand_from(bits: list, small: int) -> int:
    out = 0
    for i, p in enumerate(bits):
        if small >> i & 1:
            out |= 1 << p
    return out


def extract_induced_copy(
    fam: SetFamily,
    pattern: FinitePoset,
    overrides: Optional[dict] = None,
    *,
    seed: int = 0,
    attempts: int = DEFAULT_EMBED_ATTEMPTS,
) -> ExtractionResult:
    """Full pipeline; every stage feeds the next, any stage may stop it.

    With ``overrides`` (dict with q, p and optionally eps) the run is in
    override mode; otherwise the exact cascade is used, which at desk
    scale normally stops at the mass threshold.  A returned map is
    always certified induced against the pattern, whatever the mode.
    """
    m = pattern.k
    n = fam.ground.n
    if m == 0:
        return ExtractionResult(
            STATUS_OK, "override" if overrides else "paper",
            EmbeddingMap((), "induced", "masks", target_n=n), None, None, None,
        )
    if overrides is not None:
        cascade = override_cascade(m, **overrides)
    else:
        cascade = compute_cascade(m, universality_epsilon(m))

    trace = build_sequences(fam, m, cascade)
    if trace.status != STATUS_OK:
        return ExtractionResult(trace.status, cascade.mode, None, trace, None, None)
    eps_top = cascade.eps_level(1)
    assembly = assemble_witnesses(trace, fam, eps_top)
    if assembly.status != STATUS_OK:
        return ExtractionResult(assembly.status, cascade.mode, None, trace, assembly, None)

    X = assembly.X
    bits = [e - 1 for e in mask_elements(X)]
    u = len(bits)
    compressed = {
        k: frozenset(_compress_onto(bits, x) for x in xs)
        for k, xs in assembly.levels.items()
    }
    present = frozenset(c for xs in compressed.values() for c in xs)
    if assembly.branch == CASE_FLEX:
        full_u = (1 << u) - 1
        dtf = DenseTruncatedFamily(u, m, "down", frozenset(full_u ^ c for c in present))
    else:
        dtf = DenseTruncatedFamily(u, m, "up", present)
    embed_eps = min(eps_top, universality_epsilon(m))
    if not (u >= 2 * m and dense_class_check(dtf, embed_eps)):
        if cascade.mode == "paper":
            raise CertificationError("paper-mode strata failed the density certificate")
        return ExtractionResult(
            STATUS_NOT_DENSE, cascade.mode, None, trace,
            assembly, None,
            detail=f"stratum density below 1 - {embed_eps}",
        )
    res = randomized_cube_embed(dtf, m, seed, attempts)
    if res.mask is None:
        return ExtractionResult(STATUS_EXHAUSTED, cascade.mode, None, trace, assembly, res)

    cube_bits = [e - 1 for e in mask_elements(res.mask)]
    psi_ds = downset_embedding(pattern).images
    x_prime = res.mask
    images = []
    for e in range(m):
        s = _expand_from(cube_bits, psi_ds[e])
        if assembly.branch == CASE_FLEX:
            s = x_prime ^ s           # complement within the located cube
        v = _expand_from(bits, s)
        w = assembly.psi.get(v)
        if w is None:
            raise CertificationError("located cube left the certified strata")
        images.append(w)
    images = tuple(images)
    if len(set(images)) != m or not verify_embedding_masks(pattern, images, "induced"):
        raise CertificationError("composed extraction map failed the induced check")
    emb = EmbeddingMap(images, "induced", "masks", target_n=n)
    return ExtractionResult(STATUS_OK, cascade.mode, emb, trace, assembly, res)
