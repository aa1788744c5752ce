import itertools
import random
from fractions import Fraction

import pytest

from cubefam.errors import PreconditionError
from cubefam.families import SetFamily, full_power_set, mask_size
from cubefam.posets import (
    contains_subposet,
    enumerate_posets,
    family_as_poset,
    make_chain,
    make_v,
    verify_embedding_masks,
)
from cubefam.embeddings import (
    DenseTruncatedFamily,
    dense_class_check,
    downset_embedding,
    find_pattern_via_universality,
    randomized_cube_embed,
    universality_epsilon,
)

from conftest import random_family, random_poset


def _layer_masks(n, k):
    return [
        sum(1 << e for e in c) for c in itertools.combinations(range(n), k)
    ]


def test_universality_epsilon_values():
    assert universality_epsilon(1) == Fraction(1, 4)    # (2m)^(m+1) = 2^2
    assert universality_epsilon(2) == Fraction(1, 64)   # 4^3
    assert universality_epsilon(3) == Fraction(1, 6 ** 4)
    with pytest.raises(PreconditionError):
        universality_epsilon(0)


def test_downset_embedding_small_posets_verified():
    """Nonempty down-sets of the element order give an induced copy in
    the cube on exactly k coordinates."""
    for k in range(1, 5):
        for p in enumerate_posets(k):
            emb = downset_embedding(p)
            assert emb.mode == "induced" and emb.kind == "masks"
            assert emb.target_n == p.k
            assert verify_embedding_masks(p, emb.images, "induced")
            # image x always carries its own coordinate
            for x in range(p.k):
                assert emb.images[x] & (1 << x)


def test_dense_truncated_family_complement():
    n, m = 6, 2
    present = frozenset(
        mask for k in range(m + 1) for mask in _layer_masks(n, k)
    )
    up = DenseTruncatedFamily(n, m, "up", present)
    down = up.complemented()
    assert down.orientation == "down"
    full = (1 << n) - 1
    assert all((full ^ mask) in down.present for mask in present)
    assert down.complemented().present == up.present


def test_dense_class_check_layer_thresholds():
    n, m = 8, 2
    eps = Fraction(1, 64)
    layers = {k: _layer_masks(n, k) for k in range(m + 1)}
    present = set(layers[0]) | set(layers[1]) | set(layers[2])
    assert dense_class_check(DenseTruncatedFamily(n, m, "up", frozenset(present)), eps)
    # dropping one 2-set is already too much at eps = 1/64 (28 * 1/64 < 1)
    present.discard(layers[2][0])
    assert not dense_class_check(
        DenseTruncatedFamily(n, m, "up", frozenset(present)), eps
    )


def test_randomized_cube_embed_on_full_truncation():
    n, m = 12, 2
    present = frozenset(
        mask for k in range(m + 1) for mask in _layer_masks(n, k)
    )
    dtf = DenseTruncatedFamily(n, m, "up", present)
    res = randomized_cube_embed(dtf, m, seed=31337, max_attempts=50)
    assert res.status == "ok" and res.mask is not None
    assert mask_size(res.mask) == m
    # certified: every subset of the located cube is present
    for r in range(m + 1):
        for sub in itertools.combinations(
            [i for i in range(n) if res.mask >> i & 1], r
        ):
            assert sum(1 << e for e in sub) in present


def test_randomized_cube_embed_deterministic_per_seed():
    n, m = 10, 2
    present = frozenset(
        mask for k in range(m + 1) for mask in _layer_masks(n, k)
    )
    dtf = DenseTruncatedFamily(n, m, "up", present)
    a = randomized_cube_embed(dtf, m, seed=99, max_attempts=20)
    b = randomized_cube_embed(dtf, m, seed=99, max_attempts=20)
    assert (a.mask, a.attempts_used) == (b.mask, b.attempts_used)


def test_find_pattern_agrees_with_oracle():
    """Composed universality route vs direct backtracking, small scale."""
    rng = random.Random(60601)
    for _ in range(40):
        n = rng.randint(2, 7)
        fam = random_family(rng, n, 0.35)
        pattern = random_poset(rng, rng.randint(1, 3))
        emb = find_pattern_via_universality(fam, pattern, seed=rng.randrange(2**32))
        oracle = contains_subposet(family_as_poset(fam), pattern, "induced")
        assert (emb is None) == (oracle is None)
        if emb is not None:
            assert verify_embedding_masks(pattern, emb.images, "induced")
            assert all(img in fam.member_set for img in emb.images)


def test_find_pattern_uses_dense_route_on_power_set():
    fam = full_power_set(8)
    stats = {}
    emb = find_pattern_via_universality(fam, make_v(), seed=4, stats=stats)
    assert emb is not None
    assert verify_embedding_masks(make_v(), emb.images, "induced")
    assert stats["attempts_used"] >= 1    # randomized stage actually ran


def test_find_pattern_cosmall_route():
    """A family dense only near the top forces the complement route."""
    n = 9
    members = [
        m for m in range(1 << n) if mask_size(m) >= n - 3
    ]
    fam = SetFamily(n, members)
    emb = find_pattern_via_universality(fam, make_v(), seed=12)
    assert emb is not None
    assert verify_embedding_masks(make_v(), emb.images, "induced")
    assert all(img in fam.member_set for img in emb.images)


def test_find_chain_in_sparse_family_direct_route():
    # too sparse for the randomized route: falls back to the oracle
    fam = SetFamily(6, [0b000001, 0b000011, 0b000111, 0b101010])
    emb = find_pattern_via_universality(fam, make_chain(3), seed=5)
    assert emb is not None
    assert verify_embedding_masks(make_chain(3), emb.images, "induced")


def test_empty_pattern_embeds_trivially():
    from cubefam.posets import FinitePoset

    fam = SetFamily(3, [0b001])
    emb = find_pattern_via_universality(fam, FinitePoset(0), seed=0)
    assert emb is not None and emb.images == ()
