"""Shared seeded generators for the test suite.

No property-testing frameworks: every randomized test draws from an
explicit random.Random with a fixed seed, so failures replay exactly.
"""

import random

from cubefam.families import SetFamily
from cubefam.posets import FinitePoset


def random_family(rng: random.Random, n: int, density: float = 0.3) -> SetFamily:
    """A family over [n] keeping each subset independently."""
    members = [m for m in range(1 << n) if rng.random() < density]
    return SetFamily(n, members)


def nonempty_random_family(rng: random.Random, n: int, density: float = 0.3) -> SetFamily:
    fam = random_family(rng, n, density)
    if len(fam) == 0:
        fam = SetFamily(n, [rng.randrange(1 << n)])
    return fam


def random_poset(rng: random.Random, k: int, edge_prob: float = 0.3) -> FinitePoset:
    """Random poset on k elements: random relations on a shuffled order,
    then transitive closure.  Always acyclic by construction."""
    order = list(range(k))
    rng.shuffle(order)
    pairs = []
    for i in range(k):
        for j in range(i + 1, k):
            if rng.random() < edge_prob:
                pairs.append((order[i], order[j]))
    return FinitePoset(k, pairs, close=True)


def brute_force_weak_embed(host: FinitePoset, pattern: FinitePoset) -> bool:
    """Reference oracle: try every injection (small sizes only)."""
    from itertools import permutations

    for images in permutations(range(host.k), pattern.k):
        good = True
        for x in range(pattern.k):
            for y in range(pattern.k):
                if x != y and pattern.lt(x, y) and not host.lt(images[x], images[y]):
                    good = False
                    break
            if not good:
                break
        if good:
            return True
    return False


def brute_force_induced_embed(host: FinitePoset, pattern: FinitePoset) -> bool:
    from itertools import permutations

    for images in permutations(range(host.k), pattern.k):
        good = True
        for x in range(pattern.k):
            for y in range(pattern.k):
                if x == y:
                    continue
                if pattern.lt(x, y) != host.lt(images[x], images[y]):
                    good = False
                    break
            if not good:
                break
        if good:
            return True
    return False
