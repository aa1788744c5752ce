"""Exact pattern-avoidance optima and the symmetric chain machinery."""

import math
from fractions import Fraction

import pytest

from cubefam import (
    FinitePoset,
    PreconditionError,
    contains_subposet,
    extremal_search,
    family_as_poset,
    lubell_mass,
    make_chain,
    make_cube,
    make_v,
    middle_layers_number,
)
from cubefam.extremal import (
    chain_mass_bound_check,
    middle_layer_order,
    symmetric_chain_decomposition,
)
from cubefam.families import mask_size


class TestSymmetricChains:
    @pytest.mark.parametrize("n", range(1, 9))
    def test_partitions_whole_lattice(self, n):
        chain_of = symmetric_chain_decomposition(n)
        assert len(chain_of) == 1 << n
        chains = {}
        for mask, cid in chain_of.items():
            chains.setdefault(cid, []).append(mask)
        assert len(chains) == math.comb(n, n // 2)
        for members in chains.values():
            members.sort(key=mask_size)
            lo, hi = mask_size(members[0]), mask_size(members[-1])
            assert lo + hi == n                   # symmetric around the middle
            assert len(members) == hi - lo + 1
            for a, b in zip(members, members[1:]):
                assert a & ~b == 0 and mask_size(b) == mask_size(a) + 1

    def test_chain_id_is_a_member(self, n=6):
        chain_of = symmetric_chain_decomposition(n)
        for mask, cid in chain_of.items():
            assert chain_of[cid] == cid


class TestKnownOptima:
    @pytest.mark.parametrize("n,value", [(1, 1), (2, 2), (3, 3), (4, 6), (5, 10)])
    def test_antichain_numbers(self, n, value):
        r = extremal_search(n, make_chain(2), "weak", "cardinality")
        assert r.value == value == math.comb(n, n // 2)
        assert r.exact

    @pytest.mark.parametrize("n,value", [(2, 3), (3, 6), (4, 10), (5, 20)])
    def test_two_antichain_numbers(self, n, value):
        # Largest families with no 3-chain: the two fattest layers.
        r = extremal_search(n, make_chain(3), "weak", "cardinality")
        assert r.value == value
        sizes = sorted(math.comb(n, k) for k in range(n + 1))
        assert value == sizes[-1] + sizes[-2]

    def test_mass_optima_match_chain_bound(self):
        assert extremal_search(5, make_chain(2), "weak", "lubell").value == 1
        assert extremal_search(5, make_chain(3), "weak", "lubell").value == 2

    def test_v_pattern_mass(self):
        r = extremal_search(5, make_v(), "weak", "lubell")
        assert r.value == 2 and r.exact

    def test_v_pattern_induced_count(self):
        r = extremal_search(4, make_v(), "induced", "cardinality")
        assert r.value == 8

    def test_weak_is_at_most_induced(self):
        for n in (3, 4):
            weak = extremal_search(n, make_v(), "weak", "cardinality").value
            induced = extremal_search(n, make_v(), "induced", "cardinality").value
            assert weak <= induced


class TestWitnessFamilies:
    @pytest.mark.parametrize(
        "n,pattern,mode,objective",
        [
            (4, make_chain(2), "weak", "cardinality"),
            (4, make_chain(3), "weak", "lubell"),
            (4, make_v(), "weak", "cardinality"),
            (3, make_v(), "induced", "cardinality"),
        ],
        ids=["sperner", "mass3", "v-weak", "v-induced"],
    )
    def test_witness_is_free_and_scores_its_value(self, n, pattern, mode, objective):
        r = extremal_search(n, pattern, mode, objective)
        fam = r.family
        if objective == "lubell":
            assert lubell_mass(fam) == r.value
        else:
            assert len(fam) == r.value
        if len(fam):
            host = family_as_poset(fam)
            assert contains_subposet(host, pattern, mode) is None


class TestSearchControls:
    def test_budget_degrades_to_lower_bound(self):
        full = extremal_search(5, make_chain(2), "weak", "cardinality")
        cut = extremal_search(5, make_chain(2), "weak", "cardinality", budget=5)
        assert not cut.exact
        assert cut.value <= full.value
        assert cut.nodes <= 2 * 5  # a final node may land past the budget line

    def test_generous_budget_stays_exact(self):
        r = extremal_search(4, make_chain(2), "weak", "cardinality", budget=10**6)
        assert r.exact and r.value == 6

    def test_large_ground_flagged_inexact(self):
        r = extremal_search(9, make_chain(2), "weak", "cardinality")
        assert r.value == math.comb(9, 4)
        assert not r.exact

    def test_input_validation(self):
        with pytest.raises(PreconditionError):
            extremal_search(3, make_chain(2), mode="strict")
        with pytest.raises(PreconditionError):
            extremal_search(3, make_chain(2), objective="area")

    def test_result_metadata(self):
        r = extremal_search(3, make_chain(2), pattern_id="P2")
        assert r.pattern_id == "P2" and r.n == 3
        assert r.nodes > 0 and r.wall_time >= 0


class TestMiddleLayers:
    def test_layer_order_middle_out(self):
        assert middle_layer_order(4) == [2, 1, 3, 0, 4]
        assert middle_layer_order(5) == [2, 3, 1, 4, 0, 5]

    @pytest.mark.parametrize("k,n", [(2, 4), (3, 5), (4, 6), (5, 4)])
    def test_chains_hit_closed_form(self, k, n):
        assert middle_layers_number(make_chain(k), n) == min(k - 1, n + 1)

    def test_small_ground_clamps(self):
        assert middle_layers_number(make_chain(4), 2) == 3

    def test_non_chain_patterns(self):
        assert middle_layers_number(make_v(), 6) == 1
        assert middle_layers_number(make_cube(2), 6) == 2

    def test_degenerate_inputs(self):
        assert middle_layers_number(FinitePoset(0, []), 6) == 0
        assert middle_layers_number(make_chain(2), 0) == 1


class TestChainMassCheck:
    def test_small_instances_confirm(self):
        for n, k in [(4, 2), (5, 2), (5, 3)]:
            out = chain_mass_bound_check(n, k)
            assert out["ok"] and out["maximum"] == min(k - 1, n + 1)
            assert out["middle_layers_achieve"]

    def test_refuses_large_instances(self):
        with pytest.raises(PreconditionError):
            chain_mass_bound_check(7, 2)
        with pytest.raises(PreconditionError):
            chain_mass_bound_check(5, 0)
