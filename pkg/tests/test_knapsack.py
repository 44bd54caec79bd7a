import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridsim.knapsack import (
    KnapsackInstance,
    KnapsackItem,
    in_original_units,
    normalize,
    pick,
    solve,
)
from oracles import knapsack_best


def items_of(pairs):
    return tuple(KnapsackItem(f"d{i + 1}", w, v) for i, (w, v) in enumerate(pairs))


class TestNormalize:
    def test_identity_granularity(self):
        inst = KnapsackInstance(items_of([(1, 1), (3, 1), (5, 1)]), 4)
        scaled, record = normalize(inst, 1)
        assert scaled == inst
        assert record.granularity == 1

    def test_ceiling_floor_arithmetic(self):
        inst = KnapsackInstance(items_of([(110, 1), (290, 1)]), 400)
        scaled, _ = normalize(inst, 100)
        assert [it.weight for it in scaled.items] == [2, 3]
        assert scaled.capacity == 4

    def test_rejects_bad_granularity(self):
        with pytest.raises(ValueError):
            normalize(KnapsackInstance((), 0), 0)

    def test_normalized_solutions_stay_feasible(self):
        # rounding directions guarantee feasibility in original units
        rng = random.Random(20240)
        for _ in range(500):
            n = rng.randint(1, 10)
            granularity = rng.randint(1, 25)
            items = tuple(
                KnapsackItem(f"d{i}", rng.randint(0, 120), rng.randint(0, 50))
                for i in range(n)
            )
            inst = KnapsackInstance(items, rng.randint(0, 300))
            scaled, record = normalize(inst, granularity)
            solution = in_original_units(solve(scaled), record)
            assert solution.total_weight <= inst.capacity


class TestSolve:
    def test_five_house_h1_at_forecast(self):
        # frozen from the enumeration oracle over all 32 subsets
        items = items_of([(1, 81), (1, 80), (3, 83), (5, 75), (20, 20)])
        want = knapsack_best(items, 4)
        assert want == (164, 4, ("d1", "d3"))
        got = solve(KnapsackInstance(items, 4))
        assert got.total_value == 164
        assert got.total_weight == 4
        assert got.chosen == frozenset({"d1", "d3"})

    def test_zero_capacity(self):
        items = items_of([(2, 3), (1, 9)])
        got = solve(KnapsackInstance(items, 0))
        assert got.chosen == frozenset()
        assert got.total_value == 0

    def test_small_instance(self):
        # frozen from the enumeration oracle over all 8 subsets
        items = items_of([(2, 3), (3, 4), (4, 5)])
        assert knapsack_best(items, 5)[:2] == (7, 5)
        got = solve(KnapsackInstance(items, 5))
        assert (got.total_value, got.total_weight) == (7, 5)

    def test_zero_weight_items(self):
        items = (
            KnapsackItem("free", 0, 7),
            KnapsackItem("junk", 0, 0),
            KnapsackItem("load", 2, 5),
        )
        got = solve(KnapsackInstance(items, 1))
        assert got.chosen == frozenset({"free"})
        assert got.total_value == 7

    def test_matches_enumeration_on_random_instances(self):
        rng = random.Random(7)
        for _ in range(200):
            n = rng.randint(1, 16)
            items = tuple(
                KnapsackItem(f"d{i:02d}", rng.randint(0, 50), rng.randint(0, 99))
                for i in range(n)
            )
            capacity = rng.randint(0, 100)
            value, weight, ids = knapsack_best(items, capacity)
            got = solve(KnapsackInstance(items, capacity))
            assert got.total_value == value
            assert got.total_weight == weight
            assert tuple(sorted(got.chosen)) == ids

    def test_fraction_values(self):
        items = (
            KnapsackItem("a", 2, Fraction(3, 2)),
            KnapsackItem("b", 2, Fraction(5, 4)),
        )
        got = solve(KnapsackInstance(items, 2))
        assert got.chosen == frozenset({"a"})
        assert got.total_value == Fraction(3, 2)


@st.composite
def instances(draw):
    n = draw(st.integers(0, 10))
    items = tuple(
        KnapsackItem(f"d{i:02d}", draw(st.integers(0, 30)), draw(st.integers(0, 40)))
        for i in range(n)
    )
    return items, draw(st.integers(0, 60))


class TestProperties:
    @settings(max_examples=150, deadline=None)
    @given(instances())
    def test_value_monotone_in_capacity(self, case):
        items, capacity = case
        lo = solve(KnapsackInstance(items, capacity)).total_value
        hi = solve(KnapsackInstance(items, capacity + 5)).total_value
        assert hi >= lo

    @settings(max_examples=150, deadline=None)
    @given(instances(), st.integers(0, 30), st.integers(0, 40))
    def test_superset_safety(self, case, extra_w, extra_v):
        items, capacity = case
        base = solve(KnapsackInstance(items, capacity)).total_value
        more = items + (KnapsackItem("zz", extra_w, extra_v),)
        assert solve(KnapsackInstance(more, capacity)).total_value >= base

    @settings(max_examples=100, deadline=None)
    @given(instances())
    def test_weight_within_capacity(self, case):
        items, capacity = case
        got = solve(KnapsackInstance(items, capacity))
        assert got.total_weight <= capacity
        assert got.total_weight == sum(it.weight for it in items if it.id in got.chosen)
        assert got.total_value == sum(it.value for it in items if it.id in got.chosen)


def test_pick_reports_original_units():
    items = items_of([(110, 5), (290, 9)])
    got = pick(items, 400, granularity=100)
    assert got.total_weight == sum(
        w for w, chosen in ((110, "d1" in got.chosen), (290, "d2" in got.chosen)) if chosen
    )
    assert got.total_weight <= 400
