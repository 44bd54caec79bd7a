"""0-1 knapsack with weight normalization and deterministic traceback.

Used for the per-house primary allocation and for the final distribution
pass. Capacities and weights are integer Wh; values may be exact rationals.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


@dataclass(frozen=True)
class KnapsackItem:
    id: str
    weight: int
    value: int | Fraction


@dataclass(frozen=True)
class KnapsackInstance:
    items: tuple[KnapsackItem, ...]
    capacity: int


@dataclass(frozen=True)
class ScaleRecord:
    """Maps a normalized instance back to original units."""
    granularity: int
    original: KnapsackInstance


@dataclass(frozen=True)
class KnapsackSolution:
    chosen: frozenset[str]
    total_weight: int
    total_value: int | Fraction


def normalize(instance: KnapsackInstance, granularity: int) -> tuple[KnapsackInstance, ScaleRecord]:
    """Bucket weights by ``granularity``.

    Weights round up and the capacity rounds down, so any solution of the
    normalized instance stays feasible in original units.
    """
    if granularity < 1:
        raise ValueError("granularity must be >= 1")
    if granularity == 1:
        return instance, ScaleRecord(1, instance)
    items = tuple(
        KnapsackItem(it.id, -(-it.weight // granularity), it.value) for it in instance.items
    )
    scaled = KnapsackInstance(items, instance.capacity // granularity)
    return scaled, ScaleRecord(granularity, instance)


def in_original_units(solution: KnapsackSolution, record: ScaleRecord) -> KnapsackSolution:
    """Re-express a solution of the normalized instance in original Wh."""
    weight = sum(it.weight for it in record.original.items if it.id in solution.chosen)
    return KnapsackSolution(solution.chosen, weight, solution.total_value)


def solve(instance: KnapsackInstance) -> KnapsackSolution:
    """Exact DP over capacity with traceback.

    Tie-break among optima: smaller total weight first, then the
    lexicographically smallest id set (greedy include in ascending id order).
    Zero-weight items with positive value are always chosen; zero-weight
    zero-value items are never chosen.
    """
    capacity = instance.capacity
    if capacity < 0:
        raise ValueError("capacity must be >= 0")

    free = [it for it in instance.items if it.weight == 0 and it.value > 0]
    items = sorted(
        (it for it in instance.items if it.weight > 0), key=lambda it: it.id
    )
    base_value = sum(it.value for it in free)
    chosen = {it.id for it in free}

    total = sum(it.weight for it in items)
    if not items or capacity == 0:
        return KnapsackSolution(frozenset(chosen), 0, base_value)
    if total <= capacity:
        chosen.update(it.id for it in items)
        return KnapsackSolution(
            frozenset(chosen), total, base_value + sum(it.value for it in items)
        )

    # Suffix DP so that the traceback can greedily prefer early (small) ids:
    # values[i][c] / weights[i][c] describe the best pack of items[i:] at cap c.
    n = len(items)
    values: list[list] = [[0] * (capacity + 1) for _ in range(n + 1)]
    weights: list[list[int]] = [[0] * (capacity + 1) for _ in range(n + 1)]
    for i in range(n - 1, -1, -1):
        w, v = items[i].weight, items[i].value
        skip_v, skip_w = values[i + 1], weights[i + 1]
        row_v, row_w = values[i], weights[i]
        for c in range(capacity + 1):
            bv, bw = skip_v[c], skip_w[c]
            if w <= c:
                tv = skip_v[c - w] + v
                tw = skip_w[c - w] + w
                if tv > bv or (tv == bv and tw < bw):
                    bv, bw = tv, tw
            row_v[c] = bv
            row_w[c] = bw

    c = capacity
    for i, item in enumerate(items):
        if item.weight <= c:
            tv = values[i + 1][c - item.weight] + item.value
            tw = weights[i + 1][c - item.weight] + item.weight
            # include whenever it preserves the (value, weight) optimum
            if tv == values[i][c] and tw == weights[i][c]:
                chosen.add(item.id)
                c -= item.weight

    return KnapsackSolution(
        frozenset(chosen), weights[0][capacity], base_value + values[0][capacity]
    )


def pick(items: tuple[KnapsackItem, ...], capacity: int, granularity: int = 1) -> KnapsackSolution:
    """Normalize, solve, and report in original units in one call."""
    instance = KnapsackInstance(items, max(capacity, 0))
    scaled, record = normalize(instance, granularity)
    return in_original_units(solve(scaled), record)
