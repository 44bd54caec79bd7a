"""Max-flow routing with incremental updates and bottleneck diagnosis.

Augmenting paths are found by breadth-first search (shortest first), so the
algorithm is polynomial and fully deterministic given edge insertion order.
Capacities and flows are integer Wh; Kirchhoff conservation holds exactly at
every internal node after every operation.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction

SOURCE = "__source__"
SINK = "__sink__"

INFINITE_PRODUCTION = "infinite_production"
INFINITE_CONSUMPTION = "infinite_consumption"


class FlowGraph:
    """Directed capacitated graph with a persisted flow.

    Edges are addressed by their insertion index. The flow is kept on the
    graph between calls so that demand or capacity changes can be absorbed
    incrementally instead of recomputing from scratch.
    """

    def __init__(self, source: str = SOURCE, sink: str = SINK) -> None:
        self.source = source
        self.sink = sink
        self.tails: list[str] = []
        self.heads: list[str] = []
        self.caps: list[int] = []
        self.flows: list[int] = []
        self.costs: list[Fraction] = []
        # node -> [(edge index, traversed forward?)] covering both directions
        self.adj: dict[str, list[tuple[int, bool]]] = {source: [], sink: []}

    def add_node(self, node: str) -> None:
        self.adj.setdefault(node, [])

    def add_edge(self, tail: str, head: str, capacity: int, cost: Fraction | int = 0) -> int:
        if capacity < 0:
            raise ValueError(f"negative capacity on {tail} -> {head}")
        idx = len(self.tails)
        self.tails.append(tail)
        self.heads.append(head)
        self.caps.append(capacity)
        self.flows.append(0)
        self.costs.append(Fraction(cost))
        self.adj.setdefault(tail, []).append((idx, True))
        self.adj.setdefault(head, []).append((idx, False))
        return idx

    @property
    def num_edges(self) -> int:
        return len(self.tails)

    def copy(self) -> "FlowGraph":
        dup = FlowGraph(self.source, self.sink)
        dup.tails = list(self.tails)
        dup.heads = list(self.heads)
        dup.caps = list(self.caps)
        dup.flows = list(self.flows)
        dup.costs = list(self.costs)
        dup.adj = {node: list(arcs) for node, arcs in self.adj.items()}
        return dup

    def reset_flows(self) -> None:
        self.flows = [0] * len(self.flows)

    def value(self) -> int:
        """Net flow leaving the source."""
        out = 0
        for idx, forward in self.adj[self.source]:
            out += self.flows[idx] if forward else -self.flows[idx]
        return out

    def edges_from(self, node: str) -> list[int]:
        return [idx for idx, forward in self.adj.get(node, []) if forward]

    def edges_into(self, node: str) -> list[int]:
        return [idx for idx, forward in self.adj.get(node, []) if not forward]

    def conservation_violations(self) -> list[str]:
        """Internal nodes where inflow differs from outflow (should be none)."""
        bad = []
        for node in self.adj:
            if node in (self.source, self.sink):
                continue
            balance = 0
            for idx, forward in self.adj[node]:
                balance += -self.flows[idx] if forward else self.flows[idx]
            if balance != 0:
                bad.append(f"node {node!r} imbalance {balance}")
        return bad


@dataclass(frozen=True)
class FlowResult:
    value: int
    flows: tuple[int, ...]
    augmentations: int
    excess_removed: int


@dataclass(frozen=True)
class BottleneckReport:
    mode: str
    saturated_cut: frozenset[int]
    deliverable: int


# ---------------------------------------------------------------------------
# Core augmentation
# ---------------------------------------------------------------------------

def _augmenting_path(graph: FlowGraph) -> dict[str, tuple[int, bool]] | None:
    """Shortest residual path source -> sink; parent pointers or None."""
    parent: dict[str, tuple[int, bool]] = {}
    seen = {graph.source}
    queue = deque([graph.source])
    while queue:
        node = queue.popleft()
        for idx, forward in graph.adj[node]:
            if forward:
                nxt, residual = graph.heads[idx], graph.caps[idx] - graph.flows[idx]
            else:
                nxt, residual = graph.tails[idx], graph.flows[idx]
            if residual > 0 and nxt not in seen:
                seen.add(nxt)
                parent[nxt] = (idx, forward)
                if nxt == graph.sink:
                    return parent
                queue.append(nxt)
    return None


def _apply_path(graph: FlowGraph, parent: dict[str, tuple[int, bool]]) -> int:
    bottleneck = None
    node = graph.sink
    while node != graph.source:
        idx, forward = parent[node]
        residual = graph.caps[idx] - graph.flows[idx] if forward else graph.flows[idx]
        bottleneck = residual if bottleneck is None else min(bottleneck, residual)
        node = graph.tails[idx] if forward else graph.heads[idx]
    node = graph.sink
    while node != graph.source:
        idx, forward = parent[node]
        graph.flows[idx] += bottleneck if forward else -bottleneck
        node = graph.tails[idx] if forward else graph.heads[idx]
    return bottleneck


def _augment_to_max(graph: FlowGraph) -> int:
    count = 0
    while True:
        parent = _augmenting_path(graph)
        if parent is None:
            return count
        _apply_path(graph, parent)
        count += 1


def max_flow(graph: FlowGraph) -> FlowResult:
    """Augment the persisted flow to maximality."""
    augmentations = _augment_to_max(graph)
    return FlowResult(graph.value(), tuple(graph.flows), augmentations, 0)


# ---------------------------------------------------------------------------
# Incremental update
# ---------------------------------------------------------------------------

def _flow_path(graph: FlowGraph, start: str, goal: str, skip: int) -> list[int] | None:
    """Path start -> goal along flow-carrying edges (never edge ``skip``)."""
    parent: dict[str, int] = {}
    seen = {start}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            path = []
            while node != start:
                idx = parent[node]
                path.append(idx)
                node = graph.tails[idx]
            path.reverse()
            return path
        for idx, forward in graph.adj[node]:
            if forward and idx != skip and graph.flows[idx] > 0:
                nxt = graph.heads[idx]
                if nxt not in seen:
                    seen.add(nxt)
                    parent[nxt] = idx
                    queue.append(nxt)
    return None


def _drain_excess(graph: FlowGraph, idx: int) -> int:
    """Cancel flow on edge ``idx`` until it fits its (reduced) capacity.

    Each cancellation walks the flow support: around a cycle through the edge
    when one exists, otherwise back to the source and forward to the sink.
    """
    removed = 0
    tail, head = graph.tails[idx], graph.heads[idx]
    while graph.flows[idx] > graph.caps[idx]:
        excess = graph.flows[idx] - graph.caps[idx]
        cycle = _flow_path(graph, head, tail, skip=idx)
        if cycle is not None:
            delta = min(excess, min(graph.flows[e] for e in cycle))
            for e in cycle:
                graph.flows[e] -= delta
            graph.flows[idx] -= delta
            continue
        back = [] if tail == graph.source else _flow_path(graph, graph.source, tail, skip=idx)
        ahead = [] if head == graph.sink else _flow_path(graph, head, graph.sink, skip=idx)
        if back is None or ahead is None:
            raise AssertionError("flow support lost while draining excess")
        delta = excess
        for path in (back, ahead):
            for e in path:
                delta = min(delta, graph.flows[e])
        for e in back:
            graph.flows[e] -= delta
        for e in ahead:
            graph.flows[e] -= delta
        graph.flows[idx] -= delta
        removed += delta
    return removed


def update_incremental(graph: FlowGraph, new_capacities: dict[int, int]) -> FlowResult:
    """Apply capacity changes, drain excess flow, then re-augment.

    The final value always equals a from-scratch recomputation on the new
    capacities; only the per-edge split may differ (both are maximal).
    Over-capacity edges are processed in ascending index for reproducibility.
    """
    for idx, cap in new_capacities.items():
        if cap < 0:
            raise ValueError(f"negative capacity for edge {idx}")
        graph.caps[idx] = cap
    removed = 0
    for idx in sorted(new_capacities):
        if graph.flows[idx] > graph.caps[idx]:
            removed += _drain_excess(graph, idx)
    augmentations = _augment_to_max(graph)
    return FlowResult(graph.value(), tuple(graph.flows), augmentations, removed)


# ---------------------------------------------------------------------------
# Diagnosis
# ---------------------------------------------------------------------------

def _residual_reachable(graph: FlowGraph) -> set[str]:
    seen = {graph.source}
    queue = deque([graph.source])
    while queue:
        node = queue.popleft()
        for idx, forward in graph.adj[node]:
            if forward:
                nxt, residual = graph.heads[idx], graph.caps[idx] - graph.flows[idx]
            else:
                nxt, residual = graph.tails[idx], graph.flows[idx]
            if residual > 0 and nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def min_cut_edges(graph: FlowGraph) -> frozenset[int]:
    """Edges crossing the source side of the min cut (flow must be maximal)."""
    reach = _residual_reachable(graph)
    return frozenset(
        idx
        for idx in range(graph.num_edges)
        if graph.tails[idx] in reach and graph.heads[idx] not in reach
    )


def supply_edges(graph: FlowGraph) -> list[int]:
    return graph.edges_from(graph.source)


def demand_edges(graph: FlowGraph) -> list[int]:
    return graph.edges_into(graph.sink)


def bottleneck_analysis(graph: FlowGraph) -> tuple[BottleneckReport, BottleneckReport]:
    """Max-flow under the two relaxations that locate the limiting cut.

    ``infinite_production`` lifts the supply-side caps (what could consumers
    get through this network); ``infinite_consumption`` lifts the demand-side
    caps (what could producers push). Runs on scratch copies.
    """
    reports = []
    for mode, lifted in (
        (INFINITE_PRODUCTION, supply_edges(graph)),
        (INFINITE_CONSUMPTION, demand_edges(graph)),
    ):
        scratch = graph.copy()
        other = demand_edges(graph) if mode == INFINITE_PRODUCTION else supply_edges(graph)
        big = sum(scratch.caps[e] for e in other)
        update_incremental(scratch, {e: big for e in lifted})
        res = max_flow(scratch)
        reports.append(BottleneckReport(mode, min_cut_edges(scratch), res.value))
    return reports[0], reports[1]


def check_feasibility(graph: FlowGraph) -> bool:
    """True iff every demand edge can be saturated (Gale's condition)."""
    scratch = graph.copy()
    max_flow(scratch)
    return all(scratch.flows[e] == scratch.caps[e] for e in demand_edges(scratch))
