"""Tick orchestration: primary allocation, booking, routing, distribution.

One tick covers five simulated minutes and runs four phases in order:

  A. per-house knapsack inside the forecast (primary allocation),
  B. strategy generation, bidding, and the auction/feedback consensus loop,
  C. incremental max-flow routing of the booked energy,
  D. final distribution by knapsack, pooling leftovers at the microgrid.

Priorities and prognostics are updated after distribution. Everything is
integer Wh and fully deterministic: identical scenarios produce bit-identical
result streams. Per-house solves are memoized on the exact inputs so a
converged simulation does almost no repeated work.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from fractions import Fraction

from . import knapsack, maxflow
from .auction import (
    Bid,
    ConsensusState,
    RegulationMetrics,
    collect_bids,
    consensus_loop,
    largest_remainder,
    regulation_metrics,
)
from .knapsack import KnapsackItem
from .model import (
    House,
    Producer,
    ScenarioConfig,
    effective_weight,
    mandatory_load,
    min_required,
)
from .strategy import (
    DEFAULT_FAMILIES,
    OVER_CONSUMPTION,
    OVER_PRODUCTION,
    StrategyContext,
    compute_alpha,
    generate_strategies,
    refresh_utilities,
)

ORACLE_ITEM_CAP = 20


class OracleSizeError(ValueError):
    """The aggregate knapsack oracle only runs at desk scale."""


@dataclass(frozen=True)
class TickResult:
    """Everything one tick produced.

    ``supply`` is the energy actually routed (equals the sum of grants);
    ``gap`` is the booking gap of the final auction round. Conservation
    holds exactly: supply + battery_discharged == served + spilled, where
    served is the sum of all allocations plus locally used discharge.
    """
    tick: int
    supply: int
    demand: int
    gap: int
    gap_history: tuple[int, ...]
    rounds: int
    allocations: dict[str, int]
    served_wh: dict[str, int]
    served: dict[str, frozenset[str]]
    edge_flows: tuple[int, ...]
    unserved_mandatory: int
    unserved_by_house: dict[str, int]
    spilled: int
    battery_discharged: int
    gross: int
    net: int
    achieved_utility: int
    deliverable: int
    metrics: RegulationMetrics


def build_flow_graph(cfg: ScenarioConfig) -> tuple[maxflow.FlowGraph, dict[str, int], dict[str, int]]:
    """Super-source/super-sink flow graph for a scenario.

    Supply edges are inserted in ascending marginal cost so the breadth-first
    augmentation reaches cheap producers first; demand edges (one per
    substation) start at zero and are driven by the auction.
    """
    graph = maxflow.FlowGraph()
    for junction in cfg.junctions:
        graph.add_node(junction)
    supply_edge_of: dict[str, int] = {}
    for prod in sorted(cfg.producers, key=lambda p: (p.marginal_cost, p.id)):
        graph.add_node(prod.node)
        supply_edge_of[prod.id] = graph.add_edge(
            graph.source, prod.node, prod.capacity, prod.marginal_cost
        )
    for edge in cfg.edges:
        graph.add_edge(edge.tail, edge.head, edge.capacity, edge.cost)
    demand_edge_of: dict[str, int] = {}
    for mg in cfg.microgrids:
        graph.add_node(mg.substation_node)
        demand_edge_of[mg.id] = graph.add_edge(mg.substation_node, graph.sink, 0)
    return graph, demand_edge_of, supply_edge_of


# ---------------------------------------------------------------------------
# Sequence A
# ---------------------------------------------------------------------------

def sequence_a_house(house: House, granularity: int) -> tuple[frozenset[str], int]:
    """Primary allocation: mandatory devices plus the best fit in the forecast.

    Returns the tentative device set and the mandatory shortfall (nonzero
    when the forecast cannot even cover the devices already in use).
    """
    mandatory = mandatory_load(house)
    tentative = {d.id for d in house.devices if d.current_priority == 0}
    capacity = max(house.forecast - mandatory, 0)
    deferrable = [d for d in house.devices if d.current_priority >= 1]
    if deferrable and capacity > 0:
        total = sum(effective_weight(d) for d in deferrable)
        if total <= capacity:
            tentative.update(d.id for d in deferrable)
        else:
            items = tuple(
                KnapsackItem(d.id, effective_weight(d), d.utility) for d in deferrable
            )
            tentative.update(knapsack.pick(items, capacity, granularity).chosen)
    return frozenset(tentative), max(mandatory - house.forecast, 0)


def sequence_a(houses: list[House], granularity: int = 1) -> dict[str, tuple[frozenset[str], int]]:
    return {h.id: sequence_a_house(h, granularity) for h in houses}


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------

class Engine:
    """Single-writer tick loop over a deep-copied scenario state."""

    def __init__(self, config: ScenarioConfig, record_details: bool = True) -> None:
        self.cfg = config
        self.record_details = record_details
        self.houses: list[House] = copy.deepcopy(config.houses)
        self.houses_by_id = {h.id: h for h in self.houses}
        self.microgrids = copy.deepcopy(config.microgrids)
        self.houses_of = {
            mg.id: [self.houses_by_id[hid] for hid in mg.house_ids] for mg in self.microgrids
        }
        self.producers = sorted(
            copy.deepcopy(config.producers), key=lambda p: (p.marginal_cost, p.id)
        )
        self.total_capacity = sum(p.capacity for p in self.producers)
        self._mg_pos = {mg.id: i for i, mg in enumerate(self.microgrids)}
        self.graph, self.demand_edge_of, self.supply_edge_of = build_flow_graph(config)
        self.results: list[TickResult] = []
        self.production_history: list[int] = []
        for house in self.houses:
            if house.forecast == 0:
                house.forecast = min_required(house)
        # memos keyed on the exact inputs of each per-house solve; a few
        # entries per house so short state cycles keep hitting
        self._util_memo: dict[str, tuple] = {}
        self._seqa_memo: dict[str, _Memo] = {}
        self._strat_memo: dict[str, _Memo] = {}
        self._seqd_memo: dict[str, _Memo] = {}
        self._alpha_memo: dict[str, _Memo] = {}
        self._deliverable: int | None = None

    # -- state fingerprints ------------------------------------------------

    def _device_key(self, house: House) -> tuple:
        return tuple(
            (d.current_priority, effective_weight(d), d.state_of_charge)
            for d in house.devices
        )

    # -- tick --------------------------------------------------------------

    def run(self, ticks: int | None = None) -> list[TickResult]:
        for _ in range(self.cfg.horizon if ticks is None else ticks):
            self.tick()
        return self.results

    def tick(self) -> TickResult:
        index = len(self.results)
        houses = self.houses

        for house in houses:
            key = self._device_key(house)
            if self._util_memo.get(house.id) != key:
                refresh_utilities(house)
                self._util_memo[house.id] = key

        gross = sum(effective_weight(d) for h in houses for d in h.devices)

        prognostic = sum(h.forecast for h in houses)
        families = DEFAULT_FAMILIES
        if self.total_capacity > prognostic:
            families = DEFAULT_FAMILIES + (OVER_PRODUCTION,)
        elif self.total_capacity < prognostic:
            families = DEFAULT_FAMILIES + (OVER_CONSUMPTION,)

        alphas: dict[str, Fraction] = {}
        for mg in self.microgrids:
            mg_houses = self.houses_of[mg.id]
            akey = tuple(self._util_memo[h.id] for h in mg_houses)
            memo = self._alpha_memo.setdefault(mg.id, _Memo())
            alpha = memo.get(akey)
            if alpha is None:
                alpha = compute_alpha(mg_houses, self.cfg.alpha_mode)
                memo.put(akey, alpha)
            mg.alpha = alpha
            alphas[mg.id] = alpha

        # Sequence A
        for house in houses:
            key = (self._util_memo[house.id], house.forecast)
            memo = self._seqa_memo.setdefault(house.id, _Memo())
            if memo.get(key) is None:
                memo.put(key, sequence_a_house(house, self.cfg.granularity))

        # Sequence B
        candidates = {}
        for house in houses:
            alpha = alphas[house.microgrid_id]
            key = (self._util_memo[house.id], house.forecast, alpha, families)
            memo = self._strat_memo.setdefault(house.id, _Memo())
            cand = memo.get(key)
            if cand is None:
                cand = generate_strategies(house, StrategyContext(alpha=alpha, families=families))
                memo.put(key, cand)
            candidates[house.id] = cand
        bids = collect_bids(self.microgrids, self.houses_by_id, candidates)
        grants, final_bids, consensus = consensus_loop(
            self.graph,
            self.demand_edge_of,
            bids,
            self.houses_by_id,
            candidates,
            self.cfg.feedback_rounds,
        )

        # Sequence C
        caps = {self.demand_edge_of[mg]: grant for mg, grant in grants.items()}
        route = maxflow.update_incremental(self.graph, caps)
        supply = route.value
        deliverable = self._deliverable_supply()

        # Sequence D
        dist = self._sequence_d(final_bids, grants)

        for house in houses:
            house.allocation = dist.allocations.get(house.id, 0)
            pos = self._mg_pos.get(house.microgrid_id)
            house.selected_strategy = (
                final_bids[pos].bundle.get(house.id) if pos is not None else None
            )

        achieved = sum(
            sum(d.utility for d in h.devices if d.id in dist.served.get(h.id, ()))
            for h in houses
        )

        self._update_priorities(dist)
        self._update_prognostics(dist)

        self.production_history.append(supply)
        metrics = regulation_metrics(self.production_history)

        details = self.record_details
        result = TickResult(
            tick=index,
            supply=supply,
            demand=consensus.demand,
            gap=consensus.gap,
            gap_history=consensus.history,
            rounds=consensus.round,
            allocations=dict(dist.allocations) if details else {},
            served_wh=dict(dist.served_wh) if details else {},
            served={h: frozenset(s) for h, s in dist.served.items()} if details else {},
            edge_flows=tuple(self.graph.flows) if details else (),
            unserved_mandatory=sum(dist.unserved.values()),
            unserved_by_house={h: v for h, v in dist.unserved.items() if v} if details else {},
            spilled=dist.spilled,
            battery_discharged=dist.discharged_total,
            gross=gross,
            net=sum(dist.allocations.values()),
            achieved_utility=achieved,
            deliverable=deliverable,
            metrics=metrics,
        )
        self.results.append(result)
        return result

    def _deliverable_supply(self) -> int:
        """What producers plus network could push if demand were unbounded.

        Depends only on the static supply and network capacities, so it is
        computed once and cached.
        """
        if self._deliverable is None:
            scratch = self.graph.copy()
            big = sum(scratch.caps[e] for e in maxflow.supply_edges(scratch))
            res = maxflow.update_incremental(
                scratch, {e: big for e in maxflow.demand_edges(scratch)}
            )
            self._deliverable = res.value
        return self._deliverable

    # -- Sequence D ----------------------------------------------------------

    def _sequence_d(self, final_bids: list[Bid], grants: dict[str, int]) -> "Distribution":
        dist = Distribution()
        for bid in final_bids:
            self._distribute_microgrid(bid, grants[bid.microgrid_id], dist)
        for house in self.houses:
            dist.served.setdefault(house.id, set())
            dist.served_wh.setdefault(house.id, 0)
            dist.allocations.setdefault(house.id, 0)
            dist.unserved[house.id] = sum(
                effective_weight(d)
                for d in house.devices
                if d.current_priority == 0 and d.id not in dist.served[house.id]
            )
        return dist

    def _distribute_microgrid(self, bid: Bid, grant: int, dist: "Distribution") -> None:
        shares = largest_remainder(grant, list(bid.house_quantities.items()))
        pool = 0
        for hid, share in shares.items():
            house = self.houses_by_id[hid]
            strategy = bid.bundle.get(hid)
            discharge_pairs = strategy.battery_discharge if strategy is not None else ()
            key = (self._device_key(house), share, discharge_pairs)
            memo = self._seqd_memo.setdefault(hid, _Memo())
            hit = memo.get(key)
            if hit is None:
                hit = _serve_house(house, share, discharge_pairs, self.cfg.granularity)
                memo.put(key, hit)
            served, served_wh, charged, leftover = hit
            dist.served[hid] = set(served)
            dist.served_wh[hid] = served_wh
            dist.charged[hid] = dict(charged)
            dist.discharged[hid] = dict(discharge_pairs)
            dist.discharged_total += sum(amt for _, amt in discharge_pairs)
            pool += leftover

        # pass 2: pool leftovers, serve still-unserved devices across houses
        if pool > 0:
            labels: list[tuple[str, str]] = []
            items: list[KnapsackItem] = []
            for hid in shares:
                house = self.houses_by_id[hid]
                for dev in house.devices:
                    if dev.id in dist.served[hid] or dev.id in dist.discharged.get(hid, ()):
                        continue
                    items.append(
                        KnapsackItem(f"{len(labels):06d}", effective_weight(dev), dev.utility)
                    )
                    labels.append((hid, dev.id))
            if items:
                sol = knapsack.pick(tuple(items), pool, self.cfg.granularity)
                for label in sol.chosen:
                    hid, dev_id = labels[int(label)]
                    house = self.houses_by_id[hid]
                    dev = house.device_map()[dev_id]
                    w = effective_weight(dev)
                    dist.served[hid].add(dev_id)
                    dist.served_wh[hid] += w
                    if dev.is_storage():
                        dist.charged.setdefault(hid, {})[dev_id] = w
                    pool -= w
        dist.spilled += pool

        for hid in shares:
            strategy = bid.bundle.get(hid)
            discharge = (
                sum(amt for _, amt in strategy.battery_discharge) if strategy else 0
            )
            # grid-attributable consumption; unused discharge ends in the pool
            dist.allocations[hid] = max(dist.served_wh[hid] - discharge, 0)

    # -- post-distribution updates -------------------------------------------

    def _update_priorities(self, dist: "Distribution") -> None:
        for house in self.houses:
            update_priorities(
                house,
                dist.served[house.id],
                charged=dist.charged.get(house.id, {}),
                discharged=dist.discharged.get(house.id, {}),
            )

    def _update_prognostics(self, dist: "Distribution") -> None:
        for house in self.houses:
            house.forecast = update_prognostics(
                house, dist.served_wh[house.id], self.cfg.beta
            )


class _Memo:
    """Tiny FIFO cache; big enough to absorb short state cycles."""

    __slots__ = ("data", "cap")

    def __init__(self, cap: int = 4) -> None:
        self.data: dict = {}
        self.cap = cap

    def get(self, key):
        return self.data.get(key)

    def put(self, key, value) -> None:
        if key not in self.data and len(self.data) >= self.cap:
            self.data.pop(next(iter(self.data)))
        self.data[key] = value


class Distribution:
    """Mutable scratch record of one tick's Sequence D."""

    def __init__(self) -> None:
        self.served: dict[str, set[str]] = {}
        self.served_wh: dict[str, int] = {}
        self.charged: dict[str, dict[str, int]] = {}
        self.discharged: dict[str, dict[str, int]] = {}
        self.discharged_total = 0
        self.allocations: dict[str, int] = {}
        self.unserved: dict[str, int] = {}
        self.spilled = 0


def _serve_house(
    house: House,
    share: int,
    discharge_pairs: tuple[tuple[str, int], ...],
    granularity: int,
) -> tuple[frozenset[str], int, tuple[tuple[str, int], ...], int]:
    """Serve one house from its share plus any battery discharge.

    Mandatory devices first (ascending id), then a knapsack over the
    deferrable rest. Returns (served ids, served Wh, charged amounts,
    leftover Wh returned to the microgrid pool).
    """
    suppliers = {dev for dev, _ in discharge_pairs}
    capacity = share + sum(amount for _, amount in discharge_pairs)
    served: set[str] = set()
    served_wh = 0
    charged: list[tuple[str, int]] = []

    for dev in sorted(house.devices, key=lambda d: d.id):
        if dev.current_priority != 0 or dev.id in suppliers:
            continue
        w = effective_weight(dev)
        if served_wh + w <= capacity:
            served.add(dev.id)
            served_wh += w
            if dev.is_storage():
                charged.append((dev.id, w))

    deferrable = [
        d for d in house.devices if d.current_priority >= 1 and d.id not in suppliers
    ]
    remaining = capacity - served_wh
    if deferrable and remaining >= 0:
        total = sum(effective_weight(d) for d in deferrable)
        if total <= remaining:
            chosen = frozenset(d.id for d in deferrable)
        else:
            items = tuple(
                KnapsackItem(d.id, effective_weight(d), d.utility) for d in deferrable
            )
            chosen = knapsack.pick(items, remaining, granularity).chosen
        for dev in deferrable:
            if dev.id in chosen:
                w = effective_weight(dev)
                served.add(dev.id)
                served_wh += w
                if dev.is_storage():
                    charged.append((dev.id, w))

    return frozenset(served), served_wh, tuple(charged), capacity - served_wh


def update_priorities(
    house: House,
    served: set[str] | frozenset[str],
    charged: dict[str, int] | None = None,
    discharged: dict[str, int] | None = None,
) -> None:
    """Advance device urgency after a distribution.

    Served devices reset to their base priority (storage also books its
    charge; a full battery resets too since serving it costs nothing).
    Unserved deferrable devices step one level more urgent per tick, never
    below 1; devices already in use stay at 0. Discharged storage loses
    charge and grows more urgent like any unserved device.
    """
    charged = charged or {}
    discharged = discharged or {}
    for dev in house.devices:
        if dev.id in discharged:
            dev.state_of_charge -= discharged[dev.id]
            if dev.current_priority > 1:
                dev.current_priority -= 1
            continue
        if dev.id in served:
            if dev.is_storage():
                dev.state_of_charge += charged.get(dev.id, 0)
            dev.current_priority = dev.base_priority
        elif dev.current_priority > 1:
            dev.current_priority -= 1


def update_prognostics(house: House, realized: int, beta: Fraction) -> int:
    """Next forecast: exponential smoothing, rounded half-up to whole Wh."""
    blended = Fraction(beta) * realized + (1 - Fraction(beta)) * house.forecast
    return (blended.numerator * 2 + blended.denominator) // (blended.denominator * 2)


# ---------------------------------------------------------------------------
# Metrics over a finished run
# ---------------------------------------------------------------------------

def merit_order_cost(producers: list[Producer], demand: int) -> Fraction:
    """Cost of serving ``demand`` Wh, filling cheapest producers first.

    Demand beyond total capacity is priced at the most expensive producer,
    standing in for peak procurement.
    """
    remaining = demand
    cost = Fraction(0)
    top = Fraction(0)
    for prod in sorted(producers, key=lambda p: (p.marginal_cost, p.id)):
        take = min(remaining, prod.capacity)
        cost += take * prod.marginal_cost
        remaining -= take
        top = max(top, prod.marginal_cost)
    if remaining > 0:
        cost += remaining * top
    return cost


def profit_metric(
    results: list[TickResult],
    producers: list[Producer],
    technology_cost: Fraction | int = 0,
) -> Fraction:
    """Savings of managed (net) vs unmanaged (gross) consumption, less the
    flat cost of the control technology."""
    gross_cost = sum((merit_order_cost(producers, r.gross) for r in results), Fraction(0))
    net_cost = sum((merit_order_cost(producers, r.net) for r in results), Fraction(0))
    return gross_cost - net_cost - Fraction(technology_cost)


def global_optimum_oracle(houses: list[House], supply: int, item_cap: int = ORACLE_ITEM_CAP) -> int:
    """Exact aggregate knapsack over every device with positive utility.

    Only meaningful at desk scale, for reporting the gap between the
    decentralized pipeline and the unreachable global optimum. Zero-utility
    devices can never improve the objective and are pruned before the size
    guard.
    """
    if supply < 0:
        raise ValueError("supply must be >= 0")
    labeled = [
        (effective_weight(d), d.utility)
        for h in houses
        for d in h.devices
        if d.utility > 0
    ]
    if len(labeled) > item_cap:
        raise OracleSizeError(
            f"{len(labeled)} devices exceed the oracle cap of {item_cap}"
        )
    items = tuple(
        KnapsackItem(f"{i:06d}", w, u) for i, (w, u) in enumerate(labeled)
    )
    return knapsack.solve(knapsack.KnapsackInstance(items, supply)).total_value
