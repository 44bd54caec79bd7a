"""Energy booking: bids per microgrid, auction rounds with rationing, and
the bounded feedback loop that converges supply and demand inside one tick.

Grants never exceed bids and adjusted bids never grow, so the booking gap is
non-increasing over feedback rounds (asserted by the property tests).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from . import maxflow
from .model import House, Microgrid, mandatory_load
from .strategy import Strategy, bundle_quantity, select_strategy


@dataclass
class Bid:
    """One microgrid's booking request: chosen plan per house, aggregated."""
    microgrid_id: str
    quantity: int
    score: Fraction
    bundle: dict[str, Strategy | None]
    house_quantities: dict[str, int]
    mandatory: dict[str, int]
    shortfall: dict[str, int] = field(default_factory=dict)


@dataclass
class ConsensusState:
    round: int
    supply: int
    demand: int
    gap: int
    history: tuple[int, ...]


@dataclass(frozen=True)
class RegulationMetrics:
    peak_avg_ratio: float
    variance: float
    max_delta: int


# ---------------------------------------------------------------------------
# Bids
# ---------------------------------------------------------------------------

def collect_bids(
    microgrids: list[Microgrid],
    houses_by_id: dict[str, House],
    candidates: dict[str, list[Strategy]],
) -> list[Bid]:
    """One bid per microgrid from each house's best candidate strategy.

    Houses without candidates (done, or nothing generated) book their
    mandatory load and contribute no score.
    """
    bids = []
    for mg in microgrids:
        bundle: dict[str, Strategy | None] = {}
        quantities: dict[str, int] = {}
        mandatory: dict[str, int] = {}
        score = Fraction(0)
        for hid in mg.house_ids:
            house = houses_by_id[hid]
            chosen = select_strategy(candidates.get(hid, []))
            bundle[hid] = chosen
            quantities[hid] = bundle_quantity(house, chosen)
            mandatory[hid] = mandatory_load(house)
            if chosen is not None:
                score += chosen.score
        bids.append(
            Bid(
                microgrid_id=mg.id,
                quantity=sum(quantities.values()),
                score=score,
                bundle=bundle,
                house_quantities=quantities,
                mandatory=mandatory,
            )
        )
    return bids


def largest_remainder(
    total: int,
    weights: list[tuple[str, int | Fraction]],
    caps: dict[str, int] | None = None,
) -> dict[str, int]:
    """Split ``total`` proportionally to ``weights`` in whole Wh.

    Floors first, then hands out the leftover by largest fractional
    remainder; remainder ties go to the earlier entry, so callers control
    tie-breaking through list order. With per-key caps, whatever the capped
    proportional split cannot absorb is dumped into the earliest entries
    that still have headroom.
    """
    denom = sum(w for _, w in weights)
    if denom == 0 or total <= 0:
        return {key: 0 for key, _ in weights}
    shares: dict[str, int] = {}
    remainders: list[tuple[Fraction, int, str]] = []
    for position, (key, w) in enumerate(weights):
        exact = Fraction(total) * Fraction(w) / Fraction(denom)
        floor = int(exact)
        if caps is not None:
            floor = min(floor, caps[key])
        shares[key] = floor
        remainders.append((exact - floor, position, key))
    leftover = total - sum(shares.values())
    for _, _, key in sorted(remainders, key=lambda t: (-t[0], t[1])):
        if leftover <= 0:
            break
        if caps is not None and shares[key] >= caps[key]:
            continue
        shares[key] += 1
        leftover -= 1
    if leftover > 0 and caps is not None:
        for key, _ in weights:
            room = caps[key] - shares[key]
            if room > 0:
                take = min(room, leftover)
                shares[key] += take
                leftover -= take
                if leftover == 0:
                    break
    return shares


# ---------------------------------------------------------------------------
# Auction rounds
# ---------------------------------------------------------------------------

def _rationing_order(bids: list[Bid]) -> list[Bid]:
    return sorted(bids, key=lambda b: (-b.score, b.microgrid_id))


def run_auction_round(
    graph: maxflow.FlowGraph,
    demand_edge_of: dict[str, int],
    bids: list[Bid],
) -> dict[str, int]:
    """Grant deliverable energy against the bids.

    Feasible networks grant every bid in full. Otherwise the deliverable
    total is rationed proportionally to bid score (equal split by quantity
    when no bid carries a positive score), and whatever the network cannot
    place on those targets is routed to the highest scores first, so higher
    joint utility is rationed last.
    """
    caps = {demand_edge_of[b.microgrid_id]: b.quantity for b in bids}
    result = maxflow.update_incremental(graph, caps)
    if all(graph.flows[e] == graph.caps[e] for e in caps):
        return {b.microgrid_id: b.quantity for b in bids}

    deliverable = result.value
    ordered = _rationing_order(bids)
    if any(b.score > 0 for b in ordered):
        weights = [(b.microgrid_id, max(b.score, Fraction(0))) for b in ordered]
    else:
        weights = [(b.microgrid_id, Fraction(b.quantity)) for b in ordered]
    quantities = {b.microgrid_id: b.quantity for b in bids}
    targets = largest_remainder(deliverable, weights, caps=quantities)

    target_caps = {demand_edge_of[m]: t for m, t in targets.items()}
    maxflow.update_incremental(graph, target_caps)
    if all(graph.flows[e] == graph.caps[e] for e in target_caps):
        # every proportional target routed; the targets already exhaust the
        # deliverable, so there is nothing left to place
        return dict(targets)

    # some target sits behind a saturated cut: top the caps back up toward
    # the full bids in score order, so higher joint utility is rationed last
    for bid in ordered:
        edge = demand_edge_of[bid.microgrid_id]
        maxflow.update_incremental(graph, {edge: bid.quantity})
    return {b.microgrid_id: graph.flows[demand_edge_of[b.microgrid_id]] for b in bids}


def feedback_adjust(
    bid: Bid,
    houses_by_id: dict[str, House],
    candidates: dict[str, list[Strategy]],
    grant: int,
) -> Bid:
    """Refit each house into its proportional share of the grant.

    A house keeps the best strategy that still fits; with none fitting it
    falls back to mandatory load, flagged short when even that exceeds the
    share. Bid quantity never increases.
    """
    if grant >= bid.quantity:
        return bid
    shares = largest_remainder(grant, list(bid.house_quantities.items()))
    bundle: dict[str, Strategy | None] = {}
    quantities: dict[str, int] = {}
    shortfall: dict[str, int] = {}
    score = Fraction(0)
    for hid, previous_q in bid.house_quantities.items():
        share = shares[hid]
        fitting = [s for s in candidates.get(hid, []) if s.total_weight <= share]
        chosen = select_strategy(fitting)
        if chosen is not None:
            bundle[hid] = chosen
            quantities[hid] = chosen.total_weight
            score += chosen.score
        else:
            bundle[hid] = None
            need = bid.mandatory[hid]
            quantities[hid] = need
            if share < need:
                shortfall[hid] = need - share
    return Bid(
        microgrid_id=bid.microgrid_id,
        quantity=sum(quantities.values()),
        score=score,
        bundle=bundle,
        house_quantities=quantities,
        mandatory=dict(bid.mandatory),
        shortfall=shortfall,
    )


def consensus_loop(
    graph: maxflow.FlowGraph,
    demand_edge_of: dict[str, int],
    bids: list[Bid],
    houses_by_id: dict[str, House],
    candidates: dict[str, list[Strategy]],
    feedback_rounds: int,
) -> tuple[dict[str, int], list[Bid], ConsensusState]:
    """Auction plus feedback until the booking gap closes or rounds run out."""
    if feedback_rounds < 1:
        raise ValueError("feedback_rounds must be >= 1")
    history: list[int] = []
    grants: dict[str, int] = {b.microgrid_id: 0 for b in bids}
    rounds = 0
    for _ in range(feedback_rounds):
        rounds += 1
        grants = run_auction_round(graph, demand_edge_of, bids)
        demand = sum(b.quantity for b in bids)
        supply = sum(grants.values())
        gap = demand - supply
        history.append(gap)
        if gap == 0:
            break
        bids = [
            feedback_adjust(b, houses_by_id, candidates, grants[b.microgrid_id])
            for b in bids
        ]
    supply = sum(grants.values())
    state = ConsensusState(
        round=rounds,
        supply=supply,
        demand=supply + history[-1],  # demand as the last auction saw it
        gap=history[-1],
        history=tuple(history),
    )
    return grants, bids, state


# ---------------------------------------------------------------------------
# Regulation metrics
# ---------------------------------------------------------------------------

def regulation_metrics(series: list[int]) -> RegulationMetrics:
    """Smoothness indicators of a production series (reporting only)."""
    if not series:
        raise ValueError("need at least one tick of history")
    n = len(series)
    total = sum(series)
    peak = max(series)
    ratio = 1.0 if total == 0 else float(Fraction(peak * n, total))
    sq = sum(x * x for x in series)
    variance = float(Fraction(n * sq - total * total, n * n))
    max_delta = max((abs(b - a) for a, b in zip(series, series[1:])), default=0)
    return RegulationMetrics(ratio, variance, max_delta)
