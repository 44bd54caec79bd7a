"""Domain types for the three-layer grid: devices, houses, microgrids, producers.

Energy is integer Wh per tick throughout; fractional inputs are rounded
half-up at ingestion so conservation checks can be exact.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

DEVICE_KINDS = ("load", "battery", "renewable", "ev")
PRODUCER_KINDS = ("base", "peak", "renewable")
STORAGE_KINDS = ("battery", "ev")

MICROGRID_MEAN = "microgrid_mean"


def round_half_up(value: int | float | Fraction) -> int:
    """Round to the nearest integer, halves away from zero-disambiguated up."""
    if isinstance(value, int):
        return value
    frac = Fraction(str(value)) if isinstance(value, float) else Fraction(value)
    return (frac.numerator * 2 + frac.denominator) // (frac.denominator * 2)


# ---------------------------------------------------------------------------
# Core entities
# ---------------------------------------------------------------------------

@dataclass
class Device:
    """One consuming or producing appliance inside a house.

    ``current_priority`` 0 means the device is already in use (mandatory);
    larger values mean more deferrable. ``utility`` is recomputed every tick.
    """
    id: str
    kind: str = "load"
    weight: int = 0  # Wh per tick
    base_priority: int = 0
    current_priority: int = 0
    utility: int | Fraction = 0
    battery_capacity: int = 0
    state_of_charge: int = 0

    def is_storage(self) -> bool:
        return self.kind in STORAGE_KINDS


def effective_weight(device: Device) -> int:
    """Energy the device would draw this tick.

    Storage devices charge at most up to their remaining headroom, so a full
    battery weighs zero (it is served for free and never wastes allocation).
    """
    if device.is_storage():
        return min(device.weight, device.battery_capacity - device.state_of_charge)
    return device.weight


@dataclass
class House:
    """A local level: one house or factory holding devices."""
    id: str
    microgrid_id: str
    devices: list[Device] = field(default_factory=list)
    forecast: int = 0  # prognostic Wh for the next tick
    allocation: int = 0  # Wh received this tick
    selected_strategy: object | None = None

    def device_map(self) -> dict[str, Device]:
        return {d.id: d for d in self.devices}

    def is_done(self) -> bool:
        """True when every device is already in use (no deferrable demand)."""
        return all(d.current_priority == 0 for d in self.devices)


def min_required(house: House) -> int:
    """Minimal energy the house needs: devices at priority <= 1."""
    return sum(effective_weight(d) for d in house.devices if d.current_priority <= 1)


def mandatory_load(house: House) -> int:
    """Load of devices already in use (priority 0); must be served first."""
    return sum(effective_weight(d) for d in house.devices if d.current_priority == 0)


@dataclass
class Microgrid:
    """An eco-district bounded by its upstream substation."""
    id: str
    substation_node: str
    house_ids: list[str] = field(default_factory=list)
    booked: int = 0
    alpha: Fraction = Fraction(0)


@dataclass
class Producer:
    id: str
    node: str
    capacity: int = 0  # Wh per tick
    marginal_cost: Fraction = Fraction(0)  # currency per Wh
    kind: str = "base"


@dataclass
class NetworkEdge:
    """Directed capacitated link of the T&D network."""
    tail: str
    head: str
    capacity: int
    cost: Fraction = Fraction(0)  # stored for reporting; routing ignores it


@dataclass
class ScenarioConfig:
    houses: list[House] = field(default_factory=list)
    microgrids: list[Microgrid] = field(default_factory=list)
    producers: list[Producer] = field(default_factory=list)
    edges: list[NetworkEdge] = field(default_factory=list)
    junctions: list[str] = field(default_factory=list)
    tick_length: int = 300  # seconds; one tick is five simulated minutes
    horizon: int = 288
    seed: int = 0
    feedback_rounds: int = 3
    alpha_mode: str | Fraction = MICROGRID_MEAN
    granularity: int = 1  # Wh bucket for knapsack normalization
    beta: Fraction = Fraction(1, 2)  # forecast smoothing factor


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _node_universe(cfg: ScenarioConfig) -> set[str]:
    nodes = set(cfg.junctions)
    nodes.update(p.node for p in cfg.producers)
    nodes.update(m.substation_node for m in cfg.microgrids)
    return nodes


def validate_scenario(cfg: ScenarioConfig) -> list[str]:
    """Check every type invariant; returns human-readable violations.

    Pure and idempotent: nothing is mutated, an empty list means the
    scenario is well formed.
    """
    problems: list[str] = []
    house_ids: set[str] = set()
    mg_ids = {m.id for m in cfg.microgrids}

    if len(mg_ids) != len(cfg.microgrids):
        problems.append("duplicate microgrid ids")
    substations = [m.substation_node for m in cfg.microgrids]
    if len(set(substations)) != len(substations):
        problems.append("microgrids sharing a substation node")

    for house in cfg.houses:
        if house.id in house_ids:
            problems.append(f"duplicate house id {house.id!r}")
        house_ids.add(house.id)
        if house.microgrid_id not in mg_ids:
            problems.append(f"house {house.id!r} references unknown microgrid {house.microgrid_id!r}")
        if house.forecast < 0:
            problems.append(f"house {house.id!r} has negative forecast")
        seen_dev: set[str] = set()
        for dev in house.devices:
            tag = f"device {house.id!r}/{dev.id!r}"
            if dev.id in seen_dev:
                problems.append(f"duplicate {tag}")
            seen_dev.add(dev.id)
            if dev.kind not in DEVICE_KINDS:
                problems.append(f"{tag} has unknown kind {dev.kind!r}")
            if dev.weight < 0:
                problems.append(f"{tag} has negative weight")
            if dev.base_priority < 0 or dev.current_priority < 0:
                problems.append(f"{tag} has negative priority")
            if dev.is_storage():
                if not 0 <= dev.state_of_charge <= dev.battery_capacity:
                    problems.append(f"{tag} state of charge outside [0, capacity]")
            elif dev.battery_capacity or dev.state_of_charge:
                problems.append(f"{tag} carries storage fields but is not storage")

    for mg in cfg.microgrids:
        for hid in mg.house_ids:
            if hid not in house_ids:
                problems.append(f"microgrid {mg.id!r} lists unknown house {hid!r}")
    listed = [hid for m in cfg.microgrids for hid in m.house_ids]
    if len(listed) != len(set(listed)):
        problems.append("a house is listed under more than one microgrid")

    producer_ids: set[str] = set()
    for prod in cfg.producers:
        if prod.id in producer_ids:
            problems.append(f"duplicate producer id {prod.id!r}")
        producer_ids.add(prod.id)
        if prod.capacity < 0:
            problems.append(f"producer {prod.id!r} has negative capacity")
        if prod.marginal_cost < 0:
            problems.append(f"producer {prod.id!r} has negative marginal cost")
        if prod.kind not in PRODUCER_KINDS:
            problems.append(f"producer {prod.id!r} has unknown kind {prod.kind!r}")

    nodes = _node_universe(cfg)
    for i, edge in enumerate(cfg.edges):
        if edge.tail not in nodes:
            problems.append(f"edge #{i} references missing node {edge.tail!r}")
        if edge.head not in nodes:
            problems.append(f"edge #{i} references missing node {edge.head!r}")
        if edge.capacity < 0:
            problems.append(f"edge #{i} ({edge.tail} -> {edge.head}) has negative capacity")

    if cfg.horizon < 1:
        problems.append("horizon must be >= 1")
    if cfg.feedback_rounds < 1:
        problems.append("feedback_rounds must be >= 1")
    if cfg.granularity < 1:
        problems.append("granularity must be >= 1")
    if cfg.tick_length < 1:
        problems.append("tick_length must be >= 1")
    if isinstance(cfg.alpha_mode, str) and cfg.alpha_mode != MICROGRID_MEAN:
        problems.append(f"unknown alpha_mode {cfg.alpha_mode!r}")
    if not isinstance(cfg.alpha_mode, str) and cfg.alpha_mode < 0:
        problems.append("fixed alpha must be >= 0")
    if not 0 <= cfg.beta <= 1:
        problems.append("beta must lie in [0, 1]")

    problems.extend(_unreachable_substations(cfg, nodes))
    return problems


def _unreachable_substations(cfg: ScenarioConfig, nodes: set[str]) -> list[str]:
    """Every substation must be reachable from at least one producer node."""
    adjacency: dict[str, list[str]] = {n: [] for n in nodes}
    for edge in cfg.edges:
        if edge.tail in adjacency and edge.head in nodes:
            adjacency[edge.tail].append(edge.head)
    reached: set[str] = set()
    queue = deque(p.node for p in cfg.producers if p.node in adjacency)
    reached.update(queue)
    while queue:
        node = queue.popleft()
        for nxt in adjacency[node]:
            if nxt not in reached:
                reached.add(nxt)
                queue.append(nxt)
    return [
        f"substation {m.substation_node!r} of microgrid {m.id!r} unreachable from any producer"
        for m in cfg.microgrids
        if m.substation_node not in reached
    ]
