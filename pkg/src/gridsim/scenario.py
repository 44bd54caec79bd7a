"""Deterministic random scenario construction.

Topology follows the usual grid shape: producers hang off a meshed junction
ring, substations reach the ring through short chains, houses sit behind
their substation. Identical seeds give identical configs, and any generated
config passes validation.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction

from .model import (
    Device,
    House,
    Microgrid,
    NetworkEdge,
    Producer,
    ScenarioConfig,
    min_required,
)


@dataclass(frozen=True)
class TopologyParams:
    houses_per_microgrid: int = 5
    devices_min: int = 3
    devices_max: int = 8
    chain_length: int = 2
    max_weight: int = 20
    max_priority: int = 5
    storage_rate: float = 0.1  # chance a deferrable device is a battery
    supply_slack: Fraction = Fraction(13, 10)  # capacity vs expected demand
    horizon: int = 288
    feedback_rounds: int = 3
    granularity: int = 1


DEFAULT_TOPOLOGY = TopologyParams()


def _make_device(rng: random.Random, index: int, params: TopologyParams) -> Device:
    weight = rng.randint(1, params.max_weight)
    priority = rng.randint(0, params.max_priority)
    if priority >= 1 and rng.random() < params.storage_rate:
        capacity = weight * rng.randint(2, 6)
        return Device(
            id=f"d{index:02d}",
            kind="battery",
            weight=weight,
            base_priority=priority,
            current_priority=priority,
            battery_capacity=capacity,
            state_of_charge=rng.randint(0, capacity),
        )
    return Device(
        id=f"d{index:02d}",
        kind="load",
        weight=weight,
        base_priority=priority,
        current_priority=priority,
    )


def random_scenario(
    seed: int,
    n_houses: int,
    n_producers: int,
    params: TopologyParams = DEFAULT_TOPOLOGY,
) -> ScenarioConfig:
    """Seeded scenario over the ring-and-chains topology described above."""
    if n_houses < 1 or n_producers < 1:
        raise ValueError("need at least one house and one producer")
    rng = random.Random(seed)

    houses: list[House] = []
    microgrids: list[Microgrid] = []
    n_microgrids = -(-n_houses // params.houses_per_microgrid)
    for m in range(n_microgrids):
        mg = Microgrid(id=f"M{m:03d}", substation_node=f"sub{m:03d}")
        microgrids.append(mg)
    for i in range(n_houses):
        mg = microgrids[i // params.houses_per_microgrid]
        n_devices = rng.randint(params.devices_min, params.devices_max)
        house = House(
            id=f"H{i:04d}",
            microgrid_id=mg.id,
            devices=[_make_device(rng, d, params) for d in range(n_devices)],
        )
        house.forecast = min_required(house) + rng.randint(
            0, max(params.max_weight, 1)
        )
        houses.append(house)
        mg.house_ids.append(house.id)

    # junction ring with cross chords forms the meshed producer core
    n_ring = max(3, n_producers)
    ring = [f"J{j:03d}" for j in range(n_ring)]
    expected_demand = sum(h.forecast for h in houses)
    trunk = int(expected_demand * params.supply_slack) + 1

    edges: list[NetworkEdge] = []
    for j in range(n_ring):
        edges.append(NetworkEdge(ring[j], ring[(j + 1) % n_ring], trunk))
        edges.append(NetworkEdge(ring[(j + 1) % n_ring], ring[j], trunk))
    if n_ring > 3:
        for j in range(0, n_ring, 2):
            edges.append(NetworkEdge(ring[j], ring[(j + 2) % n_ring], trunk))

    producers: list[Producer] = []
    per_producer = -(-int(expected_demand * params.supply_slack) // n_producers)
    kinds = ("base", "peak", "renewable")
    for p in range(n_producers):
        node = f"plant{p:03d}"
        producers.append(
            Producer(
                id=f"P{p:03d}",
                node=node,
                capacity=per_producer,
                marginal_cost=Fraction(rng.randint(1, 10)),
                kind=kinds[p % len(kinds)],
            )
        )
        edges.append(NetworkEdge(node, ring[p % n_ring], per_producer))

    junctions = list(ring)
    for m, mg in enumerate(microgrids):
        local_demand = sum(
            houses[i].forecast for i in range(len(houses)) if houses[i].microgrid_id == mg.id
        )
        feeder = int(local_demand * params.supply_slack) + 1
        prev = ring[m % n_ring]
        for c in range(params.chain_length):
            node = f"c{m:03d}_{c}"
            junctions.append(node)
            edges.append(NetworkEdge(prev, node, feeder))
            prev = node
        edges.append(NetworkEdge(prev, mg.substation_node, feeder))

    return ScenarioConfig(
        houses=houses,
        microgrids=microgrids,
        producers=producers,
        edges=edges,
        junctions=junctions,
        horizon=params.horizon,
        seed=seed,
        feedback_rounds=params.feedback_rounds,
        granularity=params.granularity,
    )
