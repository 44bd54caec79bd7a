"""Scenario ingestion and results persistence.

Scenario files are hand-editable JSON with integer Wh quantities; rational
fields (beta, a fixed alpha, marginal costs) may be written as numbers or
"n/d" strings and round-trip exactly. Timeseries output is plain CSV with a
fixed column order, byte-stable across reruns of the same scenario and seed.
"""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from .model import (
    Device,
    House,
    Microgrid,
    NetworkEdge,
    Producer,
    ScenarioConfig,
    MICROGRID_MEAN,
    round_half_up,
    validate_scenario,
)

SCHEMA_VERSION = 1


class ScenarioError(Exception):
    """Parse or validation failure, carrying every individual problem."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


def _fraction(value, where: str) -> Fraction:
    if isinstance(value, bool):
        raise ScenarioError([f"{where}: expected a number, got a boolean"])
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(str(value))
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ScenarioError([f"{where}: bad rational {value!r} ({exc})"]) from None
    raise ScenarioError([f"{where}: expected a number, got {type(value).__name__}"])


def _wh(value, where: str) -> int:
    return round_half_up(_fraction(value, where))


def _take(obj: dict, where: str, required: tuple[str, ...], optional: tuple[str, ...] = ()):
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise ScenarioError(
            [f"{where}: unknown field {name!r}" for name in sorted(unknown)]
        )
    missing = [name for name in required if name not in obj]
    if missing:
        raise ScenarioError([f"{where}: missing field {name!r}" for name in missing])


def _parse_device(obj: dict, where: str) -> Device:
    _take(obj, where, ("id", "weight", "priority"),
          ("kind", "battery_capacity", "state_of_charge"))
    priority = int(obj["priority"])
    return Device(
        id=str(obj["id"]),
        kind=str(obj.get("kind", "load")),
        weight=_wh(obj["weight"], where),
        base_priority=priority,
        current_priority=priority,
        battery_capacity=_wh(obj.get("battery_capacity", 0), where),
        state_of_charge=_wh(obj.get("state_of_charge", 0), where),
    )


def parse_scenario(data: dict) -> ScenarioConfig:
    """Build a config from decoded JSON; raises ScenarioError on any problem."""
    if not isinstance(data, dict):
        raise ScenarioError(["scenario root must be an object"])
    _take(
        data,
        "scenario",
        ("version", "houses", "microgrids", "producers", "edges"),
        ("junctions", "tick_length", "horizon", "seed", "feedback_rounds",
         "alpha_mode", "granularity", "beta"),
    )
    if data["version"] != SCHEMA_VERSION:
        raise ScenarioError(
            [f"scenario version {data['version']!r} unsupported (expected {SCHEMA_VERSION})"]
        )

    houses = []
    for hobj in data["houses"]:
        where = f"house {hobj.get('id', '?')!r}"
        _take(hobj, where, ("id", "microgrid", "devices"), ("forecast",))
        houses.append(
            House(
                id=str(hobj["id"]),
                microgrid_id=str(hobj["microgrid"]),
                devices=[_parse_device(d, where) for d in hobj["devices"]],
                forecast=_wh(hobj.get("forecast", 0), where),
            )
        )

    microgrids = []
    for mobj in data["microgrids"]:
        where = f"microgrid {mobj.get('id', '?')!r}"
        _take(mobj, where, ("id", "substation"))
        mg = Microgrid(id=str(mobj["id"]), substation_node=str(mobj["substation"]))
        mg.house_ids = [h.id for h in houses if h.microgrid_id == mg.id]
        microgrids.append(mg)

    producers = []
    for pobj in data["producers"]:
        where = f"producer {pobj.get('id', '?')!r}"
        _take(pobj, where, ("id", "node", "capacity"), ("marginal_cost", "kind"))
        producers.append(
            Producer(
                id=str(pobj["id"]),
                node=str(pobj["node"]),
                capacity=_wh(pobj["capacity"], where),
                marginal_cost=_fraction(pobj.get("marginal_cost", 0), where),
                kind=str(pobj.get("kind", "base")),
            )
        )

    edges = []
    for i, eobj in enumerate(data["edges"]):
        where = f"edge #{i}"
        _take(eobj, where, ("tail", "head", "capacity"), ("cost",))
        edges.append(
            NetworkEdge(
                tail=str(eobj["tail"]),
                head=str(eobj["head"]),
                capacity=_wh(eobj["capacity"], where),
                cost=_fraction(eobj.get("cost", 0), where),
            )
        )

    alpha_mode = data.get("alpha_mode", MICROGRID_MEAN)
    if alpha_mode != MICROGRID_MEAN:
        alpha_mode = _fraction(alpha_mode, "alpha_mode")

    return ScenarioConfig(
        houses=houses,
        microgrids=microgrids,
        producers=producers,
        edges=edges,
        junctions=[str(j) for j in data.get("junctions", [])],
        tick_length=int(data.get("tick_length", 300)),
        horizon=int(data.get("horizon", 288)),
        seed=int(data.get("seed", 0)),
        feedback_rounds=int(data.get("feedback_rounds", 3)),
        alpha_mode=alpha_mode,
        granularity=int(data.get("granularity", 1)),
        beta=_fraction(data.get("beta", Fraction(1, 2)), "beta"),
    )


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read, parse, and validate a scenario file."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"cannot parse {path}: {exc}"]) from None
    cfg = parse_scenario(data)
    problems = validate_scenario(cfg)
    if problems:
        raise ScenarioError(problems)
    return cfg


def _rational_out(value: Fraction):
    return value.numerator if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    out = {
        "version": SCHEMA_VERSION,
        "tick_length": cfg.tick_length,
        "horizon": cfg.horizon,
        "seed": cfg.seed,
        "feedback_rounds": cfg.feedback_rounds,
        "alpha_mode": cfg.alpha_mode
        if isinstance(cfg.alpha_mode, str)
        else _rational_out(Fraction(cfg.alpha_mode)),
        "granularity": cfg.granularity,
        "beta": _rational_out(cfg.beta),
        "junctions": list(cfg.junctions),
        "producers": [
            {
                "id": p.id,
                "node": p.node,
                "capacity": p.capacity,
                "marginal_cost": _rational_out(p.marginal_cost),
                "kind": p.kind,
            }
            for p in cfg.producers
        ],
        "microgrids": [
            {"id": m.id, "substation": m.substation_node} for m in cfg.microgrids
        ],
        "edges": [
            {"tail": e.tail, "head": e.head, "capacity": e.capacity, "cost": _rational_out(e.cost)}
            for e in cfg.edges
        ],
        "houses": [
            {
                "id": h.id,
                "microgrid": h.microgrid_id,
                "forecast": h.forecast,
                "devices": [
                    {
                        "id": d.id,
                        "kind": d.kind,
                        "weight": d.weight,
                        "priority": d.base_priority,
                        **(
                            {
                                "battery_capacity": d.battery_capacity,
                                "state_of_charge": d.state_of_charge,
                            }
                            if d.is_storage()
                            else {}
                        ),
                    }
                    for d in h.devices
                ],
            }
            for h in cfg.houses
        ],
    }
    return out


def write_scenario(cfg: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(cfg), indent=2, sort_keys=False) + "\n")


# ---------------------------------------------------------------------------
# Run outputs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunManifest:
    scenario: str
    scenario_sha256: str
    seed: int
    horizon: int
    out_dir: str
    overrides: dict
    tool_version: str


def build_manifest(scenario_path: str | Path, seed: int, horizon: int,
                   out_dir: str | Path, overrides: dict, tool_version: str) -> RunManifest:
    digest = hashlib.sha256(Path(scenario_path).read_bytes()).hexdigest()
    return RunManifest(
        scenario=str(scenario_path),
        scenario_sha256=digest,
        seed=seed,
        horizon=horizon,
        out_dir=str(out_dir),
        overrides=overrides,
        tool_version=tool_version,
    )


def write_manifest(manifest: RunManifest, out_dir: str | Path) -> Path:
    path = Path(out_dir) / "manifest.json"
    payload = {
        "scenario": manifest.scenario,
        "scenario_sha256": manifest.scenario_sha256,
        "seed": manifest.seed,
        "horizon": manifest.horizon,
        "out_dir": manifest.out_dir,
        "overrides": manifest.overrides,
        "tool_version": manifest.tool_version,
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


TICK_COLUMNS = (
    "tick", "supply", "demand", "gap", "unserved", "spilled",
    "peak_avg_ratio", "variance", "gross", "net",
)


def write_timeseries(results, out_dir: str | Path, edges=None) -> list[Path]:
    """One CSV per entity class; byte-stable for a fixed (scenario, seed).

    ``edges`` is the optional list of (tail, head, capacity) triples aligned
    with the per-tick edge flows.
    """
    if not results:
        raise ValueError("need at least one tick of results")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    ticks_path = out / "ticks.csv"
    with ticks_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TICK_COLUMNS)
        for r in results:
            writer.writerow(
                [
                    r.tick, r.supply, r.demand, r.gap, r.unserved_mandatory, r.spilled,
                    repr(r.metrics.peak_avg_ratio), repr(r.metrics.variance),
                    r.gross, r.net,
                ]
            )
    written.append(ticks_path)

    houses_path = out / "houses.csv"
    with houses_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("tick", "house", "allocation", "served_wh", "served_devices"))
        for r in results:
            for hid, alloc in r.allocations.items():
                devices = ";".join(sorted(r.served.get(hid, ())))
                writer.writerow((r.tick, hid, alloc, r.served_wh.get(hid, alloc), devices))
    written.append(houses_path)

    edges_path = out / "edges.csv"
    with edges_path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("tick", "edge", "tail", "head", "flow"))
        for r in results:
            for idx, flow in enumerate(r.edge_flows):
                tail, head = edges[idx] if edges else ("", "")
                writer.writerow((r.tick, idx, tail, head, flow))
    written.append(edges_path)
    return written
