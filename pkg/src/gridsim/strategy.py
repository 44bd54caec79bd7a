"""Device utilities, DSM strategy generation, r/l scoring, and selection.

A strategy is one candidate consumption plan for a house. Every family is
generated the same way: build a per-family scoring view of the devices, then
emit one strategy per distinct priority level present (all devices at or
below that cutoff are included). Scores are kept as exact rationals; the
producer-side score r and consumer-side score l satisfy
``l + alpha * total_weight == r`` bit-exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .model import Device, House, effective_weight, mandatory_load, MICROGRID_MEAN

BASIC = "basic"
PEAK_SHAVING = "peak_shaving"
CONSERVATION = "conservation"
LOAD_SHIFTING = "load_shifting"
OVER_PRODUCTION = "over_production"
OVER_CONSUMPTION = "over_consumption"

FAMILIES = (BASIC, PEAK_SHAVING, CONSERVATION, LOAD_SHIFTING, OVER_PRODUCTION, OVER_CONSUMPTION)
_FAMILY_RANK = {name: i for i, name in enumerate(FAMILIES)}

# Families available without knowing the supply/demand balance; the over_*
# families are added by the caller on surplus or deficit respectively.
DEFAULT_FAMILIES = (BASIC, PEAK_SHAVING, CONSERVATION, LOAD_SHIFTING)


@dataclass(frozen=True)
class Strategy:
    house_id: str
    family: str
    priority_cutoff: int
    included: frozenset[str]
    total_weight: int
    r: Fraction
    l: Fraction
    battery_discharge: tuple[tuple[str, int], ...] = ()
    score: Fraction | None = None  # r + l, precomputed for hot comparisons

    def __post_init__(self):
        if self.score is None:
            object.__setattr__(self, "score", self.r + self.l)

    @property
    def reported_r(self) -> int:
        return math.floor(self.r)

    @property
    def reported_l(self) -> Fraction:
        """Consumer score quantized to 0.5 steps for display."""
        return Fraction(math.floor(self.l * 2 + Fraction(1, 2)), 2)


@dataclass(frozen=True)
class StrategyContext:
    alpha: Fraction = Fraction(0)
    families: tuple[str, ...] = (BASIC,)


# ---------------------------------------------------------------------------
# Utilities
# ---------------------------------------------------------------------------

def compute_utilities(house: House) -> dict[str, int]:
    """Per-device value u = w_max * p_max - w * p + w.

    A house whose devices are all already running (p_max == 0) is done for
    this tick: every utility is zero and no strategies will be generated.
    """
    if not house.devices:
        return {}
    if house.is_done():
        return {d.id: 0 for d in house.devices}
    w_max = max(effective_weight(d) for d in house.devices)
    p_max = max(d.current_priority for d in house.devices)
    return {
        d.id: w_max * p_max - effective_weight(d) * d.current_priority + effective_weight(d)
        for d in house.devices
    }


def refresh_utilities(house: House) -> dict[str, int]:
    utilities = compute_utilities(house)
    for dev in house.devices:
        dev.utility = utilities[dev.id]
    return utilities


# ---------------------------------------------------------------------------
# Scoring views
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _ViewDevice:
    id: str
    weight: int
    priority: int
    value: int | Fraction
    divisor: int


def _recomputed_utilities(devices: list[tuple[str, int, int]]) -> dict[str, int]:
    # same u formula, on an already-transformed (id, weight, priority) view
    if not devices:
        return {}
    w_max = max(w for _, w, _ in devices)
    p_max = max(p for _, _, p in devices)
    return {i: w_max * p_max - w * p + w for i, w, p in devices}


def _scoring_view(house: House, family: str) -> tuple[list[_ViewDevice], tuple[tuple[str, int], ...]]:
    """Per-family device view plus any battery discharge the family triggers."""
    base = [(d, effective_weight(d)) for d in house.devices]
    discharge: tuple[tuple[str, int], ...] = ()

    if family == BASIC:
        view = [
            _ViewDevice(d.id, w, d.current_priority, d.utility, max(d.current_priority, 1))
            for d, w in base
        ]
    elif family == PEAK_SHAVING:
        # priorities weigh in exponentially instead of linearly
        view = [
            _ViewDevice(d.id, w, d.current_priority, d.utility, 2 ** d.current_priority)
            for d, w in base
        ]
    elif family == CONSERVATION:
        # everything is valued by urgency alone, except devices able to
        # provide energy, which keep their utility
        view = [
            _ViewDevice(
                d.id,
                w,
                d.current_priority,
                d.utility if d.kind in ("battery", "renewable") else Fraction(1, max(d.current_priority, 1)),
                max(d.current_priority, 1),
            )
            for d, w in base
        ]
    elif family == LOAD_SHIFTING:
        total = sum(w for _, w in base)
        if total == 0:
            return [], ()
        scale = Fraction(house.forecast, total)
        view = [
            _ViewDevice(d.id, w, d.current_priority, d.utility * scale, max(d.current_priority, 1))
            for d, w in base
        ]
    elif family == OVER_PRODUCTION:
        # storage charges sooner: its priority drops one step (never below 1)
        shifted = [
            (d.id, w, d.current_priority - 1 if d.is_storage() and d.current_priority >= 2 else d.current_priority)
            for d, w in base
        ]
        values = _recomputed_utilities(shifted)
        view = [_ViewDevice(i, w, p, values[i], max(p, 1)) for i, w, p in shifted]
    elif family == OVER_CONSUMPTION:
        # charged storage turns supplier; shed the least valuable deferrable
        discharge = tuple(
            (d.id, min(d.weight, d.state_of_charge))
            for d, _ in base
            if d.is_storage() and d.state_of_charge > 0
        )
        suppliers = {i for i, _ in discharge}
        kept = [(d, w) for d, w in base if d.id not in suppliers]
        deferrable = [(d, w) for d, w in kept if d.current_priority >= 1]
        if deferrable:
            victim = min(deferrable, key=lambda dw: (dw[0].utility, dw[0].id))[0].id
            kept = [(d, w) for d, w in kept if d.id != victim]
        shifted = [(d.id, w, d.current_priority) for d, w in kept]
        values = _recomputed_utilities(shifted)
        view = [_ViewDevice(i, w, p, values[i], max(p, 1)) for i, w, p in shifted]
    else:
        raise ValueError(f"unknown strategy family {family!r}")
    return view, discharge


# ---------------------------------------------------------------------------
# Generation, scoring, selection
# ---------------------------------------------------------------------------

def generate_strategies(house: House, context: StrategyContext) -> list[Strategy]:
    """All candidate strategies for one house under the given context.

    Utilities must be fresh (see ``refresh_utilities``). Done houses yield
    nothing; priority levels with no device yield no strategy.
    """
    if house.is_done():
        return []
    out: list[Strategy] = []
    for family in context.families:
        view, discharge = _scoring_view(house, family)
        if not view:
            continue
        shed = sum(amount for _, amount in discharge)
        ordered = sorted(view, key=lambda vd: (vd.priority, vd.id))
        r = Fraction(0)
        weight = 0
        ids: list[str] = []
        pos = 0
        for level in sorted({vd.priority for vd in ordered}):
            while pos < len(ordered) and ordered[pos].priority <= level:
                vd = ordered[pos]
                r += Fraction(vd.value * vd.weight, vd.divisor)
                weight += vd.weight
                ids.append(vd.id)
                pos += 1
            net = max(weight - shed, 0)
            out.append(
                Strategy(
                    house_id=house.id,
                    family=family,
                    priority_cutoff=level,
                    included=frozenset(ids),
                    total_weight=net,
                    r=r,
                    l=r - context.alpha * net,
                    battery_discharge=discharge,
                )
            )
    return out


def eval_r(strategy: Strategy, house: House) -> Fraction:
    """Producer-side score: sum of value * weight / divisor over included."""
    view, _ = _scoring_view(house, strategy.family)
    return sum(
        (Fraction(vd.value * vd.weight, vd.divisor) for vd in view if vd.id in strategy.included),
        Fraction(0),
    )


def eval_l(strategy: Strategy, house: House, alpha: Fraction) -> Fraction:
    """Consumer-side score: r corrected by the average utility per Wh."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return eval_r(strategy, house) - alpha * strategy.total_weight


def select_strategy(strategies: list[Strategy]) -> Strategy | None:
    """Argmax of r + l; None signals mandatory-only consumption.

    Ties prefer the lighter plan, then the lower cutoff, then family order,
    so selection is reproducible across runs.
    """
    if not strategies:
        return None
    return max(
        strategies,
        key=lambda s: (s.score, -s.total_weight, -s.priority_cutoff, -_FAMILY_RANK[s.family]),
    )


def compute_alpha(houses: list[House], alpha_mode: str | int | Fraction) -> Fraction:
    """Average utility per Wh across the microgrid's active houses.

    Done houses neither produce strategies nor contribute here; if every
    house is done the average is zero.
    """
    if not isinstance(alpha_mode, str):
        return Fraction(alpha_mode)
    if alpha_mode != MICROGRID_MEAN:
        raise ValueError(f"unknown alpha mode {alpha_mode!r}")
    num = Fraction(0)
    den = 0
    for house in houses:
        if house.is_done():
            continue
        for dev in house.devices:
            w = effective_weight(dev)
            num += Fraction(dev.utility * w, max(dev.current_priority, 1))
            den += w
    return num / den if den else Fraction(0)


def bundle_quantity(house: House, strategy: Strategy | None) -> int:
    """Energy the house books: its plan's weight, or mandatory load alone."""
    return strategy.total_weight if strategy is not None else mandatory_load(house)
