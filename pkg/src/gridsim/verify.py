"""Regression checks against the bundled five-house example.

Each check yields (label, passed, detail); the CLI prints one line per
check. These same expectations are pinned by the acceptance test suite.
"""
from __future__ import annotations

import json
import math
from fractions import Fraction
from importlib import resources

from . import reference as ref
from .io import parse_scenario
from .model import ScenarioConfig, mandatory_load, min_required
from .strategy import (
    BASIC,
    Strategy,
    StrategyContext,
    compute_utilities,
    eval_l,
    eval_r,
    generate_strategies,
    refresh_utilities,
    select_strategy,
)

Check = tuple[str, bool, str]


def load_bundled(name: str) -> ScenarioConfig:
    """Load a scenario shipped inside the package."""
    text = resources.files("gridsim.data").joinpath(name).read_text()
    return parse_scenario(json.loads(text))


def _houses(cfg: ScenarioConfig):
    by_id = {}
    for house in cfg.houses:
        refresh_utilities(house)
        by_id[house.id] = house
    return by_id


def utility_checks(cfg: ScenarioConfig) -> list[Check]:
    checks: list[Check] = []
    houses = _houses(cfg)
    for hid, expected in ref.EXPECTED_UTILITIES.items():
        utilities = compute_utilities(houses[hid])
        for dev, want in zip(houses[hid].devices, expected):
            got = utilities[dev.id]
            checks.append(
                (f"utility {hid}/{dev.id}", got == want, f"got {got}, want {want}")
            )
    for hid in ref.DONE_HOUSES:
        done = houses[hid].is_done()
        checks.append((f"done flag {hid}", done, f"is_done() == {done}"))
    return checks


def min_required_checks(cfg: ScenarioConfig) -> list[Check]:
    houses = _houses(cfg)
    return [
        (
            f"min required {hid}",
            min_required(houses[hid]) == want,
            f"got {min_required(houses[hid])}, want {want}",
        )
        for hid, want in ref.EXPECTED_MIN_REQUIRED.items()
    ]


def score_checks(cfg: ScenarioConfig) -> list[Check]:
    """Basic-family r and l scores against the exact expectations."""
    checks: list[Check] = []
    houses = _houses(cfg)
    context = StrategyContext(alpha=Fraction(0), families=(BASIC,))
    for hid, cutoffs in ref.EXPECTED_BASIC_CUTOFFS.items():
        strategies = {
            s.priority_cutoff: s for s in generate_strategies(houses[hid], context)
        }
        got_cutoffs = tuple(sorted(strategies))
        checks.append(
            (
                f"cutoffs {hid}",
                got_cutoffs == cutoffs,
                f"got {got_cutoffs}, want {cutoffs}",
            )
        )
        for cutoff in cutoffs:
            want = ref.EXACT_R[(hid, cutoff)]
            got = eval_r(strategies[cutoff], houses[hid])
            ok = got == want
            note = f"got {got} (floor {math.floor(got)}), want {want}"
            if (hid, cutoff) in ref.SCORE_DISCREPANCIES:
                quoted = ref.SCORE_DISCREPANCIES[(hid, cutoff)]["quoted"]
                note += f"; quoted figure {quoted} is off, exact value is pinned"
            checks.append((f"score r {hid} cutoff {cutoff}", ok, note))
    for cutoff, want in ref.H1_L_AT_ALPHA_34.items():
        strategies = {
            s.priority_cutoff: s for s in generate_strategies(houses["H1"], context)
        }
        got = eval_l(strategies[cutoff], houses["H1"], Fraction(34))
        checks.append(
            (
                f"score l H1 cutoff {cutoff} (alpha 34)",
                got == want,
                f"got {got}, want {want}",
            )
        )
    return checks


def final_row_checks(cfg: ScenarioConfig) -> list[Check]:
    """Selection by max(r + l) over the quoted score pairs books the
    expected final consumption for every house."""
    checks: list[Check] = []
    houses = _houses(cfg)
    for hid, want in ref.EXPECTED_FINAL.items():
        pairs = ref.QUOTED_SCORE_PAIRS.get(hid)
        if pairs is None:  # done house: mandatory load only
            got = mandatory_load(houses[hid])
            checks.append(
                (f"final consumption {hid}", got == want, f"got {got}, want {want}")
            )
            continue
        options = [
            Strategy(
                house_id=hid,
                family=BASIC,
                priority_cutoff=cutoff,
                included=frozenset(),
                total_weight=ref.BASIC_CUTOFF_WEIGHTS[hid][cutoff],
                r=r,
                l=l,
            )
            for cutoff, (r, l) in pairs.items()
        ]
        chosen = select_strategy(options)
        got = chosen.total_weight if chosen else -1
        checks.append(
            (f"final consumption {hid}", got == want, f"got {got}, want {want}")
        )
    total = sum(ref.EXPECTED_FINAL.values())
    checks.append(
        (
            "final booked total",
            total == ref.EXPECTED_BOOKED_TOTAL,
            f"sum {total}, want {ref.EXPECTED_BOOKED_TOTAL}",
        )
    )
    return checks


def all_checks() -> list[Check]:
    cfg = load_bundled(ref.FIVE_HOUSE_SCENARIO)
    checks = []
    checks.extend(utility_checks(cfg))
    checks.extend(min_required_checks(cfg))
    checks.extend(score_checks(cfg))
    checks.extend(final_row_checks(cfg))
    return checks
