import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gridsim import reference
from gridsim.model import Device, House
from gridsim.strategy import refresh_utilities
from gridsim.verify import load_bundled


def make_house(house_id: str, devices, microgrid_id: str = "M1", forecast: int = 0) -> House:
    """House from (weight, priority) pairs, utilities refreshed."""
    house = House(
        id=house_id,
        microgrid_id=microgrid_id,
        devices=[
            Device(id=f"d{i + 1}", weight=w, base_priority=p, current_priority=p)
            for i, (w, p) in enumerate(devices)
        ],
        forecast=forecast,
    )
    refresh_utilities(house)
    return house


# the five-house example of the bundled scenario, as raw (weight, priority)
FIVE_HOUSE_DEVICES = {
    "H1": [(1, 0), (1, 1), (3, 0), (5, 2), (20, 4)],
    "H2": [(1, 0), (1, 0), (2, 1), (3, 0), (4, 3), (5, 3)],
    "H3": [(1, 0), (1, 0), (10, 0)],
    "H4": [(1, 0), (1, 1), (3, 0), (3, 2), (4, 1), (8, 4)],
    "H5": [(1, 0), (3, 0)],
}
FIVE_HOUSE_FORECASTS = {"H1": 4, "H2": 6, "H3": 12, "H4": 8, "H5": 6}


@pytest.fixture
def five_houses() -> dict[str, House]:
    return {
        hid: make_house(hid, devs, forecast=FIVE_HOUSE_FORECASTS[hid])
        for hid, devs in FIVE_HOUSE_DEVICES.items()
    }


@pytest.fixture
def bundled_scenario():
    return load_bundled(reference.FIVE_HOUSE_SCENARIO)


@pytest.fixture
def capped_scenario():
    return load_bundled(reference.FIVE_HOUSE_CAPPED_SCENARIO)
