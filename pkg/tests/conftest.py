import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from placardsim.cli import resolve_floorplan


@pytest.fixture(scope="session")
def office():
    return resolve_floorplan("office_corridor")


@pytest.fixture(scope="session")
def rect_room():
    return resolve_floorplan("rect_room")


@pytest.fixture(scope="session")
def rect_room_stub():
    return resolve_floorplan("rect_room_stub")


@pytest.fixture(scope="session")
def l_hallway():
    return resolve_floorplan("l_hallway")
