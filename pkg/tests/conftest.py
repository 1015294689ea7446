import json
from importlib.resources import files

import pytest

from affordance_sim.simloop import SimConfig, build_capability_map
from affordance_sim.world import load_scenario

DEADLOCK_PATH = str(files("affordance_sim.scenarios") / "deadlock_shelf.json")

# fixture-sized sampling: fast precompute, same semantics as the defaults
FIXTURE_SIM_KWARGS = dict(samples_per_pose=1024, max_time=200.0)


def simple_room_doc(objects, bins=None, robot_pose=(1.0, 1.0, 0.0),
                    human_chest=(3.0, 3.0, 1.35)):
    """Open 4 x 4 x 1.6 m room; callers position objects/bins."""
    bins = bins or [
        {"id": 101, "accepts": "food", "pos": [1.45, 1.0, 0.05], "radius": 0.25},
        {"id": 102, "accepts": "kitchen", "pos": [3.45, 0.55, 0.05],
         "radius": 0.25},
        {"id": 103, "accepts": "household_tool", "pos": [3.45, 3.45, 0.05],
         "radius": 0.25},
    ]
    return {
        "grid": {"origin": [0.0, 0.0, 0.0], "resolution": 0.1,
                 "dims": [40, 40, 16]},
        "objects": objects,
        "bins": bins,
        "agents": {
            "human": {"chest_pos": list(human_chest)},
            "robot": {"base_pose": list(robot_pose)},
        },
        "sensors": {
            "headset": {"offset": [0.0, 0.0, 0.2], "self_tracks": True},
            "robot": {"offset": [0.0, 0.0, 0.8]},
        },
    }


def write_scenario(tmp_path, doc, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture(scope="session")
def deadlock_cap():
    """Capability map for the bundled deadlock fixture (shared across tests)."""
    scenario = load_scenario(DEADLOCK_PATH)
    cfg = SimConfig(scenario_path=DEADLOCK_PATH, **FIXTURE_SIM_KWARGS)
    return build_capability_map(scenario, cfg)


@pytest.fixture(scope="session")
def simple_room_cap(tmp_path_factory):
    """One-object open-room scenario path + capability map."""
    doc = simple_room_doc(
        objects=[{"id": 1, "category": "food", "pos": [1.0, 1.55, 0.3]}])
    path = write_scenario(tmp_path_factory.mktemp("scen"), doc)
    cfg = SimConfig(scenario_path=path, samples_per_pose=1024,
                    lattice_headings=4)
    cap = build_capability_map(load_scenario(path), cfg)
    return path, cap
