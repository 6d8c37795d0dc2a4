import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from riskscreen.scenario import AgentState, synth_scene  # noqa: E402


def make_agent(agent_id="1", p=(0.0, 0.0), v=(0.0, 0.0), theta=None, delta=0.0, length=4.5, width=1.8,
               mass=1500.0, kind="car", t=0.0):
    if theta is None:
        theta = math.atan2(v[1], v[0]) if v != (0.0, 0.0) else 0.0
    return AgentState(str(agent_id), t, p, v, theta, delta, length, width, mass, kind)


@pytest.fixture
def agent():
    return make_agent


@pytest.fixture(scope="session")
def rear_end_fixture():
    """Leader 5 m/s, follower 12 m/s, 25 m initial centre gap."""
    return synth_scene("rear_end", {"leader_speed": 5.0, "follower_speed": 12.0, "gap": 25.0}, seed=0,
                       scene_id="rear_end_fixture")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
