import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def nominal():
    from swarmlane import harness
    return harness.build_scenario("nominal")


@pytest.fixture(scope="session")
def pso_corpus(nominal):
    """Raw swarm outputs over 30 realized nominal scenarios."""
    from corpus import swarm_outputs
    return swarm_outputs(nominal, range(30))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
