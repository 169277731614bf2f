import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from coverops.graph import EnvironmentGraph

# compiled kernels make the first call slow; deadlines would be noise
settings.register_profile("coverops", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("coverops")


def path_graph(weights):
    """Path 0-1-...-len(weights) with the given edge weights."""
    return EnvironmentGraph(len(weights) + 1,
                            tuple((i, i + 1, float(w)) for i, w in enumerate(weights)))


@pytest.fixture
def abc():
    return path_graph([1, 1])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def report(request, capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def emit(number: int, passed: bool, text: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {text}"
        lines.append(line)
        with capsys.disabled():
            print("\n" + line)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
