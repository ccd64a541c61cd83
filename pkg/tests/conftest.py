import pytest

from kspulse.model import build_model, wave_params
from kspulse.orbits import shoot_heteroclinic
from kspulse.speed_window import pick_trap_constants, speed_bounds
from kspulse.trap import build_trap

U_MINUS = 1.25


@pytest.fixture(scope="session")
def model():
    return build_model("tanh-quadratic")


@pytest.fixture(scope="session")
def window(model):
    return speed_bounds(model, U_MINUS)


@pytest.fixture(scope="session")
def params(model, window):
    """Canonical wave at the window midpoint, singular limit."""
    return wave_params(model, U_MINUS, s=window.midpoint)


@pytest.fixture(scope="session")
def params_s2(model):
    return wave_params(model, U_MINUS, s=2.0)


@pytest.fixture(scope="session")
def trap(model, params):
    return build_trap(model, params, pick_trap_constants(model, params))


@pytest.fixture(scope="session")
def singular_orbit(model, params, trap):
    return shoot_heteroclinic(model, params, trap)


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one line per acceptance criterion for the terminal summary."""
    return request.config.stash[_ACCEPTANCE]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
