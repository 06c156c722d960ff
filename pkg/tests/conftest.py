import sys

import numpy as np
import pytest

from stabctl.augmented import AugSystem, ControlMode
from stabctl.equilibria import find_trivial_equilibria
from stabctl.limit_cycle import find_cycle
from stabctl.vector_field import BvpParams, bvp_field

STABLE_SEED = (2.0, 0.0)
UNSTABLE_SEED = (1.0, -0.33)


@pytest.fixture(scope="session")
def bvp():
    return bvp_field()


@pytest.fixture(scope="session")
def params():
    return BvpParams()


@pytest.fixture(scope="session")
def z_star(bvp):
    return find_trivial_equilibria(bvp)[0].z


@pytest.fixture(scope="session")
def sys25(bvp):
    return AugSystem(bvp, 2.5, ControlMode.ONE_SIDED_X)


@pytest.fixture(scope="session")
def gamma_s(bvp, z_star):
    return find_cycle(bvp, STABLE_SEED, "forward", center=z_star)


@pytest.fixture(scope="session")
def gamma_u(bvp, z_star):
    return find_cycle(bvp, UNSTABLE_SEED, "backward", center=z_star)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
