import numpy as np
import pytest

from vsa.feeder import PHASES, Bus, Edge, FeederModel, LoadSpec, bundled_feeder
from vsa.oracle import powerflow_solve

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def feeder12():
    return bundled_feeder("feeder12")


@pytest.fixture(scope="session")
def feeder12_delta():
    return bundled_feeder("feeder12_delta")


@pytest.fixture(scope="session")
def base12(feeder12):
    return powerflow_solve(feeder12)


@pytest.fixture(scope="session")
def base12_delta(feeder12_delta):
    return powerflow_solve(feeder12_delta)


def two_bus(z_pu, s_pu=(0, 0, 0), configuration="star", vll=4800.0, phases="abc"):
    """Source plus one load bus; impedance and load given in per-unit."""
    m = FeederModel("s", vll, (Bus("s", PHASES), Bus("b1", PHASES)), ())
    zbase, sbase = m.base.impedance, m.base.power
    load = LoadSpec(configuration, tuple(np.asarray(s_pu, dtype=complex) * sbase))
    return FeederModel(
        "s", vll,
        (Bus("s", PHASES), Bus("b1", tuple(phases), load)),
        (Edge("s", "b1", np.asarray(z_pu, dtype=complex) * zbase),),
    )


def random_tree(rng, n, load_scale=20e3):
    """Random radial three-phase feeder with n buses; node i hangs off a random earlier node."""
    zcfg = np.array([
        [0.2926 + 0.1973j, 0.0673 - 0.0368j, 0.0337 - 0.0417j],
        [0.0673 - 0.0368j, 0.2646 + 0.1900j, 0.0673 - 0.0368j],
        [0.0337 - 0.0417j, 0.0673 - 0.0368j, 0.2926 + 0.1973j],
    ])
    ids = ["s"] + [f"n{i}" for i in range(1, n)]
    buses = [Bus("s", PHASES)]
    edges = []
    for i in range(1, n):
        s = (rng.uniform(0, 1, 3) + 0.5j * rng.uniform(0, 1, 3)) * load_scale
        buses.append(Bus(ids[i], PHASES, LoadSpec("star", tuple(s))))
        j = int(rng.integers(0, i))
        edges.append(Edge(ids[j], ids[i], zcfg * rng.uniform(0.05, 0.3)))
    return FeederModel("s", 4800.0, tuple(buses), tuple(edges))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
