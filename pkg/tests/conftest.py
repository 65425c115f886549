import sys

import numpy as np
import pytest

from mgdispatch.grid import Branch, Bus, NetworkModel, bundled_dataset, load_network


def make_net(edges, loads, sub=1, r=0.01, x=0.0, zones=None, sect=(), rate=0.1, length=1.0,
             v_base=1.0, s_base=1000.0):
    """Small radial network: ``edges`` are (from, to) pairs, ``loads`` maps bus -> kW."""
    ids = sorted({sub, *(b for e in edges for b in e)})
    zones = zones or {}
    buses = [Bus(i, float(loads.get(i, 0.0)), 0.0, zones.get(i, 0)) for i in ids]
    branches = [
        Branch(k + 1, a, b, r, x, length, rate, (a, b) in sect)
        for k, (a, b) in enumerate(edges)
    ]
    return NetworkModel(tuple(buses), tuple(branches), sub, v_base, s_base, "fixture")


@pytest.fixture(scope="session")
def pge69():
    return load_network(bundled_dataset("pge69"))


@pytest.fixture
def two_bus():
    return make_net([(1, 2)], {2: 100.0})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
