import sys
import itertools

import numpy as np
import pytest

from qbrainsim.config_state import LatticeConfig, configuration_count, dynamical_count


def small_configs(max_states, dynamical=False, radii=(1, 2)):
    """Every lattice with N<=5, M<=2, L<=5 whose (dynamical) space fits ``max_states``."""
    out = []
    for n, m, l, r in itertools.product(range(1, 6), (1, 2), range(0, 6), radii):
        cfg = LatticeConfig(n_sites=n, n_fields=m, half_range=l, neighbor_radius=r)
        size = dynamical_count(cfg) if dynamical else configuration_count(cfg)
        if size <= max_states:
            out.append(cfg)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.format_results():
        terminalreporter.write_line(line)
