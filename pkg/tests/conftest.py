import numpy as np
import pytest

from ceassoc.netmodel import LinkGains, ScenarioConfig, compute_link_gains, \
    generate_deployment


def make_gains(full_rate, tiers=None, bandwidth_hz=10e6, sinr=None):
    """Hand-built LinkGains for unit tests; gain/sinr default to values
    consistent with the given full rates."""
    full_rate = np.asarray(full_rate, dtype=np.float64)
    if sinr is None:
        sinr = 2.0 ** (full_rate / bandwidth_hz) - 1.0
    else:
        sinr = np.asarray(sinr, dtype=np.float64)
    gain = sinr * 1e-9 + 1e-12
    if tiers is None:
        tiers = ("macro",) + ("small",) * (full_rate.shape[1] - 1)
    return LinkGains(gain=gain, sinr=sinr, full_rate=full_rate,
                     tiers=tuple(tiers), bandwidth_hz=bandwidth_hz)


@pytest.fixture(scope="session")
def default_scenario():
    return ScenarioConfig()


@pytest.fixture(scope="session")
def small_scenario():
    return ScenarioConfig(n_users=6, n_sbs=2)


@pytest.fixture(scope="session")
def one_drop_gains(default_scenario):
    dep = generate_deployment(default_scenario, 12345)
    return compute_link_gains(dep)
