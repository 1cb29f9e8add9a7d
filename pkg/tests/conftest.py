import numpy as np
import pytest

from lossychain import events, protocol, xgraph
from lossychain.arrivals import SimParams, generate_timeline
from lossychain.delays import DelayOracle


def simulate(params, adversary=None, observers=(0, 1), transactions=()):
    tl = generate_timeline(params)
    oracle = DelayOracle(params.d, params.seed, tl)
    graph = xgraph.build(tl, oracle)
    trace = protocol.run(tl, oracle, adversary, observers=observers, transactions=transactions, graph=graph)
    return trace


@pytest.fixture(scope="session")
def attacked_run():
    """A mid-size run under the withholding attacker, with its analysis."""
    p = SimParams(beta=0.15, d=0.3, ss=0.9, horizon_blocks=600, window=100, seed=42)
    adv = protocol.private_chain_attack(margin=1, restart_lag=3)
    trace = simulate(p, adv)
    return p, trace, events.RunAnalysis.from_trace(trace)


@pytest.fixture(scope="session")
def clean_run():
    """beta = 0, d = 0: the instantaneous model."""
    p = SimParams(beta=0.0, d=0.0, horizon_blocks=120, window=20, seed=5)
    trace = simulate(p)
    return p, trace, events.RunAnalysis.from_trace(trace)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
