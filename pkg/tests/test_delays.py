import numpy as np
import pytest

from lossychain import montecarlo
from lossychain.arrivals import SimParams, generate_timeline
from lossychain.delays import INFINITE, ZERO, AdversarialSenderError, DelayOracle, miner_of, observer


def test_d_zero_always_zero():
    o = DelayOracle(0.0, 1)
    assert all(o.delay(i, miner_of(k)) == ZERO for i in range(30) for k in range(30))
    assert all(o.delay(i, observer(u)) == ZERO for i in range(30) for u in range(3))
    assert all(o.coin_extension(("FU", j, j + 2)) == 0 for j in range(50))


def test_self_and_genesis_delivery():
    o = DelayOracle(0.9, 2)
    for i in range(200):
        assert o.delay(i, miner_of(i)) == ZERO
        assert o.delay(0, miner_of(i)) == ZERO
        assert o.delay(0, observer(i)) == ZERO


def test_loss_frequency():
    o = DelayOracle(0.3, 3)
    s = np.arange(1, 10**5 + 1)
    lost = o.lost(s, 2 * (s + 7))
    se = np.sqrt(0.3 * 0.7 / len(s))
    assert abs(lost.mean() - 0.3) < 3 * se


def test_memoized_and_order_independent():
    pairs = [(i, miner_of(k)) for i in range(1, 40) for k in range(40) if i != k]
    a = DelayOracle(0.5, 17)
    b = DelayOracle(0.5, 17)
    first = [a.delay(i, r) for i, r in pairs]
    second = [b.delay(i, r) for i, r in reversed(pairs)][::-1]
    assert first == second
    assert first == [a.delay(i, r) for i, r in pairs]
    assert set(first) == {ZERO, INFINITE}


def test_vectorized_agrees_with_scalar():
    o = DelayOracle(0.4, 9)
    M = o.heard_matrix(25)
    for i in range(25):
        for k in range(25):
            assert M[i, k] == o.heard(i, miner_of(k))
    obs = o.heard_observer(np.arange(25), 3)
    assert [o.heard(i, observer(3)) for i in range(25)] == obs.tolist()


def test_observers_and_miners_use_distinct_pairs():
    o = DelayOracle(0.5, 4)
    s = np.arange(1, 20001)
    m = o.heard_miners(s, 5000)
    v = o.heard_observer(s, 5000)
    assert abs(np.corrcoef(m, v)[0, 1]) < 0.05


def test_adversarial_sender_rejected():
    tl = generate_timeline(SimParams(beta=0.5, horizon_blocks=50, seed=1))
    o = DelayOracle(0.3, 1, tl)
    g = int(np.flatnonzero(~tl.honest)[0])
    with pytest.raises(AdversarialSenderError):
        o.delay_of_block(g, miner_of(1))
    h = int(tl.honest_ids[3])
    assert o.delay_of_block(h, miner_of(1)) == o.delay(3, miner_of(1))


def test_bad_inputs():
    with pytest.raises(ValueError):
        DelayOracle(1.0, 0)
    with pytest.raises(IndexError):
        DelayOracle(0.2, 0).delay(-1, miner_of(0))


def test_coin_extension_memoized():
    o = DelayOracle(0.5, 8)
    assert o.coin_extension(("BU", 10, 3)) == o.coin_extension(("BU", 10, 3))
    assert o.coin_extension(("UU", 1, 10, 3)) == int(o.coins("UU", 1, 10, 3))


def test_coin_extension_law():
    o = DelayOracle(0.5, 13)
    x = o.coins("FU", np.arange(10**5), np.arange(10**5) + 1)
    _, p, _ = montecarlo.chisquare_discrete(x, lambda k: 0.5 * 0.5**k, 30)
    assert p > 1e-3
    assert x.min() == 0


def test_receiver_codes_distinct():
    codes = {miner_of(i).code for i in range(50)} | {observer(u).code for u in range(50)}
    assert len(codes) == 100
