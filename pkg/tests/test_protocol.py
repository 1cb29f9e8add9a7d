import csv
import math

import numpy as np
import pytest

from lossychain import protocol, xgraph
from lossychain.arrivals import SimParams, generate_timeline
from lossychain.delays import DelayOracle, miner_of, observer

from conftest import simulate


def test_instantaneous_model_single_chain(clean_run):
    p, trace, _ = clean_run
    tree, tl = trace.tree, trace.timeline
    assert tree.max_height == tl.honest_count - 1
    assert len(tree.longest_chains()) == 1
    assert trace.honest_height.tolist() == list(range(tl.honest_count))
    for u in trace.users:
        assert trace.chain_tip(u, tl.time[-1]) == tl.n_blocks - 1
        # after every delivery all users agree
        for g in tl.honest_ids:
            tips = {trace.chain_tip(v, tl.time[g]) for v in trace.users}
            assert tips == {g}


def test_no_hearing_gives_a_star():
    n = 30
    tl = generate_timeline(SimParams(beta=0.0, horizon_blocks=n, seed=2))
    graph = xgraph.from_edges(n, [])
    trace = protocol.run(tl, graph.oracle, graph=graph)
    assert all(trace.tree.parent(int(g)) == 0 for g in tl.honest_ids[1:])
    assert trace.tree.max_height == 1


def test_run_is_deterministic():
    p = SimParams(beta=0.3, d=0.4, horizon_blocks=300, seed=17)
    a = simulate(p, protocol.private_chain_attack(margin=1, restart_lag=2))
    b = simulate(p, protocol.private_chain_attack(margin=1, restart_lag=2))
    assert a.events == b.events
    assert list(a.tree.rows()) == list(b.tree.rows())


def test_graph_built_internally_matches():
    p = SimParams(beta=0.2, d=0.5, horizon_blocks=200, seed=4)
    tl = generate_timeline(p)
    a = protocol.run(tl, DelayOracle(p.d, p.seed, tl))
    b = simulate(p, observers=())
    np.testing.assert_array_equal(a.honest_height, b.honest_height)


def test_honest_parents_follow_hearing(attacked_run):
    _, trace, _ = attacked_run
    tl, tree, heard = trace.timeline, trace.tree, trace.graph.heard
    revealed = {tip for _, tip, _ in trace.miner_reveals}
    for k in range(1, tl.honest_count):
        g = int(tl.honest_ids[k])
        par = tree.parent(g)
        if tl.honest[par]:
            assert heard[tl.honest_index[par], k]
        else:
            assert par in revealed
        # nothing heard is higher than the chosen parent
        hh = trace.honest_height[:k][heard[:k, k]]
        assert tree.height(par) >= hh.max()


def test_user_chains_monotone(attacked_run):
    _, trace, _ = attacked_run
    users = list(trace.users) + [miner_of(i) for i in (0, 10, 300, 599)]
    for u in users:
        heights = [h for _, _, h in trace.user_history(u)]
        times = [t for t, _, _ in trace.user_history(u)]
        assert heights == sorted(heights)
        assert times == sorted(times)
    for st in trace.users.values():
        assert all(g in st.heard for g in trace.tree.chain(st.tip))


def test_miner_history_contains_own_block(attacked_run):
    _, trace, _ = attacked_run
    tl = trace.timeline
    for k in (5, 100, 400):
        g = int(tl.honest_ids[k])
        assert trace.chain_tip(miner_of(k), tl.time[g]) == g


def test_beta_zero_attack_is_idle():
    p = SimParams(beta=0.0, d=0.3, horizon_blocks=200, seed=6)
    a = simulate(p, protocol.private_chain_attack())
    b = simulate(p)
    assert a.events == b.events
    assert a.miner_reveals == []


def test_majority_adversary_outgrows():
    wins = 0
    for s in range(200):
        p = SimParams(beta=0.6, d=0.0, horizon_blocks=500, seed=s)
        adv = protocol.private_chain_attack(margin=math.inf)
        trace = simulate(p, adv, observers=())
        wins += trace.tree.height(adv.private_tip) > trace.honest_height.max()
    assert wins / 200 > 0.9


def test_infinite_margin_matches_honest_only_run():
    p = SimParams(lam=1.0, beta=0.3, d=0.3, horizon_blocks=300, seed=12)
    attacked = simulate(p, protocol.private_chain_attack(margin=math.inf))
    honest = simulate(p.replace(lam=p.lam_honest, beta=0.0))
    np.testing.assert_array_equal(attacked.honest_height, honest.honest_height)
    for u in attacked.users:
        ha = [(t, attacked.timeline.honest_index[g], h) for t, g, h in attacked.user_history(u)]
        hb = [(t, honest.timeline.honest_index[g], h) for t, g, h in honest.user_history(u)]
        assert ha == hb


def test_transaction_inclusion():
    p = SimParams(beta=0.0, d=0.0, horizon_blocks=50, seed=1)
    tl = generate_timeline(p)
    s = (tl.time[4] + tl.time[5]) / 2
    trace = simulate(p, transactions=[protocol.Transaction(s, "tx")])
    assert trace.position("tx", int(tl.honest_ids[4])) is None
    for k in range(5, 50):
        assert trace.position("tx", int(tl.honest_ids[k])) == (5, 0)


def test_security_examples():
    p = SimParams(beta=0.0, d=0.0, horizon_blocks=50, seed=1)
    tl = generate_timeline(p)
    s = (tl.time[4] + tl.time[5]) / 2
    tx = protocol.Transaction(s, "tx")
    trace = simulate(p, transactions=[tx])
    # identical chains with tx at one position: not violated once it is included
    gap = tl.time[5] - s
    assert not protocol.check_security(trace, tx, gap).violated
    assert not protocol.check_security(trace, tx, 3 * gap + 1).violated
    # before inclusion: tx is missing from every chain
    res = protocol.check_security(trace, tx, 0.0)
    assert res.violated and res.witness[0] == observer(0)
    late = protocol.Transaction(float(tl.time[-1]) + 1, "late")
    trace2 = simulate(p, transactions=[late])
    assert protocol.check_security(trace2, late, 0.0).violated
    with pytest.raises(ValueError):
        protocol.check_security(trace, tx, -1.0)
    with pytest.raises(ValueError):
        protocol.check_security(trace, tx, 1.0, users=[observer(9)])


def test_security_detects_reorg():
    """A majority attacker forking at the transaction displaces it."""
    p = SimParams(beta=0.6, d=0.0, horizon_blocks=200, seed=3)
    tl = generate_timeline(p)
    s = float(tl.time[tl.honest_ids[20]]) + 1e-9
    tx = protocol.Transaction(s, "tx")
    trace = simulate(p, protocol.private_chain_attack(fork_time=s, margin=1), transactions=[tx])
    assert protocol.check_security(trace, tx, 5.0).violated


def test_security_monotone_in_tau():
    taus = np.linspace(0, 60, 25)
    for seed in range(6):
        p = SimParams(beta=0.3, d=0.4, horizon_blocks=200, seed=seed)
        tx = protocol.Transaction(30.0, "tx")
        trace = simulate(p, protocol.private_chain_attack(fork_time=30.0, margin=1), transactions=[tx])
        v = [protocol.check_security(trace, tx, t).violated for t in taus]
        assert all(a or not b for a, b in zip(v, v[1:]))


def test_invalid_strategy_rejected():
    class Bad(protocol.Adversary):
        def choose_parent(self, sim, g):
            return g + 5

    p = SimParams(beta=0.5, horizon_blocks=20, seed=1)
    with pytest.raises(protocol.StrategyError):
        simulate(p, Bad())
    with pytest.raises(ValueError):
        protocol.make_adversary("bribe")


def test_trace_export(tmp_path, attacked_run):
    _, trace, _ = attacked_run
    path = tmp_path / "trace.csv"
    trace.write_csv(path)
    rows = list(csv.reader(open(path)))
    assert tuple(rows[0]) == protocol.TRACE_EVENT_COLUMNS
    assert {r[2] for r in rows[1:]} == {"mine", "hear", "adopt"}
    times = [float(r[0]) for r in rows[1:]]
    assert times == sorted(times)
