from fractions import Fraction

import numpy as np
import pytest

from lossychain import montecarlo as mc
from lossychain.arrivals import ParameterError, SimParams


def test_binomial_interval():
    lo, hi = mc.binomial_interval(0, 100)
    assert lo == 0 and 0.04 < hi < 0.06  # exact 99% upper bound for 0/100
    lo, hi = mc.binomial_interval(50, 100)
    assert np.isclose((hi - lo) / 2, mc.Z99 * 0.05)
    e = mc.Estimate.binomial(40, 400, undetermined=100)
    assert e.point == 0.1 and e.trials == 400 and e.undetermined_frac == 0.2
    assert np.isclose(e.halfwidth, mc.Z99 * np.sqrt(0.09 / 400))


def test_violation_trivial():
    p = SimParams(beta=0.0, d=0.0, horizon_blocks=200, seed=1)
    # no block within tau has probability exp(-10) at tau = 10 inter-arrivals
    e = mc.estimate_violation(p, [10 / p.lam_honest, 20 / p.lam_honest], 30)
    assert all(x.point == 0 and x.lo == 0 for x in e)


def test_violation_majority():
    p = SimParams(beta=0.6, d=0.3, horizon_blocks=300, seed=2)
    e = mc.estimate_violation(p, [5 / p.lam_honest], 30)
    assert e[0].point > 0.5


def test_violation_errors():
    p = SimParams(horizon_blocks=100)
    with pytest.raises(ParameterError):
        mc.estimate_violation(p, [1.0], 10)
    with pytest.raises(ParameterError):
        mc.estimate_violation(p, [500.0], 30)


def test_violation_flags_monotone():
    p = SimParams(beta=0.3, d=0.5, horizon_blocks=300, seed=3)
    taus = [2.0, 5.0, 10.0, 20.0, 40.0]
    flags = mc.violation_flags(p, taus, 40)
    assert len(mc.tau_monotone(flags)) == 0
    assert flags[:, 0].sum() >= flags[:, -1].sum()


def test_nakamoto_rate_trivial():
    p = SimParams(beta=0.0, d=0.0, horizon_blocks=300, window=50, seed=1)
    e = mc.estimate_nakamoto_rate(p, 3)
    assert e.point == 1.0 and e.undetermined_frac == 0.0


def test_nakamoto_rate_monotone_in_ss():
    p = SimParams(beta=0.2, d=0.5, horizon_blocks=600, window=100, seed=9)
    lo = mc.estimate_nakamoto_rate(p, 6, ss=0.85)
    hi = mc.estimate_nakamoto_rate(p, 6, ss=0.95)
    assert hi.point >= lo.point
    a = mc.nakamoto_counts(p, 6, ss=0.85)
    b = mc.nakamoto_counts(p, 6, ss=0.95)
    assert (b[:, 0] >= a[:, 0]).all()


def test_merge_order_invariance():
    p = SimParams(beta=0.3, d=0.5, horizon_blocks=200, seed=5)
    task = lambda i, s: mc._nakamoto_trial(p.replace(window=30), 0.9, 30, i, s)
    per = mc.run_trials(task, p.seed, 12)
    ref = mc.rate_estimate(np.array(per))
    rng = np.random.default_rng(0)
    for _ in range(5):
        order = rng.permutation(len(per))
        shuffled = mc.rate_estimate(np.array([per[i] for i in order]))
        assert shuffled == ref
        assert (mc.merge(per, order) == mc.merge(per)).all()
    tallies = [mc.Tally(int(x[0]), int(x[0] + x[1]), int(x[2])) for x in per]
    assert mc.merge(tallies, rng.permutation(12)) == mc.merge(tallies)


def test_process_pool_matches_serial():
    p = SimParams(beta=0.3, d=0.5, horizon_blocks=150, seed=6)
    a = mc.estimate_violation(p, [5.0, 20.0], 30, workers=1)
    b = mc.estimate_violation(p, [5.0, 20.0], 30, workers=2)
    assert a == b


def test_manifest_replay():
    p = SimParams(beta=0.3, d=0.5, horizon_blocks=150, seed=7)
    first = mc.estimate_violation(p, [5.0, 20.0], 30)
    m = first[0].manifest
    assert m["root_seed"] == 7 and m["trials"] == 30
    again = mc.estimate_violation(p.replace(seed=m["root_seed"]), m["taus"], m["trials"], m["strategy"], m["observers"], m["tx_fraction"], m["margin"])
    assert again == first


def test_region_flags():
    assert not mc.in_prior_region(0.3, 0.6) and not mc.in_region(0.3, 0.6)
    assert mc.in_region(0.2, 0.5) and not mc.in_prior_region(0.2, 0.5)
    # boundary cells are outside (strict inequalities, exact arithmetic)
    assert not mc.in_region(Fraction(1, 3), Fraction(1, 2))
    assert not mc.in_prior_region(0, 0.5)


def test_region_containment_everywhere():
    for betas, ds in (mc.region_grid(21), mc.uniform_grid(21), mc.uniform_grid(41)):
        for c in mc.sweep_region(betas, ds):
            assert c.in_region or not c.in_prior_region


def test_region_grid_shape_and_strict_cells():
    betas, ds = mc.region_grid(21)
    assert len(betas) == 21 and len(ds) == 21
    cells = mc.sweep_region(betas, ds)
    for d in ds[1:]:
        assert any(c.strict for c in cells if c.d == d)
    with pytest.raises(ParameterError):
        mc.sweep_region([1.0], [0.1])


def test_sweep_with_estimates():
    p = SimParams(horizon_blocks=150, seed=1)
    cells = mc.sweep_region([0.1, 0.5], [0.2], tau=10.0, trials=30, params=p)
    assert all(c.estimate is not None and c.estimate.trials == 30 for c in cells)


def test_pooled_bins():
    assert mc.pooled_bins([10, 10, 1, 1, 1, 1, 1]) == [(0, 1), (1, 2), (2, 7)]
    groups = mc.pooled_bins([1.0] * 12)
    assert groups[0] == (0, 5) and groups[-1][1] == 12


def test_suite_degenerate_d_zero():
    res = {t.name: t for t in mc.run_distribution_suite(SimParams(d=0.0, beta=0.2, seed=1))}
    for name in ("FS", "BS", "FU", "BU"):
        assert res[name].tag == "degenerate-law" and res[name].passed


def test_suite_passes_at_d_03():
    res = mc.run_distribution_suite(SimParams(d=0.3, beta=0.2, seed=3))
    assert all(t.passed for t in res), [t for t in res if not t.passed]
    names = {t.name for t in res}
    assert {"observer-unheard-dominance", "miner-unheard-dominance"} <= names


def test_suite_detects_wrong_law():
    """A sample from Geom(0.5) - 1 must fail against the d = 0.3 law."""
    x = np.random.default_rng(0).geometric(0.5, 20000) - 1
    _, p, _ = mc.chisquare_discrete(x, lambda k: 0.7 * 0.3**k, 30)
    assert p < 1e-3
    bad = mc._dominance_test("x", x + 3, 0.3)
    assert not bad.passed


def test_suite_needs_samples():
    with pytest.raises(ParameterError):
        mc.run_distribution_suite(SimParams(), trials=1000)


def test_decay_beta_zero():
    r = mc.fit_catchup_decay(SimParams(beta=0.0, d=0.3, seed=2), ss=1, gaps=range(1, 15), trials=20000)
    assert r.forward.ok and r.forward.slope < 0 and r.backward.slope < 0


def test_decay_insufficient():
    r = mc.fit_catchup_decay(SimParams(beta=0.0, d=0.0, seed=2), gaps=range(5, 10), trials=4000)
    assert not r.forward.ok and r.forward.reason == "insufficient occurrences"


def test_decay_detects_asymmetry():
    """Fits at different ss must not be declared equal."""
    a = mc.fit_catchup_decay(SimParams(beta=0.15, d=0.3, ss=0.9, seed=1), trials=40000, gaps=range(5, 30))
    b = mc.fit_catchup_decay(SimParams(beta=0.15, d=0.3, ss=0.5, seed=1), trials=40000, gaps=range(5, 30))
    hw = mc.Z99 * np.hypot(a.forward.jackknife_se, b.forward.jackknife_se)
    assert abs(a.forward.slope - b.forward.slope) > hw


def test_correlation_small_sample():
    r = mc.catchup_correlation(SimParams(beta=0.15, d=0.3, ss=0.9, seed=4), trials=20000, offset=2)
    assert abs(r.r) < 0.05 and 0 < r.p_backward < 1 and 0 < r.p_forward < 1


def test_verify_small():
    rep = mc.verify_seeds(SimParams(beta=0.2, d=0.4, horizon_blocks=300, window=50, seed=1), 2, n_paths=100)
    assert rep.ok and rep.seeds == 2 and rep.thm2_checked > 0
    assert len(rep.rows) == 600 and len(rep.rows[0]) == len(mc.VERDICT_COLUMNS)
