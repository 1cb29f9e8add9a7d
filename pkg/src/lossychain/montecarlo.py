"""Seeded multi-trial experiments.

Trial ``t`` of an experiment with root seed ``r`` uses the seed
``derive_seed(r, t)``, so results never depend on the order in which trials
run or finish.  Per-trial outcomes are integer counters and are merged by
summation, which is commutative; the :func:`run_trials` ``order`` argument
exists so tests can shuffle completion order and compare.

All intervals are at 99%.
"""

import dataclasses
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import partial, reduce

import numpy as np
from scipy import stats

from . import _rng, events, protocol, xgraph
from .arrivals import ParameterError, SimParams, generate_timeline, index_domain_counts
from .delays import DelayOracle, miner_of, observer

CONFIDENCE = 0.99
Z99 = float(stats.norm.ppf(0.5 + CONFIDENCE / 2))
P_FLOOR = 1e-3
EXACT_BELOW = 30


# ---------------------------------------------------------------------------
# estimates


def binomial_interval(successes, n):
    """``(lo, hi)`` at 99%: Clopper-Pearson below 30 successes, else normal."""
    if n <= 0:
        raise ValueError("need at least one trial")
    p = successes / n
    if successes < EXACT_BELOW:
        ci = stats.binomtest(int(successes), int(n)).proportion_ci(CONFIDENCE, method="exact")
        return float(ci.low), float(ci.high)
    hw = Z99 * np.sqrt(p * (1 - p) / n)
    return max(0.0, p - hw), min(1.0, p + hw)


@dataclass(frozen=True)
class Estimate:
    """A probability estimate.

    ``trials`` is the number of independent seeded trials; ``samples`` the
    denominator of ``point`` (equal to ``trials`` unless a trial contributes
    several correlated samples, as for Nakamoto rates).
    """

    point: float
    trials: int
    successes: int
    samples: int
    halfwidth: float
    lo: float
    hi: float
    undetermined_frac: float = 0.0
    manifest: dict = field(default=None, compare=False, hash=False)

    @classmethod
    def binomial(cls, successes, n, undetermined=0, manifest=None):
        lo, hi = binomial_interval(successes, n)
        total = n + undetermined
        return cls(
            point=successes / n,
            trials=n,
            successes=int(successes),
            samples=n,
            halfwidth=(hi - lo) / 2,
            lo=lo,
            hi=hi,
            undetermined_frac=undetermined / total if total else 0.0,
            manifest=manifest,
        )

    def excludes_zero(self):
        return self.lo > 0


@dataclass(frozen=True)
class Tally:
    """Commutative counter merged across trials."""

    successes: int = 0
    trials: int = 0
    undetermined: int = 0

    def __add__(self, other):
        return Tally(
            self.successes + other.successes,
            self.trials + other.trials,
            self.undetermined + other.undetermined,
        )


def merge(items, order=None):
    """Sum per-trial results (tuples of ints/arrays or :class:`Tally`) in ``order``."""
    items = list(items)
    if order is not None:
        items = [items[i] for i in order]
    return reduce(lambda a, b: a + b, items)


def run_trials(task, root_seed, trials, workers=1):
    """``[task(i, derive_seed(root_seed, i)) for i in range(trials)]``.

    With ``workers > 1`` the trials run in a process pool; the returned list
    is always in trial order.
    """
    seeds = [_rng.derive_seed(root_seed, i) for i in range(trials)]
    if workers <= 1:
        return [task(i, s) for i, s in enumerate(seeds)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, range(trials), seeds, chunksize=max(1, trials // (4 * workers))))


def params_string(params):
    return ";".join(f"{k}={getattr(params, k)!r}" for k in ("lam", "beta", "d", "ss", "horizon_blocks", "window"))


# ---------------------------------------------------------------------------
# security violations


def _tx_time(params, tx_fraction):
    return tx_fraction * (params.horizon_blocks - 1) / params.lam_honest


def _violation_trial(params, taus, strategy, n_observers, tx_fraction, margin, index, seed):
    p = params.replace(seed=seed)
    tl = generate_timeline(p)
    oracle = DelayOracle(p.d, seed, tl)
    s = _tx_time(params, tx_fraction)
    if strategy == "private":
        adv = protocol.make_adversary("private", fork_time=s, margin=margin, targets="all")
    else:
        adv = protocol.make_adversary(strategy)
    tx = protocol.Transaction(s, "tx")
    trace = protocol.run(tl, oracle, adv, observers=range(n_observers), transactions=[tx])
    t_end = float(tl.time[-1])
    out = np.zeros((2, len(taus)), dtype=np.int64)  # row 0 violated, row 1 undetermined
    for c, tau in enumerate(taus):
        if s + tau > t_end:
            out[1, c] = 1
        else:
            out[0, c] = int(protocol.check_security(trace, tx, tau).violated)
    return out


def violation_flags(params, taus, trials, strategy="private", observers=2, tx_fraction=0.2, margin=1, workers=1):
    """Per-trial outcome matrix ``(trials, len(taus))``: 1 violated, 0 not, -1 undetermined.

    The transaction is made at ``tx_fraction`` of the expected run length.
    """
    taus = [float(t) for t in taus]
    if trials < 30:
        raise ParameterError(f"need at least 30 trials, got {trials}")
    if any(t < 0 for t in taus):
        raise ParameterError("tau must be non-negative")
    expected_end = (params.horizon_blocks - 1) / params.lam_honest
    s = _tx_time(params, tx_fraction)
    if s + max(taus) > 0.8 * expected_end:
        raise ParameterError(
            f"horizon too short: transaction at {s:.4g} plus tau {max(taus):.4g} exceeds 80% of the "
            f"expected run length {expected_end:.4g}"
        )
    task = partial(_violation_trial, params, taus, strategy, observers, tx_fraction, margin)
    res = run_trials(task, params.seed, trials, workers)
    out = np.array([r[0] for r in res])
    out[np.array([r[1] for r in res]) == 1] = -1
    return out


def estimates_from_flags(flags, manifest=None):
    out = []
    for c in range(flags.shape[1]):
        col = flags[:, c]
        det = int((col >= 0).sum())
        out.append(Estimate.binomial(int((col == 1).sum()), det, int((col < 0).sum()), manifest))
    return out


def estimate_violation(params, taus, trials, strategy="private", observers=2, tx_fraction=0.2, margin=1, workers=1):
    """One :class:`Estimate` per ``tau``; all taus share the same traces."""
    flags = violation_flags(params, taus, trials, strategy, observers, tx_fraction, margin, workers)
    manifest = {
        "experiment": "violation",
        "root_seed": params.seed,
        "params": params_string(params),
        "taus": list(taus),
        "trials": trials,
        "strategy": strategy,
        "observers": observers,
        "tx_fraction": tx_fraction,
        "margin": margin,
    }
    return estimates_from_flags(flags, manifest)


def tau_monotone(flags):
    """Trials whose outcome is violated at some tau but not at a smaller one.

    Columns of ``flags`` must be sorted by increasing tau.
    """
    v = flags == 1
    return np.flatnonzero((v[:, 1:] & ~v[:, :-1]).any(axis=1))


# ---------------------------------------------------------------------------
# Nakamoto rates


def _nakamoto_trial(params, ss, window, index, seed):
    p = params.replace(seed=seed)
    tl = generate_timeline(p)
    oracle = DelayOracle(p.d, seed, tl)
    an = events.RunAnalysis(tl, xgraph.build(tl, oracle))
    # in-band: at least ``window`` honest blocks on either side
    v = an.nakamoto_values(ss, window)[window : tl.honest_count - window]
    return np.array([(v == 1).sum(), (v == 0).sum(), (v == -1).sum()], dtype=np.int64)


def nakamoto_counts(params, trials, ss=None, window=None, workers=1):
    """Per-run ``[occurred, not occurred, undetermined]`` counts over in-band blocks."""
    ss = params.ss if ss is None else ss
    window = params.window if window is None else window
    task = partial(_nakamoto_trial, params, ss, window)
    return np.array(run_trials(task, params.seed, trials, workers))


def rate_estimate(counts, manifest=None):
    """Ratio estimate from per-run counts with a between-run (cluster) interval."""
    occ, no, und = counts[:, 0], counts[:, 1], counts[:, 2]
    det = occ + no
    R = len(counts)
    total = int(det.sum())
    k = int(occ.sum())
    point = k / total if total else 0.0
    if k < EXACT_BELOW or R < 2:
        lo, hi = binomial_interval(k, total)
    else:
        resid = occ - point * det
        se = np.sqrt((resid**2).sum() / (R * (R - 1))) / det.mean()
        lo, hi = max(0.0, float(point - Z99 * se)), min(1.0, float(point + Z99 * se))
    all_blocks = int(counts.sum())
    return Estimate(
        point=point,
        trials=R,
        successes=k,
        samples=total,
        halfwidth=(hi - lo) / 2,
        lo=lo,
        hi=hi,
        undetermined_frac=float(und.sum()) / all_blocks if all_blocks else 0.0,
        manifest=manifest,
    )


def estimate_nakamoto_rate(params, trials, ss=None, window=None, workers=1):
    """Fraction of determined in-band honest blocks that are ss-Nakamoto.

    In-band blocks have at least ``window`` honest blocks before and after
    them.  Undetermined verdicts are left out of the rate and reported as
    ``undetermined_frac`` of all in-band blocks.
    """
    counts = nakamoto_counts(params, trials, ss, window, workers)
    manifest = {
        "experiment": "nakamoto",
        "root_seed": params.seed,
        "params": params_string(params),
        "ss": params.ss if ss is None else ss,
        "window": params.window if window is None else window,
        "trials": trials,
    }
    return rate_estimate(counts, manifest)


def _no_nakamoto_trial(params, ns, index, seed):
    p = params.replace(seed=seed)
    tl = generate_timeline(p)
    an = events.RunAnalysis(tl, xgraph.build(tl, DelayOracle(p.d, seed, tl)))
    v = an.nakamoto_values(p.ss, p.window)
    limit = p.horizon_blocks - p.window
    starts = np.arange(1, limit - max(ns) + 1)
    occ = np.concatenate([[0], np.cumsum(v[1:limit] == 1)])
    out = []
    for n in ns:
        # occ[x] = Nakamoto blocks among indices 1..x
        hits = occ[starts + n - 1] - occ[starts - 1]
        out.append((hits == 0).sum())
    return np.array(out + [len(starts)], dtype=np.int64)


def no_nakamoto_probability(params, ns, trials, workers=1):
    """Fraction of length-``n`` index windows holding no ss-Nakamoto block.

    Windows start at every index from 1 and are shared by all ``n``, so the
    estimates are non-increasing in ``n`` by construction of the sample.
    """
    ns = sorted(int(n) for n in ns)
    if params.horizon_blocks - params.window - max(ns) < 1:
        raise ParameterError("horizon too short for the largest window")
    res = merge(run_trials(partial(_no_nakamoto_trial, params, ns), params.seed, trials, workers))
    return dict(zip(ns, (res[:-1] / res[-1]).tolist()))


# ---------------------------------------------------------------------------
# catch-up decay and independence (segment samplers)


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    r2: float
    stderr: float
    gaps: tuple
    probabilities: tuple
    ok: bool = True
    reason: str = ""
    jackknife_se: float = float("nan")


@dataclass(frozen=True)
class DecayReport:
    forward: LineFit
    backward: LineFit
    slope_gap: float
    joint_halfwidth: float

    @property
    def slopes_agree(self):
        return self.slope_gap <= self.joint_halfwidth


def _segment_batch(params, ss, max_gap, size, index, seed):
    """Catch-up indicators of one batch: ``(forward, backward)`` hit counts per gap."""
    gmax = max_gap
    stride = gmax + 1
    r = np.arange(size, dtype=np.int64)
    adv = _rng.generator(seed, "segment-adversary").geometric(1.0 - params.beta, size=(2, size, gmax)) - 1
    A = np.zeros((2, size, gmax + 1), dtype=np.int64)
    A[:, :, 1:] = np.cumsum(adv, axis=2)

    fo = DelayOracle(params.d, _rng.derive_seed(seed, 0))
    FS, FU = xgraph.segment_forward(fo, 1 + r * stride, gmax)
    bo = DelayOracle(params.d, _rng.derive_seed(seed, 1))
    BS, BU = xgraph.segment_backward(bo, gmax + r * stride, gmax)

    fwd = events.catchup_holds(A[0, :, 1:], FS[:, :-1], FU[:, 1:], ss)
    bwd = events.catchup_holds(A[1, :, 1:], BS[:, :-1], BU[:, 1:], ss)
    return np.stack([fwd.sum(axis=0), bwd.sum(axis=0)]).astype(np.int64)


def catchup_frequencies(params, trials, max_gap=50, ss=None, batch=2000, workers=1):
    """Empirical P(Bf(j, j+t)) and P(Bb(j-t, j)) for ``t = 1..max_gap``.

    Every trial is one independent segment; adversarial counts per step are
    Geom(1 - beta) - 1, the law of counts between successive honest blocks.
    Returns per-batch counts of shape ``(batches, 2, max_gap)`` and the
    batch sizes.
    """
    ss = params.ss if ss is None else ss
    sizes = [batch] * (trials // batch) + ([trials % batch] if trials % batch else [])
    task = _SizedTask(partial(_segment_batch, params, ss, max_gap), sizes)
    res = run_trials(task, params.seed, len(sizes), workers)
    return np.array(res), np.array(sizes)


class _SizedTask:
    def __init__(self, fn, sizes):
        self.fn, self.sizes = fn, sizes

    def __call__(self, index, seed):
        return self.fn(self.sizes[index], index, seed)


def fit_log_line(gaps, counts, trials, min_count=10):
    gaps = np.asarray(gaps)
    counts = np.asarray(counts)
    use = counts >= min_count
    if use.sum() < 3:
        return LineFit(np.nan, np.nan, np.nan, np.nan, (), (), False, "insufficient occurrences")
    x = gaps[use]
    y = np.log(counts[use] / trials)
    fit = stats.linregress(x, y)
    return LineFit(
        float(fit.slope),
        float(fit.intercept),
        float(fit.rvalue**2),
        float(fit.stderr),
        tuple(int(g) for g in x),
        tuple(float(v) for v in counts[use] / trials),
    )


def fit_catchup_decay(params, ss=None, gaps=range(5, 51), trials=10**5, batch=2000, workers=1):
    """Least-squares lines through ``(gap, log P)`` for forward and backward catch-ups.

    Only gaps with at least 10 occurrences in both directions are used.
    The slopes agree when their difference is within the 99% joint
    half-width, built from leave-one-batch-out standard errors.
    """
    gaps = np.asarray(list(gaps))
    per_batch, sizes = catchup_frequencies(params, trials, int(gaps.max()), ss, batch, workers)
    counts = per_batch.sum(axis=0)[:, gaps - 1]
    n = int(sizes.sum())
    # compare the directions on the same gaps
    common = (counts[0] >= 10) & (counts[1] >= 10)
    x = gaps[common]
    fits = []
    for c in range(2):
        fit = fit_log_line(x, counts[c, common], n)
        if fit.ok and len(sizes) > 2:
            # leave one batch out; gap estimates share segments, so OLS errors are too small
            slopes = []
            for b in range(len(sizes)):
                rest = counts[c, common] - per_batch[b, c, gaps[common] - 1]
                y = np.log(np.maximum(rest, 0.5) / (n - sizes[b]))
                slopes.append(stats.linregress(x, y).slope)
            slopes = np.array(slopes)
            B = len(slopes)
            jse = float(np.sqrt((B - 1) / B * ((slopes - slopes.mean()) ** 2).sum()))
            fit = dataclasses.replace(fit, jackknife_se=jse)
        fits.append(fit)
    f, b = fits
    gap = abs(f.slope - b.slope)
    hw = Z99 * float(np.hypot(f.jackknife_se, b.jackknife_se))
    return DecayReport(f, b, gap, hw)


def _correlation_batch(params, ss, back_gap, fwd_gap, offset, size, index, seed):
    stride = back_gap + offset + fwd_gap + 1
    j = back_gap + np.arange(size, dtype=np.int64) * stride
    oracle = DelayOracle(params.d, seed)
    adv = _rng.generator(seed, "segment-adversary").geometric(1.0 - params.beta, size=(size, stride - 1)) - 1
    BS, BU = xgraph.segment_backward(oracle, j, back_gap)
    FS, FU = xgraph.segment_forward(oracle, j + offset, fwd_gap)
    a_back = adv[:, :back_gap].sum(axis=1)
    a_fwd = adv[:, back_gap + offset :].sum(axis=1)
    xb = events.catchup_holds(a_back, BS[:, back_gap - 1], BU[:, back_gap], ss)
    xf = events.catchup_holds(a_fwd, FS[:, fwd_gap - 1], FU[:, fwd_gap], ss)
    xb, xf = xb.astype(np.int64), xf.astype(np.int64)
    return np.array([len(j), xb.sum(), xf.sum(), (xb * xf).sum()], dtype=np.int64)


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    trials: int
    p_backward: float
    p_forward: float


def catchup_correlation(params, trials=10**5, back_gap=3, fwd_gap=3, offset=0, ss=None, batch=5000, workers=1):
    """Correlation of the indicators of Bb(j - back_gap, j) and Bf(j', j' + fwd_gap).

    ``j' = j + offset``; the two index intervals share at most ``b_j``.
    """
    ss = params.ss if ss is None else ss
    sizes = [batch] * (trials // batch) + ([trials % batch] if trials % batch else [])
    task = _SizedTask(partial(_correlation_batch, params, ss, back_gap, fwd_gap, offset), sizes)
    n, sb, sf, sbf = merge(run_trials(task, params.seed, len(sizes), workers))
    pb, pf = sb / n, sf / n
    cov = sbf / n - pb * pf
    den = np.sqrt(pb * (1 - pb) * pf * (1 - pf))
    r = float(cov / den) if den > 0 else 0.0
    return CorrelationResult(r, int(n), float(pb), float(pf))


# ---------------------------------------------------------------------------
# distribution suite


@dataclass(frozen=True)
class LawTest:
    name: str
    statistic: float
    pvalue: float
    dof: int
    passed: bool
    tag: str = ""
    samples: int = 0


def pooled_bins(expected, min_expected=5.0):
    """Group consecutive cells so every group expects at least ``min_expected``.

    Returns a list of ``(start, stop)`` cell ranges covering all cells.
    """
    groups, start, acc = [], 0, 0.0
    for c, e in enumerate(expected):
        acc += e
        if acc >= min_expected:
            groups.append([start, c + 1])
            start, acc = c + 1, 0.0
    if start < len(expected):
        if groups:
            groups[-1][1] = len(expected)
        else:
            groups.append([0, len(expected)])
    return [tuple(g) for g in groups]


def chisquare_discrete(samples, pmf, support_max):
    """Chi-square of integer ``samples`` against ``pmf`` on ``0..support_max``.

    The last cell absorbs all mass (and samples) at or beyond ``support_max``.
    Negative samples count as a failure outright.
    """
    samples = np.asarray(samples, dtype=np.int64)
    n = len(samples)
    probs = np.array([pmf(x) for x in range(support_max)])
    probs = np.append(probs, max(0.0, 1.0 - probs.sum()))
    obs = np.bincount(np.clip(samples, 0, support_max), minlength=support_max + 1)
    groups = pooled_bins(n * probs)
    o = np.array([obs[a:b].sum() for a, b in groups])
    e = np.array([n * probs[a:b].sum() for a, b in groups])
    if len(groups) < 2:
        return 0.0, 1.0, 0
    e = e * (o.sum() / e.sum())
    chi = stats.chisquare(o, e)
    if (samples < 0).any():
        return float(chi.statistic), 0.0, len(groups) - 1
    return float(chi.statistic), float(chi.pvalue), len(groups) - 1


def _geom_tail(q):
    """Cells needed so the Geom tail beyond them is negligible."""
    return int(np.ceil(np.log(1e-12) / np.log(q))) + 1 if q > 0 else 1


def _law_test(name, samples, pmf, support_max, degenerate_value=None):
    samples = np.asarray(samples)
    if degenerate_value is not None:
        ok = bool((samples == degenerate_value).all())
        return LawTest(name, 0.0, 1.0 if ok else 0.0, 0, ok, "degenerate-law", len(samples))
    stat, p, dof = chisquare_discrete(samples, pmf, support_max)
    return LawTest(name, stat, p, dof, p > P_FLOOR, "", len(samples))


def _dominance_test(name, samples, d):
    """Empirical CDF of ``samples`` lies above the Geom(1 - d) CDF (support from 1).

    One-sided DKW band at level ``P_FLOOR``.
    """
    samples = np.asarray(samples)
    n = len(samples)
    eps = np.sqrt(np.log(1 / P_FLOOR) / (2 * n))
    xs = np.arange(0, int(samples.max()) + 2)
    ecdf = np.searchsorted(np.sort(samples), xs, side="right") / n
    geom = np.where(xs >= 1, 1 - d ** xs.astype(float), 0.0)
    slack = ecdf - geom
    worst = float(slack.min())
    return LawTest(name, worst, float("nan"), 0, worst >= -eps, "dominance", n)


def run_distribution_suite(params, trials=20000, gap=10, k_unheard=5, unheard_gap=40):
    """Goodness-of-fit of the implemented laws against their stated forms.

    FS(j, j+gap), BS(j, j-gap): 1 + Binomial(gap, 1 - d).  FU, BU:
    Geom(1 - d) - 1.  Adversarial counts between successive honest blocks of
    a generated timeline: Geom(1 - beta) - 1, and a two-sample test against
    the index-domain generator.  User-unheard Un_h(j, k_unheard) for a fresh
    observer and for a miner: dominated by Geom(1 - d).
    """
    if trials < 20000:
        raise ParameterError(f"the distribution suite needs at least 2*10^4 trials, got {trials}")
    d, beta, seed = params.d, params.beta, params.seed
    p_hear = 1.0 - d
    out = []
    stride = gap + 1

    oracle = DelayOracle(d, _rng.stream_key(seed, "suite-forward"))
    anchors = 1 + np.arange(trials, dtype=np.int64) * stride
    FS, FU = xgraph.segment_forward(oracle, anchors, gap)
    boracle = DelayOracle(d, _rng.stream_key(seed, "suite-backward"))
    BS, BU = xgraph.segment_backward(boracle, gap + np.arange(trials, dtype=np.int64) * stride, gap)

    def binom_pmf(x):
        return stats.binom.pmf(x - 1, gap, p_hear) if x >= 1 else 0.0

    def geom_pmf(q):
        return lambda x: (1 - q) * q**x

    deg = gap + 1 if d == 0 else None
    out.append(_law_test("FS", FS[:, gap], binom_pmf, gap + 2, deg))
    out.append(_law_test("BS", BS[:, gap], binom_pmf, gap + 2, deg))
    deg = 0 if d == 0 else None
    out.append(_law_test("FU", FU[:, gap], geom_pmf(d), _geom_tail(d), deg))
    out.append(_law_test("BU", BU[:, gap], geom_pmf(d), _geom_tail(d), deg))

    tl = generate_timeline(params.replace(horizon_blocks=trials + 1, seed=_rng.stream_key(seed, "suite-timeline")))
    gaps_ct = tl.gap_counts()
    deg = 0 if beta == 0 else None
    out.append(_law_test("adversarial-gaps", gaps_ct, geom_pmf(beta), _geom_tail(beta), deg))
    idx = index_domain_counts(beta, trials, _rng.stream_key(seed, "suite-index"))
    out.append(_two_sample("adversarial-two-sample", gaps_ct, idx, deg))

    if d > 0:
        uo = DelayOracle(d, _rng.stream_key(seed, "suite-unheard"))
        ustride = unheard_gap + 1
        ua = 1 + np.arange(trials, dtype=np.int64) * ustride
        S, _ = xgraph.segment_forward(uo, ua, unheard_gap)
        member = np.diff(np.concatenate([np.zeros((trials, 1), np.int64), S], axis=1), axis=1) > 0
        un = xgraph.segment_user_unheard(uo, observer(0), ua, member, k_unheard)
        out.append(_dominance_test("observer-unheard-dominance", un[un >= 0], d))
        # a miner inside each segment, mined before the k-th member
        miners = ua + _rng.generator(seed, "suite-miners").integers(1, k_unheard + 1, size=trials)
        un = xgraph.segment_user_unheard(uo, miners, ua, member, k_unheard)
        out.append(_dominance_test("miner-unheard-dominance", un[un >= 0], d))
    return out


def _two_sample(name, a, b, degenerate_value=None):
    a, b = np.asarray(a), np.asarray(b)
    if degenerate_value is not None:
        ok = bool((a == degenerate_value).all() and (b == degenerate_value).all())
        return LawTest(name, 0.0, 1.0 if ok else 0.0, 0, ok, "degenerate-law", len(a) + len(b))
    top = int(max(a.max(), b.max()))
    ca = np.bincount(a, minlength=top + 1)
    cb = np.bincount(b, minlength=top + 1)
    groups = pooled_bins(ca + cb, 10)
    table = np.array([[ca[x:y].sum() for x, y in groups], [cb[x:y].sum() for x, y in groups]])
    if table.shape[1] < 2:
        return LawTest(name, 0.0, 1.0, 0, True, "", len(a) + len(b))
    res = stats.chi2_contingency(table, correction=False)
    return LawTest(name, float(res.statistic), float(res.pvalue), int(res.dof), res.pvalue > P_FLOOR, "", len(a) + len(b))


# ---------------------------------------------------------------------------
# security region


def _exact(x):
    return x if isinstance(x, Fraction) else Fraction(repr(float(x)))


def in_region(beta, d):
    """beta / (1 - beta) < 1 - d, exactly."""
    b, dd = _exact(beta), _exact(d)
    return b < (1 - b) * (1 - dd)


def in_prior_region(beta, d):
    """beta < (1 - 2d) / (2 (1 - d)), exactly."""
    b, dd = _exact(beta), _exact(d)
    return 2 * b * (1 - dd) < 1 - 2 * dd


@dataclass(frozen=True)
class SweepCell:
    beta: Fraction
    d: Fraction
    estimate: Estimate
    in_region: bool
    in_prior_region: bool

    @property
    def strict(self):
        """Inside the new region but outside the prior one."""
        return self.in_region and not self.in_prior_region


def region_grid(n=21):
    """``n`` loss values ``d = i / n`` and ``n`` adversarial fractions.

    The beta values are 0 and, for every positive ``d``, the midpoint of the
    band between the two boundaries at that ``d`` (the prior bound clipped at
    0), so each row of the grid crosses the band.
    """
    ds = [Fraction(i, n) for i in range(n)]
    betas = {Fraction(0)}
    for d in ds[1:]:
        new = (1 - d) / (2 - d)
        prior = max(Fraction(0), (1 - 2 * d) / (2 * (1 - d)))
        betas.add((new + prior) / 2)
    return sorted(betas), ds


def uniform_grid(n=21, top=Fraction(19, 20)):
    step = Fraction(top) / (n - 1)
    g = [i * step for i in range(n)]
    return g, list(g)


def sweep_region(betas, ds, tau=None, trials=0, params=None, workers=1, **violation_kw):
    """Region flags for every ``(beta, d)`` cell, with violation estimates when ``trials > 0``."""
    cells = []
    for d in ds:
        for b in betas:
            if not (0 <= b < 1 and 0 <= d < 1):
                raise ParameterError(f"grid point ({b}, {d}) outside [0, 1)")
            est = None
            if trials:
                p = (params or SimParams()).replace(beta=float(b), d=float(d))
                est = estimate_violation(p, [tau], trials, workers=workers, **violation_kw)[0]
            cells.append(SweepCell(Fraction(b), Fraction(d), est, in_region(b, d), in_prior_region(b, d)))
    return cells


# ---------------------------------------------------------------------------
# deterministic oracle sweep


@dataclass
class VerifyReport:
    seeds: int = 0
    lemma1: int = 0
    paths: int = 0
    lemma4: int = 0
    thm2_checked: int = 0
    thm2_failed: int = 0
    thm3_checked: int = 0
    thm3_failed: int = 0
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    seconds: dict = field(default_factory=lambda: {"setup": 0.0, "lemmas": 0.0, "theorems": 0.0})

    @property
    def lemma_failures(self):
        return self.lemma1 + self.paths + self.lemma4

    @property
    def theorem_failures(self):
        return self.thm2_failed + self.thm3_failed

    @property
    def ok(self):
        return self.lemma_failures == 0 and self.theorem_failures == 0


VERDICT_COLUMNS = ("seed", "j", "ss", "W", "verdict", "reason", "failing_clause")


def verification_adversary():
    """Withholding attacker used by the oracle sweep: races from the start,
    restarts on the public tip once three blocks behind."""
    return protocol.make_adversary("private", margin=1, targets="all", restart_lag=3)


def verify_seed(params, seed, report, n_paths=1000, n_observers=2, n_miners=20, lemmas=True, theorems=True):
    """Run every deterministic oracle on one seeded run, accumulating into ``report``."""
    t0 = time.perf_counter()
    p = params.replace(seed=seed)
    tl = generate_timeline(p)
    oracle = DelayOracle(p.d, seed, tl)
    graph = xgraph.build(tl, oracle)
    trace = protocol.run(tl, oracle, verification_adversary(), observers=range(n_observers), graph=graph)
    an = events.RunAnalysis(tl, graph)
    t1 = time.perf_counter()
    report.seconds["setup"] += t1 - t0
    report.seeds += 1

    if lemmas:
        rng = _rng.generator(seed, "lemma1-paths")
        for v in events.check_lemma1(trace, n_paths, rng):
            report.lemma1 += 1
            report.failures.append((seed, "lemma1", v))
        for v in events.check_sequence_paths(trace, an):
            report.paths += 1
            report.failures.append((seed, "sequence-path", v))
        for v in events.check_lemma4(trace, an, p.window):
            report.lemma4 += 1
            report.failures.append((seed, "lemma4", v))
    t2 = time.perf_counter()
    report.seconds["lemmas"] += t2 - t1

    if theorems:
        ss = events.as_fraction(p.ss)
        vals = an.nakamoto_values(ss, p.window)
        index = events.TreeIndex(trace)
        pick = _rng.generator(seed, "theorem3-miners").choice(tl.honest_count, size=min(n_miners, tl.honest_count), replace=False)
        users = [observer(u) for u in range(n_observers)] + [miner_of(int(i)) for i in np.sort(pick)]
        for j in range(tl.honest_count):
            code = int(vals[j])
            clause = ""
            if code == 1:
                report.thm2_checked += 1
                res = events.verify_theorem2(trace, an, j, ss, p.window, index)
                if not res.passed:
                    report.thm2_failed += 1
                    clause = "thm2-" + res.clause
                    report.failures.append((seed, "theorem2", (j, res.clause, res.witness)))
                for h in users:
                    if not an.check_criterion(h, j, ss).occurred:
                        continue
                    report.thm3_checked += 1
                    res = events.verify_theorem3(trace, an, h, j, ss, p.window, index)
                    if not res.passed:
                        report.thm3_failed += 1
                        clause = clause or f"thm3-{h}"
                        report.failures.append((seed, "theorem3", (j, str(h), res.witness)))
            verdict = {1: events.OCCURRED, 0: events.NOT_OCCURRED, -1: events.UNDETERMINED}[code]
            reason = "" if code == 1 else ("catch-up" if code == 0 else ("genesis" if j == 0 else "horizon-truncation"))
            report.rows.append((seed, j, str(ss), p.window, verdict, reason, clause))
    report.seconds["theorems"] += time.perf_counter() - t2
    return report


def verify_seeds(params, seeds, **kw):
    """Oracle sweep over ``seeds`` trials derived from ``params.seed``."""
    report = VerifyReport()
    for i in range(seeds):
        verify_seed(params, _rng.derive_seed(params.seed, i), report, **kw)
    return report
