"""How often blocks become permanent, and the catch-up decay behind it."""

from lossychain import SimParams, montecarlo

for beta, d in ((0.1, 0.3), (0.2, 0.5), (0.25, 0.4)):
    e = montecarlo.estimate_nakamoto_rate(SimParams(beta=beta, d=d, seed=3), trials=10)
    print(f"beta={beta} d={d}: rate {e.point:.4f} [{e.lo:.4f}, {e.hi:.4f}], undetermined {e.undetermined_frac:.3f}")

rep = montecarlo.fit_catchup_decay(SimParams(beta=0.15, d=0.3, seed=3), trials=10**5)
for name, f in (("forward", rep.forward), ("backward", rep.backward)):
    print(f"{name:8s} log P(catch-up) ~ {f.intercept:.2f} {f.slope:+.3f} * gap   (R2 {f.r2:.3f})")
