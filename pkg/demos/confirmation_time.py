"""Private-chain double spend: violation probability against confirmation time."""

from lossychain import SimParams, montecarlo

p = SimParams(beta=0.2, d=0.5, horizon_blocks=400, seed=1)
ks = (5, 10, 20, 40, 80)
taus = [k / p.lam_honest for k in ks]
flags = montecarlo.violation_flags(p, taus, trials=200)
for k, e in zip(ks, montecarlo.estimates_from_flags(flags)):
    print(f"tau = {k:3d} honest gaps   P(violation) = {e.point:.3f} [{e.lo:.3f}, {e.hi:.3f}]")
print("traces violated at a tau but not at a larger one are impossible:", len(montecarlo.tau_monotone(flags)) == 0)

# past the security boundary the attacker wins regardless of tau
p = p.replace(beta=0.6, d=0.5)
e = montecarlo.estimate_violation(p, [40 / p.lam_honest], trials=50)[0]
print(f"beta=0.6, d=0.5, tau=40 gaps: P(violation) = {e.point:.3f}")
