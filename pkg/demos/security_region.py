"""Region map: '#' both bounds hold, '+' only the new bound, '.' neither."""

from fractions import Fraction

from lossychain import montecarlo

n = 21
ds = [Fraction(i, n) for i in range(n)]
betas = [Fraction(i, 40) for i in range(20, -1, -1)]
cells = {(c.beta, c.d): c for c in montecarlo.sweep_region(betas, ds)}
print("beta \\ 21d " + "".join(f"{i:3d}" for i in range(n)))
for b in betas:
    row = []
    for d in ds:
        c = cells[b, d]
        row.append(" # " if c.in_prior_region else (" + " if c.in_region else " . "))
    print(f"  {float(b):.3f}   " + "".join(row))

betas, ds = montecarlo.region_grid(n)
cells = montecarlo.sweep_region(betas, ds)
print(f"\nband-crossing grid: {sum(c.strict for c in cells)} of {len(cells)} cells lie only in the new region")
