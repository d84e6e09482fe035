"""Two routes to the same genealogy law.

A height-T genealogy can be drawn directly from the closed-form coalescent
law (i.i.d. depths until one exceeds T) or grown forward as a branching
population and read back through ancestor walks.  This script draws both
ways and compares tip-count and depth histograms.
"""

import numpy as np

from lfcoal import (
    LFParams,
    coalescent_depths_of,
    coalescent_pmf,
    coalescent_tail,
    simulate_cpp,
    simulate_forward_bgw,
    write_newick,
    depths_to_tree,
)
from lfcoal.oracle import chi_square_gof

params = LFParams(0.5, 0.8)
T = 6
REPS = 5_000
rng = np.random.default_rng(1)

print(f"model: p={params.p}, r={params.r}, mean offspring m={params.m}")
print(f"stem tail P(H > {T}) = {coalescent_tail(params, T):.6f}")
print()

seq = simulate_cpp(params, T, rng)
print(f"one genealogy with {seq.n} tips, depths {seq.depths}")
print("as Newick:", write_newick(depths_to_tree(seq)))
print()

direct_depths = []
for _ in range(REPS):
    direct_depths.extend(simulate_cpp(params, T, rng).depths)

forward_depths = []
done = 0
while done < REPS:
    fwd = simulate_forward_bgw(params, T, rng)
    if fwd is None:
        continue
    forward_depths.extend(coalescent_depths_of(fwd).depths)
    done += 1

pmf = coalescent_pmf(params, np.arange(1, T + 1))
expected = pmf / pmf.sum()
print(f"{'depth':>5} {'closed-form':>12} {'direct sim':>12} {'forward sim':>12}")
for d in range(1, T + 1):
    direct = direct_depths.count(d) / len(direct_depths)
    forward = forward_depths.count(d) / len(forward_depths)
    print(f"{d:>5} {expected[d - 1]:>12.5f} {direct:>12.5f} {forward:>12.5f}")

for name, depths in [("direct", direct_depths), ("forward", forward_depths)]:
    observed = np.bincount(np.asarray(depths), minlength=T + 1)[1:]
    stat, p = chi_square_gof(observed, expected)
    print(f"{name} simulator vs closed form: chi-square {stat:.2f}, p = {p:.3f}")
