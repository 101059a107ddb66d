"""Waiting times between large volatilities.

For independent volatilities, waiting times are geometric and a power law
is a poor description. Heavy-tailed waiting times are well described by a
power law, and scaling each stock's intervals by their mean makes
different thresholds comparable.
"""
import numpy as np

from smkt.recurrence import (IntervalSet, analyze_threshold, geometric_ks_test, pool_scaled,
                             powerlaw_fit, scaled_distribution, collapse_check)
from smkt.synth import generate_pareto_intervals

rng = np.random.default_rng(0)
vols = [np.abs(rng.standard_normal(20_000)) for _ in range(10)]
for q in (2.0, 3.0):
    dist = analyze_threshold(vols, q, n_boot=100, seed=1)
    intervals = np.concatenate([np.diff(np.flatnonzero(v > q)) for v in vols])
    ks, p_geo, p_hat = geometric_ks_test(intervals, seed=2)
    print(f"q = {q}: {dist.n} intervals, geometric p = {p_geo:.2f}, power-law p = {dist.p_value}")

# heavy-tailed intervals
x = generate_pareto_intervals(2.5, 1.0, 20_000, seed=3)
fit = powerlaw_fit(x)
print(f"\nPareto(2.5): gamma = {fit.gamma:.3f}, x_min = {fit.x_min:.3f}, tail n = {fit.n_tail}")

# three thresholds with different mean intervals, scaled by their means
dens = []
for j, scale in enumerate((1.0, 4.0, 9.0)):
    sets = [IntervalSet(j, generate_pareto_intervals(2.5, scale, 5000, seed=10 * j + i)) for i in range(4)]
    dens.append(scaled_distribution(pool_scaled(sets).samples))
cc = collapse_check(dens)
print(f"collapse: max bin z = {cc.max_z:.2f} over {len(cc.z)} comparisons")
# the worst bins sit at the hard lower cutoff, whose scaled position
# moves with each sample mean
worst = sorted(cc.z, key=cc.z.get)[-3:]
print("  worst bins start at x =", [round(float(10 ** (k / 20)), 3) for _, _, k in worst])
d = dens[0]
for c, y in list(zip(d.centers, d.density))[::8]:
    print(f"  x = {c:7.3f}  P(x) = {y:.4g}")
