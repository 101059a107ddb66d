"""Eigenvalues of a correlation matrix built from pure noise.

Uncorrelated returns still give a spread of eigenvalues, bounded by the
Marchenko-Pastur edges. Anything above the upper edge is a candidate for
real structure.
"""
import numpy as np

from smkt.rmt import correlation_matrix, eigendecompose, mp_density
from smkt.timeseries import ReturnPanel

N, T = 259, 2072
rng = np.random.default_rng(0)
panel = ReturnPanel.from_matrix(rng.standard_normal((N, T)))
spec = eigendecompose(correlation_matrix(panel), T)
b = spec.bounds
print(f"Q = T/N = {b.Q:.2f}, edges [{b.lambda_min:.3f}, {b.lambda_max:.3f}]")
print(f"observed range [{spec.eigenvalues[-1]:.3f}, {spec.eigenvalues[0]:.3f}]")

# compare the histogram with the analytic density
counts, edges = np.histogram(spec.eigenvalues, bins=12, range=(b.lambda_min, b.lambda_max))
centers = 0.5 * (edges[:-1] + edges[1:])
width = edges[1] - edges[0]
print("\n lambda   observed  expected")
for c, n_obs in zip(centers, counts):
    print(f"{c:7.3f}  {n_obs:8d}  {N * width * mp_density(c, b.Q):8.1f}")

# a finite panel leaves a few stragglers just past the edge
print("\nabove the edge:", int(np.sum(spec.eigenvalues > b.lambda_max)))
