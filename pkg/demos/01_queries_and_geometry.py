"""A tour of the query geometry: build a region around two stems, watch a
third get pushed outside, morph between the tight and the loose region.

Run from the repo root: python3 demos/01_queries_and_geometry.py
"""

import numpy as np

from regionsep.geometry import (Hyperellipsoid, contains, interpolate,
                                mahalanobis, to_query_vector)
from regionsep.precompute import enclosing_ellipsoid, excluding_radii, PrecomputeConfig

rng = np.random.default_rng(7)

# Pretend embeddings of four sources in a 3-d space. The first two are the
# targets; the other two must stay outside the query region.
targets = rng.normal([0.0, 0.0, 0.0], 0.2, size=(2, 3))
others = np.array([[1.5, 0.2, -0.1],
                   [-0.3, 1.8, 0.4]])

print("target embeddings:\n", np.round(targets, 3))
print("non-target embeddings:\n", np.round(others, 3))

# Smallest ellipsoid (in the population-covariance family) containing both
# targets. With two points it degenerates to a segment plus the delta floor.
c, P, r, _ = enclosing_ellipsoid(targets)
inclusion = Hyperellipsoid(center=c, axes=P, radii=r)
print("\ninclusion radii:", np.round(r, 4))
for k, z in enumerate(targets):
    print(f"  target {k}: mahalanobis {mahalanobis(z, inclusion):.4f}  "
          f"inside={contains(inclusion, z)}")

# Grow each axis as far as possible while every non-target stays outside.
r_perp, dropped = excluding_radii(others, c, P, r, PrecomputeConfig())
print("\nexclusion radii:", np.round(r_perp, 4))
assert not dropped
for k, z in enumerate(others):
    loose = Hyperellipsoid(center=c, axes=P, radii=r_perp)
    print(f"  non-target {k}: mahalanobis {mahalanobis(z, loose):.4f}  "
          f"inside={contains(loose, z)}")

# Morph from tight (t=0) to loose (t=1). Targets are members the whole way;
# non-targets never are.
print("\nmorphing t = 0 .. 1:")
for t in np.linspace(0.0, 1.0, 5):
    q = Hyperellipsoid(center=c, axes=P, radii=interpolate(r, r_perp, t))
    n_in = sum(contains(q, z) for z in targets)
    n_out = sum(contains(q, z) for z in others)
    print(f"  t={t:.2f}: targets inside {n_in}/2, non-targets inside {n_out}/2")

# The flat encoding handed to the separator network: center followed by the
# lower triangle of the shape matrix.
q = to_query_vector(inclusion)
print(f"\nquery vector length for dim 3: {q.shape[0]} (= 3*(3+3)/2)")
