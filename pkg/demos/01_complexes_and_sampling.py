"""Build small simplicial complexes, sample them, and look at the metric.

Each simplex carries the round metric of the corresponding sphere octant
(an edge has length pi/2), and global distances are shortest paths through
shared samples.
"""

import numpy as np

from coarsek.geometry import (
    build_complex,
    cycle_complex,
    decompose,
    discretize,
    neighborhood,
    simplex_center,
)

# -- a path of two edges -----------------------------------------------------

path = build_complex([(0, 1), (1, 2)])
print(path)
print("simplices:", path.simplices)

space = discretize(path, mesh=0.3)
print(f"\nsampled at mesh 0.3: {len(space)} points, "
      f"max finite distance {space.dist[np.isfinite(space.dist)].max():.4f}")
print("distance from vertex 0 to vertex 2 (two edges):",
      space.dist[0, [i for i, p in enumerate(space.points)
                     if p.carrier == (2,)][0]])

# -- neighborhoods ------------------------------------------------------------

left = np.array([p.carrier == (0,) for p in space.points])
ball = neighborhood(space, left, 0.5)
print(f"\n0.5-ball around vertex 0 holds {ball.sum()} of {len(space)} samples")

# -- two overlapping pieces ---------------------------------------------------

circle = cycle_complex(6)
circle_samples = discretize(circle, mesh=0.25)
x1, x2 = decompose(circle_samples, circle)
print(f"\n6-gon circle: {len(circle_samples)} samples")
print(f"inner piece X1: {x1.sum()}  outer piece X2: {x2.sum()}  "
      f"overlap band: {(x1 & x2).sum()}")
print("cover complete:", bool((x1 | x2).all()))

center = simplex_center(circle, (0, 1))
print("center of edge (0, 1):", center.coords)
