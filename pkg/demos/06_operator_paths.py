"""Operator paths whose propagation decays toward the horizon: finding the
decay time and shifting a path so its tail starts at time 1."""

import numpy as np

from coarsek.generators import random_banded, rng_from
from coarsek.geometry import SampledSpace
from coarsek.operator import propagation
from coarsek.paths import PathOperator, eventual_propagation, evaluate, trim

rng = rng_from(31)
d = 0.15 * np.abs(np.subtract.outer(np.arange(9.0), np.arange(9.0)))
space = SampledSpace.from_distance_matrix(d)

radii = [1.3, 0.9, 0.6, 0.4, 0.25, 0.12]
values = [random_banded(space, r, rng, norm=1.0) for r in radii]
path = PathOperator(np.arange(1.0, len(radii) + 1), values)

print("sampled propagations:",
      [round(propagation(v), 3) for v in path.values])
print("uniform-continuity modulus:", round(path.modulus, 3))

for target in (1.0, 0.5, 0.3):
    n = eventual_propagation(path, target)
    print(f"propagation stays below {target} from time {n}")

n = eventual_propagation(path, 0.5)
tail = trim(path, n)
print(f"\ntrimmed at {n}: {len(tail)} samples, horizon {tail.horizon}")
print("tail starts below 0.5 immediately:",
      eventual_propagation(tail, 0.5) == 1.0)
print("evaluation agrees with the parent path:",
      np.allclose(evaluate(tail, 1.0).entries, evaluate(path, n).entries))
