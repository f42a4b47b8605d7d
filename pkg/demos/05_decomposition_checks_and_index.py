"""Randomized verification of the two-piece decomposition axioms, and the
clutching index detector on a circle.

The detector rounds a partial trace of a spectral-projection difference at
one cut of the circle; for the cyclic shift it reads off the winding.
"""

from coarsek.generators import shift_unitary
from coarsek.geometry import circle_space
from coarsek.mv import (
    MvPair,
    circle_cut,
    clutching_projection,
    local_index,
    verify_weak_mv_pair,
)
from coarsek.operator import FiniteOperator, propagation

# -- splitting and midpoint axioms on a finely sampled circle -----------------

cx, space, order = circle_space(3, mesh=0.03)
pair = MvPair.from_decomposition(space, cx, r=1 / 50)
report = verify_weak_mv_pair(space, pair, trials=16, seed=2)
print(f"circle with {len(space)} samples, degree {pair.r}")
print(f"splitting ratio  {report['worst_split_ratio']:.3f}  (bound 4)")
print(f"midpoint ratio   {report['worst_cia_ratio']:.3f}  (bound 4)")
print(f"reconstruction   {report['worst_reconstruction']:.1e}")
print("verdict:", "pass" if report["passed"] else "fail")

# -- the index of the shift --------------------------------------------------

_, space32, order32 = circle_space(16)  # 32 equally spaced samples
phi, cut_region, other_region = circle_cut(space32, order32)
shift = shift_unitary(space32, order32)
p = clutching_projection(shift, phi)
print(f"\nclutching projection: propagation {propagation(p):.3f} "
      f"<= 2 prop(u) = {2 * propagation(shift):.3f}")

one = FiniteOperator.identity(space32, unitized=False)
print("index of the identity:", local_index(one, phi, cut_region))
print("index of the shift:   ", local_index(shift, phi, cut_region))
print("index of the 2-shift: ",
      local_index(shift_unitary(space32, order32, power=2), phi, cut_region))
print("opposite cut region:  ", local_index(shift, phi, other_region))
