"""
Two models whose stationary chain lives on a lower-dimensional set.

ex-3.3.10: the sampled orbit from T spans only part of the state space.
ex-3.3.11: the second variance is frozen at 4/3 on the stationary set, so a
start elsewhere can never reach it and the chain from there does not converge
in total variation.
"""

from bekk_ergo import convergence_probe, offstate_probe, orbit_dimension
from bekk_ergo.catalog import get_example

orb = orbit_dimension(get_example("ex-3.3.10").model(), seed=0)
print(f"ex-3.3.10: linear rank {orb.linear_rank} of {orb.ambient_dim}, "
      f"quadratic rank {orb.quadratic_rank} of {orb.feature_dim}, degenerate = {orb.degenerate}")

ex = get_example("ex-3.3.11")
m = ex.model()
for key in ("on", "off"):
    probe = offstate_probe(m, ex.start(key), horizon=10_000)
    print(f"ex-3.3.11 start '{key}': flagged = {probe.flagged}, "
          f"fixed values {[str(v) for v in probe.fixed_values_exact]}")

conv = convergence_probe(m, [ex.start("on"), ex.start("off")], chains_per_start=300, horizon=40, seed=1)
s22 = conv.coordinate_labels.index("sigma[0][1,1]")
print("lag   on:total  off:total  off:sigma22")
for lag in (1, 10, 20, 40):
    print(f"{lag:3d}   {conv.distance_curve[0, lag - 1]:8.3f}  {conv.distance_curve[1, lag - 1]:9.3f}"
          f"  {conv.per_coordinate[1, lag - 1, s22]:11.3f}")
print(f"on-start fit: rate {conv.fits[0]['rate']:.3f}, R^2 {conv.fits[0]['r2']:.3f}")
