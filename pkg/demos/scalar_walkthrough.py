"""
Scalar GARCH(1,1) walk-through: c = 1, a^2 = 0.2, e^2 = 0.7.

Checks stationarity, simulates a long path, compares time averages with the
solved second moment and prints a short convergence curve from two starts.
"""

import math

from bekk_ergo import BekkModel, check_h3, convergence_probe, moment_check, run
from bekk_ergo.stationarity import attracting_point

m = BekkModel(C=[[1.0]], A=[[[math.sqrt(0.2)]]], B=[[[math.sqrt(0.7)]]])

rep = check_h3(m)
print(f"rho_AB = {rep.rho_AB:.3f}  stationary = {rep.stationary}")
print(f"Sigma = {rep.Sigma[0, 0]:.4f}  (closed form 1 / (1 - 0.9) = 10)")
print(f"attracting point sigma = {rep.T.sigma(0)[0, 0]:.4f}  (1 / (1 - 0.7) = 10/3)")

tr = run(m, n=200_000, burn_in=1000, seed=1)
mom = moment_check(tr, m)
print(f"mean X^2 = {mom.mean_xx[0]:.3f} +/- {mom.se_xx[0]:.3f}  z = {mom.z_xx[0]:+.2f}")

T = attracting_point(m)
conv = convergence_probe(m, [T, T.scaled(5.0)], chains_per_start=300, horizon=40, seed=2)
print(f"noise floor {conv.noise_floor:.3f}")
for lag in (1, 5, 10, 20, 40):
    row = "  ".join(f"{conv.distance_curve[s, lag - 1]:.3f}" for s in range(2))
    print(f"lag {lag:3d}: {row}")
for label, fit in zip(("T", "5T"), conv.fits):
    print(f"start {label}: fitted rate {fit['rate']:.3f}, R^2 {fit['r2']:.3f}")
