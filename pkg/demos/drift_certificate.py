"""
Explicit Foster-Lyapunov witnesses for the scalar benchmark and a random
bivariate model, followed by a numerical audit of the drift inequality.
"""

from fractions import Fraction
import math

import numpy as np

from bekk_ergo import BekkModel, build_certificate, verify_drift
from bekk_ergo.catalog import get_example

scalar = BekkModel(C=[[1.0]], A=[[[math.sqrt(0.2)]]], B=[[[math.sqrt(0.7)]]])
cert = build_certificate(scalar)
for name in ("alpha0", "alpha", "b"):
    value = getattr(cert, name)
    print(f"{name:6s} = {value:.15f}  ~ {Fraction(value).limit_denominator(1000)}")
print("V_1, V_2 =", np.round(cert.V_mats.ravel(), 12))

m = get_example("ex-2x2").model()
cert = build_certificate(m)
print(f"\nex-2x2: alpha0 = {cert.alpha0:.4f}, alpha = {cert.alpha:.4f}, b = {cert.b:.3f}, "
      f"level set K = {{V <= {cert.K_level:.1f}}}")
audit = verify_drift(m, cert, mc_states=5, mc_draws=50_000, seed=3)
print(f"states checked {audit.n_states}, violations {audit.violations}, worst slack {audit.worst_slack:.3e}")
