"""
Profile terms of the large-time expansion
=========================================

Evaluate the heat kernel, the Coulomb field of a Gaussian and the
first-order radial correction U1rad, and check their self-similar scaling.
"""

import math

import numpy as np

from dhasymp import kernels, profiles
from dhasymp.analysis import gamma, lq_norm_profile

# heat kernel at the origin and its Gauss-law field along the x axis
x = np.array([[r, 0.0, 0.0] for r in (0.0, 0.5, 1.0, 2.0, 4.0)])
print("G(1, 0) =", kernels.heat_kernel(1.0, np.zeros(3)))
print("field of G(1) along x (closed form):", kernels.field_of_gaussian_closed(1.0, x)[:, 0])
print("same via the sigma integral:        ", kernels.field_of_gaussian_sigma(1.0, x)[:, 0])

# U1rad is radial; both quadrature paths agree
r = np.linspace(0.0, 6.0, 7)
double = profiles.u1rad_radial(1.0, r, method="double")
collapsed = profiles.u1rad_radial(1.0, r, method="collapsed")
for ri, a, b in zip(r, double, collapsed):
    print(f"r={ri:4.1f}  U1rad double={a:+.10e}  collapsed={b:+.10e}")

# J tends to U1rad as t grows, at rate t^-5/2 at the origin
for t in (4.0, 16.0, 64.0):
    j = profiles.j_radial(t, [0.0])[0]
    u = profiles.u1rad_radial(t, [0.0])[0]
    print(f"t={t:5.1f}  J={j:+.6e}  U1rad={u:+.6e}  diff={abs(j - u):.3e}")

# t^(gamma_q + 1/2) ||U1rad(t)||_q is constant in t
term = lambda t, rr: profiles.u1rad_radial(t, rr, method="collapsed")
for q in (1.0, 2.0, math.inf):
    vals = [t ** (gamma(q) + 0.5) * lq_norm_profile(term, t, q) for t in (1.0, 4.0, 16.0, 64.0)]
    print(f"q={q:g}: scaled norms", " ".join(f"{v:.8e}" for v in vals))
