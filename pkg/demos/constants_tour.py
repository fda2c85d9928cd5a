"""
Constants of the logarithmic correction
=======================================

The coefficient of the t^(-5/2) log t term is known in closed form. Here it
is recomputed by quadrature from the profiles and compared, in both
prefactor modes.
"""

import math

from dhasymp import profiles
from dhasymp.cli import constants_table

for name, value, source in constants_table():
    print(f"{name:<38} {value:.10e}  ({source})")

# the log coefficient kappa is one third of the moment integral
mc = profiles.moment_coefficient(profiles.Moments(1.0), method="collapsed")
print("kappa from quadrature:", mc / 3, " closed form:", profiles.KAPPA)
print("paper/oracle ratio of U1rad prefactors = 1/sqrt(pi) =", 1 / math.sqrt(math.pi))
