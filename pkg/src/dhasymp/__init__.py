"""Large-time asymptotics of the 3D Debye-Hückel drift-diffusion equation.

Submodules
----------
quadrature  adaptive Gauss-Kronrod integration with singular/tail maps
kernels     heat kernel calculus and Gaussian Coulomb fields
profiles    asymptotic profile terms and constants
solver      pseudospectral periodic-box solver
analysis    moments, norms, decay fits, residual reports
verify      self-check suites used by the command line
cli         ``dhasymp`` command line entry point
"""

__version__ = "0.1.0"
