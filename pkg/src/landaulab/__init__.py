"""landaulab: numerical laboratory for the homogeneous Landau-Coulomb equation.

Solves d_t f = div(A[f] grad f - f grad a[f]) on a truncated velocity grid
with free-space fast-convolution coefficients, and empirically checks the
quantitative structures of the L^p theory: conservation laws, entropy decay,
coefficient bounds, moment growth, L^p propagation, sup-norm smoothing rates,
the level-set iteration, and the mixed space-time regularity machinery.
"""

__version__ = "0.1.0"

from .grid import ScalarField, VelocityGrid  # noqa: F401
