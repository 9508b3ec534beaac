"""Pseudo-spectral Navier-Stokes solver in a finite cylinder.

Velocity is represented through toroidal/poloidal potentials, radial
dependence through a polynomial basis analytic at the axis, azimuthal
dependence through Fourier modes and axial dependence through Chebyshev
polynomials.  See README.md for the module map.
"""

from .errors import (
    ConfigurationError,
    CylflowError,
    DivergenceError,
    NodeConvergenceError,
    SolverError,
)
from .radial import (
    BandedOperatorPair,
    BasisParams,
    RadialBasisTable,
    build_basis,
    forward_transform,
    inverse_transform,
    operator_banded,
    quadrature_nodes,
)

__all__ = [
    "BandedOperatorPair",
    "BasisParams",
    "ConfigurationError",
    "CylflowError",
    "DivergenceError",
    "NodeConvergenceError",
    "RadialBasisTable",
    "SolverError",
    "build_basis",
    "forward_transform",
    "inverse_transform",
    "operator_banded",
    "quadrature_nodes",
]
