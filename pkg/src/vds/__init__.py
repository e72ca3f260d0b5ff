"""Elliptic gamma functions, van Diejen-type kernel operators and their spectra.

Modules: specfun (special functions), vdcore (couplings, kernels, coefficients),
hsspec (Nystrom spectra and continuation), adoeigen (difference-operator
eigenvalues and identities), polyasym (orthogonal polynomials and decay),
symlab (clusters and Weyl orbits), acceptance and cli.
"""
from .specfun import Params
from .vdcore import Coupling

__version__ = "0.1.0"

__all__ = ["Params", "Coupling", "__version__"]
