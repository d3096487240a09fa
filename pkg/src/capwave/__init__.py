"""Exact verification of time-periodic solutions of the cubic wave equation.

Solutions of Omega^2 u_tt - u_xx + u^3 = 0 with Dirichlet conditions are
expanded in the modes cos((2m+1)t) sin((2n+1)x). A candidate u0 is certified
by checking, in rational arithmetic, that a Newton-like operator is a
contraction on a small ball around it.
"""
from .errors import CapwaveError, ConfigurationError, DivergenceError, DomainError, InversionError, ParseError
from .fourier import CoeffGrid, EvenGrid, Frequency, NormWeights, cube, mult_by_basis, square, weighted_norm
from .operators import AcalMatrix, TruncationSpec, compute_bounds, make_truncation
from .acal import PrecisionPolicy, assemble_atilde, build_acal, invert_and_rationalize
from .certify import Certificate, suggest_constants, verify

__version__ = "0.1.0"
