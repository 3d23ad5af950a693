"""Smoothed spectral measures of self-adjoint operators and pencils.

The measure ``mu_f`` of a unit vector ``f`` is approximated by its
convolution with a high-order rational kernel, which only needs resolvent
solves at a few complex shifts.  Operators are discretized adaptively in a
rational basis on the real line or in periodic Fourier bases.
"""

from .engine import (
    MeasureQuery,
    MeasureResult,
    Problem,
    SolverOptions,
    adaptive_solve,
    evaluate_grid,
    evaluate_measure,
    evaluate_measure_pencil,
)
from .errors import (
    AccuracyWarning,
    BasisMismatchError,
    ConditioningWarning,
    InvalidArgumentError,
    InvalidOperatorError,
    InvalidPencilError,
    NoConvergenceError,
    ShiftOnRealAxisError,
    SingularSystemError,
    SpecMeasureError,
    UnsupportedOrderError,
)
from .expressions import Expression, parse_expression
from .fourier import FourierPencil, f_analyze, f_apply_B, f_inner_product, f_synthesize
from .kernels import RationalKernel, equispaced_poles, kernel_scaled, kernel_value, vandermonde_residues
from .realline import FunctionRep, RealLineOperator, analyze, inner_product, synthesize
from .terms import Cauchy, Derivative, Multiplication, Symbol

__version__ = "0.1.0"
