"""Backend-independent descriptions of self-adjoint operator terms.

A term only records *what* the operator is.  The real-line and Fourier
backends turn the same term into a matrix in their own basis.  Coefficients
are real constants or vectorized callables (``f(x)`` in 1D, ``f(x, y)`` in
2D); :class:`specmeasure.expressions.Expression` objects qualify.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

from .errors import UnsupportedOrderError

Coefficient = Union[float, Callable]


@dataclass(frozen=True, eq=False)
class Multiplication:
    """Multiplication by a real function ``a``."""

    coefficient: Coefficient


@dataclass(frozen=True, eq=False)
class Derivative:
    """``c (-i d/d var)^p`` written symmetrically.

    Odd ``p``: ``(c D^p + D^p c)/2``.  Even ``p``: ``D^(p/2) c D^(p/2)``, with
    ``D = -i d/d var``.  ``Derivative(2)`` is therefore ``-d^2/dx^2`` and
    ``Derivative(1, c, "y")`` with ``c = c(x)`` is ``-i c(x) d/dy``.
    """

    order: int
    coefficient: Coefficient = 1.0
    variable: str = "x"

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 1:
            raise UnsupportedOrderError(f"derivative order must be a positive integer, got {self.order!r}")
        if self.variable not in ("x", "y"):
            raise UnsupportedOrderError(f"unknown differentiation variable {self.variable!r}")


@dataclass(frozen=True, eq=False)
class Cauchy:
    """``(1/(pi i)) p.v. int G(x,y) u(y)/(y-x) dy`` with ``G = sum_i k_i(x) k_i(y)``.

    Factors are real, so ``G(x, y) = conj(G(y, x))`` holds by construction.
    """

    factors: tuple = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))


@dataclass(frozen=True, eq=False)
class Symbol:
    """Diagonal Fourier multiplier ``b(k)`` or ``b(kx, ky)`` (Fourier backends only)."""

    symbol: Callable


def is_constant(c) -> bool:
    return not callable(c)
