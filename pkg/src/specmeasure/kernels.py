"""Rational convolution kernels of arbitrary order.

An m-th order kernel is built from m distinct poles ``a_j`` in the upper
half-plane and residues ``alpha_j`` solving the transposed Vandermonde system

    sum_j alpha_j a_j^k = delta_{k0},    k = 0, ..., m-1.

The kernel is ``K(x) = (1/pi) Im sum_j alpha_j / (x - a_j)`` and its scaled
version is ``K_eps(x) = K(x/eps)/eps``.  Convolving a measure with ``K_eps`` is
what the resolvent combination in :mod:`specmeasure.engine` computes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConditioningWarning, InvalidArgumentError, SingularSystemError

__all__ = [
    "RationalKernel",
    "equispaced_poles",
    "vandermonde_residues",
    "kernel_value",
    "kernel_scaled",
    "MAX_RECOMMENDED_ORDER",
]

MAX_RECOMMENDED_ORDER = 10


def equispaced_poles(m: int) -> np.ndarray:
    """Return the poles ``a_j = 2j/(m+1) - 1 + i`` for ``j = 1..m``."""
    if int(m) != m or m < 1:
        raise InvalidArgumentError(f"kernel order must be a positive integer, got {m!r}")
    j = np.arange(1, int(m) + 1)
    return 2.0 * j / (m + 1) - 1.0 + 1j


def vandermonde_residues(poles: Sequence[complex]) -> np.ndarray:
    """Solve the transposed Vandermonde system for the kernel residues.

    Parameters
    ----------
    poles : sequence of complex
        Distinct points in the open upper half-plane.

    Returns
    -------
    residues : ndarray of complex, shape (m,)

    Raises
    ------
    SingularSystemError
        If two poles coincide.
    InvalidArgumentError
        If a pole is not strictly above the real axis.

    Notes
    -----
    A dense LU solve with partial pivoting is used.  For ``m`` above
    ``MAX_RECOMMENDED_ORDER`` a :class:`ConditioningWarning` is emitted and the
    system is solved anyway.
    """
    a = np.asarray(poles, dtype=complex).ravel()
    m = a.size
    if m < 1:
        raise InvalidArgumentError("at least one pole is required")
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError("poles must be finite")
    if np.any(a.imag <= 0):
        raise InvalidArgumentError("poles must lie in the open upper half-plane")
    gaps = np.abs(a[:, None] - a[None, :]) + np.eye(m)
    if np.any(gaps == 0):
        raise SingularSystemError("repeated poles make the Vandermonde system singular")
    if m > MAX_RECOMMENDED_ORDER:
        warnings.warn(
            f"kernel order {m} exceeds {MAX_RECOMMENDED_ORDER}; the Vandermonde "
            "system may be badly conditioned",
            ConditioningWarning,
            stacklevel=2,
        )
    V = np.vander(a, m, increasing=True).T
    rhs = np.zeros(m, dtype=complex)
    rhs[0] = 1.0
    try:
        return np.linalg.solve(V, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(str(exc)) from exc


@dataclass(frozen=True)
class RationalKernel:
    """Immutable m-th order rational kernel (poles, residues)."""

    poles: np.ndarray
    residues: np.ndarray
    warnings: tuple = field(default=(), compare=False)

    def __post_init__(self):
        p = np.array(self.poles, dtype=complex).ravel()
        r = np.array(self.residues, dtype=complex).ravel()
        if p.shape != r.shape:
            raise InvalidArgumentError("poles and residues must have equal length")
        p.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "poles", p)
        object.__setattr__(self, "residues", r)

    @property
    def is_even(self) -> bool:
        """True when the pole set is mirror-symmetric about the imaginary axis."""
        order = np.lexsort((self.poles.imag, self.poles.real))
        p, r = self.poles[order], self.residues[order]
        scale = max(1.0, float(np.max(np.abs(p)))) if p.size else 1.0
        return bool(np.allclose(p, -np.conj(p[::-1]), rtol=0, atol=1e-13 * scale)
                    and np.allclose(r, np.conj(r[::-1]), rtol=0, atol=1e-12 * np.max(np.abs(r))))

    @classmethod
    def from_poles(cls, poles: Sequence[complex]) -> "RationalKernel":
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            residues = vandermonde_residues(poles)
        messages = tuple(str(w.message) for w in caught)
        for w in caught:
            warnings.warn(w.message, w.category, stacklevel=2)
        return cls(np.asarray(poles, dtype=complex), residues, messages)

    @classmethod
    def equispaced(cls, m: int) -> "RationalKernel":
        return cls.from_poles(equispaced_poles(m))

    @property
    def order(self) -> int:
        return int(self.poles.size)

    def moment_residuals(self) -> np.ndarray:
        """``|sum_j alpha_j a_j^k - delta_k0|`` for ``k = 0..m-1``."""
        V = np.vander(self.poles, self.order, increasing=True).T
        target = np.zeros(self.order)
        target[0] = 1.0
        return np.abs(V @ self.residues - target)

    def __call__(self, x):
        return kernel_value(self, x)

    def scaled(self, x, eps):
        return kernel_scaled(self, x, eps)


def kernel_value(kernel: RationalKernel, x):
    """Evaluate ``K(x)`` for real ``x`` (scalar or array).

    Near the poles the single sum ``Im sum alpha_j/(x - a_j)`` is used.  Far
    from them the algebraically equivalent form
    ``Im sum alpha_j (a_j/x)^m / (x - a_j)`` is used instead; it follows from
    the vanishing moments and avoids the cancellation that would otherwise
    swamp the ``|x|^-(m+1)`` tail.
    """
    x = np.asarray(x, dtype=float)
    a = kernel.poles
    alpha = kernel.residues
    m = kernel.order
    far = np.abs(x) > 2.0 * np.max(np.abs(a))
    out = np.empty(x.shape, dtype=float)

    xn = x[~far][..., None]
    out[~far] = np.imag(np.sum(alpha / (xn - a), axis=-1)) / np.pi

    xf = x[far][..., None]
    if kernel.is_even:
        # average K(x) and K(-x) in closed form so the odd part cancels exactly
        num = a if m % 2 == 0 else xf
        tail = np.imag(np.sum(alpha * (a / xf) ** m * num / (xf * xf - a * a), axis=-1))
    else:
        tail = np.imag(np.sum(alpha * (a / xf) ** m / (xf - a), axis=-1))
    out[far] = tail / np.pi
    if out.ndim == 0:
        return float(out)
    return out


def kernel_scaled(kernel: RationalKernel, x, eps: float):
    """Evaluate ``K_eps(x) = K(x/eps)/eps``."""
    if not eps > 0:
        raise InvalidArgumentError(f"smoothing parameter must be positive, got {eps!r}")
    return kernel_value(kernel, np.asarray(x, dtype=float) / eps) / eps
