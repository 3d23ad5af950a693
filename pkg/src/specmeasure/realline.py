r"""Spectral discretization of :math:`L^2(\mathbb{R})` in an orthonormal rational basis.

The basis functions are

.. math:: \rho_n(x) = \frac{1}{\sqrt{\pi L}}
          \frac{(1 + i x/L)^n}{(1 - i x/L)^{n+1}}, \qquad n \in \mathbb{Z},

with a length scale ``L`` (``L = 1`` gives the classical family).  Under the
circle map ``x = L tan(theta/2)`` one has

.. math:: \rho_n(x) = \frac{w(\theta)}{\sqrt{\pi L}} e^{in\theta}, \qquad
          w(\theta) = \cos(\theta/2) e^{i\theta/2} = (1 + e^{i\theta})/2,

so expansion coefficients are plain Fourier coefficients of
``sqrt(pi L) f(x)/w(theta)`` and are computed with the FFT.  Consequences used
below:

* multiplication by a real ``a(x)`` is the Toeplitz matrix built from the
  Fourier coefficients of ``a(L tan(theta/2))``;
* ``d/dx`` is tridiagonal;
* the Cauchy singular integral ``(1/(pi i)) p.v. int v(y)/(y - x) dy`` is
  diagonal with entries ``+1`` for ``n >= 0`` and ``-1`` for ``n < 0``.

Coefficient vectors of size ``N`` are indexed by ``n = -N/2, ..., N/2 - 1``.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .errors import (
    BasisMismatchError,
    InvalidArgumentError,
    InvalidOperatorError,
    UnsupportedOrderError,
)
from .linalg import ShiftedSystem, build_shifted, check_shift, is_hermitian
from .terms import Cauchy, Derivative, Multiplication

__all__ = [
    "FunctionRep",
    "MultiplierSymbol",
    "Multiplication",
    "Derivative",
    "Cauchy",
    "RealLineOperator",
    "sample_points",
    "analyze",
    "synthesize",
    "basis_function",
    "multiplier_symbol",
    "mult_matrix",
    "diff_matrix",
    "hilbert_diag",
    "assemble_shifted",
    "solve_shifted",
    "inner_product",
    "indices",
]

RESOLVED_RTOL = 1e-12
SYMBOL_RTOL = 1e-14


def indices(N: int) -> np.ndarray:
    return np.arange(-(N // 2), N - N // 2)


def _check_size(N):
    if int(N) != N or N < 2 or N % 2:
        raise InvalidArgumentError(f"truncation size must be an even integer >= 2, got {N!r}")
    return int(N)


@dataclass(frozen=True)
class FunctionRep:
    """Coefficients of a function in an orthonormal basis.

    ``basis`` is ``"realline"`` here; :mod:`specmeasure.fourier` reuses the
    same container with ``"fourier1d"``/``"fourier2d"``.
    """

    coeffs: np.ndarray
    basis: str = "realline"
    scale: float = 1.0
    resolved: bool = True
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def N(self) -> int:
        return int(self.coeffs.shape[0])

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def window(self, N: int) -> "FunctionRep":
        """Truncate or zero-pad to the symmetric window of size ``N``."""
        N = _check_size(N)
        c = self.coeffs
        if self.basis == "fourier2d":
            from .fourier import _recenter2d  # local import avoids a cycle
            return FunctionRep(_recenter2d(c, N), self.basis, self.scale, self.resolved)
        out = _recenter(c, N)
        return FunctionRep(out, self.basis, self.scale, self.resolved)

    def __mul__(self, s):
        return FunctionRep(self.coeffs * s, self.basis, self.scale, self.resolved)

    __rmul__ = __mul__

    def __add__(self, other):
        _check_compatible(self, other)
        N = max(self.N, other.N)
        a, b = self.window(N), other.window(N)
        return FunctionRep(a.coeffs + b.coeffs, self.basis, self.scale,
                           self.resolved and other.resolved)


def _recenter(c: np.ndarray, N: int) -> np.ndarray:
    M = c.shape[0]
    out = np.zeros(N, dtype=complex)
    lo = max(-(N // 2), -(M // 2))
    hi = min(N - N // 2, M - M // 2)
    out[lo + N // 2: hi + N // 2] = c[lo + M // 2: hi + M // 2]
    return out


def _check_compatible(u: FunctionRep, v: FunctionRep):
    if u.basis != v.basis:
        raise BasisMismatchError(f"basis mismatch: {u.basis} vs {v.basis}")
    if u.scale != v.scale:
        raise BasisMismatchError(f"scale mismatch: {u.scale} vs {v.scale}")


def _is_resolved(c: np.ndarray) -> bool:
    N = c.shape[0]
    peak = np.max(np.abs(c)) if N else 0.0
    if peak == 0:
        return True
    k = max(1, int(np.ceil(0.1 * N / 2)))
    outer = np.concatenate([c[:k], c[N - k:]])
    return bool(np.max(np.abs(outer)) <= RESOLVED_RTOL * peak)


def sample_points(M: int, scale: float = 1.0):
    """Return ``(theta, x)`` for the ``M``-point midpoint grid on the circle."""
    theta = -np.pi + 2.0 * np.pi * (np.arange(M) + 0.5) / M
    return theta, scale * np.tan(theta / 2)


def _weight(theta):
    return 0.5 * (1.0 + np.exp(1j * theta))


def _fourier_coefficients(values: np.ndarray, kmin: int, kmax: int) -> np.ndarray:
    """Fourier coefficients ``k = kmin..kmax`` of samples on the midpoint grid."""
    M = values.shape[0]
    F = np.fft.fft(values) / M
    k = np.arange(kmin, kmax + 1)
    return F[k % M] * np.exp(1j * k * (np.pi - np.pi / M))


def analyze(f: Union[Callable, np.ndarray], N: int, scale: float = 1.0,
            oversample: int = 2) -> FunctionRep:
    """Expansion coefficients of ``f`` for ``n in [-N/2, N/2)``.

    Parameters
    ----------
    f : callable or ndarray
        Vectorized function of real ``x``, or samples on
        ``sample_points(M, scale)`` for some ``M >= N``.
    N : int
        Even truncation size.
    scale : float
        Basis length scale ``L``.

    Returns
    -------
    FunctionRep
        ``resolved`` is False if the outer tenth of the index window still
        carries coefficients above ``1e-12`` relative.
    """
    N = _check_size(N)
    if callable(f):
        M = max(oversample * N, 16)
        theta, x = sample_points(M, scale)
        vals = np.asarray(f(x), dtype=complex) * np.ones_like(x)
    else:
        vals = np.asarray(f, dtype=complex)
        M = vals.shape[0]
        if M < N:
            raise InvalidArgumentError(f"need at least N={N} samples, got {M}")
        theta, _ = sample_points(M, scale)
    g = np.sqrt(np.pi * scale) * vals / _weight(theta)
    c = _fourier_coefficients(g, -(N // 2), N - N // 2 - 1)
    return FunctionRep(c, "realline", float(scale), _is_resolved(c))


def basis_function(n: int, x, scale: float = 1.0):
    """Evaluate ``rho_n`` directly from its closed form."""
    x = np.asarray(x, dtype=float) / scale
    return (1 + 1j * x) ** n / (1 - 1j * x) ** (n + 1) / np.sqrt(np.pi * scale)


def synthesize(rep: FunctionRep, points) -> np.ndarray:
    """Evaluate ``sum_n c_n rho_n(x)`` at the given real points."""
    if rep.basis != "realline":
        raise BasisMismatchError("synthesize expects a realline representation")
    x = np.atleast_1d(np.asarray(points, dtype=float))
    theta = 2.0 * np.arctan(x / rep.scale)
    n = indices(rep.N)
    out = np.empty(x.shape, dtype=complex)
    step = max(1, 2**20 // max(rep.N, 1))
    for s in range(0, x.size, step):
        th = theta[s:s + step]
        out[s:s + step] = np.exp(1j * np.outer(th, n)) @ rep.coeffs
    out *= _weight(theta) / np.sqrt(np.pi * rep.scale)
    return out if np.ndim(points) else out[0]


@dataclass(frozen=True)
class MultiplierSymbol:
    """Fourier coefficients ``a_j, |j| <= bandwidth`` of ``a(L tan(theta/2))``."""

    coeffs: np.ndarray
    bandwidth: int
    scale: float = 1.0

    def coefficient(self, j: int) -> complex:
        if abs(j) > self.bandwidth:
            return 0.0
        return self.coeffs[j + self.bandwidth]


def multiplier_symbol(a, scale: float = 1.0, rtol: float = SYMBOL_RTOL,
                      max_samples: int = 2**16) -> MultiplierSymbol:
    """Compute the Toeplitz symbol of multiplication by ``a``.

    The sample count is doubled until the retained band stops growing.
    Coefficients below ``rtol`` times the largest one are dropped.

    Raises
    ------
    InvalidOperatorError
        If ``a`` is complex-valued.
    """
    if isinstance(a, MultiplierSymbol):
        return a
    if isinstance(a, FunctionRep):
        if a.scale != scale:
            raise BasisMismatchError("coefficient scale differs from the basis scale")
        # a o map = w(theta) sum c_n e^{in theta} / sqrt(pi L)
        c = a.coeffs / np.sqrt(np.pi * a.scale)
        full = 0.5 * (np.concatenate([c, [0]]) + np.concatenate([[0], c]))
        kmin = -(a.N // 2)
        samples_fn = None
    else:
        samples_fn = a if callable(a) else (lambda x, _c=float(a): np.full_like(x, _c))
        full = None

    if samples_fn is not None:
        M = 256
        prev_band = None
        while True:
            _, x = sample_points(M, scale)
            v = np.asarray(samples_fn(x)) * np.ones_like(x)
            if np.iscomplexobj(v) and np.max(np.abs(v.imag)) > 1e-14 * max(np.max(np.abs(v)), 1.0):
                raise InvalidOperatorError("multiplication coefficient must be real-valued")
            v = np.real(v).astype(float)
            if not np.all(np.isfinite(v)):
                raise InvalidOperatorError("multiplication coefficient is not finite on the real line")
            full = _fourier_coefficients(v, -(M // 2) + 1, M // 2 - 1)
            kmin = -(M // 2) + 1
            band = _band(full, kmin, rtol)
            if band < M // 4 and band == prev_band:
                break
            if M >= max_samples:
                break
            prev_band = band
            M *= 2

    band = _band(full, kmin, rtol)
    k = np.arange(-band, band + 1)
    coeffs = full[k - kmin].copy()
    peak = np.max(np.abs(coeffs)) if coeffs.size else 0.0
    coeffs[np.abs(coeffs) <= rtol * peak] = 0.0
    if np.max(np.abs(coeffs - np.conj(coeffs[::-1])), initial=0.0) > 1e-10 * max(peak, 1e-300):
        raise InvalidOperatorError("multiplication coefficient must be real-valued")
    # symbol of a real function is conjugate-symmetric; enforce it exactly
    coeffs = 0.5 * (coeffs + np.conj(coeffs[::-1]))
    return MultiplierSymbol(coeffs, band, float(scale))


def _band(full, kmin, rtol):
    mag = np.abs(full)
    peak = mag.max() if mag.size else 0.0
    if peak == 0:
        return 0
    k = np.arange(kmin, kmin + full.size)
    return int(np.max(np.abs(k[mag > rtol * peak])))


def _toeplitz(symbol: MultiplierSymbol, size: int):
    b = min(symbol.bandwidth, size - 1)
    offsets = list(range(-b, b + 1))
    # entry (n, k) = a_{n-k}; offset d = k - n carries a_{-d}
    diags = [np.full(size - abs(d), symbol.coefficient(-d)) for d in offsets]
    return sp.diags(diags, offsets, shape=(size, size), format="csr", dtype=complex)


def _derivative_on(n: np.ndarray, scale: float):
    main = 1j * (n + 0.5)
    lower = 0.5j * n[1:]
    upper = 0.5j * (n[:-1] + 1)
    return sp.diags([lower, main, upper], [-1, 0, 1], format="csr") / scale


def _extended(N: int, e: int) -> np.ndarray:
    return np.arange(-(N // 2) - e, N - N // 2 + e)


def _restrict(A, N: int, e: int):
    return sp.csr_matrix(A[e:e + N, e:e + N])


def mult_matrix(a, N: int, scale: float = 1.0):
    """Matrix of multiplication by real ``a(x)`` on the size-``N`` window.

    ``a`` may be a callable, a constant, a :class:`MultiplierSymbol` or a
    :class:`FunctionRep`.  The result is Toeplitz and banded.
    """
    N = _check_size(N)
    return _toeplitz(multiplier_symbol(a, scale), N)


def diff_matrix(p: int, N: int, scale: float = 1.0):
    """Matrix of ``d^p/dx^p`` for ``p in {1, 2}``.

    ``p = 1`` is tridiagonal.  ``p = 2`` is the exact section of the infinite
    product, so it agrees with ``diff_matrix(1) @ diff_matrix(1)`` away from
    the window edges and is pentadiagonal.
    """
    N = _check_size(N)
    if p not in (1, 2):
        raise UnsupportedOrderError(f"derivative order {p} is not supported (use 1 or 2)")
    if p == 1:
        return _derivative_on(indices(N), scale)
    D = _derivative_on(_extended(N, 1), scale)
    return _restrict(D @ D, N, 1)


def hilbert_diag(N: int):
    """Diagonal matrix of ``v -> (1/(pi i)) p.v. int v(y)/(y-x) dy``."""
    N = _check_size(N)
    return sp.diags(np.where(indices(N) >= 0, 1.0, -1.0), 0, format="csr", dtype=complex)


def _coefficient_callable(c):
    if callable(c):
        return c
    return float(c)


def _term_symbols(term, scale):
    if isinstance(term, Multiplication):
        return [multiplier_symbol(_coefficient_callable(term.coefficient), scale)]
    if isinstance(term, Derivative):
        if term.order not in (1, 2):
            raise UnsupportedOrderError(
                f"derivative order {term.order} is not supported on the real line (use 1 or 2)")
        if term.variable != "x":
            raise InvalidOperatorError("the real-line backend has a single variable x")
        if callable(term.coefficient):
            return [multiplier_symbol(term.coefficient, scale)]
        return []
    if isinstance(term, Cauchy):
        return [multiplier_symbol(_coefficient_callable(k), scale) for k in term.factors]
    raise InvalidOperatorError(f"term {type(term).__name__} is not available on the real line")


def _term_matrix(term, N, scale, symbols):
    if isinstance(term, Multiplication):
        return _toeplitz(symbols[0], N)
    if isinstance(term, Derivative):
        S = -1j * _derivative_on(_extended(N, 1), scale)
        if not symbols:
            c = float(term.coefficient)
            A = c * (S if term.order == 1 else S @ S)
        else:
            C = _toeplitz(symbols[0], N + 2)
            A = 0.5 * (C @ S + S @ C) if term.order == 1 else S @ C @ S
        return _restrict(A, N, 1)
    # Cauchy: sum_i M_k H M_k^*, formed on a window wide enough to be exact
    out = sp.csr_matrix((N, N), dtype=complex)
    for sym in symbols:
        e = sym.bandwidth
        n = _extended(N, e)
        K = _toeplitz(sym, n.size)
        H = sp.diags(np.where(n >= 0, 1.0, -1.0), 0, format="csr")
        out = out + _restrict(K @ H @ K.conj().T, N, e)
    return out


class RealLineOperator:
    """A self-adjoint operator on ``L^2(R)`` given as a sum of terms.

    Symbols of the coefficient functions are computed once; assembled
    matrices are cached per truncation size.
    """

    basis = "realline"

    def __init__(self, terms: Sequence[Term], scale: float = 1.0):
        if not scale > 0:
            raise InvalidArgumentError("basis scale must be positive")
        self.terms = tuple(terms)
        self.scale = float(scale)
        self._symbols = [_term_symbols(t, self.scale) for t in self.terms]
        self._cache = {}
        self._lock = threading.Lock()

    def matrix(self, N: int):
        N = _check_size(N)
        with self._lock:
            if N in self._cache:
                return self._cache[N]
        A = sp.csr_matrix((N, N), dtype=complex)
        for t, syms in zip(self.terms, self._symbols):
            A = A + _term_matrix(t, N, self.scale, syms)
        A = sp.csr_matrix(A)
        A.eliminate_zeros()
        if not is_hermitian(A):
            raise InvalidOperatorError("assembled operator is not Hermitian")
        with self._lock:
            self._cache.setdefault(N, A)
        return A

    def shifted(self, z: complex, N: int) -> ShiftedSystem:
        check_shift(z)
        return build_shifted(self.matrix(N), z, N=N)

    def bandwidth(self) -> int:
        bw = 0
        for t, syms in zip(self.terms, self._symbols):
            b = max([s.bandwidth for s in syms], default=0)
            if isinstance(t, Cauchy):
                b *= 2
            if isinstance(t, Derivative):
                b += t.order
            bw = max(bw, b)
        return bw


def assemble_shifted(terms: Sequence[Term], z: complex, N: int, scale: float = 1.0) -> ShiftedSystem:
    """Discretize ``L - zI`` at size ``N`` and factor it."""
    check_shift(z)
    return RealLineOperator(terms, scale).shifted(z, N)


def solve_shifted(system: ShiftedSystem, rhs: FunctionRep) -> FunctionRep:
    b = rhs.window(system.N).coeffs
    u = system.solve(b)
    return FunctionRep(u, rhs.basis, rhs.scale, True)


def inner_product(u: FunctionRep, v: FunctionRep) -> complex:
    """``<u, v> = sum_n u_n conj(v_n)`` (linear in the first argument)."""
    _check_compatible(u, v)
    N = max(u.N, v.N)
    return complex(np.vdot(v.window(N).coeffs, u.window(N).coeffs))
