"""Periodic Fourier discretization on ``[-pi, pi]`` and ``[-pi, pi]^2``.

Coefficients are taken with respect to the normalized measure
``dx/(2 pi)^d``: ``c_k = mean(f exp(-i k.x))``.  With this convention the
exponentials are orthonormal, ``cos(x)`` has coefficients ``1/2`` at
``k = +-1`` and the constant ``1`` is ``e_0``.  Operator matrices do not
depend on the convention; measures are invariant because ``f`` is normalized.

2D arrays are indexed ``[kx + N/2, ky + N/2]``.  Linear systems use the
flattened "ky-major" order ``(ky, kx)``, so an operator whose coefficients do
not depend on ``y`` is literally block diagonal with one ``N x N`` block per
``ky``.
"""

from __future__ import annotations

import threading
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import (
    BasisMismatchError,
    InvalidArgumentError,
    InvalidOperatorError,
    InvalidPencilError,
)
from .linalg import ShiftedSystem, build_shifted, check_shift, is_hermitian
from .realline import FunctionRep, _is_resolved, _recenter
from .terms import Cauchy, Derivative, Multiplication, Symbol

__all__ = [
    "f_analyze",
    "f_synthesize",
    "f_apply_B",
    "f_inner_product",
    "f_assemble_pencil_shifted",
    "FourierPencil",
    "wavenumbers",
]

SYMBOL_RTOL = 1e-14


def wavenumbers(N: int) -> np.ndarray:
    return np.arange(-(N // 2), N - N // 2)


def _check_size(N):
    if int(N) != N or N < 2 or N % 2:
        raise InvalidArgumentError(f"grid size must be an even integer >= 2, got {N!r}")
    return int(N)


def _recenter2d(c: np.ndarray, N: int) -> np.ndarray:
    tmp = np.stack([_recenter(row, N) for row in c])
    return np.stack([_recenter(col, N) for col in tmp.T]).T


def _grid(M: int):
    return 2.0 * np.pi * np.arange(M) / M


def _coeff_window(F: np.ndarray, N: int, axes) -> np.ndarray:
    k = wavenumbers(N)
    out = F
    for ax in axes:
        M = F.shape[ax]
        out = np.take(out, k % M, axis=ax)
    return out


def f_analyze(f, N: int, dim: int = 1, oversample: int = 2) -> FunctionRep:
    """Fourier coefficients of a periodic function for ``k in [-N/2, N/2)^dim``.

    ``f`` is a vectorized callable (``f(x)`` or ``f(x, y)``) or an array of
    samples on the uniform grid ``2 pi j / M``.
    """
    N = _check_size(N)
    if dim not in (1, 2):
        raise InvalidArgumentError("dim must be 1 or 2")
    if callable(f):
        M = max(oversample * N, 8)
        x = _grid(M)
        if dim == 1:
            vals = np.asarray(f(x), dtype=complex) * np.ones(M)
        else:
            X, Y = np.meshgrid(x, x, indexing="ij")
            vals = np.asarray(f(X, Y), dtype=complex) * np.ones((M, M))
    else:
        vals = np.asarray(f, dtype=complex)
        M = vals.shape[0]
        if M < N:
            raise InvalidArgumentError(f"need at least N={N} samples per dimension, got {M}")
    F = np.fft.fftn(vals) / vals.size
    c = _coeff_window(F, N, range(dim))
    resolved = _is_resolved(c.ravel()) if dim == 1 else _resolved2d(c)
    return FunctionRep(c, f"fourier{dim}d", 1.0, resolved)


def _resolved2d(c):
    return _is_resolved(np.max(np.abs(c), axis=1)) and _is_resolved(np.max(np.abs(c), axis=0))


def f_synthesize(rep: FunctionRep, x, y=None) -> np.ndarray:
    """Evaluate the trigonometric sum at points ``x`` (and ``y`` in 2D)."""
    k = wavenumbers(rep.N)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if rep.basis == "fourier1d":
        return np.exp(1j * np.outer(x, k)) @ rep.coeffs
    y = np.atleast_1d(np.asarray(y, dtype=float))
    Ex = np.exp(1j * np.outer(x, k))
    Ey = np.exp(1j * np.outer(y, k))
    return np.einsum("pi,ij,pj->p", Ex, rep.coeffs, Ey)


def f_inner_product(u: FunctionRep, v: FunctionRep) -> complex:
    """Parseval inner product ``sum_k u_k conj(v_k)``."""
    if u.basis != v.basis or u.coeffs.shape != v.coeffs.shape:
        raise BasisMismatchError(
            f"grid mismatch: {u.basis}{u.coeffs.shape} vs {v.basis}{v.coeffs.shape}")
    return complex(np.vdot(v.coeffs, u.coeffs))


def _flatten(c: np.ndarray) -> np.ndarray:
    """Coefficient array -> solver vector (ky-major)."""
    return c.T.ravel() if c.ndim == 2 else c.ravel()


def _unflatten(v: np.ndarray, N: int, dim: int) -> np.ndarray:
    return v.reshape(N, N).T if dim == 2 else v.copy()


def _symbol2d(a: Callable, dim: int, rtol: float = SYMBOL_RTOL, max_samples: int = 1024):
    """Truncated Fourier coefficients of a real coefficient function.

    Returns a dict ``{(jx, jy): value}`` (``jy = 0`` in 1D).
    """
    if not callable(a):
        return {(0, 0): complex(float(a))}
    M = 64
    prev = None
    while True:
        x = _grid(M)
        if dim == 1:
            v = np.asarray(a(x)) * np.ones(M)
        else:
            X, Y = np.meshgrid(x, x, indexing="ij")
            v = np.asarray(a(X, Y)) * np.ones((M, M))
        if np.iscomplexobj(v) and np.max(np.abs(v.imag)) > 1e-14 * max(np.max(np.abs(v)), 1.0):
            raise InvalidOperatorError("coefficient functions must be real-valued")
        F = np.fft.fftn(np.real(v)) / v.size
        mag = np.abs(F)
        keep = mag > rtol * mag.max() if mag.max() > 0 else np.zeros_like(mag, bool)
        idx = np.argwhere(keep)
        band = int(np.max(np.abs(np.where(idx > M // 2, idx - M, idx)))) if idx.size else 0
        if (band < M // 4 and band == prev) or M >= max_samples:
            break
        prev = band
        M *= 2
    out = {}
    for i in idx:
        j = tuple(int(t - M if t > M // 2 else t) for t in i)
        if dim == 1:
            j = (j[0], 0)
        out[j] = complex(F[tuple(i)])
    return out


class FourierPencil:
    """Discretization of ``A - zB`` in a 1D or 2D Fourier basis.

    ``B_terms`` must assemble to a positive diagonal matrix; an empty list
    means ``B = I`` (ordinary operator).
    """

    def __init__(self, A_terms: Sequence, B_terms: Sequence = (), dim: int = 1,
                 force_full: bool = False):
        if dim not in (1, 2):
            raise InvalidArgumentError("dim must be 1 or 2")
        self.dim = dim
        self.basis = f"fourier{dim}d"
        self.A_terms = tuple(A_terms)
        self.B_terms = tuple(B_terms)
        for t in self.A_terms + self.B_terms:
            if isinstance(t, Cauchy):
                raise InvalidOperatorError("Cauchy terms need the realline backend")
            if dim == 1 and isinstance(t, Derivative) and t.variable == "y":
                raise InvalidOperatorError("1D Fourier backend has no y variable")
        self._symbols = {id(t): _symbol2d(t.coefficient, dim)
                         for t in self.A_terms + self.B_terms
                         if isinstance(t, (Multiplication, Derivative))}
        couples = any(jy != 0 for s in self._symbols.values() for (_, jy) in s)
        self.block_diagonal = dim == 2 and not couples and not force_full
        self._cache = {}
        self._lock = threading.Lock()

    @property
    def is_pencil(self) -> bool:
        return bool(self.B_terms)

    # -- per-block matrices (kx only, at fixed ky) --------------------------
    def _block(self, terms, N, ky):
        kx = wavenumbers(N).astype(float)
        A = sp.csr_matrix((N, N), dtype=complex)
        for t in terms:
            A = A + self._term_block(t, N, kx, ky)
        return sp.csr_matrix(A)

    def _toeplitz_x(self, sym, N):
        diags, offsets = [], []
        for (jx, jy), val in sym.items():
            if abs(jx) >= N:
                continue
            offsets.append(-jx)
            diags.append(np.full(N - abs(jx), val))
        if not offsets:
            return sp.csr_matrix((N, N), dtype=complex)
        return sp.diags(diags, offsets, shape=(N, N), format="csr", dtype=complex)

    def _term_block(self, t, N, kx, ky):
        if isinstance(t, Symbol):
            b = t.symbol(kx) if self.dim == 1 else t.symbol(kx, np.full_like(kx, ky))
            b = np.asarray(b) * np.ones_like(kx)
            if np.iscomplexobj(b) and np.max(np.abs(np.imag(b))) > 0:
                raise InvalidOperatorError("Fourier symbols must be real-valued")
            return sp.diags(np.real(b).astype(complex), 0, format="csr")
        C = self._toeplitz_x(self._symbols[id(t)], N)
        if isinstance(t, Multiplication):
            return C
        p = int(t.order)
        if t.variable == "y":
            return C * (ky ** p)
        if p % 2:
            K = sp.diags(kx ** p, 0, format="csr")
            return 0.5 * (C @ K + K @ C)
        K = sp.diags(kx ** (p // 2), 0, format="csr")
        return K @ C @ K

    # -- full 2D matrices (coupled ky) --------------------------------------
    def _full(self, terms, N):
        k = wavenumbers(N).astype(float)
        Kx = np.tile(k, N)          # ky-major: index = (ky, kx)
        Ky = np.repeat(k, N)
        n2 = N * N
        A = sp.csr_matrix((n2, n2), dtype=complex)
        for t in terms:
            if isinstance(t, Symbol):
                b = np.asarray(t.symbol(Kx, Ky)) * np.ones(n2)
                if np.iscomplexobj(b) and np.max(np.abs(np.imag(b))) > 0:
                    raise InvalidOperatorError("Fourier symbols must be real-valued")
                A = A + sp.diags(np.real(b).astype(complex), 0, format="csr")
                continue
            C = self._conv2d(self._symbols[id(t)], N)
            if isinstance(t, Multiplication):
                A = A + C
                continue
            p = int(t.order)
            kv = Kx if t.variable == "x" else Ky
            if p % 2:
                K = sp.diags(kv ** p, 0, format="csr")
                A = A + 0.5 * (C @ K + K @ C)
            else:
                K = sp.diags(kv ** (p // 2), 0, format="csr")
                A = A + K @ C @ K
        return sp.csr_matrix(A)

    def _conv2d(self, sym, N):
        n2 = N * N
        C = sp.csr_matrix((n2, n2), dtype=complex)
        for (jx, jy), val in sym.items():
            if abs(jx) >= N or abs(jy) >= N:
                continue
            Sy = sp.eye(N, k=-jy, format="csr")
            Sx = sp.eye(N, k=-jx, format="csr")
            C = C + val * sp.kron(Sy, Sx, format="csr")
        return C

    # -- public -------------------------------------------------------------
    def blocks(self, N: int):
        """Return ``[(A_ky, B_ky), ...]`` for block-diagonal problems, else None."""
        if not self.block_diagonal:
            return None
        return self._assembled(N)[2]

    def matrices(self, N: int):
        """Return the assembled ``(A, B)`` sparse matrices in solver order."""
        A, B, _ = self._assembled(N)
        return A, B

    def _assembled(self, N):
        N = _check_size(N)
        with self._lock:
            if N in self._cache:
                return self._cache[N]
        if self.dim == 1 or self.block_diagonal:
            kys = [0.0] if self.dim == 1 else wavenumbers(N).astype(float)
            blocks = [(self._block(self.A_terms, N, ky),
                       self._block(self.B_terms, N, ky) if self.B_terms else None)
                      for ky in kys]
            A = sp.block_diag([b[0] for b in blocks], format="csr")
            B = sp.block_diag([b[1] for b in blocks], format="csr") if self.B_terms else None
        else:
            blocks = None
            A = self._full(self.A_terms, N)
            B = self._full(self.B_terms, N) if self.B_terms else None
        if not is_hermitian(A):
            raise InvalidOperatorError("assembled A is not Hermitian")
        if B is not None:
            off = B - sp.diags(B.diagonal(), 0)
            if off.count_nonzero() and abs(off).max() > 0:
                raise InvalidPencilError("B must be a diagonal Fourier multiplier")
            d = B.diagonal()
            if np.any(np.abs(d.imag) > 0) or np.any(d.real <= 0):
                raise InvalidPencilError("B must be strictly positive")
        out = (A, B, blocks if self.dim == 2 else None)
        with self._lock:
            self._cache.setdefault(N, out)
        return out

    def B_diagonal(self, N: int) -> np.ndarray:
        _, B = self.matrices(N)
        if B is None:
            return np.ones(N ** self.dim)
        return B.diagonal().real

    def shifted(self, z: complex, N: int) -> ShiftedSystem:
        z = check_shift(z)
        A, B, blocks = self._assembled(N)
        if blocks is not None:
            return build_shifted(None, z, blocks=blocks, N=N)
        return build_shifted(A, z, S=B, N=N)

    def vector(self, rep: FunctionRep) -> np.ndarray:
        if rep.basis != self.basis:
            raise BasisMismatchError(f"expected a {self.basis} representation, got {rep.basis}")
        return _flatten(rep.coeffs)

    def rep(self, v: np.ndarray, N: int) -> FunctionRep:
        return FunctionRep(_unflatten(v, N, self.dim), self.basis, 1.0, True)


def f_apply_B(B_terms: Sequence, f: FunctionRep) -> FunctionRep:
    """Apply a diagonal positive ``B`` to ``f``."""
    dim = 2 if f.basis == "fourier2d" else 1
    if not B_terms:
        return f
    pencil = FourierPencil([], B_terms, dim=dim)
    d = pencil.B_diagonal(f.N)
    v = pencil.vector(f) * d
    return pencil.rep(v, f.N)


def f_assemble_pencil_shifted(A_terms, B_terms, z: complex, N: int, dim: int = 2,
                              force_full: bool = False) -> ShiftedSystem:
    """Discretize and factor ``A - zB`` on the ``N^dim`` wavenumber grid."""
    check_shift(z)
    return FourierPencil(A_terms, B_terms, dim=dim, force_full=force_full).shifted(z, N)
