"""Factorizations of shifted systems ``T - zS`` with reusable solves.

Every discretization in this package produces a banded (or block-diagonal
banded) sparse matrix.  Narrow bands go through LAPACK's banded LU at any
size; wider matrices are factored densely when small and by SuperLU otherwise.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack

from .errors import ShiftOnRealAxisError, SingularSystemError

DENSE_THRESHOLD = 512


def bandwidths(A) -> tuple[int, int]:
    """Return ``(kl, ku)``: number of sub- and super-diagonals of ``A``."""
    A = sp.coo_matrix(A)
    if A.nnz == 0:
        return 0, 0
    off = A.col.astype(np.int64) - A.row.astype(np.int64)
    return int(max(-off.min(), 0)), int(max(off.max(), 0))


def to_band_storage(A, kl: int, ku: int) -> np.ndarray:
    """LAPACK general-band storage with ``kl`` extra rows for the fill-in."""
    A = sp.coo_matrix(A)
    n = A.shape[0]
    ab = np.zeros((2 * kl + ku + 1, n), dtype=complex)
    ab[kl + ku + A.row - A.col, A.col] = A.data
    return ab


class DenseLU:
    kind = "dense"

    def __init__(self, A):
        A = A.toarray() if sp.issparse(A) else np.asarray(A)
        self.n = A.shape[0]
        self._lu = sla.lu_factor(A.astype(complex), check_finite=True)
        if np.any(np.diag(self._lu[0]) == 0):
            raise SingularSystemError("exactly singular pivot in dense LU")

    def solve(self, b, adjoint=False):
        return sla.lu_solve(self._lu, b, trans=2 if adjoint else 0)


class BandedLU:
    kind = "banded"

    def __init__(self, A, kl: int, ku: int):
        self.n = A.shape[0]
        self.kl, self.ku = kl, ku
        ab = to_band_storage(A, kl, ku)
        lu, ipiv, info = lapack.zgbtrf(ab, kl, ku, overwrite_ab=1)
        if info > 0:
            raise SingularSystemError(f"zero pivot at position {info} in banded LU")
        if info < 0:
            raise ValueError(f"illegal argument {-info} passed to zgbtrf")
        self._lu, self._ipiv = lu, ipiv

    def solve(self, b, adjoint=False):
        b = np.asarray(b, dtype=complex)
        x, info = lapack.zgbtrs(
            self._lu, self.kl, self.ku, b.reshape(self.n, -1), self._ipiv,
            trans=2 if adjoint else 0,
        )
        if info != 0:
            raise ValueError(f"zgbtrs failed with info={info}")
        return x.reshape(b.shape)


class SparseLU:
    kind = "sparse"

    def __init__(self, A):
        self.n = A.shape[0]
        try:
            self._lu = spla.splu(sp.csc_matrix(A, dtype=complex))
        except RuntimeError as exc:
            raise SingularSystemError(str(exc)) from exc

    def solve(self, b, adjoint=False):
        return self._lu.solve(np.asarray(b, dtype=complex), trans="H" if adjoint else "N")


def factorize(A):
    """Pick a factorization for the square sparse matrix ``A``."""
    n = A.shape[0]
    kl, ku = bandwidths(A)
    if kl + ku + 1 <= max(n // 4, 1):
        return BandedLU(A, kl, ku)
    if n <= DENSE_THRESHOLD:
        return DenseLU(A)
    return SparseLU(A)


class BlockDiagonalLU:
    """Independent factorizations of diagonal blocks, solved block by block."""

    kind = "blocks"

    def __init__(self, blocks: Sequence):
        self.factors = [factorize(B) for B in blocks]
        sizes = [B.shape[0] for B in blocks]
        self.offsets = np.concatenate([[0], np.cumsum(sizes)])
        self.n = int(self.offsets[-1])

    def solve(self, b, adjoint=False):
        b = np.asarray(b, dtype=complex)
        out = np.empty_like(b)
        for f, lo, hi in zip(self.factors, self.offsets[:-1], self.offsets[1:]):
            out[lo:hi] = f.solve(b[lo:hi], adjoint=adjoint)
        return out


@dataclass(frozen=True)
class ShiftedSystem:
    """A truncated discretization of ``A - zB`` together with its factorization.

    ``matrix`` is the assembled sparse matrix in the solver's index order; the
    factorization is created once and is read-only afterwards, so the same
    system can be solved repeatedly and shared between threads.
    """

    matrix: sp.spmatrix
    z: complex
    N: int
    factorization: object

    def solve(self, rhs):
        u = self.factorization.solve(np.asarray(rhs, dtype=complex))
        if not np.all(np.isfinite(u)):
            raise SingularSystemError(
                f"shift z={self.z} is numerically on the spectrum of the truncation; "
                "increase the discretization size"
            )
        return u

    def solve_adjoint(self, rhs):
        """Solve with the conjugate transpose of :attr:`matrix`."""
        u = self.factorization.solve(np.asarray(rhs, dtype=complex), adjoint=True)
        if not np.all(np.isfinite(u)):
            raise SingularSystemError(f"adjoint solve failed at z={self.z}")
        return u

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def check_shift(z: complex) -> complex:
    z = complex(z)
    if z.imag == 0:
        raise ShiftOnRealAxisError(f"shift {z} lies on the real axis")
    return z


def is_hermitian(A, rtol: float = 1e-12) -> bool:
    A = sp.csr_matrix(A)
    scale = max(abs(A).max() if A.nnz else 0.0, 1.0)
    diff = A - A.conj().T
    return (abs(diff).max() if diff.nnz else 0.0) <= rtol * scale


@functools.lru_cache(maxsize=64)
def _identity(n: int):
    return sp.identity(n, dtype=complex, format="csr")


def build_shifted(T, z: complex, S=None, blocks=None, N: int | None = None) -> ShiftedSystem:
    """Assemble ``T - z S`` (``S`` defaults to the identity) and factor it.

    If ``blocks`` is given it must be a list of ``(T_b, S_b)`` diagonal blocks
    whose block-diagonal sum equals ``(T, S)``; each block is then factored on
    its own.
    """
    z = check_shift(z)
    if blocks is not None:
        mats = [sp.csr_matrix(Tb - z * (sp.identity(Tb.shape[0]) if Sb is None else Sb))
                for Tb, Sb in blocks]
        M = sp.block_diag(mats, format="csr")
        fac = BlockDiagonalLU(mats)
    else:
        n = T.shape[0]
        M = sp.csr_matrix(T - (z * _identity(n) if S is None else z * S))
        fac = factorize(M)
    return ShiftedSystem(M, z, int(N if N is not None else M.shape[0]), fac)
