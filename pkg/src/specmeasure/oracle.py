"""Slow, independent reference computations.

Nothing here shares code with the discretizations under test except the
kernel evaluation.  The routines are used by the test suite and by the
``sweep`` subcommand to produce reference values:

* :func:`pv_cauchy` -- principal-value Cauchy integrals by symmetric
  Gauss-Legendre quadrature,
* :func:`dense_measure`, :func:`dense_pencil_measure` and
  :func:`dense_resolvent_measure` -- the smoothed measure of a finite
  Hermitian matrix (or pencil) by eigendecomposition or dense solves,
* :func:`fourier_transform`, :func:`laplacian_density`,
  :func:`smoothed_symbol_measure` -- the spectral density of Fourier
  multipliers such as ``-d^2/dx^2`` on the real line,
* :func:`lorentzian_laplacian_resolvent` -- a closed form (exponential
  integrals, evaluated in arbitrary precision) for the resolvent functional
  of ``-d^2/dx^2`` and ``f = sqrt(2/pi)/(1+x^2)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import mpmath
import numpy as np
import scipy.integrate as si
import scipy.linalg as sla

from .errors import AccuracyWarning, InvalidArgumentError, InvalidOperatorError
from .kernels import RationalKernel, kernel_scaled

__all__ = [
    "PVQuadratureRule",
    "pv_cauchy",
    "dense_measure",
    "dense_pencil_measure",
    "dense_resolvent_measure",
    "fourier_transform",
    "laplacian_density",
    "smoothed_symbol_measure",
    "lorentzian_laplacian_resolvent",
    "lorentzian_laplacian_measure",
    "lorentzian_fourier_transform",
    "y_mode_weight",
]


# -- principal-value quadrature ----------------------------------------------

@dataclass(frozen=True)
class PVQuadratureRule:
    """Symmetric rule for ``int_0^inf [v(x+t) - v(x-t)]/t dt``.

    ``t = R (1+s)/(1-s)`` maps ``s in (-1, 1)`` to ``(0, inf)``; Gauss-Legendre
    nodes in ``s`` then give nodes ``x +- t`` placed symmetrically about the
    singularity.  ``Q`` is doubled until two consecutive estimates agree to
    ``tol`` or ``Q`` exceeds ``max_nodes``.
    """

    R: float = 1.0
    Q: int = 64
    tol: float = 1e-12
    max_nodes: int = 2**14

    def nodes(self, Q: int):
        s, w = np.polynomial.legendre.leggauss(Q)
        t = self.R * (1 + s) / (1 - s)
        dt = 2 * self.R / (1 - s) ** 2
        return t, w * dt


@dataclass(frozen=True)
class PVResult:
    value: complex
    err_est: float
    nodes: int


def pv_cauchy(v: Callable, x: float, rule: PVQuadratureRule = PVQuadratureRule()) -> PVResult:
    """``(1/(pi i)) p.v. int v(y)/(y - x) dy`` by symmetric pairing.

    Returns the value, the difference between the last two node counts and
    the final node count.  A warning is emitted if doubling stalls.
    """

    def estimate(Q):
        t, w = rule.nodes(Q)
        g = (np.asarray(v(x + t), dtype=complex) - np.asarray(v(x - t), dtype=complex)) / t
        return np.sum(w * g) / (np.pi * 1j)

    Q = rule.Q
    prev = estimate(Q)
    while True:
        Q *= 2
        cur = estimate(Q)
        err = abs(cur - prev)
        if err <= rule.tol * max(abs(cur), 1.0):
            return PVResult(complex(cur), float(err), Q)
        if Q >= rule.max_nodes:
            warnings.warn(f"p.v. quadrature not converged at {Q} nodes (change {err:.3g})",
                          AccuracyWarning, stacklevel=2)
            return PVResult(complex(cur), float(err), Q)
        prev = cur


# -- finite-dimensional measures ---------------------------------------------

def _dense(H):
    return H.toarray() if hasattr(H, "toarray") else np.asarray(H)


def _kern(kernel) -> RationalKernel:
    return kernel if isinstance(kernel, RationalKernel) else RationalKernel.equispaced(int(kernel))


def _check_hermitian(H, name="H", rtol=1e-12):
    scale = max(np.max(np.abs(H)) if H.size else 0.0, 1.0)
    if np.max(np.abs(H - H.conj().T), initial=0.0) > rtol * scale:
        raise InvalidOperatorError(f"{name} is not Hermitian")


def dense_measure(H, fvec, kernel, epsilon: float, x) -> np.ndarray | float:
    """``sum_k |<f, v_k>|^2 K_eps(x - lambda_k)`` from a full eigendecomposition.

    ``fvec`` is normalized internally.
    """
    H = _dense(H).astype(complex)
    _check_hermitian(H)
    f = np.asarray(fvec, dtype=complex)
    f = f / np.linalg.norm(f)
    lam, V = np.linalg.eigh(H)
    w = np.abs(V.conj().T @ f) ** 2
    return _sum_weights(lam, w, _kern(kernel), epsilon, x)


def _sum_weights(lam, w, kernel, epsilon, x):
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.array([np.sum(w * kernel_scaled(kernel, xi - lam, epsilon)) for xi in xs])
    return float(out[0]) if np.ndim(x) == 0 else out


def dense_pencil_measure(A, B, fvec, kernel, epsilon: float, x):
    """Smoothed measure of ``f`` for the pencil ``(A, B)``, ``B`` positive definite.

    With ``A V = B V diag(lambda)`` and ``V^H B V = I`` the weights are
    ``|v_k^H B f|^2 / (f^H B f)``.
    """
    A = _dense(A).astype(complex)
    B = _dense(B).astype(complex)
    _check_hermitian(A, "A")
    _check_hermitian(B, "B")
    f = np.asarray(fvec, dtype=complex)
    lam, V = sla.eigh(A, B)
    Bf = B @ f
    w = np.abs(V.conj().T @ Bf) ** 2 / np.real(np.vdot(f, Bf))
    return _sum_weights(lam, w, _kern(kernel), epsilon, x)


def dense_resolvent_measure(H, fvec, kernel, epsilon: float, x: float, B=None) -> float:
    """``-(1/pi) Im sum_j alpha_j g^H (H - z_j B)^{-1} g`` by dense solves, ``g = B f``."""
    H = _dense(H).astype(complex)
    n = H.shape[0]
    B = np.eye(n) if B is None else _dense(B).astype(complex)
    f = np.asarray(fvec, dtype=complex)
    f = f / math.sqrt(np.real(np.vdot(f, B @ f)))
    g = B @ f
    kernel = _kern(kernel)
    total = 0j
    for a, alpha in zip(kernel.poles, kernel.residues):
        u = np.linalg.solve(H - (x - epsilon * a) * B, g)
        total += alpha * np.vdot(g, u)
    return float(-total.imag / np.pi)


# -- Fourier multipliers on the real line ------------------------------------

def fourier_transform(f: Callable, xi: float, epsabs: float = 1e-12, limit: int = 400) -> complex:
    """Unitary transform ``(2 pi)^{-1/2} int f(x) exp(-i x xi) dx`` of a real ``f``.

    Oscillatory tails are handled by QUADPACK's Fourier-integral routine.
    """
    even = lambda t: f(t) + f(-t)
    odd = lambda t: f(t) - f(-t)
    if xi == 0:
        re, _ = si.quad(even, 0, np.inf, epsabs=epsabs, limit=limit)
        return complex(re / math.sqrt(2 * math.pi))
    w = abs(xi)
    re, _ = si.quad(even, 0, np.inf, weight="cos", wvar=w, epsabs=epsabs, limlst=200)
    probe = np.linspace(0.05, 20.0, 64)
    im = 0.0
    if np.any(np.abs(odd(probe)) > 0):
        im, _ = si.quad(odd, 0, np.inf, weight="sin", wvar=w, epsabs=epsabs, limlst=200)
    im = im if xi > 0 else -im
    return complex(re, -im) / math.sqrt(2 * math.pi)


def _power(f=None, fhat=None) -> Callable:
    if fhat is not None:
        return lambda xi: abs(complex(fhat(xi))) ** 2
    if f is None:
        raise InvalidArgumentError("give f or its Fourier transform fhat")
    return lambda xi: abs(fourier_transform(f, xi)) ** 2


def laplacian_density(lam: float, f: Optional[Callable] = None, fhat: Optional[Callable] = None,
                      hilbert_coupling: float = 0.0) -> float:
    """Density of the spectral measure of ``-d^2/dx^2 + c H`` at ``lam``.

    ``H`` is the Cauchy operator with symbol ``sign(xi)``, so the operator is
    the multiplier ``xi^2 + c sign(xi)``.  ``f`` must have unit norm.  Each
    branch of the inverse symbol contributes ``|fhat(xi)|^2 / |2 xi|``; for
    ``c = 0`` this is ``(|fhat(sqrt lam)|^2 + |fhat(-sqrt lam)|^2)/(2 sqrt lam)``.
    """
    power = _power(f, fhat)
    c = float(hilbert_coupling)
    if c == 0 and not lam > 0:
        raise InvalidArgumentError("the density is defined for lam > 0")
    total = 0.0
    if lam - c > 0:
        xi = math.sqrt(lam - c)
        total += power(xi) / (2 * xi)
    if lam + c > 0:
        xi = math.sqrt(lam + c)
        total += power(-xi) / (2 * xi)
    return total


def smoothed_symbol_measure(x0: float, epsilon: float, kernel, f: Optional[Callable] = None,
                            fhat: Optional[Callable] = None, hilbert_coupling: float = 0.0,
                            epsabs: float = 1e-13, epsrel: float = 1e-12) -> float:
    """``(K_eps * mu_f)(x0)`` for the multiplier ``xi^2 + c sign(xi)``.

    Integrates in the frequency variable, ``int K_eps(x0 - s(xi)) |fhat(xi)|^2 dxi``,
    which avoids the ``1/sqrt(lam)`` singularity of the density at ``lam = 0``.
    """
    kernel = _kern(kernel)
    power = _power(f, fhat)
    c = float(hilbert_coupling)
    total = 0.0
    for sign in (1.0, -1.0):
        g = lambda xi: kernel_scaled(kernel, x0 - (xi * xi + sign * c), epsilon) * power(sign * xi)
        pts = [math.sqrt(x0 - sign * c)] if x0 - sign * c > 0 else []
        brk = sorted({p for q in pts for p in (q, max(q - 10 * epsilon, 0.0), q + 10 * epsilon)} - {0.0})
        upper = (max(pts) + 50.0) if pts else 50.0
        val, _ = si.quad(g, 0.0, upper, points=brk or None, epsabs=epsabs, epsrel=epsrel, limit=1000)
        tail, _ = si.quad(g, upper, np.inf, epsabs=epsabs, epsrel=epsrel, limit=400)
        total += val + tail
    return float(total)


# -- closed form for the Lorentzian test vector --------------------------------

def lorentzian_fourier_transform(xi):
    """Unitary transform of ``sqrt(2/pi)/(1+x^2)``: ``exp(-|xi|)``."""
    return np.exp(-np.abs(xi))


def lorentzian_laplacian_resolvent(z: complex, dps: int = 40) -> complex:
    """``<(-d^2/dx^2 - z)^{-1} f, f>`` for ``f = sqrt(2/pi)/(1+x^2)`` and ``z`` off ``[0, inf)``.

    With ``|fhat|^2 = exp(-2|xi|)`` the functional is
    ``2 int_0^inf exp(-2 xi)/(xi^2 - z) dxi``; partial fractions in
    ``s = sqrt(z)`` (``Im s > 0``) give
    ``(1/s) [exp(-2s) E1(-2s) - exp(2s) E1(2s)]``.
    """
    with mpmath.workdps(dps):
        return complex(_lorentzian_resolvent_mp(mpmath.mpc(z.real, z.imag)))


def _lorentzian_resolvent_mp(z):
    s = mpmath.sqrt(z)
    if s.imag < 0:
        s = -s
    return (mpmath.exp(-2 * s) * mpmath.e1(-2 * s) - mpmath.exp(2 * s) * mpmath.e1(2 * s)) / s


def lorentzian_laplacian_measure(x0: float, epsilon: float, kernel, dps: int = 40) -> float:
    """``(K_eps * mu_f)(x0)`` for ``-d^2/dx^2`` and the Lorentzian ``f``, to ~``dps`` digits."""
    kernel = _kern(kernel)
    with mpmath.workdps(dps):
        total = mpmath.mpc(0)
        for a, alpha in zip(kernel.poles, kernel.residues):
            z = mpmath.mpf(x0) - mpmath.mpf(epsilon) * mpmath.mpc(a.real, a.imag)
            total += mpmath.mpc(alpha.real, alpha.imag) * _lorentzian_resolvent_mp(z)
        return float(-total.imag / mpmath.pi)


# -- periodic problems ---------------------------------------------------------

def y_mode_weight(f: Callable, b: Callable, ky: int = 0, M: int = 256) -> float:
    """Weight ``<P f, f>_B / <f, f>_B`` of the ``y``-Fourier mode ``ky``.

    ``f(x, y)`` is periodic on ``[-pi, pi]^2`` and ``B`` acts as the multiplier
    ``b(ky)`` in ``y``.  Mode functions ``f_k(x) = mean_y f(x, y) exp(-i k y)``
    are formed by explicit trapezoid sums, which converge geometrically for
    analytic ``f``; ``M`` is the number of nodes per direction.
    """
    t = 2 * math.pi * np.arange(M) / M
    X, Y = np.meshgrid(t, t, indexing="ij")
    F = np.asarray(f(X, Y), dtype=complex)
    ks = np.arange(-(M // 2) + 1, M // 2)
    E = np.exp(-1j * np.outer(t, ks)) / M
    modes = F @ E                      # column j holds f_{ks[j]}(x) on the x nodes
    energy = np.mean(np.abs(modes) ** 2, axis=0)
    weights = np.asarray(b(ks), dtype=float) * energy
    return float(weights[ks == ky][0] / np.sum(weights))
