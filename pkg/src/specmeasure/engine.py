"""Evaluation of smoothed spectral measures from resolvent solves.

For an m-th order kernel with poles ``a_j`` and residues ``alpha_j``

    mu_eps(x0) = -(1/pi) Im sum_j alpha_j <u_j, g>,
    (A - (x0 - eps a_j) B) u_j = g,   g = B f,

where ``B = I`` for ordinary operators.  Each shift is solved adaptively:
the truncation is doubled until the scalar functional ``<u_N, g>`` changes
by less than ``tol`` relative between consecutive sizes.  Shifts converge
independently, so a shift that is already resolved is never re-solved at a
larger size.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .errors import (
    AccuracyWarning,
    InvalidArgumentError,
    InvalidOperatorError,
    NoConvergenceError,
    SingularSystemError,
)
from .fourier import FourierPencil, f_analyze
from .kernels import RationalKernel
from .realline import FunctionRep, RealLineOperator, analyze

__all__ = [
    "SolverOptions",
    "MeasureQuery",
    "MeasureResult",
    "PointResult",
    "AdaptiveSolution",
    "Problem",
    "adaptive_solve",
    "evaluate_point",
    "evaluate_measure",
    "evaluate_measure_pencil",
    "evaluate_grid",
]

RESIDUE_RTOL = 1e-10


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SolverOptions:
    """Adaptive solver settings.

    ``init_dofs``/``max_dofs`` count coefficients per dimension.  Setting
    ``fixed_dofs`` disables doubling and solves once at that size (any even
    integer); ``err_est`` is then reported as 0.
    """

    tol: float = 1e-6
    init_dofs: int = 64
    max_dofs: int = 2**16
    fixed_dofs: Optional[int] = None
    workers: int = 1

    def __post_init__(self):
        if not 0 < self.tol < 1:
            raise InvalidArgumentError(f"tol must lie in (0, 1), got {self.tol}")
        if not _is_pow2(int(self.init_dofs)) or self.init_dofs < 2:
            raise InvalidArgumentError("init_dofs must be a power of two >= 2")
        if self.init_dofs > self.max_dofs:
            raise InvalidArgumentError("init_dofs must not exceed max_dofs")
        if self.fixed_dofs is not None and (self.fixed_dofs < 2 or self.fixed_dofs % 2):
            raise InvalidArgumentError("fixed_dofs must be an even integer >= 2")
        if self.workers < 1:
            raise InvalidArgumentError("workers must be >= 1")


@dataclass(frozen=True)
class MeasureQuery:
    points: np.ndarray
    epsilon: float
    kernel: RationalKernel
    solver: SolverOptions = SolverOptions()

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=float))
        if not np.all(np.isfinite(pts)):
            raise InvalidArgumentError("evaluation points must be finite")
        if not self.epsilon > 0:
            raise InvalidArgumentError("epsilon must be positive")
        object.__setattr__(self, "points", pts)


@dataclass
class AdaptiveSolution:
    u: np.ndarray
    phi: complex
    err_est: float
    N: int
    converged: bool
    system: object = field(repr=False, default=None)


@dataclass(frozen=True)
class PointResult:
    x: float
    value: float
    err_est: float
    dofs: tuple
    imag_residual: float
    warnings: tuple = ()


@dataclass(frozen=True)
class MeasureResult:
    points: np.ndarray
    values: np.ndarray
    err_est: np.ndarray
    dofs: tuple
    normalization_constant: float
    imag_residual: np.ndarray
    warnings: tuple = ()

    @property
    def dofs_max(self) -> np.ndarray:
        return np.array([max(d) for d in self.dofs], dtype=int)

    @property
    def converged(self) -> bool:
        return not any(w.startswith("NoConvergence") for w in self.warnings)


class Problem:
    """An operator or pencil together with a normalized vector ``f``.

    ``f`` is resolved once on a fine grid, scaled to unit norm (``||f|| = 1``,
    or ``<Bf, f> = 1`` for pencils) and then truncated to whatever size a
    solve needs.  The applied factor is :attr:`normalization_constant`.
    """

    def __init__(self, operator: Union[RealLineOperator, FourierPencil], f,
                 f_max_dofs: int = 2**16, normalize: bool = True):
        self.operator = operator
        self.warnings = []
        if isinstance(operator, RealLineOperator):
            self.dim = 1
            self.is_pencil = False
            rep = self._resolve_realline(f, f_max_dofs)
        elif isinstance(operator, FourierPencil):
            self.dim = operator.dim
            self.is_pencil = operator.is_pencil
            rep = self._resolve_fourier(f, min(f_max_dofs, 1024 if self.dim == 1 else 256))
        else:
            raise InvalidOperatorError(f"unsupported operator type {type(operator).__name__}")
        self.f = rep
        norm2 = self._b_norm2(rep)
        if not norm2 > 0:
            raise InvalidArgumentError("f must be nonzero")
        self.normalization_constant = 1.0 / math.sqrt(norm2) if normalize else 1.0
        self._rhs_cache = {}

    def _resolve_realline(self, f, nmax):
        if isinstance(f, FunctionRep):
            if f.basis != "realline" or f.scale != self.operator.scale:
                raise InvalidArgumentError("f must be a realline representation with the operator's scale")
            return f
        N = 64
        while True:
            rep = analyze(f, N, self.operator.scale)
            if rep.resolved or N >= nmax:
                break
            N *= 2
        if not rep.resolved:
            self.warnings.append(f"Unresolved: f is not resolved with {N} coefficients")
        return rep

    def _resolve_fourier(self, f, nmax):
        if isinstance(f, FunctionRep):
            if f.basis != self.operator.basis:
                raise InvalidArgumentError(f"f must be a {self.operator.basis} representation")
            return f
        N = 16
        while True:
            rep = f_analyze(f, N, self.dim)
            if rep.resolved or N >= nmax:
                break
            N *= 2
        if not rep.resolved:
            self.warnings.append(f"Unresolved: f is not resolved on a {N}^{self.dim} grid")
        return rep

    def _b_norm2(self, rep):
        if self.is_pencil:
            d = self.operator.B_diagonal(rep.N)
            v = self.operator.vector(rep)
            return float(np.real(np.vdot(v, d * v)))
        return float(np.real(np.vdot(rep.coeffs, rep.coeffs)))

    def shifted(self, z, N):
        return self.operator.shifted(z, N)

    def rhs(self, N: int) -> np.ndarray:
        """``g = B f`` (normalized) truncated to size ``N``, in solver order."""
        g = self._rhs_cache.get(N)
        if g is None:
            rep = self.f.window(N)
            if isinstance(self.operator, RealLineOperator):
                g = rep.coeffs
            else:
                g = self.operator.vector(rep)
                if self.is_pencil:
                    g = g * self.operator.B_diagonal(N)
            g = np.asarray(g, dtype=complex) * self.normalization_constant
            g.setflags(write=False)
            self._rhs_cache.setdefault(N, g)
        return g


def adaptive_solve(build: Callable, rhs: Callable, tol: float = 1e-6, init_dofs: int = 64,
                   max_dofs: int = 2**16, strict: bool = False) -> AdaptiveSolution:
    """Solve at ``N, 2N, 4N, ...`` until ``<u_N, g_N>`` stabilizes.

    Parameters
    ----------
    build : callable
        ``N -> ShiftedSystem``.
    rhs : callable
        ``N -> g`` (vector of the matching size).
    tol : float
        Relative tolerance on consecutive functionals.
    strict : bool
        Raise :class:`NoConvergenceError` instead of returning a
        non-converged solution when ``max_dofs`` is reached.

    Returns
    -------
    AdaptiveSolution
        The solution at the larger of the last two sizes and the last
        relative change as ``err_est``.
    """

    def solve(N):
        system = build(N)
        g = rhs(N)
        u = system.solve(g)
        return system, u, complex(np.vdot(g, u))

    N = int(init_dofs)
    system, u, phi = solve(N)
    err = math.inf
    while 2 * N <= max_dofs:
        N *= 2
        system2, u2, phi2 = solve(N)
        denom = abs(phi2)
        err = abs(phi2 - phi) / denom if denom > 0 else (0.0 if phi == phi2 else math.inf)
        system, u, phi = system2, u2, phi2
        if err <= tol:
            return AdaptiveSolution(u, phi, err, N, True, system)
    best = AdaptiveSolution(u, phi, err, N, False, system)
    if strict:
        raise NoConvergenceError(f"no convergence up to {max_dofs} dofs (last change {err:.3g})", best)
    return best


def _kernel(kernel) -> RationalKernel:
    if kernel is None:
        return RationalKernel.equispaced(1)
    if isinstance(kernel, RationalKernel):
        return kernel
    return RationalKernel.equispaced(int(kernel))


def evaluate_point(problem: Problem, x0: float, epsilon: float, kernel: RationalKernel,
                   solver: SolverOptions = SolverOptions()) -> PointResult:
    """Evaluate ``mu_eps(x0)`` with all diagnostics."""
    if not epsilon > 0:
        raise InvalidArgumentError("epsilon must be positive")
    kernel = _kernel(kernel)
    shifts = x0 - epsilon * kernel.poles
    notes = []
    phis, psis, errs, dofs = [], [], [], []
    for j, z in enumerate(shifts):
        build = lambda N, z=z: problem.shifted(z, N)
        if solver.fixed_dofs is not None:
            N = solver.fixed_dofs
            system = build(N)
            g = problem.rhs(N)
            u = system.solve(g)
            sol = AdaptiveSolution(u, complex(np.vdot(g, u)), 0.0, N, True, system)
        else:
            sol = adaptive_solve(build, problem.rhs, solver.tol, solver.init_dofs, solver.max_dofs)
            if not sol.converged:
                notes.append(
                    f"NoConvergence: x0={x0:.17g} shift {j} reached max_dofs={solver.max_dofs} "
                    f"(last relative change {sol.err_est:.3g})")
        g = problem.rhs(sol.N)
        psis.append(complex(np.vdot(g, sol.system.solve_adjoint(g))))
        phis.append(sol.phi)
        errs.append(sol.err_est)
        dofs.append(sol.N)

    alpha = kernel.residues
    phis = np.array(phis)
    psis = np.array(psis)
    combo = np.sum(alpha * phis)
    value = -combo.imag / np.pi
    # two-sided form of the generalized Stone formula; its imaginary part
    # vanishes exactly when the discretization is self-adjoint
    two_sided = np.sum(-alpha * phis + np.conj(alpha) * psis) / (2j * np.pi)
    scale = np.sum(np.abs(alpha * phis)) / np.pi
    residual = abs(two_sided.imag) / scale if scale > 0 else 0.0
    if residual > RESIDUE_RTOL:
        notes.append(f"ImaginaryResidue: x0={x0:.17g} relative residue {residual:.3g}")
    return PointResult(float(x0), float(value), float(max(errs)), tuple(dofs), float(residual),
                       tuple(notes))


def _make_problem(operator, f) -> Problem:
    return f if isinstance(f, Problem) else Problem(operator, f)


def evaluate_measure(operator, f, x0: float, epsilon: float, kernel=None,
                     solver: SolverOptions = SolverOptions()) -> float:
    """``mu_f^eps(x0)`` for a self-adjoint operator (Algorithm with ``B = I``).

    Emits an :class:`AccuracyWarning` if some shift did not converge.
    """
    problem = _make_problem(operator, f)
    res = evaluate_point(problem, x0, epsilon, _kernel(kernel), solver)
    for w in res.warnings:
        warnings.warn(w, AccuracyWarning, stacklevel=2)
    return res.value


def evaluate_measure_pencil(pencil: FourierPencil, f, x0: float, epsilon: float, kernel=None,
                            solver: SolverOptions = SolverOptions()) -> float:
    """``mu_f^eps(x0)`` for the pencil ``(A, B)``: solves ``(A - zB) u = Bf``."""
    if not isinstance(pencil, FourierPencil):
        raise InvalidOperatorError("pencils are supported on the Fourier backends")
    return evaluate_measure(pencil, f, x0, epsilon, kernel, solver)


def evaluate_grid(operator, f, points: Sequence[float], epsilon: float, kernel=None,
                  solver: SolverOptions = SolverOptions()) -> MeasureResult:
    """Evaluate on many points; output order always matches input order."""
    query = MeasureQuery(points, epsilon, _kernel(kernel), solver)
    problem = _make_problem(operator, f)
    work = lambda x: evaluate_point(problem, float(x), query.epsilon, query.kernel, solver)
    if solver.workers > 1 and query.points.size > 1:
        with ThreadPoolExecutor(max_workers=solver.workers) as pool:
            results = list(pool.map(work, query.points))
    else:
        results = [work(x) for x in query.points]
    notes = list(problem.warnings)
    for r in results:
        notes.extend(r.warnings)
    return MeasureResult(
        points=query.points.copy(),
        values=np.array([r.value for r in results]),
        err_est=np.array([r.err_est for r in results]),
        dofs=tuple(r.dofs for r in results),
        normalization_constant=problem.normalization_constant,
        imag_residual=np.array([r.imag_residual for r in results]),
        warnings=tuple(notes),
    )
