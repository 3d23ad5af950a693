"""Command-line front end.

``specmeasure run`` evaluates a smoothed measure on a grid and writes CSV or
JSON plus a ``<output>.meta.json`` sidecar.  ``specmeasure sweep`` runs an
epsilon convergence study at one point against an oracle reference.

Exit codes: 0 success, 1 configuration or parse error (no output written),
2 completed with warnings.
"""

from __future__ import annotations

import argparse
import copy
import io
import json
import math
import re
import sys
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import oracle
from .config import ConfigError, RunConfig, load_config
from .engine import MeasureResult, Problem, evaluate_grid
from .errors import SpecMeasureError
from .realline import RealLineOperator, synthesize
from .terms import Cauchy, Derivative

__all__ = ["main", "run", "convergence_study", "write_csv", "read_csv", "parse_epsilons",
           "SweepResult"]

EXIT_OK, EXIT_CONFIG, EXIT_WARN = 0, 1, 2


# -- output ----------------------------------------------------------------------

def format_csv(result: MeasureResult) -> str:
    buf = io.StringIO(newline="")
    buf.write("x,mu,err_est,dofs_max\n")
    for x, mu, err, d in zip(result.points, result.values, result.err_est, result.dofs_max):
        buf.write("%.17g,%.17g,%.17g,%d\n" % (x, mu, err, d))
    return buf.getvalue()


def write_csv(result: MeasureResult, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_csv(result))


def read_csv(path: str) -> dict:
    """Parse an output CSV back into numpy columns."""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = fh.read().split("\n")
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:] if ln]
    cols = {h: [r[i] for r in rows] for i, h in enumerate(header)}
    return {"x": np.array(cols["x"], dtype=float), "mu": np.array(cols["mu"], dtype=float),
            "err_est": np.array(cols["err_est"], dtype=float),
            "dofs_max": np.array(cols["dofs_max"], dtype=int)}


def _complex_list(z):
    return [[float(c.real), float(c.imag)] for c in z]


def _metadata(cfg: RunConfig, result: MeasureResult, wall: float) -> dict:
    return {
        "kernel": {"order": cfg.kernel.order, "poles": _complex_list(cfg.kernel.poles),
                   "residues": _complex_list(cfg.kernel.residues)},
        "epsilon": cfg.epsilon,
        "backend": cfg.doc["problem"]["backend"],
        "mode": cfg.doc["problem"]["mode"],
        "scale": cfg.scale,
        "normalization_constant": result.normalization_constant,
        "solver": {"tol": cfg.solver.tol, "init_dofs": cfg.solver.init_dofs,
                   "max_dofs": cfg.solver.max_dofs, "fixed_dofs": cfg.solver.fixed_dofs},
        "warnings": list(cfg.kernel.warnings) + list(result.warnings),
        "wall_time_s": wall,
    }


def _write_outputs(cfg: RunConfig, result: MeasureResult, wall: float) -> None:
    if cfg.output_format == "csv":
        write_csv(result, cfg.output_path)
    else:
        doc = {"x": result.points.tolist(), "mu": result.values.tolist(),
               "err_est": result.err_est.tolist(), "dofs_max": result.dofs_max.tolist(),
               "dofs": [list(d) for d in result.dofs]}
        with open(cfg.output_path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
    with open(cfg.output_path + ".meta.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_metadata(cfg, result, wall), fh, indent=1)
        fh.write("\n")


# -- run -------------------------------------------------------------------------

def _parse_grid(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError("--grid", "expected MIN:MAX:N")
    try:
        return {"min": float(parts[0]), "max": float(parts[1]), "n": int(parts[2])}
    except ValueError:
        raise ConfigError("--grid", f"cannot parse {text!r}") from None


def apply_overrides(doc: dict, epsilon=None, order=None, grid=None, output=None, workers=None) -> dict:
    doc = copy.deepcopy(doc)
    if epsilon is not None:
        doc["epsilon"] = epsilon
    if order is not None:
        doc["kernel"]["order"] = order
    if grid is not None:
        doc["grid"] = _parse_grid(grid)
    if output is not None:
        doc["output"]["path"] = output
    if workers is not None:
        doc["workers"] = workers
    return doc


def run(doc: dict) -> tuple[int, Optional[MeasureResult]]:
    """Validate, evaluate and write outputs; returns ``(exit status, result)``."""
    cfg = RunConfig.from_dict(doc)
    t0 = time.perf_counter()
    result = evaluate_grid(cfg.operator, cfg.f, cfg.points, cfg.epsilon, cfg.kernel, cfg.solver)
    _write_outputs(cfg, result, time.perf_counter() - t0)
    warned = bool(result.warnings) or bool(cfg.kernel.warnings)
    return (EXIT_WARN if warned else EXIT_OK), result


# -- sweep -----------------------------------------------------------------------

_EPS = re.compile(r"^\s*([0-9]*\.?[0-9]+)[eE]([+-]?[0-9]*\.?[0-9]+)\s*$")


def parse_epsilons(text: str) -> list[float]:
    """Parse ``"1e-1,1e-1.5,0.01"``; exponents may be fractional."""
    out = []
    for item in text.split(","):
        m = _EPS.match(item)
        try:
            val = float(m.group(1)) * 10.0 ** float(m.group(2)) if m else float(item)
        except ValueError:
            raise ConfigError("--epsilons", f"cannot parse {item!r}") from None
        if not val > 0 or not math.isfinite(val):
            raise ConfigError("--epsilons", f"epsilon must be positive, got {item!r}")
        out.append(val)
    return out


@dataclass(frozen=True)
class SweepResult:
    point: float
    epsilons: np.ndarray
    values: np.ndarray
    references: np.ndarray
    rel_errors: np.ndarray
    slope: float
    warnings: tuple = ()

    def table(self) -> str:
        lines = ["epsilon,mu,reference,rel_error"]
        for row in zip(self.epsilons, self.values, self.references, self.rel_errors):
            lines.append("%.17g,%.17g,%.17g,%.17g" % row)
        return "\n".join(lines) + "\n"


def _laplacian_coupling(operator) -> float:
    """Hilbert coupling ``c`` if the operator is ``-d^2/dx^2 + c H``."""
    if not isinstance(operator, RealLineOperator):
        raise ConfigError("problem.backend", "the laplacian reference needs the realline backend")
    lap = 0
    c = 0.0
    for t in operator.terms:
        if isinstance(t, Derivative) and t.order == 2 and not callable(t.coefficient) \
                and float(t.coefficient) == 1.0:
            lap += 1
        elif isinstance(t, Cauchy) and not any(callable(k) for k in t.factors):
            c += sum(float(k) ** 2 for k in t.factors)
        else:
            raise ConfigError("problem.terms", "the laplacian reference needs -d^2/dx^2 plus "
                                               "optional constant Cauchy terms")
    if lap != 1:
        raise ConfigError("problem.terms", "the laplacian reference needs exactly one -d^2/dx^2 term")
    return c


def convergence_study(doc: dict, epsilons: Sequence[float], point: float,
                      reference: str = "laplacian") -> SweepResult:
    """Relative error of ``mu_eps(point)`` for each epsilon and the log-log slope.

    ``reference="laplacian"`` compares with the exact density of
    ``-d^2/dx^2 (+ c H)`` computed from the Fourier transform of ``f``.
    ``reference="dense"`` compares with the eigendecomposition of the same
    matrix at the truncation ``solver.fixed_dofs`` (default 256) and the same
    epsilon; it checks the solver path rather than the rate of the smoothing.
    """
    epsilons = [float(e) for e in epsilons]
    if len(epsilons) < 3:
        raise ConfigError("--epsilons", "a convergence study needs at least 3 epsilon values")
    if reference not in ("laplacian", "dense"):
        raise ConfigError("--reference", f"unknown reference {reference!r}")
    vals, refs, notes = [], [], []
    rho = None
    for eps in epsilons:
        d = apply_overrides(doc, epsilon=eps)
        d["grid"] = {"min": point, "max": point, "n": 1}
        if reference == "dense":
            d.setdefault("solver", {}).setdefault("fixed_dofs", 256)
        cfg = RunConfig.from_dict(d)
        problem = Problem(cfg.operator, cfg.f)
        res = evaluate_grid(cfg.operator, problem, [point], eps, cfg.kernel, cfg.solver)
        notes.extend(res.warnings)
        vals.append(res.values[0])
        if reference == "laplacian":
            if rho is None:
                rho = _laplacian_reference(cfg, problem, point)
            refs.append(rho)
        else:
            refs.append(_dense_reference(cfg, problem, point, eps))
    vals, refs = np.array(vals), np.array(refs)
    errs = np.abs(vals - refs) / np.abs(refs)
    if np.all(errs > 0):
        slope = float(np.polyfit(np.log(epsilons), np.log(errs), 1)[0])
    else:
        slope = float("nan")
        notes.append("Slope: an error is exactly zero; slope undefined")
    return SweepResult(float(point), np.array(epsilons), vals, refs, errs, slope, tuple(notes))


def _laplacian_reference(cfg: RunConfig, problem: Problem, x0: float) -> float:
    c = _laplacian_coupling(cfg.operator)
    scale = problem.normalization_constant
    f = cfg.f

    def fn(x):
        x = np.asarray(x, dtype=float)
        vals = f(x) if callable(f) else synthesize(f, np.atleast_1d(x)).reshape(x.shape)
        return scale * np.real(vals)

    return oracle.laplacian_density(x0, f=fn, hilbert_coupling=c)


def _dense_reference(cfg: RunConfig, problem: Problem, x0: float, eps: float) -> float:
    N = cfg.solver.fixed_dofs
    g = problem.rhs(N)
    if getattr(problem, "is_pencil", False):
        A, B = cfg.operator.matrices(N)
        f = g / B.diagonal()
        return float(oracle.dense_pencil_measure(A, B, f, cfg.kernel, eps, x0))
    H = cfg.operator.matrix(N) if isinstance(cfg.operator, RealLineOperator) else cfg.operator.matrices(N)[0]
    return float(oracle.dense_measure(H, g, cfg.kernel, eps, x0))


# -- entry point ---------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="specmeasure",
                                description="Smoothed spectral measures of self-adjoint operators.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="evaluate the smoothed measure on a grid")
    r.add_argument("--config", required=True, help="JSON configuration file")
    r.add_argument("--epsilon", type=float, help="smoothing parameter (overrides config)")
    r.add_argument("--order", type=int, help="kernel order m (overrides config)")
    r.add_argument("--grid", help="MIN:MAX:N evaluation grid (overrides config)")
    r.add_argument("--output", help="output path (overrides config)")
    r.add_argument("--workers", type=int, help="number of worker threads")
    s = sub.add_parser("sweep", help="epsilon convergence study at one point")
    s.add_argument("--config", required=True, help="JSON configuration file")
    s.add_argument("--epsilons", required=True, help="comma-separated list, e.g. 1e-1,1e-1.5,1e-2")
    s.add_argument("--point", type=float, required=True, help="evaluation point x0")
    s.add_argument("--reference", choices=["laplacian", "dense"], default="laplacian")
    s.add_argument("--order", type=int, help="kernel order m (overrides config)")
    s.add_argument("--output", help="write the table as CSV here instead of stdout")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        doc = load_config(args.config)
        if args.command == "run":
            doc = apply_overrides(doc, args.epsilon, args.order, args.grid, args.output, args.workers)
            status, result = run(doc)
            for w in (result.warnings if result else ()):
                print(f"warning: {w}", file=sys.stderr)
            return status
        doc = apply_overrides(doc, order=args.order)
        sweep = convergence_study(doc, parse_epsilons(args.epsilons), args.point, args.reference)
        text = sweep.table() + "slope,%.6g\n" % sweep.slope
        if args.output:
            with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        for w in sweep.warnings:
            print(f"warning: {w}", file=sys.stderr)
        return EXIT_WARN if sweep.warnings else EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SpecMeasureError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
