"""JSON run configurations: schema validation and construction of problems.

A configuration is validated in two stages.  The JSON schema checks shapes,
types and ranges and rejects unknown keys.  Cross-field rules (backend and
mode compatibility, expression syntax, power-of-two sizes) are checked
afterwards.  Every failure raises :class:`ConfigError` whose message starts
with the dotted path of the offending field.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from typing import Any, Optional

import jsonschema
import numpy as np

from .engine import SolverOptions
from .errors import SpecMeasureError
from .expressions import ExpressionError, parse_expression
from .fourier import FourierPencil
from .kernels import RationalKernel
from .realline import FunctionRep, RealLineOperator
from .terms import Cauchy, Derivative, Multiplication, Symbol

__all__ = ["ConfigError", "RunConfig", "SCHEMA", "load_config", "validate_config"]


class ConfigError(SpecMeasureError, ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


_coef = {"type": ["string", "number"]}
_pos_int = {"type": "integer", "minimum": 1}

_term = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["kind", "coefficient"],
         "properties": {"kind": {"const": "multiplication"}, "coefficient": _coef}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "order"],
         "properties": {"kind": {"const": "derivative"}, "order": _pos_int,
                        "coefficient": _coef, "variable": {"enum": ["x", "y"]}}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "factors"],
         "properties": {"kind": {"const": "cauchy"},
                        "factors": {"type": "array", "minItems": 1, "items": _coef}}},
        {"type": "object", "additionalProperties": False, "required": ["kind", "symbol"],
         "properties": {"kind": {"const": "symbol"}, "symbol": {"type": "string"}}},
    ]
}

SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["problem", "f", "kernel", "epsilon", "grid", "output"],
    "properties": {
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "required": ["mode", "backend", "terms"],
            "properties": {
                "mode": {"enum": ["operator", "pencil"]},
                "backend": {"enum": ["realline", "fourier1d", "fourier2d"]},
                "scale": {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "auto"}]},
                "terms": {"type": "array", "minItems": 1, "items": _term},
                "B_terms": {"type": "array", "minItems": 1, "items": _term},
            },
        },
        "f": {
            "oneOf": [
                {"type": "object", "additionalProperties": False, "required": ["expr"],
                 "properties": {"expr": {"type": "string"}}},
                {"type": "object", "additionalProperties": False, "required": ["coefficients"],
                 "properties": {"coefficients": {
                     "type": "array", "minItems": 1,
                     "items": {"type": "array", "minItems": 3, "maxItems": 4,
                               "items": {"type": "number"}}}}},
            ]
        },
        "kernel": {
            "type": "object",
            "additionalProperties": False,
            "required": ["order"],
            "properties": {
                "order": _pos_int,
                "poles": {"type": "array", "minItems": 1,
                          "items": {"type": "array", "minItems": 2, "maxItems": 2,
                                    "items": {"type": "number"}}},
            },
        },
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["min", "max", "n"],
            "properties": {"min": {"type": "number"}, "max": {"type": "number"}, "n": _pos_int},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "init_dofs": {"type": "integer", "minimum": 2},
                "max_dofs": {"type": "integer", "minimum": 2},
                "fixed_dofs": {"type": "integer", "minimum": 2},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "required": ["path"],
            "properties": {"path": {"type": "string", "minLength": 1},
                           "format": {"enum": ["csv", "json"]}},
        },
        "workers": _pos_int,
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


def _path(parts) -> str:
    out = ""
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else (f".{p}" if out else str(p))
    return out


_KINDS = ("multiplication", "derivative", "cauchy", "symbol")


def _branch_score(schema: dict, inst: dict) -> int:
    props = schema.get("properties", {})
    return sum(1 for k in inst if k in props) + sum(2 for k in schema.get("required", ()) if k in inst)


def _describe(err: jsonschema.ValidationError) -> tuple[str, str]:
    """Path and message for the most specific cause of ``err``.

    ``oneOf`` failures are resolved by picking the alternative the instance
    most plausibly meant: the term whose ``kind`` matches, or else the
    alternative sharing the most keys with the instance.
    """
    while err.validator == "oneOf" and err.context:
        inst = err.instance
        path = list(err.absolute_path)
        if path[-1:] == ["scale"]:
            return _path(path), f"{inst!r} is neither a positive number nor 'auto'"
        if not isinstance(inst, dict):
            return _path(path), f"{inst!r} is not an object"
        alts = err.validator_value
        if any("kind" in a.get("properties", {}) for a in alts):
            kind = inst.get("kind")
            if kind not in _KINDS:
                where = _path(path + ["kind"])
                if "kind" not in inst:
                    return where, "missing term kind; expected one of " + ", ".join(_KINDS)
                return where, f"{kind!r} is not one of " + ", ".join(_KINDS)
            branch = next(i for i, a in enumerate(alts) if a["properties"]["kind"]["const"] == kind)
        else:
            branch = max(range(len(alts)), key=lambda i: _branch_score(alts[i], inst))
        subs = [e for e in err.context if e.schema_path[0] == branch]
        if not subs:
            break
        err = max(subs, key=lambda e: len(e.absolute_path))
    return _path(err.absolute_path), err.message


def validate_config(doc: Any) -> None:
    """Schema and cross-field validation; raises :class:`ConfigError`."""
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        raise ConfigError(*_describe(errors[0]))
    _semantic_checks(doc)


def _is_pow2(n):
    return n >= 1 and n & (n - 1) == 0


def _variables(backend: str, role: str) -> tuple:
    if role == "symbol":
        return ("kx", "ky") if backend == "fourier2d" else ("kx",)
    return ("x", "y") if backend == "fourier2d" else ("x",)


def _check_expr(text, path, backend, role="coefficient"):
    try:
        return parse_expression(text, _variables(backend, role))
    except ExpressionError as exc:
        raise ConfigError(path, str(exc)) from None


def _semantic_checks(doc):
    prob = doc["problem"]
    backend, mode = prob["backend"], prob["mode"]
    if mode == "pencil":
        if backend == "realline":
            raise ConfigError("problem.backend", "pencil mode requires a Fourier backend")
        if "B_terms" not in prob:
            raise ConfigError("problem.B_terms", "pencil mode requires B_terms")
    elif "B_terms" in prob:
        raise ConfigError("problem.B_terms", "B_terms are only allowed in pencil mode")
    if "scale" in prob and backend != "realline":
        raise ConfigError("problem.scale", "scale applies to the realline backend only")
    for group in ("terms", "B_terms"):
        for i, t in enumerate(prob.get(group, [])):
            base = f"problem.{group}[{i}]"
            kind = t["kind"]
            if kind == "symbol":
                if backend == "realline":
                    raise ConfigError(base + ".kind", "symbol terms need a Fourier backend")
                _check_expr(t["symbol"], base + ".symbol", backend, "symbol")
            if kind == "cauchy":
                if backend != "realline":
                    raise ConfigError(base + ".kind", "cauchy terms need the realline backend")
                for j, k in enumerate(t["factors"]):
                    if isinstance(k, str):
                        _check_expr(k, f"{base}.factors[{j}]", backend)
            if kind == "derivative":
                if backend == "realline" and t["order"] > 2:
                    raise ConfigError(base + ".order", "realline derivatives support order 1 or 2")
                if t.get("variable", "x") == "y" and backend != "fourier2d":
                    raise ConfigError(base + ".variable", "y derivatives need the fourier2d backend")
            if isinstance(t.get("coefficient"), str):
                _check_expr(t["coefficient"], base + ".coefficient", backend)
    f = doc["f"]
    if "expr" in f:
        _check_expr(f["expr"], "f.expr", backend)
    else:
        width = 4 if backend == "fourier2d" else 3
        for i, row in enumerate(f["coefficients"]):
            if len(row) != width:
                raise ConfigError(f"f.coefficients[{i}]",
                                  f"expected {width} numbers for the {backend} backend")
            if any(float(v) != int(v) for v in row[: width - 2]):
                raise ConfigError(f"f.coefficients[{i}]", "indices must be integers")
    k = doc["kernel"]
    if "poles" in k:
        if len(k["poles"]) != k["order"]:
            raise ConfigError("kernel.poles", f"expected {k['order']} poles, got {len(k['poles'])}")
        if any(im <= 0 for _, im in k["poles"]):
            raise ConfigError("kernel.poles", "poles must lie in the open upper half-plane")
        if len({(re, im) for re, im in k["poles"]}) != len(k["poles"]):
            raise ConfigError("kernel.poles", "poles must be distinct")
    g = doc["grid"]
    if g["min"] > g["max"]:
        raise ConfigError("grid", "min must not exceed max")
    s = doc.get("solver", {})
    init, mx = s.get("init_dofs", 64), s.get("max_dofs", 2**16)
    if not _is_pow2(init):
        raise ConfigError("solver.init_dofs", "must be a power of two")
    if not _is_pow2(mx):
        raise ConfigError("solver.max_dofs", "must be a power of two")
    if init > mx:
        raise ConfigError("solver.init_dofs", "must not exceed max_dofs")
    if "fixed_dofs" in s and s["fixed_dofs"] % 2:
        raise ConfigError("solver.fixed_dofs", "must be even")


def load_config(path) -> dict:
    """Read and validate a configuration file."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ConfigError("", f"not UTF-8 at byte {exc.start}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    validate_config(doc)
    return doc


@dataclass
class RunConfig:
    """A validated configuration with ready-to-use engine objects."""

    doc: dict
    operator: object
    f: object
    kernel: RationalKernel
    epsilon: float
    points: np.ndarray
    solver: SolverOptions
    output_path: str
    output_format: str
    scale: Optional[float] = None

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = copy.deepcopy(doc)
        validate_config(doc)
        prob = doc["problem"]
        backend = prob["backend"]
        eps = float(doc["epsilon"])
        scale = None
        if backend == "realline":
            sc = prob.get("scale", 1.0)
            scale = 2.0 / eps if sc == "auto" else float(sc)
        A_terms = [_build_term(t, backend) for t in prob["terms"]]
        if backend == "realline":
            operator = RealLineOperator(A_terms, scale)
        else:
            B_terms = [_build_term(t, backend) for t in prob.get("B_terms", [])]
            operator = FourierPencil(A_terms, B_terms, dim=2 if backend == "fourier2d" else 1)
        f = _build_f(doc["f"], backend, scale)
        k = doc["kernel"]
        kernel = (RationalKernel.from_poles([complex(re, im) for re, im in k["poles"]])
                  if "poles" in k else RationalKernel.equispaced(k["order"]))
        g = doc["grid"]
        points = np.linspace(g["min"], g["max"], g["n"]) if g["n"] > 1 else np.array([float(g["min"])])
        s = doc.get("solver", {})
        solver = SolverOptions(tol=s.get("tol", 1e-6), init_dofs=s.get("init_dofs", 64),
                               max_dofs=s.get("max_dofs", 2**16), fixed_dofs=s.get("fixed_dofs"),
                               workers=doc.get("workers", 1))
        out = doc["output"]
        return cls(doc, operator, f, kernel, eps, points, solver, out["path"],
                   out.get("format", "csv"), scale)


def _coefficient(c, backend):
    if isinstance(c, str):
        e = parse_expression(c, _variables(backend, "coefficient"))
        return e.value() if e.is_constant else e
    return float(c)


def _build_term(t, backend):
    kind = t["kind"]
    if kind == "multiplication":
        return Multiplication(_coefficient(t["coefficient"], backend))
    if kind == "derivative":
        return Derivative(t["order"], _coefficient(t.get("coefficient", 1.0), backend),
                          t.get("variable", "x"))
    if kind == "cauchy":
        return Cauchy(tuple(_coefficient(k, backend) for k in t["factors"]))
    return Symbol(parse_expression(t["symbol"], _variables(backend, "symbol")))


def _build_f(spec, backend, scale):
    if "expr" in spec:
        e = parse_expression(spec["expr"], _variables(backend, "coefficient"))
        if e.is_constant:
            v = e.value()
            return (lambda x: np.full(np.shape(x), v)) if backend != "fourier2d" else \
                (lambda x, y: np.full(np.broadcast(x, y).shape, v))
        return e
    rows = spec["coefficients"]
    if backend == "fourier2d":
        kmax = max(max(-int(r[0]), int(r[0]) + 1, -int(r[1]), int(r[1]) + 1) for r in rows)
        N = _pow2_at_least(2 * kmax)
        c = np.zeros((N, N), dtype=complex)
        for kx, ky, re, im in rows:
            c[int(kx) + N // 2, int(ky) + N // 2] += complex(re, im)
        return FunctionRep(c, "fourier2d", 1.0, True)
    nmax = max(max(-int(r[0]), int(r[0]) + 1) for r in rows)
    N = _pow2_at_least(2 * nmax)
    c = np.zeros(N, dtype=complex)
    for n, re, im in rows:
        c[int(n) + N // 2] += complex(re, im)
    if backend == "realline":
        return FunctionRep(c, "realline", scale, True)
    return FunctionRep(c, "fourier1d", 1.0, True)


def _pow2_at_least(n):
    N = 2
    while N < n:
        N *= 2
    return N
