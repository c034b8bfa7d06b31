"""Problem files: one JSON document fully determines a run.

Schema (keys not listed are rejected)::

    {
      "mode": "equilibrium" | "constrained" | "cutting_plane_eq"
              | "cutting_plane_ineq" | "mass_sweep",
      "kernel": {"type": "log" | "riesz" | "newton" | "carleson" | "table",
                 "s": 1.0, "dim": 2, "H": "t**2", "epsilon": null,
                 "diagonal": "regularized", "shift": 0.0,
                 "table_csv": "K.csv"},
      "grid": {"box": [[-1, 1]], "n": 200} | {"csv": "points.csv"},
      "constraints": {"family": {"kind": "monomial", "n": 2}
                                | {"kind": "power" | "exp" | "cosh", "lambdas": [...]}
                                | {"kind": "sections", "phi": "exp(-z*x)", "z_points": [...]}
                                | {"kind": "table", "csv": "F.csv"},
                      "targets": [...], "sense": "eq" | "geq"},
      "cutting_plane": {"phi": "exp(-z*x)", "g": "1.0",
                        "z_grid": {"box": [0, 4], "n": 200}},
      "mass_sweep": {"h": "0*x", "c_range": [0.5, 2.0], "steps": 21,
                     "f_kernel": {...}},
      "verify": {"m_max": 6, "qbar_mode": "auto", "probe_n": null,
                 "measure_csv": "mu.csv",
                 "side_a": {constraints block}, "side_b": {constraints block}},
      "solver": {"tol": 1e-8, "tol_psi": 1e-6, "max_iter": 50},
      "seed": 0
    }

``targets`` omit the leading 1 of the probability row. ``phi``, ``g`` and
``h`` are numpy expressions in ``x`` (and ``z``), the Carleson profile ``H``
is an expression in ``t``; ``x`` is the coordinate
vector in one dimension and the (N, d) point array otherwise. CSV side files
are resolved relative to the problem file. Errors raise ``ProblemError``
carrying a location (``line:col`` for JSON syntax, a ``$.path`` otherwise).
"""
from __future__ import annotations

import ast
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .family import FunctionFamily
from .kernel import Kernel, as_grid

MODES = ("equilibrium", "constrained", "cutting_plane_eq", "cutting_plane_ineq", "mass_sweep")

_TOP = {"mode", "kernel", "grid", "constraints", "cutting_plane", "mass_sweep", "verify",
        "solver", "seed", "description"}

# Names available inside expressions.
_NAMESPACE = {name: getattr(np, name) for name in (
    "exp", "expm1", "log", "log1p", "sqrt", "sin", "cos", "tan", "sinh", "cosh", "tanh",
    "abs", "where", "maximum", "minimum", "power", "pi", "e", "sum", "clip", "sign")}
_NAMESPACE["norm"] = lambda a: np.linalg.norm(np.atleast_2d(a), axis=-1)


class ProblemError(ValueError):
    """Malformed or invalid problem file; ``location`` points at the cause."""

    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location


@dataclass
class Problem:
    mode: str
    kernel: Kernel
    grid: np.ndarray = field(repr=False)
    constraints: dict | None = None
    cutting_plane: dict | None = None
    mass_sweep: dict | None = None
    verify: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    seed: int = 0
    source: Path | None = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.grid.shape[1]


# -- expressions ---------------------------------------------------------

_ALLOWED = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.BoolOp, ast.Compare, ast.IfExp,
            ast.Call, ast.Name, ast.Load, ast.Constant, ast.Subscript, ast.Slice, ast.Tuple,
            ast.operator, ast.unaryop, ast.boolop, ast.cmpop)


def compile_expression(text, variables: tuple[str, ...], where: str):
    """Compile a numpy expression over ``variables`` into a callable.

    Only arithmetic, comparisons, conditional expressions, indexing and calls
    to the whitelisted numpy functions are accepted.
    """
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        text = repr(float(text))
    if not isinstance(text, str):
        raise ProblemError(where, "expected an expression string")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ProblemError(where, f"bad expression {text!r}: {exc.msg}") from None
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise ProblemError(where, f"construct {type(node).__name__} not allowed in {text!r}")
        if isinstance(node, ast.Name) and node.id not in _NAMESPACE and node.id not in variables:
            raise ProblemError(where, f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name)
                                               and node.func.id in _NAMESPACE):
            raise ProblemError(where, f"only whitelisted functions may be called in {text!r}")
    code = compile(tree, where, "eval")

    def f(*args):
        env = dict(_NAMESPACE)
        env.update(zip(variables, args))
        with np.errstate(all="ignore"):
            return eval(code, {"__builtins__": {}}, env)

    f.__name__ = text
    return f


# -- helpers ---------------------------------------------------------------

def _get(d: dict, key: str, where: str, kind=None, default=..., required=False):
    if key not in d:
        if required or default is ...:
            raise ProblemError(f"{where}.{key}", "missing required key")
        return default
    v = d[key]
    bad_bool = isinstance(v, bool) and kind is not bool
    if kind is not None and (bad_bool or not isinstance(v, kind)):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise ProblemError(f"{where}.{key}", f"expected {names}, got {type(v).__name__}")
    return v


def _reject_unknown(d: dict, allowed: set, where: str):
    extra = sorted(set(d) - allowed)
    if extra:
        raise ProblemError(f"{where}.{extra[0]}", "unknown key")


def _read_csv(base: Path, name, where: str) -> np.ndarray:
    if not isinstance(name, str):
        raise ProblemError(where, "expected a CSV path")
    path = (base / name) if not Path(name).is_absolute() else Path(name)
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2, comments="#")
    except OSError as exc:
        raise ProblemError(where, f"cannot read {path}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise ProblemError(where, f"{path}: {exc}") from None
    if not np.all(np.isfinite(data)):
        raise ProblemError(where, f"{path}: non-finite entries")
    return data


def uniform_grid(box, n) -> np.ndarray:
    """Tensor grid with ``n`` points per axis (endpoints included)."""
    box = np.atleast_2d(np.asarray(box, dtype=float))
    ns = np.broadcast_to(np.asarray(n, dtype=int), (box.shape[0],))
    axes = [np.linspace(a, b, k) for (a, b), k in zip(box, ns)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.reshape(-1) for m in mesh])


def _parse_box(v, where):
    try:
        box = np.atleast_2d(np.asarray(v, dtype=float))
    except (TypeError, ValueError):
        raise ProblemError(where, "box must be [a, b] or a list of [a, b]") from None
    if box.ndim != 2 or box.shape[1] != 2 or np.any(box[:, 1] <= box[:, 0]):
        raise ProblemError(where, "box must be [a, b] or a list of [a, b] with a < b")
    return box


def _parse_grid(d, base, where, n_override=None) -> np.ndarray:
    if not isinstance(d, dict):
        raise ProblemError(where, "expected an object")
    _reject_unknown(d, {"box", "n", "csv"}, where)
    if "csv" in d:
        return as_grid(_read_csv(base, d["csv"], f"{where}.csv"))
    box = _parse_box(_get(d, "box", where), f"{where}.box")
    n = n_override if n_override is not None else _get(d, "n", where, (int, list))
    ns = np.atleast_1d(np.asarray(n))
    if ns.dtype.kind not in "iu" or np.any(ns < 1) or ns.size not in (1, box.shape[0]):
        raise ProblemError(f"{where}.n", "n must be a positive integer (or one per axis)")
    return uniform_grid(box, ns)


def _parse_kernel(d, base, grid, where) -> Kernel:
    if not isinstance(d, dict):
        raise ProblemError(where, "expected an object")
    _reject_unknown(d, {"type", "s", "dim", "H", "epsilon", "diagonal", "shift", "table_csv"},
                    where)
    kind = _get(d, "type", where, str)
    eps = _get(d, "epsilon", where, (int, float, type(None)), None)
    diag = _get(d, "diagonal", where, str, "regularized")
    shift = float(_get(d, "shift", where, (int, float), 0.0))
    try:
        if kind == "log":
            return Kernel.logarithmic(eps, diag, shift)
        if kind == "riesz":
            return Kernel.riesz(_get(d, "s", where, (int, float)), eps, diag, shift)
        if kind == "newton":
            return Kernel.newtonian(_get(d, "dim", where, int, grid.shape[1]), eps, diag, shift)
        if kind == "carleson":
            H = compile_expression(_get(d, "H", where), ("t",), f"{where}.H")
            return Kernel.carleson(H, _get(d, "dim", where, int, max(2, grid.shape[1])), eps,
                                   diag, shift)
        if kind == "table":
            T = _read_csv(base, _get(d, "table_csv", where), f"{where}.table_csv")
            if T.shape != (grid.shape[0], grid.shape[0]):
                raise ProblemError(f"{where}.table_csv",
                                   f"table is {T.shape}, grid has {grid.shape[0]} points")
            return Kernel.tabulated(T, grid, shift)
    except ValueError as exc:
        if isinstance(exc, ProblemError):
            raise
        raise ProblemError(where, str(exc)) from None
    raise ProblemError(f"{where}.type", f"unknown kernel type {kind!r}")


def parse_family(d, base, grid, where) -> FunctionFamily:
    if not isinstance(d, dict):
        raise ProblemError(where, "expected an object")
    _reject_unknown(d, {"kind", "n", "lambdas", "csv", "phi", "z_points"}, where)
    kind = _get(d, "kind", where, str)
    try:
        if kind == "monomial":
            n = _get(d, "n", where, int)
            if n < 0:
                raise ProblemError(f"{where}.n", "degree must be >= 0")
            return FunctionFamily.monomial(n)
        if kind in ("power", "exp", "cosh"):
            lam = _get(d, "lambdas", where, list)
            ctor = {"power": FunctionFamily.power, "exp": FunctionFamily.exponential,
                    "cosh": FunctionFamily.cosh}[kind]
            return ctor([float(v) for v in lam])
        if kind == "sections":
            Phi = compile_expression(_get(d, "phi", where), ("x", "z"), f"{where}.phi")
            return FunctionFamily.sections(Phi, _get(d, "z_points", where, list))
        if kind == "table":
            M = _read_csv(base, _get(d, "csv", where), f"{where}.csv")
            return FunctionFamily.tabulated(M, grid)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ProblemError):
            raise
        raise ProblemError(where, str(exc)) from None
    raise ProblemError(f"{where}.kind", f"unknown family kind {kind!r}")


def parse_constraints(d, base, grid, where) -> dict:
    """``{"family": FunctionFamily, "targets": array, "sense": "eq"|"geq", "source": dict}``."""
    if not isinstance(d, dict):
        raise ProblemError(where, "expected an object")
    _reject_unknown(d, {"family", "targets", "sense"}, where)
    fam = parse_family(_get(d, "family", where), base, grid, f"{where}.family")
    targets = _get(d, "targets", where, list)
    try:
        t = np.asarray(targets, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise ProblemError(f"{where}.targets", "targets must be numbers") from None
    expected = len(fam) - 1 if fam.normalized else len(fam)
    if t.size == len(fam) and fam.normalized:
        t = t[1:]
    if t.size != expected:
        raise ProblemError(f"{where}.targets", f"expected {expected} targets, got {t.size}")
    sense = _get(d, "sense", where, str, "eq")
    if sense not in ("eq", "geq"):
        raise ProblemError(f"{where}.sense", "sense must be 'eq' or 'geq'")
    return {"family": fam, "targets": t, "sense": sense, "source": d}


def parse_problem(text: str, source: Path | None = None, overrides: dict | None = None) -> Problem:
    """Parse problem text. ``overrides`` may hold ``grid_n``, ``z_grid_n``,
    ``tol``, ``tol_psi``, ``max_iter``, ``m_max``, ``seed`` and ``mode``."""
    ov = {k: v for k, v in (overrides or {}).items() if v is not None}
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemError(f"{exc.lineno}:{exc.colno}", exc.msg) from None
    if not isinstance(doc, dict):
        raise ProblemError("$", "top level must be an object")
    _reject_unknown(doc, _TOP, "$")
    base = source.parent if source is not None else Path(".")
    mode = ov.get("mode", _get(doc, "mode", "$", str, "equilibrium"))
    if mode not in MODES:
        raise ProblemError("$.mode", f"unknown mode {mode!r}; expected one of {', '.join(MODES)}")
    grid = _parse_grid(_get(doc, "grid", "$"), base, "$.grid", ov.get("grid_n"))
    kernel = _parse_kernel(_get(doc, "kernel", "$"), base, grid, "$.kernel")

    cons = None
    if "constraints" in doc:
        cons = parse_constraints(doc["constraints"], base, grid, "$.constraints")
    if mode == "constrained" and cons is None:
        raise ProblemError("$.constraints", "missing required key for mode 'constrained'")

    cp = None
    if mode.startswith("cutting_plane") or "cutting_plane" in doc:
        d = _get(doc, "cutting_plane", "$", dict)
        _reject_unknown(d, {"phi", "g", "z_grid", "z_init", "refine"}, "$.cutting_plane")
        cp = {
            "Phi": compile_expression(_get(d, "phi", "$.cutting_plane"), ("x", "z"),
                                      "$.cutting_plane.phi"),
            "g": compile_expression(_get(d, "g", "$.cutting_plane"), ("z",), "$.cutting_plane.g"),
            "Z": _parse_grid(_get(d, "z_grid", "$.cutting_plane"), base, "$.cutting_plane.z_grid",
                             ov.get("z_grid_n")),
            "z_init": d.get("z_init"),
            "refine": bool(_get(d, "refine", "$.cutting_plane", bool, True)),
        }

    ms = None
    if mode == "mass_sweep" or "mass_sweep" in doc:
        d = _get(doc, "mass_sweep", "$", dict)
        where = "$.mass_sweep"
        _reject_unknown(d, {"h", "c_range", "steps", "f_kernel", "golden_iters"}, where)
        cr = _get(d, "c_range", where, list)
        if len(cr) != 2 or not all(isinstance(v, (int, float)) for v in cr) or not 0 < cr[0] <= cr[1]:
            raise ProblemError(f"{where}.c_range", "expected [c1, c2] with 0 < c1 <= c2")
        fk = kernel
        if "f_kernel" in d:
            fk = _parse_kernel(d["f_kernel"], base, grid, f"{where}.f_kernel")
        ms = {"h": compile_expression(_get(d, "h", where, (str, int, float), "0"), ("x",),
                                      f"{where}.h"),
              "c_range": (float(cr[0]), float(cr[1])),
              "steps": int(_get(d, "steps", where, int, 21)),
              "golden_iters": int(_get(d, "golden_iters", where, int, 10)),
              "f_kernel": fk}

    ver = dict(_get(doc, "verify", "$", dict, {}))
    _reject_unknown(ver, {"m_max", "qbar_mode", "probe_n", "side_a", "side_b", "budget",
                          "measure_csv"}, "$.verify")
    for side in ("side_a", "side_b"):
        if side in ver:
            ver[side] = parse_constraints(ver[side], base, grid, f"$.verify.{side}")
    if "m_max" in ov:
        ver["m_max"] = ov["m_max"]
    if "qbar_mode" in ov:
        ver["qbar_mode"] = ov["qbar_mode"]
    if "measure_csv" in ver:
        name = ver["measure_csv"]
        if not isinstance(name, str):
            raise ProblemError("$.verify.measure_csv", "expected a CSV path")
        ver["measure_csv"] = base / name
    qm = ver.get("qbar_mode", "auto")
    if qm not in ("auto", "exact", "heuristic"):
        raise ProblemError("$.verify.qbar_mode", "expected 'auto', 'exact' or 'heuristic'")

    solver = dict(_get(doc, "solver", "$", dict, {}))
    _reject_unknown(solver, {"tol", "tol_psi", "max_iter", "inner_tol"}, "$.solver")
    for k in ("tol", "tol_psi", "max_iter"):
        if k in ov:
            solver[k] = ov[k]
    for k, v in solver.items():
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
            raise ProblemError(f"$.solver.{k}", "expected a positive number")
    seed = int(ov.get("seed", _get(doc, "seed", "$", int, 0)))
    return Problem(mode, kernel, grid, cons, cp, ms, ver, solver, seed, source, doc)


def load_problem(path, overrides: dict | None = None) -> Problem:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemError(str(path), f"cannot read problem file: {exc.strerror or exc}") from None
    return parse_problem(text, path, overrides)


__all__ = ["Problem", "ProblemError", "parse_problem", "load_problem", "parse_constraints",
           "parse_family", "compile_expression", "uniform_grid", "MODES"]
