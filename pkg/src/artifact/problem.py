"""Problem data, candidate paths and the classical first-order checks."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .expression import (
    Expr,
    ExpressionError,
    IntegrandBundle,
    T,
    compile_expression,
    differentiate,
    parse_expression,
    variables,
)
from .quadrature import integrate

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

CONTINUITY_TOL = 1e-10
SLOPE_TOL = 1e-8
BOUNDARY_TOL = 1e-10


class ProblemError(ValueError):
    pass


class SchemaError(ProblemError):
    pass


class ContinuityError(ProblemError):
    pass


class BoundaryError(ProblemError):
    pass


class SideError(ProblemError):
    pass


class Side(Enum):
    PLUS = "+"
    MINUS = "-"
    TWO = "0"

    @classmethod
    def parse(cls, text: "str | Side") -> "Side":
        if isinstance(text, Side):
            return text
        aliases = {
            "+": cls.PLUS, "plus": cls.PLUS, "right": cls.PLUS,
            "-": cls.MINUS, "minus": cls.MINUS, "left": cls.MINUS,
            "0": cls.TWO, "two": cls.TWO, "both": cls.TWO, "twosided": cls.TWO,
        }
        try:
            return aliases[text.strip().lower()]
        except KeyError:
            raise ValueError(f"unknown side {text!r}") from None


@dataclass(frozen=True)
class SidedPoint:
    t: float
    side: Side = Side.TWO

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "side", Side.parse(self.side))


@dataclass(frozen=True)
class ProblemSpec:
    n: int
    t0: float
    t1: float
    x0: tuple[float, ...]
    x1: tuple[float, ...] | None  # None means a free right end
    integrand: IntegrandBundle = field(compare=False)

    def __post_init__(self):
        if not self.t0 < self.t1:
            raise SchemaError(f"need t0 < t1, got [{self.t0}, {self.t1}]")
        if len(self.x0) != self.n:
            raise SchemaError(f"x0 has length {len(self.x0)}, expected {self.n}")
        if self.x1 is not None and len(self.x1) != self.n:
            raise SchemaError(f"x1 has length {len(self.x1)}, expected {self.n}")
        if self.integrand.n != self.n:
            raise SchemaError("integrand dimension does not match n")

    @property
    def free_end(self) -> bool:
        return self.x1 is None


class PiecewisePath:
    """Closed-form segments on consecutive breakpoints.

    ``segments[k]`` holds one expression in ``t`` per component and lives on
    ``[breakpoints[k], breakpoints[k+1]]``.
    """

    def __init__(
        self,
        breakpoints: Sequence[float],
        segments: Sequence[Sequence[Expr]],
        angular_points: Iterable[float] = (),
        *,
        check: bool = True,
    ):
        self.breakpoints = tuple(float(s) for s in breakpoints)
        self.segments = tuple(tuple(seg) for seg in segments)
        self.angular_points = frozenset(float(a) for a in angular_points)
        if len(self.breakpoints) != len(self.segments) + 1 or not self.segments:
            raise SchemaError("need one more breakpoint than segments")
        if any(b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise SchemaError(f"breakpoints must increase: {self.breakpoints}")
        self.n = len(self.segments[0])
        if any(len(seg) != self.n for seg in self.segments):
            raise SchemaError("all segments need the same number of components")
        for seg in self.segments:
            for e in seg:
                if any(w.kind != "t" for w in variables(e)):
                    raise SchemaError(f"path component {e} may only depend on t")
        interior = set(self.breakpoints[1:-1])
        stray = self.angular_points - interior
        if stray:
            raise SchemaError(f"angular points {sorted(stray)} are not interior breakpoints")
        if check:
            self.validate()

    @property
    def t0(self) -> float:
        return self.breakpoints[0]

    @property
    def t1(self) -> float:
        return self.breakpoints[-1]

    @cached_property
    def _derivatives(self) -> tuple[tuple[tuple[Expr, ...], ...], ...]:
        out = []
        for seg in self.segments:
            orders = [tuple(seg)]
            for _ in range(3):
                orders.append(tuple(differentiate(e, T) for e in orders[-1]))
            out.append(tuple(orders))
        return tuple(out)

    def segment_expressions(self, k: int, order: int = 0) -> tuple[Expr, ...]:
        return self._derivatives[k][order]

    def segment_bounds(self, k: int) -> tuple[float, float]:
        return self.breakpoints[k], self.breakpoints[k + 1]

    def eval_segment(self, k: int, t, order: int = 0) -> np.ndarray:
        """Component values of segment ``k`` at ``t``; shape (n,) + shape(t)."""
        if not 0 <= order <= 3:
            raise ValueError("order must be 0..3")
        t = np.asarray(t, dtype=float)
        rows = [
            np.broadcast_to(np.asarray(compile_expression(e)(t, (), ()), dtype=float), t.shape)
            for e in self._derivatives[k][order]
        ]
        return np.stack(rows)

    def _snap(self, t: float) -> float:
        tol = 1e-12 * (self.t1 - self.t0)
        for s in self.breakpoints:
            if abs(t - s) <= tol:
                return s
        return t

    def segment_index(self, p: SidedPoint, order: int = 1) -> int:
        t = self._snap(p.t)
        if not self.t0 <= t <= self.t1:
            raise SideError(f"t={p.t} outside [{self.t0}, {self.t1}]")
        if p.side is Side.PLUS and t == self.t1:
            raise SideError("right-hand limit requested at the right end")
        if p.side is Side.MINUS and t == self.t0:
            raise SideError("left-hand limit requested at the left end")
        bps = self.breakpoints
        m = len(self.segments)
        if p.side is Side.MINUS:
            k = next(i for i in range(m) if bps[i] < t <= bps[i + 1])
            return k
        k = next((i for i in range(m) if bps[i] <= t < bps[i + 1]), m - 1)
        if p.side is Side.TWO and order >= 1 and t in self.angular_points:
            raise SideError(f"two-sided derivative requested at angular point {t}")
        return k

    def eval(self, p: SidedPoint, order: int = 0) -> np.ndarray:
        k = self.segment_index(p, order)
        return self.eval_segment(k, self._snap(p.t), order)

    def validate(self) -> None:
        for k in range(1, len(self.segments)):
            s = self.breakpoints[k]
            left = self.eval_segment(k - 1, s)
            right = self.eval_segment(k, s)
            gap = float(np.max(np.abs(left - right)))
            if gap > CONTINUITY_TOL:
                raise ContinuityError(f"path jumps by {gap:.3g} at breakpoint {s}")
            if s not in self.angular_points:
                dl = self.eval_segment(k - 1, s, 1)
                dr = self.eval_segment(k, s, 1)
                slope_gap = float(np.max(np.abs(dl - dr)))
                if slope_gap > SLOPE_TOL:
                    raise ContinuityError(
                        f"derivative jumps by {slope_gap:.3g} at undeclared corner {s}"
                    )


def path_eval(path: PiecewisePath, p: SidedPoint, order: int = 0) -> np.ndarray:
    return path.eval(p, order)


# -- loading --------------------------------------------------------------

_PROBLEM_KEYS = {"n", "t0", "t1", "x0", "x1", "lagrangian", "angular_points"}
_SEGMENT_KEYS = {"from", "to", "x"}


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{where} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise SchemaError(f"{where} must be finite")
    return float(value)


def _vector(value, n: int, where: str) -> tuple[float, ...]:
    if not isinstance(value, list) or len(value) != n:
        raise SchemaError(f"{where} must be a list of {n} numbers")
    return tuple(_number(a, f"{where}[{i}]") for i, a in enumerate(value))


def build_problem(data: dict) -> tuple[ProblemSpec, PiecewisePath]:
    """Validate a decoded problem document."""
    unknown = set(data) - {"problem", "segment"}
    if unknown:
        raise SchemaError(f"unknown top-level keys: {sorted(unknown)}")
    prob = data.get("problem")
    if not isinstance(prob, dict):
        raise SchemaError("missing [problem] table")
    unknown = set(prob) - _PROBLEM_KEYS
    if unknown:
        raise SchemaError(f"unknown keys in [problem]: {sorted(unknown)}")
    missing = {"n", "t0", "t1", "x0", "x1", "lagrangian"} - set(prob)
    if missing:
        raise SchemaError(f"missing keys in [problem]: {sorted(missing)}")
    n = prob["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise SchemaError("n must be a positive integer")
    t0 = _number(prob["t0"], "t0")
    t1 = _number(prob["t1"], "t1")
    x0 = _vector(prob["x0"], n, "x0")
    if prob["x1"] == "free":
        x1 = None
    else:
        x1 = _vector(prob["x1"], n, "x1")
    if not isinstance(prob["lagrangian"], str):
        raise SchemaError("lagrangian must be a string")
    try:
        bundle = IntegrandBundle(parse_expression(prob["lagrangian"], n), n)
    except ExpressionError as exc:
        raise SchemaError(f"lagrangian: {exc}") from exc
    spec = ProblemSpec(n, t0, t1, x0, x1, bundle)

    segs = data.get("segment")
    if not isinstance(segs, list) or not segs:
        raise SchemaError("need at least one [[segment]]")
    breakpoints = []
    exprs = []
    for j, seg in enumerate(segs):
        if not isinstance(seg, dict):
            raise SchemaError(f"segment {j} must be a table")
        unknown = set(seg) - _SEGMENT_KEYS
        if unknown:
            raise SchemaError(f"unknown keys in segment {j}: {sorted(unknown)}")
        if set(seg) != _SEGMENT_KEYS:
            raise SchemaError(f"segment {j} needs keys from, to, x")
        a = _number(seg["from"], f"segment {j} from")
        b = _number(seg["to"], f"segment {j} to")
        if breakpoints and a != breakpoints[-1]:
            raise SchemaError(f"segment {j} starts at {a}, previous ended at {breakpoints[-1]}")
        if not breakpoints:
            if a != t0:
                raise SchemaError(f"first segment must start at t0={t0}")
            breakpoints.append(a)
        breakpoints.append(b)
        comps = seg["x"]
        if not isinstance(comps, list) or len(comps) != n or not all(isinstance(c, str) for c in comps):
            raise SchemaError(f"segment {j} x must be a list of {n} strings")
        try:
            exprs.append(tuple(parse_expression(c, 0) for c in comps))
        except ExpressionError as exc:
            raise SchemaError(f"segment {j}: {exc}") from exc
    if breakpoints[-1] != t1:
        raise SchemaError(f"last segment must end at t1={t1}")
    angular = prob.get("angular_points", [])
    if not isinstance(angular, list):
        raise SchemaError("angular_points must be a list")
    angular = [_number(a, "angular point") for a in angular]
    path = PiecewisePath(breakpoints, exprs, angular)
    check_boundary(spec, path)
    return spec, path


def check_boundary(spec: ProblemSpec, path: PiecewisePath) -> None:
    if path.n != spec.n or path.t0 != spec.t0 or path.t1 != spec.t1:
        raise BoundaryError("path does not match the problem's interval or dimension")
    start = path.eval(SidedPoint(spec.t0, Side.PLUS))
    gap = float(np.max(np.abs(start - np.asarray(spec.x0))))
    if gap > BOUNDARY_TOL:
        raise BoundaryError(f"path misses x0 by {gap:.3g}")
    if spec.x1 is not None:
        end = path.eval(SidedPoint(spec.t1, Side.MINUS))
        gap = float(np.max(np.abs(end - np.asarray(spec.x1))))
        if gap > BOUNDARY_TOL:
            raise BoundaryError(f"path misses x1 by {gap:.3g}")


def parse_problem(text: str) -> tuple[ProblemSpec, PiecewisePath]:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise SchemaError(f"malformed problem file: {exc}") from exc
    return build_problem(data)


def load_problem(document: "str | Path") -> tuple[ProblemSpec, PiecewisePath]:
    """Load a problem file from disk."""
    return parse_problem(Path(document).read_text(encoding="utf-8"))


# -- classical checks -----------------------------------------------------


def _state(path: PiecewisePath, p: SidedPoint, order: int):
    k = path.segment_index(p, order)
    t = path._snap(p.t)
    return t, [path.eval_segment(k, t, j) for j in range(order + 1)]


def euler_residual(spec: ProblemSpec, path: PiecewisePath, p: SidedPoint) -> np.ndarray:
    """d/dt L_v - L_x along the path, with the time derivative by chain rule."""
    t, (xb, vb, ab) = _state(path, p, 2)
    b = spec.integrand
    L_vt = b.numeric("L_vt", t, xb, vb)
    L_vx = b.numeric("L_vx", t, xb, vb)
    L_vv = b.numeric("L_vv", t, xb, vb)
    L_x = b.numeric("L_x", t, xb, vb)
    return L_vt + L_vx @ vb + L_vv @ ab - L_x


def _momentum_energy(spec: ProblemSpec, path: PiecewisePath, p: SidedPoint):
    t, (xb, vb) = _state(path, p, 1)
    b = spec.integrand
    L = float(b.numeric("L", t, xb, vb))
    L_v = b.numeric("L_v", t, xb, vb)
    return L_v, L - float(vb @ L_v), b.numeric("L_x", t, xb, vb)


def _require_angular(path: PiecewisePath, tau: float) -> float:
    tau = path._snap(float(tau))
    if tau not in path.angular_points:
        raise SideError(f"{tau} is not a declared angular point")
    return tau


def erdmann_gaps(spec: ProblemSpec, path: PiecewisePath, tau: float) -> tuple[np.ndarray, float]:
    """Jumps of L_v and of L - v.L_v across a corner (right minus left)."""
    tau = _require_angular(path, tau)
    pr, er, _ = _momentum_energy(spec, path, SidedPoint(tau, Side.PLUS))
    pl, el, _ = _momentum_energy(spec, path, SidedPoint(tau, Side.MINUS))
    return pr - pl, er - el


def lx_gap(spec: ProblemSpec, path: PiecewisePath, tau: float) -> np.ndarray:
    """Jump of L_x across a corner, for comparison with the momentum jump."""
    tau = _require_angular(path, tau)
    _, _, right = _momentum_energy(spec, path, SidedPoint(tau, Side.PLUS))
    _, _, left = _momentum_energy(spec, path, SidedPoint(tau, Side.MINUS))
    return right - left


def segment_integrand(spec: ProblemSpec, path: PiecewisePath, k: int):
    b = spec.integrand
    f = compile_expression(b.L)

    def g(t):
        xs = path.eval_segment(k, t, 0)
        vs = path.eval_segment(k, t, 1)
        return np.broadcast_to(np.asarray(f(t, xs, vs), dtype=float), np.shape(t))

    return g


def functional_value(spec: ProblemSpec, path: PiecewisePath, tol: float = 1e-10) -> float:
    """J along the path, integrated segment by segment."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = len(path.segments)
    total = 0.0
    for k in range(m):
        a, b = path.segment_bounds(k)
        value, _ = integrate(segment_integrand(spec, path, k), a, b, tol / m)
        total += value
    return total
