"""Pointwise functionals along a candidate path.

Every quantity is evaluated at ``(t, xbar(t), vbar(t) + xi)`` where ``xbar`` and
``vbar`` come from the path segment selected by the sided point. Time
derivatives are taken along the path with ``xi`` and ``lambda`` held fixed.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .problem import PiecewisePath, ProblemSpec, Side, SidedPoint, SideError

LAMBDA_CAP = 1.0 - 1e-6
FD_STEP_ORDER1 = 1e-4
FD_STEP_ORDER2 = 1e-3


class MeshError(SideError):
    pass


def companion_factor(lam: float) -> float:
    """lambda / (lambda - 1), the slope ratio on the second bump piece."""
    lam = min(float(lam), LAMBDA_CAP)
    return lam / (lam - 1.0)


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"lambda must lie in [0, 1), got {lam}")
    return min(lam, LAMBDA_CAP)


class _Point:
    """Path state at a sided point, with cached base values of L's partials."""

    __slots__ = ("spec", "t", "xb", "vb", "_cache")

    def __init__(self, spec: ProblemSpec, path: PiecewisePath, p: SidedPoint, order: int = 1):
        k = path.segment_index(p, order)
        self.spec = spec
        self.t = path._snap(p.t)
        self.xb = path.eval_segment(k, self.t, 0)
        self.vb = path.eval_segment(k, self.t, 1)
        self._cache = {}

    def base(self, name: str) -> np.ndarray:
        if name not in self._cache:
            self._cache[name] = self.spec.integrand.numeric(name, self.t, self.xb, self.vb)
        return self._cache[name]

    def shifted(self, name: str, xi: np.ndarray) -> np.ndarray:
        return self.spec.integrand.numeric(name, self.t, self.xb, self.vb + xi)


_CACHE_LIMIT = 50000


def _point(spec: ProblemSpec, path: PiecewisePath, p: SidedPoint) -> _Point:
    """Cached path state; scans revisit the same mesh points many times."""
    cache = path.__dict__.setdefault("_point_cache", {})
    key = (id(spec.integrand), p.t, p.side)
    pt = cache.get(key)
    if pt is None or pt.spec is not spec:
        if len(cache) > _CACHE_LIMIT:
            cache.clear()
        pt = cache[key] = _Point(spec, path, p)
    return pt


def _xi(spec: ProblemSpec, xi) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(xi, dtype=float))
    if arr.shape != (spec.n,):
        raise ValueError(f"direction must have length {spec.n}, got shape {arr.shape}")
    return arr


def _excess(pt: _Point, xi: np.ndarray) -> float:
    return float(pt.shifted("L", xi) - pt.base("L") - pt.base("L_v") @ xi)


def _delta_lx(pt: _Point, xi: np.ndarray) -> np.ndarray:
    return pt.shifted("L_x", xi) - pt.base("L_x")


def excess(spec: ProblemSpec, path: PiecewisePath, p: SidedPoint, xi) -> float:
    """Weierstrass excess E(t, xi)."""
    return _excess(_point(spec, path, p), _xi(spec, xi))


def legendre_form(spec: ProblemSpec, path: PiecewisePath, p: SidedPoint, xi) -> float:
    xi = _xi(spec, xi)
    return float(xi @ _point(spec, path, p).base("L_vv") @ xi)


def delta_Lx(spec: ProblemSpec, path: PiecewisePath, p: SidedPoint, xi) -> np.ndarray:
    return _delta_lx(_point(spec, path, p), _xi(spec, xi))


def cubic_form(spec: ProblemSpec, path: PiecewisePath, p: SidedPoint, xi) -> float:
    """Directional derivative of the Legendre form along xi: sum L_vvv xi xi xi."""
    xi = _xi(spec, xi)
    T3 = _point(spec, path, p).base("L_vvv")
    return float(np.einsum("ijk,i,j,k->", T3, xi, xi, xi))


def _q(pt: _Point, lam: float, xi: np.ndarray, i: int) -> float:
    s = companion_factor(lam) if lam > 0 else 0.0
    li = lam**i
    return li * _excess(pt, xi) + (1.0 - li) * _excess(pt, s * xi)


def _m(pt: _Point, lam: float, xi: np.ndarray, i: int) -> float:
    s = companion_factor(lam) if lam > 0 else 0.0
    first = lam**i * float(_delta_lx(pt, xi) @ xi)
    second = (1.0 - lam) * (0.5 + lam) ** (i - 1) * float(_delta_lx(pt, s * xi) @ xi)
    return first + second


def q_form(spec, path, p: SidedPoint, lam: float, xi, i: int) -> float:
    """lambda^i E(xi) + (1 - lambda^i) E(lambda/(lambda-1) xi)."""
    if i not in (1, 2, 3):
        raise ValueError("i must be 1, 2 or 3")
    return _q(_point(spec, path, p), _check_lambda(lam), _xi(spec, xi), i)


def m_form(spec, path, p: SidedPoint, lam: float, xi, i: int) -> float:
    if i not in (1, 2):
        raise ValueError("i must be 1 or 2")
    return _m(_point(spec, path, p), _check_lambda(lam), _xi(spec, xi), i)


# -- finite differences ---------------------------------------------------

# Stencils as (offset multiples, weights) with the leading error powers that
# Richardson extrapolation removes.
_ONE_SIDED = {
    1: ((0, 1, 2), (-1.5, 2.0, -0.5), (2, 3)),
    2: ((0, 1, 2, 3), (2.0, -5.0, 4.0, -1.0), (2, 3)),
}
_CENTRAL = {
    1: ((-1, 1), (-0.5, 0.5), (2, 4)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0), (2, 4)),
}


def default_step(path: PiecewisePath, p: SidedPoint, order: int) -> float:
    k = path.segment_index(p, 1 if p.side is not Side.TWO else 0)
    a, b = path.segment_bounds(k)
    return (FD_STEP_ORDER1 if order == 1 else FD_STEP_ORDER2) * (b - a)


def _window(path: PiecewisePath, p: SidedPoint) -> tuple[float, float]:
    """Interval the difference mesh must stay inside."""
    if p.side is not Side.TWO:
        k = path.segment_index(p, 1)
        return path.segment_bounds(k)
    t = path._snap(p.t)
    lo, hi = path.t0, path.t1
    for a in path.angular_points:
        if a < t:
            lo = max(lo, a)
        elif a > t:
            hi = min(hi, a)
    return lo, hi


def time_derivative(
    f: Callable[[SidedPoint], float],
    p: SidedPoint,
    order: int = 1,
    step: float | None = None,
    path: PiecewisePath | None = None,
) -> float:
    """Finite-difference d/dt or d2/dt2 of a scalar field along the path.

    One-sided stencils are used for Plus and Minus points, central ones for
    two-sided points; the base step is halved twice and the results combined
    by Richardson extrapolation. With ``path`` given, the mesh is checked to
    stay inside the relevant smooth piece and the step defaults to a fixed
    fraction of the segment length.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if step is None:
        if path is None:
            raise ValueError("step is required when no path is given")
        step = default_step(path, p, order)
    if not step > 0:
        raise ValueError("step must be positive")
    t = p.t if path is None else path._snap(p.t)
    if p.side is Side.TWO:
        offsets, weights, powers = _CENTRAL[order]
        sign = 1.0
    else:
        offsets, weights, powers = _ONE_SIDED[order]
        sign = 1.0 if p.side is Side.PLUS else -1.0
    if path is not None:
        lo, hi = _window(path, p)
        reach = max(abs(o) for o in offsets) * step
        if p.side is Side.PLUS and t + reach > hi:
            raise MeshError(f"difference mesh [{t}, {t + reach}] leaves the segment ending at {hi}")
        if p.side is Side.MINUS and t - reach < lo:
            raise MeshError(f"difference mesh [{t - reach}, {t}] leaves the segment starting at {lo}")
        if p.side is Side.TWO and (t - reach < lo or t + reach > hi):
            raise MeshError(f"central mesh around {t} leaves the smooth piece [{lo}, {hi}]")

    cache: dict[float, float] = {}

    def sample(offset: float) -> float:
        if offset not in cache:
            q = p if offset == 0 else SidedPoint(t + offset, p.side)
            val = float(f(q))
            if not np.isfinite(val):
                raise MeshError(f"non-finite sample at t={t + offset}")
            cache[offset] = val
        return cache[offset]

    def estimate(h: float) -> float:
        total = sum(w * sample(sign * o * h) for o, w in zip(offsets, weights))
        # One-sided odd-order stencils flip sign on the left.
        return total / h**order * (sign if order == 1 else 1.0)

    table = [estimate(step / 2**j) for j in range(3)]
    for power in powers:
        r = 2.0**power
        table = [(r * table[j + 1] - table[j]) / (r - 1.0) for j in range(len(table) - 1)]
    return table[0]


def _field(spec, path, fn) -> Callable[[SidedPoint], float]:
    return lambda q: fn(_point(spec, path, q))


def w_form(spec, path, p: SidedPoint, lam: float, xi, step: float | None = None) -> float:
    """lambda M1 + d/dt Q2."""
    lam = _check_lambda(lam)
    xi = _xi(spec, xi)
    pt = _point(spec, path, p)
    dq2 = time_derivative(_field(spec, path, lambda q: _q(q, lam, xi, 2)), p, 1, step, path)
    return lam * _m(pt, lam, xi, 1) + dq2


def lxx_combination(spec, path, p: SidedPoint, lam: float, xi) -> float:
    """xi^T [lambda L_xx(xi) + (1 - lambda) L_xx(lambda/(lambda-1) xi)] xi."""
    lam = _check_lambda(lam)
    xi = _xi(spec, xi)
    pt = _point(spec, path, p)
    s = companion_factor(lam) if lam > 0 else 0.0
    mix = lam * pt.shifted("L_xx", xi) + (1.0 - lam) * pt.shifted("L_xx", s * xi)
    return float(xi @ mix @ xi)


def g_form(spec, path, p: SidedPoint, lam: float, xi, step: float | None = None) -> float:
    """lambda^2 xi^T[...]xi + 2 lambda d/dt M2 + d2/dt2 Q3."""
    lam = _check_lambda(lam)
    xi = _xi(spec, xi)
    curv = lxx_combination(spec, path, p, lam, xi)
    dm2 = time_derivative(_field(spec, path, lambda q: _m(q, lam, xi, 2)), p, 1, step, path)
    d2q3 = time_derivative(_field(spec, path, lambda q: _q(q, lam, xi, 3)), p, 2, step, path)
    return lam**2 * curv + 2.0 * lam * dm2 + d2q3


def k_bracket(spec, path, p: SidedPoint, xi) -> float:
    """xi^T [L_x(xi) - L_x - L_xv xi]."""
    xi = _xi(spec, xi)
    pt = _point(spec, path, p)
    return float(xi @ (_delta_lx(pt, xi) - pt.base("L_xv") @ xi))


def k_parts(spec, path, p: SidedPoint, xi, step: float | None = None) -> tuple[float, float, float]:
    """(bracket, d/dt E, d/dt Legendre form) at p."""
    xi = _xi(spec, xi)
    bracket = k_bracket(spec, path, p, xi)
    dE = time_derivative(_field(spec, path, lambda q: _excess(q, xi)), p, 1, step, path)
    dA = time_derivative(
        _field(spec, path, lambda q: float(xi @ q.base("L_vv") @ xi)), p, 1, step, path
    )
    return bracket, dE, dA


def k_value(spec, path, p: SidedPoint, epsilon: float, xi, step: float | None = None) -> float:
    """K for epsilon in [0, 1); epsilon = 0 gives the limiting combination."""
    if not 0.0 <= epsilon < 1.0:
        raise ValueError("epsilon must lie in [0, 1)")
    bracket, dE, dA = k_parts(spec, path, p, xi, step)
    return bracket + dE + (1.0 + epsilon) / (2.0 * (1.0 - epsilon)) * dA


def k_form(spec, path, p: SidedPoint, epsilon: float, xi, step: float | None = None) -> float:
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    return k_value(spec, path, p, epsilon, xi, step)


def as_points(ts: Sequence[float], side: Side) -> list[SidedPoint]:
    return [SidedPoint(t, side) for t in ts]
