"""Brute-force needle variations and expansion fitting.

The oracle perturbs the candidate path by an exact piecewise-linear bump,
integrates the change in J, and fits the result against powers of epsilon.
Comparing the fitted coefficients with the closed-form functionals in
:mod:`artifact.conditions` checks both sides independently.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import conditions as C
from .expression import T, add, compile_expression, const, mul, sub
from .problem import PiecewisePath, ProblemSpec, Side, SidedPoint, SideError
from .quadrature import integrate

SPECIAL = "epsilon"  # lambda tied to epsilon
SPECIAL_EPS_CAP = 0.5
DEFAULT_LADDER = tuple(2.0**-k for k in range(3, 11))
DEFAULT_TOLERANCES = {1: ("abs", 1e-6), 2: ("abs", 1e-4), 3: ("rel", 1e-2), 4: ("rel", 1e-2)}
PROP_POWERS = {"2.1": (1, 2, 3), "2.2": (1, 2), "2.3": (2, 3, 4)}


class GeometryError(SideError):
    pass


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class VariationParams:
    theta: float
    lam: float | str
    xi: tuple[float, ...]
    side: Side = Side.PLUS
    epsilon: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "xi", tuple(float(a) for a in np.atleast_1d(self.xi)))
        side = Side.parse(self.side)
        if side is Side.TWO:
            raise ValueError("variations are one-sided")
        object.__setattr__(self, "side", side)
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.special:
            if not self.epsilon < 1:
                raise ValueError("epsilon must be below 1 when lambda equals epsilon")
        else:
            lam = float(self.lam)
            if not 0.0 <= lam < 1.0:
                raise ValueError(f"lambda must lie in [0, 1), got {lam}")
            object.__setattr__(self, "lam", min(lam, C.LAMBDA_CAP))

    @property
    def special(self) -> bool:
        return isinstance(self.lam, str)

    @property
    def effective_lambda(self) -> float:
        return min(self.epsilon, C.LAMBDA_CAP) if self.special else float(self.lam)

    def with_epsilon(self, epsilon: float) -> "VariationParams":
        return replace(self, epsilon=float(epsilon))


def _host_segment(path: PiecewisePath, vp: VariationParams) -> int:
    """Index of the smooth segment the bump must fit inside."""
    k = path.segment_index(SidedPoint(vp.theta, vp.side), 1)
    a, b = path.segment_bounds(k)
    if vp.side is Side.PLUS and vp.theta + vp.epsilon > b:
        raise GeometryError(f"bump [{vp.theta}, {vp.theta + vp.epsilon}] leaves segment [{a}, {b}]")
    if vp.side is Side.MINUS and vp.theta - vp.epsilon < a:
        raise GeometryError(f"bump [{vp.theta - vp.epsilon}, {vp.theta}] leaves segment [{a}, {b}]")
    return k


def bump_pieces(vp: VariationParams) -> list[tuple[float, float, float, float]]:
    """(start, end, slope factor, anchor) with h = factor * xi * (t - anchor)."""
    th, eps = vp.theta, vp.epsilon
    lam = vp.effective_lambda
    s = C.companion_factor(lam) if lam > 0 else 0.0
    if vp.side is Side.PLUS:
        mid, end = th + lam * eps, th + eps
        pieces = [(th, mid, 1.0, th), (mid, end, s, end)]
    else:
        mid, end = th - lam * eps, th - eps
        pieces = [(end, mid, s, end), (mid, th, 1.0, th)]
    return [pc for pc in pieces if pc[1] > pc[0]]


def bump(vp: VariationParams, t) -> np.ndarray:
    """h(t) evaluated directly, shape (n,) + shape(t)."""
    t = np.asarray(t, dtype=float)
    xi = np.asarray(vp.xi)
    out = np.zeros((len(xi),) + t.shape)
    for a, b, factor, anchor in bump_pieces(vp):
        mask = (t >= a) & (t <= b)
        out[:, mask] = factor * np.outer(xi, t[mask] - anchor)
    return out


def build_variation(path: PiecewisePath, vp: VariationParams) -> PiecewisePath:
    """The path plus the needle bump, as a new piecewise path."""
    if len(vp.xi) != path.n:
        raise ValueError(f"xi must have length {path.n}")
    k = _host_segment(path, vp)
    pieces = bump_pieces(vp)
    cuts = {s for a, b, *_ in pieces for s in (a, b)}
    bps = sorted(set(path.breakpoints) | cuts)
    segments = []
    for lo, hi in zip(bps, bps[1:]):
        j = next(i for i in range(len(path.segments)) if path.breakpoints[i] <= lo < path.breakpoints[i + 1])
        exprs = path.segment_expressions(j)
        piece = next((pc for pc in pieces if pc[0] <= lo and hi <= pc[1]), None)
        if piece is not None and j == k:
            _, _, factor, anchor = piece
            exprs = tuple(
                add(e, mul(const(factor * c), sub(T, const(anchor)))) if c != 0.0 else e
                for e, c in zip(exprs, vp.xi)
            )
        segments.append(exprs)
    angular = set(path.angular_points) | {s for s in cuts if path.t0 < s < path.t1}
    return PiecewisePath(bps, segments, angular)


def increment(spec: ProblemSpec, path: PiecewisePath, vp: VariationParams, tol: float = 1e-10) -> float:
    """J(varied) - J(original), integrating only over the bump support."""
    varied = build_variation(path, vp)
    k = _host_segment(path, vp)
    f = compile_expression(spec.integrand.L)
    pieces = bump_pieces(vp)
    total = 0.0
    for a, b, *_ in pieces:
        j = next(i for i in range(len(varied.segments)) if varied.breakpoints[i] <= a < varied.breakpoints[i + 1])

        def g(t, j=j):
            new = f(t, varied.eval_segment(j, t, 0), varied.eval_segment(j, t, 1))
            old = f(t, path.eval_segment(k, t, 0), path.eval_segment(k, t, 1))
            return np.asarray(new, dtype=float) - old

        value, _ = integrate(g, a, b, tol / len(pieces))
        total += value
    return total


# -- fitting --------------------------------------------------------------------


@dataclass
class ExpansionFit:
    powers: list[int]
    coefficients: list[float]
    residual: float
    epsilons: list[float]
    increments: list[float]
    condition_number: float
    guard_powers: list[int] = field(default_factory=list)
    guard_coefficients: list[float] = field(default_factory=list)


def epsilon_max(path: PiecewisePath, vp: VariationParams) -> float:
    k = path.segment_index(SidedPoint(vp.theta, vp.side), 1)
    a, b = path.segment_bounds(k)
    dist = (b - vp.theta) if vp.side is Side.PLUS else (vp.theta - a)
    emax = 0.9 * dist
    if vp.special:
        emax = min(emax, SPECIAL_EPS_CAP)
    return emax


def default_epsilons(path: PiecewisePath, vp: VariationParams) -> list[float]:
    emax = epsilon_max(path, vp)
    return [r * emax for r in DEFAULT_LADDER]


def fit_expansion(
    spec: ProblemSpec,
    path: PiecewisePath,
    template: VariationParams,
    powers: Sequence[int],
    epsilons: Sequence[float] | None = None,
    guard: int = 1,
    tol: float = 1e-10,
    workers: int = 1,
) -> ExpansionFit:
    """Weighted least-squares fit of the increment against powers of epsilon.

    ``guard`` extra higher powers absorb the leading remainder term and are
    reported separately; rows are scaled by epsilon^-min(powers) so every
    sample carries comparable weight.
    """
    powers = sorted(int(k) for k in powers)
    if epsilons is None:
        epsilons = default_epsilons(path, template)
    eps = np.asarray(sorted((float(e) for e in epsilons), reverse=True))
    full = powers + [powers[-1] + j for j in range(1, guard + 1)]
    if len(eps) < 2 * len(full):
        raise FitError(f"need at least {2 * len(full)} epsilons, got {len(eps)}")
    def run(e):
        return increment(spec, path, template.with_epsilon(e), tol)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            dj = np.array(list(pool.map(run, eps)))
    else:
        dj = np.array([run(e) for e in eps])
    ref = float(eps[0])
    u = eps / ref
    weight = eps ** -powers[0]
    A = np.stack([u**k for k in full], axis=1) * (ref ** powers[0] * weight)[:, None]
    y = dj * weight
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > 1e12:
        raise FitError(f"ill-conditioned fit (condition number {cond:.3g})")
    sol, *_ = np.linalg.lstsq(A, y, rcond=None)
    coeffs = [float(c / ref ** (k - powers[0])) for c, k in zip(sol, full)]
    main = coeffs[: len(powers)]
    model = sum(c * eps**k for c, k in zip(main, powers))
    residual = float(np.max(np.abs(dj - model) / eps ** powers[-1]))
    return ExpansionFit(
        powers=powers, coefficients=main, residual=residual, epsilons=[float(e) for e in eps],
        increments=[float(d) for d in dj], condition_number=cond,
        guard_powers=full[len(powers):], guard_coefficients=coeffs[len(powers):],
    )


# -- propositions ---------------------------------------------------------------


@dataclass
class CoefficientCheck:
    power: int
    predicted: float
    fitted: float
    abs_dev: float
    rel_dev: float
    kind: str
    tolerance: float
    passed: bool


@dataclass
class PropositionReport:
    prop: str
    side: Side
    theta: float
    lam: float | str
    xi: tuple[float, ...]
    checks: list[CoefficientCheck]
    fit: ExpansionFit

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "proposition": self.prop,
            "side": self.side.value,
            "theta": self.theta,
            "lambda": self.lam,
            "xi": list(self.xi),
            "passed": self.passed,
            "coefficients": [c.__dict__.copy() for c in self.checks],
            "fit": {
                "powers": self.fit.powers,
                "residual": self.fit.residual,
                "condition_number": self.fit.condition_number,
                "epsilons": self.fit.epsilons,
                "increments": self.fit.increments,
            },
        }


def predicted_coefficients(
    spec: ProblemSpec, path: PiecewisePath, template: VariationParams, prop: str, step: float | None = None
) -> list[float]:
    """Closed-form expansion coefficients for the requested proposition."""
    p = SidedPoint(template.theta, template.side)
    xi = np.asarray(template.xi)
    sign = 1.0 if template.side is Side.PLUS else -1.0
    if prop in ("2.1", "2.2"):
        if template.special:
            raise ValueError(f"proposition {prop} needs a fixed lambda")
        lam = float(template.lam)
        out = [C.q_form(spec, path, p, lam, xi, 1), sign * 0.5 * C.w_form(spec, path, p, lam, xi, step)]
        if prop == "2.1":
            out.append(C.g_form(spec, path, p, lam, xi, step) / 6.0)
        return out
    if prop == "2.3":
        e = C.excess(spec, path, p, xi)
        a = C.legendre_form(spec, path, p, xi)
        b = C.cubic_form(spec, path, p, xi)
        k0 = C.k_value(spec, path, p, 0.0, xi, step)
        # eps^3 a / (2(1 - eps)) also feeds eps^4 with a / 2.
        c4 = 0.5 * (k0 - b / 3.0) if template.side is Side.PLUS else -0.5 * (k0 + b / 3.0)
        return [e, 0.5 * a, c4 + 0.5 * a]
    raise ValueError(f"unknown proposition {prop!r}")


def verify_proposition(
    spec: ProblemSpec,
    path: PiecewisePath,
    template: VariationParams,
    prop: str,
    tolerances: dict | None = None,
    epsilons: Sequence[float] | None = None,
    step: float | None = None,
    tol: float = 1e-10,
    workers: int = 1,
) -> PropositionReport:
    prop = str(prop)
    if prop not in PROP_POWERS:
        raise ValueError(f"unknown proposition {prop!r}")
    if prop == "2.3" and not template.special:
        template = replace(template, lam=SPECIAL)
    tols = dict(DEFAULT_TOLERANCES)
    tols.update(tolerances or {})
    powers = PROP_POWERS[prop]
    predicted = predicted_coefficients(spec, path, template, prop, step)
    fit = fit_expansion(spec, path, template, powers, epsilons, tol=tol, workers=workers)
    checks = []
    for k, pred, got in zip(powers, predicted, fit.coefficients):
        kind, tol = tols[k]
        dev = abs(got - pred)
        rel = dev / max(abs(pred), 1.0)
        measured = dev if kind == "abs" else rel
        checks.append(CoefficientCheck(k, pred, got, dev, rel, kind, tol, measured <= tol))
    return PropositionReport(prop, template.side, template.theta, template.lam, template.xi, checks, fit)
