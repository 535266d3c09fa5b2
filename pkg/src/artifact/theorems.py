"""Verdicts for the degenerate-case necessary conditions.

Each check first confirms that its degeneration hypotheses hold within
tolerance and only then evaluates the conclusion. A failed conclusion rules
the candidate out; a passed one never certifies a minimum.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import conditions as C
from .problem import PiecewisePath, ProblemSpec, Side, SidedPoint, SideError


class Mode(Enum):
    STRONG = "strong"
    WEAK = "weak"


class Verdict(Enum):
    VIOLATED = "Violated"
    SATISFIED = "Satisfied"
    NOT_APPLICABLE = "NotApplicable"

    @property
    def message(self) -> str:
        return {
            "Violated": "necessary condition fails: not a local minimum",
            "Satisfied": "inconclusive, candidate retained",
            "NotApplicable": "degeneration hypotheses do not hold",
        }[self.value]


@dataclass(frozen=True)
class DegenerationQuery:
    eta: tuple[float, ...]
    lambda_bar: float | None = None
    point: SidedPoint | None = None
    interval: tuple[float, float] | None = None
    tolerance: float = 1e-9
    fd_tolerance: float = 1e-6
    step: float | None = None
    assume_hypotheses: bool = False

    def __post_init__(self):
        eta = tuple(float(a) for a in np.atleast_1d(self.eta))
        object.__setattr__(self, "eta", eta)
        if not any(eta):
            raise ValueError("eta must be non-zero")
        if self.lambda_bar is not None:
            lam = float(self.lambda_bar)
            if not 0.0 < lam < 1.0:
                raise ValueError(f"lambda_bar must lie in (0, 1), got {lam}")
            object.__setattr__(self, "lambda_bar", min(lam, C.LAMBDA_CAP))
        if (self.point is None) == (self.interval is None):
            raise ValueError("give exactly one of point or interval")
        if self.interval is not None:
            a, b = (float(s) for s in self.interval)
            if not a < b:
                raise ValueError("interval must have t0 < t1")
            object.__setattr__(self, "interval", (a, b))
        if self.tolerance <= 0 or self.fd_tolerance <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class ScanConfig:
    delta: float = 1.0
    grid: int = 21
    lambda_grid: int | tuple[float, ...] = 21
    zero_tol: float = 1e-9

    def __post_init__(self):
        if not self.delta > 0 or not self.zero_tol > 0:
            raise ValueError("delta and zero_tol must be positive")
        if self.grid < 3:
            raise ValueError("grid needs at least 3 samples per dimension")
        if isinstance(self.lambda_grid, int):
            if self.lambda_grid < 1:
                raise ValueError("lambda_grid must be positive")
        else:
            lams = tuple(float(a) for a in self.lambda_grid)
            if not lams or not all(0.0 < a < 1.0 for a in lams):
                raise ValueError("lambda_grid values must lie in (0, 1)")
            object.__setattr__(self, "lambda_grid", lams)

    def lambdas(self) -> list[float]:
        if isinstance(self.lambda_grid, int):
            m = self.lambda_grid
            return [k / (m + 1) for k in range(1, m + 1)]
        return list(self.lambda_grid)

    def etas(self, n: int) -> list[np.ndarray]:
        """Non-zero grid points of the closed ball, then the ball's boundary."""
        d = self.delta
        axis = np.linspace(-d, d, self.grid)
        axis[np.abs(axis) < 1e-15 * d] = 0.0
        inner, shell, seen = [], [], set()
        for combo in itertools.product(axis, repeat=n):
            e = np.array(combo)
            r = float(np.linalg.norm(e))
            if r == 0.0:
                continue
            if r <= d * (1 + 1e-12):
                key = tuple(np.round(e / d, 12))
                if key not in seen:
                    seen.add(key)
                    inner.append(e)
            if n > 1 and max(abs(c) for c in combo) == d:
                b = e * (d / r)
                key = tuple(np.round(b / d, 12))
                if key not in seen:
                    seen.add(key)
                    shell.append(b)
        return inner + shell


@dataclass
class Evidence:
    quantity: str
    value: float
    tolerance: float
    holds: bool


@dataclass
class ConditionReport:
    theorem: str
    part: str
    mode: Mode
    verdict: Verdict
    condition: str
    relation: str
    tested_value: float | None
    evidence: list[Evidence]
    samples: list[dict]
    witness: dict | None
    tolerances: dict
    notes: list[str] = field(default_factory=list)

    @property
    def label(self) -> str:
        return f"{self.theorem}{self.part}"

    def to_dict(self) -> dict:
        return {
            "theorem": self.label,
            "mode": self.mode.value,
            "verdict": self.verdict.value,
            "message": self.verdict.message,
            "condition": self.condition,
            "relation": self.relation,
            "tested_value": self.tested_value,
            "evidence": [e.__dict__.copy() for e in self.evidence],
            "samples": self.samples,
            "witness": self.witness,
            "tolerances": self.tolerances,
            "notes": self.notes,
        }


# -- catalogue --------------------------------------------------------------


@dataclass(frozen=True)
class _Ctx:
    spec: ProblemSpec
    path: PiecewisePath
    p: SidedPoint
    eta: np.ndarray
    lam: float | None
    step: float | None


# (name, value, via finite differences)
Quantity = tuple[str, float, bool]


def _pair_hyp(c: _Ctx) -> list[Quantity]:
    s = C.companion_factor(c.lam)
    return [
        ("excess at eta", C.excess(c.spec, c.path, c.p, c.eta), False),
        ("excess at companion", C.excess(c.spec, c.path, c.p, s * c.eta), False),
    ]


def _pair_w_hyp(c: _Ctx) -> list[Quantity]:
    return _pair_hyp(c) + [("W", C.w_form(c.spec, c.path, c.p, c.lam, c.eta, c.step), True)]


def _legendre_hyp(c: _Ctx) -> list[Quantity]:
    return [("Legendre form", C.legendre_form(c.spec, c.path, c.p, c.eta), False)]


def _excess_legendre_hyp(c: _Ctx) -> list[Quantity]:
    return [("excess at eta", C.excess(c.spec, c.path, c.p, c.eta), False)] + _legendre_hyp(c)


def _w(c: _Ctx) -> tuple[float, bool]:
    return C.w_form(c.spec, c.path, c.p, c.lam, c.eta, c.step), True


def _mixed_lx(c: _Ctx) -> tuple[float, bool]:
    s = C.companion_factor(c.lam)
    a = float(C.delta_Lx(c.spec, c.path, c.p, c.eta) @ c.eta)
    b = float(C.delta_Lx(c.spec, c.path, c.p, s * c.eta) @ c.eta)
    return c.lam * a + (1.0 - c.lam) * b, False


def _g(c: _Ctx) -> tuple[float, bool]:
    return C.g_form(c.spec, c.path, c.p, c.lam, c.eta, c.step), True


def _cubic(c: _Ctx) -> tuple[float, bool]:
    return C.cubic_form(c.spec, c.path, c.p, c.eta), False


def _k_limit(c: _Ctx) -> tuple[float, bool]:
    bracket, dE, dA = C.k_parts(c.spec, c.path, c.p, c.eta, c.step)
    return bracket + dE + 0.5 * dA, True


def _bracket(c: _Ctx) -> tuple[float, bool]:
    return C.k_bracket(c.spec, c.path, c.p, c.eta), False


def _curvature(c: _Ctx) -> tuple[float, bool]:
    eta = c.eta
    curv = C.lxx_combination(c.spec, c.path, c.p, c.lam, eta)
    drift = C.time_derivative(
        lambda q: float(C.delta_Lx(c.spec, c.path, q, eta) @ eta), c.p, 1, c.step, c.path
    )
    return curv - drift, True


@dataclass(frozen=True)
class _Case:
    theorem: str
    part: str
    condition: str
    relation: str  # "eq", "ge", "le", or "side" (ge on Plus, le on Minus)
    sidedness: str  # "one", "two" or "any"
    uses_lambda: bool
    hypotheses: Callable[[_Ctx], list[Quantity]]
    conclusion: Callable[[_Ctx], tuple[float, bool]]


_CASES = {
    ("3.1", "(i)"): _Case("3.1", "(i)", "lambda M1 + dQ2/dt", "side", "one", True, _pair_hyp, _w),
    ("3.1", "(ii)"): _Case("3.1", "(ii)", "mixed L_x increment", "eq", "two", True, _pair_hyp, _mixed_lx),
    ("3.2", "(i)"): _Case("3.2", "(i)", "G", "ge", "one", True, _pair_w_hyp, _g),
    ("3.2", "(ii)"): _Case("3.2", "(ii)", "G", "ge", "two", True, _pair_hyp, _g),
    ("3.3", "(i)"): _Case("3.3", "(i)", "cubic velocity form", "eq", "any", False, _legendre_hyp, _cubic),
    ("3.3", "(ii)"): _Case(
        "3.3", "(ii)", "bracket + dE/dt + (1/2) d/dt Legendre form", "side", "one", False,
        _excess_legendre_hyp, _k_limit,
    ),
    ("3.3", "(iii)"): _Case(
        "3.3", "(iii)", "L_x bracket", "eq", "two", False, _excess_legendre_hyp, _bracket
    ),
    ("4.1", ""): _Case("4.1", "", "mixed L_x increment", "eq", "two", True, _pair_hyp, _mixed_lx),
    ("4.2", ""): _Case(
        "4.2", "", "L_xx combination - d/dt L_x increment", "ge", "two", True, _pair_hyp, _curvature
    ),
    ("4.3", ""): _Case("4.3", "", "L_x bracket", "eq", "two", False, _excess_legendre_hyp, _bracket),
}

STRONG_POINT = ("3.1", "3.2", "3.3")
WEAK_POINT = {"3.4": "3.1", "3.5": "3.2", "3.6": "3.3", "3.7": "3.3"}
INTERVAL = ("4.1", "4.2", "4.3")

_ROMAN = {"i": "(i)", "ii": "(ii)", "iii": "(iii)", "j": "(i)", "jj": "(ii)", "jjj": "(iii)"}


def _split(theorem: str) -> tuple[str, str | None]:
    m = re.fullmatch(r"\s*(\d\.\d)\s*(?:\(?\s*([ij]+)\s*\)?)?\s*", str(theorem))
    if m is None:
        raise ValueError(f"unknown theorem id {theorem!r}")
    part = m.group(2)
    if part is not None and part not in _ROMAN:
        raise ValueError(f"unknown theorem part {part!r}")
    return m.group(1), _ROMAN.get(part) if part else None


def _resolve_point_case(base: str, part: str | None, p: SidedPoint, weak_id: str | None) -> _Case:
    one_sided = p.side is not Side.TWO
    if base == "3.3" and weak_id == "3.6":
        part = part or "(i)"
        if part != "(i)":
            raise ValueError("3.6 only has one part")
    elif base == "3.3" and weak_id == "3.7":
        # j / jj map onto the one-sided / interior parts.
        part = {None: None, "(i)": "(ii)", "(ii)": "(iii)"}.get(part, part)
    if part is None:
        if base == "3.3":
            part = "(ii)" if one_sided else "(iii)"
        else:
            part = "(i)" if one_sided else "(ii)"
    case = _CASES.get((base, part))
    if case is None:
        raise ValueError(f"theorem {base} has no part {part}")
    if case.sidedness == "one" and not one_sided:
        raise SideError(f"{base}{part} needs a one-sided point")
    if case.sidedness == "two" and one_sided:
        raise SideError(f"{base}{part} needs a two-sided interior point")
    return case


def _relation_text(case: _Case, side: Side) -> str:
    rel = case.relation
    if rel == "side":
        rel = "ge" if side is Side.PLUS else "le"
    return {"eq": "= 0", "ge": ">= 0", "le": "<= 0"}[rel]


def _breach(case: _Case, side: Side, value: float, tol: float) -> bool:
    rel = case.relation
    if rel == "side":
        rel = "ge" if side is Side.PLUS else "le"
    if rel == "eq":
        return abs(value) > tol
    if rel == "ge":
        return value < -tol
    return value > tol


def _severity(case: _Case, side: Side, value: float) -> float:
    """Larger means closer to (or further into) violation."""
    rel = case.relation
    if rel == "side":
        rel = "ge" if side is Side.PLUS else "le"
    return abs(value) if rel == "eq" else (-value if rel == "ge" else value)


def _check_interior(path: PiecewisePath, p: SidedPoint, case: _Case) -> None:
    if case.sidedness == "two":
        t = path._snap(p.t)
        if not path.t0 < t < path.t1:
            raise SideError(f"{case.theorem}{case.part} needs an interior point, got t={p.t}")
        if t in path.angular_points:
            raise SideError(f"{case.theorem}{case.part} cannot be evaluated at angular point {t}")


def _tol(fd: bool, tol: float, fd_tol: float) -> float:
    return max(tol, fd_tol) if fd else tol


def _evaluate(case: _Case, ctx: _Ctx, tol: float, fd_tol: float, assume: bool):
    """(hypothesis evidence, applicable, conclusion value, conclusion tolerance)."""
    evidence = []
    applicable = True
    if not assume:
        for name, value, fd in case.hypotheses(ctx):
            t = _tol(fd, tol, fd_tol)
            holds = abs(value) <= t
            evidence.append(Evidence(name, float(value), t, holds))
            if not holds:
                applicable = False
                break
    if not applicable:
        return evidence, False, None, None
    value, fd = case.conclusion(ctx)
    return evidence, True, float(value), _tol(fd, tol, fd_tol)


def _tolerances(q: DegenerationQuery, scan: ScanConfig | None = None, grid_t: int | None = None):
    out = {"zero_tol": scan.zero_tol if scan else q.tolerance, "fd_tol": q.fd_tolerance}
    out["fd_step"] = q.step if q.step is not None else "default"
    if scan is not None:
        out.update(delta=scan.delta, grid=scan.grid, lambda_grid=len(scan.lambdas()))
    if grid_t is not None:
        out["grid_t"] = grid_t
    return out


def _witness(case, p: SidedPoint, eta, lam, value, step) -> dict:
    return {
        "theorem": f"{case.theorem}{case.part}",
        "t": p.t,
        "side": p.side.value,
        "eta": [float(a) for a in eta],
        "lambda_bar": lam,
        "step": step,
        "value": value,
    }


# -- pointwise checks ---------------------------------------------------------


def check_point_strong(
    spec: ProblemSpec, path: PiecewisePath, q: DegenerationQuery, theorem: str
) -> ConditionReport:
    base, part = _split(theorem)
    if base not in STRONG_POINT:
        raise ValueError(f"strong pointwise checks cover {STRONG_POINT}, got {theorem!r}")
    if q.point is None:
        raise ValueError("pointwise checks need a point")
    case = _resolve_point_case(base, part, q.point, None)
    _check_interior(path, q.point, case)
    lam = _lambda_for(case, q.lambda_bar)
    eta = np.asarray(q.eta)
    if eta.shape != (spec.n,):
        raise ValueError(f"eta must have length {spec.n}")
    ctx = _Ctx(spec, path, q.point, eta, lam, q.step)
    evidence, ok, value, ctol = _evaluate(case, ctx, q.tolerance, q.fd_tolerance, q.assume_hypotheses)
    sample = {"t": q.point.t, "side": q.point.side.value, "eta": list(q.eta), "lambda_bar": lam}
    notes = []
    if not ok:
        verdict, witness = Verdict.NOT_APPLICABLE, None
    else:
        sample["value"] = value
        breach = _breach(case, q.point.side, value, ctol)
        verdict = Verdict.VIOLATED if breach else Verdict.SATISFIED
        witness = _witness(case, q.point, q.eta, lam, value, q.step) if breach else None
        if case is _CASES[("3.3", "(ii)")]:
            cross = C.k_value(spec, path, q.point, 0.0, eta, q.step)
            notes.append(f"K at epsilon=0 cross-check: {cross!r}")
    return ConditionReport(
        theorem=base, part=case.part, mode=Mode.STRONG, verdict=verdict,
        condition=case.condition, relation=_relation_text(case, q.point.side),
        tested_value=value, evidence=evidence, samples=[sample], witness=witness,
        tolerances=_tolerances(q), notes=notes,
    )


def _lambda_for(case: _Case, lam: float | None) -> float | None:
    if case.uses_lambda:
        if lam is None:
            raise ValueError(f"{case.theorem}{case.part} needs lambda_bar")
        return lam
    return None


def check_point_weak(
    spec: ProblemSpec,
    path: PiecewisePath,
    q: DegenerationQuery,
    theorem: str,
    scan: ScanConfig,
) -> ConditionReport:
    """Grid scan of a pointwise condition over eta in the delta-ball."""
    raw, part = _split(theorem)
    if raw not in WEAK_POINT:
        raise ValueError(f"weak pointwise checks cover {tuple(WEAK_POINT)}, got {theorem!r}")
    if q.point is None:
        raise ValueError("pointwise checks need a point")
    case = _resolve_point_case(WEAK_POINT[raw], part, q.point, raw)
    _check_interior(path, q.point, case)
    shown = {"(i)": "(j)", "(ii)": "(jj)", "(iii)": "(jj)"}[case.part]
    if raw == "3.6":
        shown = ""
    elif raw == "3.7":
        shown = "(j)" if case.part == "(ii)" else "(jj)"

    def evaluate_at(eta, lam):
        ctx = _Ctx(spec, path, q.point, eta, lam, q.step)
        ev, ok, value, ctol = _evaluate(case, ctx, scan.zero_tol, q.fd_tolerance, q.assume_hypotheses)
        return ok, value, ctol

    samples, worst, n_scanned = _scan(spec, case, scan, evaluate_at, [q.point])
    return _weak_report(raw, shown, case, q, scan, samples, worst, n_scanned, None)


def _scan(spec, case, scan: ScanConfig, evaluate_at, points):
    samples = []
    worst = None
    n_scanned = 0
    lams = scan.lambdas() if case.uses_lambda else [None]
    for eta in scan.etas(spec.n):
        for lam in lams:
            if lam is not None:
                lam = min(lam, C.LAMBDA_CAP)
                companion = C.companion_factor(lam) * eta
                if np.linalg.norm(companion) > scan.delta * (1 + 1e-12):
                    continue
            n_scanned += 1
            result = evaluate_at(eta, lam)
            if result is None:
                continue
            ok, value, ctol, *extra = result
            if not ok:
                continue
            p = extra[0] if extra else points[0]
            side = p.side
            breach = _breach(case, side, value, ctol)
            sample = {
                "t": p.t, "side": side.value, "eta": [float(a) for a in eta],
                "lambda_bar": lam, "value": value, "passed": not breach,
            }
            samples.append(sample)
            sev = _severity(case, side, value)
            if worst is None or sev > worst[0]:
                worst = (sev, sample, breach, ctol)
    return samples, worst, n_scanned


def _weak_report(theorem, shown, case, q, scan, samples, worst, n_scanned, grid_t) -> ConditionReport:
    side = q.point.side if q.point is not None else Side.TWO
    evidence = [
        Evidence("scanned samples", float(n_scanned), 0.0, n_scanned > 0),
        Evidence("applicable samples", float(len(samples)), scan.zero_tol, bool(samples)),
    ]
    witness = None
    if not samples:
        verdict, tested = Verdict.NOT_APPLICABLE, None
    else:
        _, sample, breach, _ = worst
        tested = sample["value"]
        verdict = Verdict.VIOLATED if breach else Verdict.SATISFIED
        if breach:
            p = SidedPoint(sample["t"], Side.parse(sample["side"]))
            witness = _witness(case, p, sample["eta"], sample["lambda_bar"], tested, q.step)
    return ConditionReport(
        theorem=theorem, part=shown, mode=Mode.WEAK, verdict=verdict, condition=case.condition,
        relation=_relation_text(case, side), tested_value=tested, evidence=evidence,
        samples=samples, witness=witness, tolerances=_tolerances(q, scan, grid_t),
    )


# -- interval checks ----------------------------------------------------------


def interval_mesh(a: float, b: float, grid_t: int) -> list[float]:
    if grid_t < 1:
        raise ValueError("grid_t must be positive")
    return [a + (b - a) * k / (grid_t + 1) for k in range(1, grid_t + 1)]


def _interval_points(path: PiecewisePath, interval, grid_t) -> list[SidedPoint]:
    a, b = interval
    if a < path.t0 or b > path.t1:
        raise ValueError(f"interval ({a}, {b}) leaves [{path.t0}, {path.t1}]")
    inside = [s for s in path.angular_points if a < s < b]
    if inside:
        raise SideError(f"interval ({a}, {b}) contains angular points {sorted(inside)}")
    return [SidedPoint(t, Side.TWO) for t in interval_mesh(a, b, grid_t)]


def _interval_eval(case, spec, path, points, eta, lam, q, tol):
    """Hypotheses on the whole mesh, then the conclusion on the same mesh."""
    worst_h: dict[str, Evidence] = {}
    for p in points:
        ctx = _Ctx(spec, path, p, eta, lam, q.step)
        if q.assume_hypotheses:
            break
        for name, value, fd in case.hypotheses(ctx):
            t = _tol(fd, tol, q.fd_tolerance)
            prev = worst_h.get(name)
            if prev is None or abs(value) > abs(prev.value):
                worst_h[name] = Evidence(name, float(value), t, abs(value) <= t)
            if abs(value) > t:
                return list(worst_h.values()), False, None
    rows = []
    for p in points:
        value, fd = case.conclusion(_Ctx(spec, path, p, eta, lam, q.step))
        rows.append((p, float(value), _tol(fd, tol, q.fd_tolerance)))
    return list(worst_h.values()), True, rows


def check_interval(
    spec: ProblemSpec,
    path: PiecewisePath,
    q: DegenerationQuery,
    theorem: str,
    mode: Mode = Mode.STRONG,
    scan: ScanConfig | None = None,
    grid_t: int = 11,
) -> ConditionReport:
    base, _ = _split(theorem)
    if base not in INTERVAL:
        raise ValueError(f"interval checks cover {INTERVAL}, got {theorem!r}")
    if q.interval is None:
        raise ValueError("interval checks need an interval")
    mode = Mode(mode) if not isinstance(mode, Mode) else mode
    case = _CASES[(base, "")]
    points = _interval_points(path, q.interval, grid_t)
    shown = "(i)" if mode is Mode.STRONG else "(ii)"

    if mode is Mode.STRONG:
        lam = _lambda_for(case, q.lambda_bar)
        eta = np.asarray(q.eta)
        if eta.shape != (spec.n,):
            raise ValueError(f"eta must have length {spec.n}")
        evidence, ok, rows = _interval_eval(case, spec, path, points, eta, lam, q, q.tolerance)
        witness = None
        samples = []
        if not ok:
            verdict, tested = Verdict.NOT_APPLICABLE, None
        else:
            worst = max(rows, key=lambda r: _severity(case, Side.TWO, r[1]))
            tested = worst[1]
            breach = _breach(case, Side.TWO, worst[1], worst[2])
            verdict = Verdict.VIOLATED if breach else Verdict.SATISFIED
            samples = [
                {"t": p.t, "side": p.side.value, "eta": list(q.eta), "lambda_bar": lam,
                 "value": v, "passed": not _breach(case, Side.TWO, v, tol)}
                for p, v, tol in rows
            ]
            if breach:
                witness = _witness(case, worst[0], q.eta, lam, tested, q.step)
        return ConditionReport(
            theorem=base, part=shown, mode=mode, verdict=verdict, condition=case.condition,
            relation=_relation_text(case, Side.TWO), tested_value=tested, evidence=evidence,
            samples=samples, witness=witness, tolerances=_tolerances(q, None, grid_t),
        )

    if scan is None:
        raise ValueError("weak mode needs a ScanConfig")

    def evaluate_at(eta, lam):
        _, ok, rows = _interval_eval(case, spec, path, points, eta, lam, q, scan.zero_tol)
        if not ok:
            return False, None, None
        p, v, tol = max(rows, key=lambda r: _severity(case, Side.TWO, r[1]))
        return True, v, tol, p

    samples, worst, n_scanned = _scan(spec, case, scan, evaluate_at, points)
    return _weak_report(base, shown, case, q, scan, samples, worst, n_scanned, grid_t)


def reevaluate_witness(spec: ProblemSpec, path: PiecewisePath, witness: dict) -> float:
    """Recompute the conclusion value recorded in a witness."""
    base, part = _split(witness["theorem"])
    p = SidedPoint(witness["t"], Side.parse(witness["side"]))
    case = _CASES[(base, part or "")]
    ctx = _Ctx(spec, path, p, np.asarray(witness["eta"], dtype=float), witness["lambda_bar"], witness["step"])
    return float(case.conclusion(ctx)[0])


# -- degeneration discovery ---------------------------------------------------

PAIR = "weierstrass-pair"
LEGENDRE = "weierstrass-legendre"


@dataclass(frozen=True)
class DegenerationHit:
    query: DegenerationQuery
    kind: str
    values: dict


def scan_degenerations(
    spec: ProblemSpec,
    path: PiecewisePath,
    where: "SidedPoint | tuple[float, float]",
    scan: ScanConfig,
    grid_t: int = 11,
) -> list[DegenerationHit]:
    """Grid points eta (and lambda) at which the excess degenerates.

    ``PAIR`` hits have the excess vanishing at eta and at its companion
    lambda/(lambda-1) eta; ``LEGENDRE`` hits have the excess and the Legendre
    form vanishing at eta. Over an interval the largest magnitude on the
    ``grid_t`` mesh is what gets compared with ``zero_tol``.
    """
    if isinstance(where, SidedPoint):
        points = [where]
        locate = {"point": where}
    else:
        points = _interval_points(path, tuple(where), grid_t)
        locate = {"interval": tuple(float(a) for a in where)}
    tol = scan.zero_tol

    def worst(fn) -> float:
        return max((fn(p) for p in points), key=abs)

    hits = []
    for eta in scan.etas(spec.n):
        e_eta = worst(lambda p: C.excess(spec, path, p, eta))
        if abs(e_eta) > tol:
            continue
        leg = worst(lambda p: C.legendre_form(spec, path, p, eta))
        if abs(leg) <= tol:
            hits.append(DegenerationHit(
                DegenerationQuery(tuple(eta), None, tolerance=tol, **locate), LEGENDRE,
                {"excess": e_eta, "legendre": leg},
            ))
        for lam in scan.lambdas():
            lam = min(lam, C.LAMBDA_CAP)
            s = C.companion_factor(lam)
            e_comp = worst(lambda p: C.excess(spec, path, p, s * eta))
            if abs(e_comp) <= tol:
                hits.append(DegenerationHit(
                    DegenerationQuery(tuple(eta), lam, tolerance=tol, **locate), PAIR,
                    {"excess": e_eta, "excess_companion": e_comp},
                ))
    return hits
