"""``varicheck`` command-line frontend.

Exit codes: 0 when every requested check is satisfied (or inconclusive),
2 when at least one is violated or an oracle fit disagrees, 3 when no
requested check applies, 1 on usage or input errors.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .expression import ExpressionError
from .oracle import PROP_POWERS, SPECIAL, FitError, VariationParams, verify_proposition
from .problem import (
    PiecewisePath,
    ProblemError,
    ProblemSpec,
    Side,
    SidedPoint,
    erdmann_gaps,
    euler_residual,
    functional_value,
    load_problem,
    lx_gap,
)
from .quadrature import QuadratureError
from .report import ScanResult, render_report
from .theorems import (
    INTERVAL,
    STRONG_POINT,
    WEAK_POINT,
    ConditionReport,
    DegenerationQuery,
    Evidence,
    Mode,
    ScanConfig,
    Verdict,
    _split,
    check_interval,
    check_point_strong,
    check_point_weak,
    scan_degenerations,
)

EXIT_OK, EXIT_USAGE, EXIT_VIOLATED, EXIT_NOT_APPLICABLE = 0, 1, 2, 3
THREADS_ENV = "VARICHECK_THREADS"
EULER_MESH = 100


class UsageError(Exception):
    pass


# -- requests -------------------------------------------------------------------


@dataclass(frozen=True)
class Overrides:
    zero_tol: float = 1e-9
    fd_tol: float = 1e-6
    step: float | None = None
    quad_tol: float = 1e-10
    delta: float = 1.0
    grid: int = 21
    lambda_grid: int = 21
    grid_t: int = 11

    def __post_init__(self):
        for name in ("zero_tol", "fd_tol", "quad_tol", "delta", "grid", "lambda_grid", "grid_t"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be positive")
        if self.step is not None and not self.step > 0:
            raise UsageError("step must be positive")

    def scan(self) -> ScanConfig:
        return ScanConfig(self.delta, self.grid, self.lambda_grid, self.zero_tol)


@dataclass(frozen=True)
class Classical:
    pass


@dataclass(frozen=True)
class Theorem:
    theorem: str
    mode: Mode
    eta: tuple[float, ...] | None = None
    lambda_bar: float | None = None
    point: SidedPoint | None = None
    interval: tuple[float, float] | None = None


@dataclass(frozen=True)
class Scan:
    point: SidedPoint | None = None
    interval: tuple[float, float] | None = None


@dataclass(frozen=True)
class Oracle:
    prop: str
    template: VariationParams
    epsilons: tuple[float, ...] | None = None


@dataclass(frozen=True)
class AnalysisRequest:
    problem: str
    command: Classical | Theorem | Scan | Oracle
    output: str = "text"
    overrides: Overrides = field(default_factory=Overrides)

    def __post_init__(self):
        if not isinstance(self.command, (Classical, Theorem, Scan, Oracle)):
            raise UsageError("exactly one command is required")
        if self.output not in ("text", "json"):
            raise UsageError(f"unknown output format {self.output!r}")


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


# -- classical checks -------------------------------------------------------------


def _mesh(path: PiecewisePath, count: int) -> list[SidedPoint]:
    """Evenly spaced points, with both one-sided limits at corners."""
    out = []
    for t in np.linspace(path.t0, path.t1, count):
        t = path._snap(float(t))
        if t == path.t1:
            out.append(SidedPoint(t, Side.MINUS))
        elif t in path.angular_points:
            out += [SidedPoint(t, Side.MINUS), SidedPoint(t, Side.PLUS)]
        else:
            out.append(SidedPoint(t, Side.PLUS))
    return out


def _tolerances(ov: Overrides, **extra) -> dict:
    return {"zero_tol": ov.zero_tol, **extra}


def _classical(name, verdict, condition, relation, value, evidence, samples, witness, tolerances, notes=()):
    return ConditionReport(
        theorem=name, part="", mode=Mode.WEAK, verdict=verdict, condition=condition,
        relation=relation, tested_value=value, evidence=evidence, samples=samples,
        witness=witness, tolerances=tolerances, notes=list(notes),
    )


def euler_report(spec: ProblemSpec, path: PiecewisePath, ov: Overrides, count: int = EULER_MESH) -> ConditionReport:
    samples = []
    for p in _mesh(path, count):
        r = euler_residual(spec, path, p)
        samples.append({"t": p.t, "side": p.side.value, "value": float(np.max(np.abs(r)))})
    worst = max(samples, key=lambda s: s["value"])
    bad = worst["value"] > ov.zero_tol
    witness = {"t": worst["t"], "side": worst["side"], "value": worst["value"]} if bad else None
    notes = [f"J along the candidate: {functional_value(spec, path, ov.quad_tol)!r}"]
    return _classical(
        "euler", Verdict.VIOLATED if bad else Verdict.SATISFIED,
        "max |d/dt L_v - L_x| over the mesh", "= 0", worst["value"], [], samples, witness,
        _tolerances(ov, mesh=count, quad_tol=ov.quad_tol), notes,
    )


def erdmann_report(spec: ProblemSpec, path: PiecewisePath, ov: Overrides) -> ConditionReport:
    corners = sorted(path.angular_points)
    tol = _tolerances(ov)
    if not corners:
        ev = [Evidence("angular points", 0.0, 0.0, False)]
        return _classical(
            "erdmann", Verdict.NOT_APPLICABLE, "corner jumps of L_v and L - v.L_v", "= 0",
            None, ev, [], None, tol, ["no angular points"],
        )
    samples, notes = [], []
    for tau in corners:
        dp, de = erdmann_gaps(spec, path, tau)
        gap = max(float(np.max(np.abs(dp))), abs(float(de)))
        samples.append({"t": tau, "momentum_jump": dp, "energy_jump": float(de), "value": gap})
        notes.append(f"L_x jump at {tau!r}: {[float(a) for a in lx_gap(spec, path, tau)]!r}")
    worst = max(samples, key=lambda s: s["value"])
    bad = worst["value"] > ov.zero_tol
    witness = {"t": worst["t"], "value": worst["value"]} if bad else None
    ev = [Evidence("angular points", float(len(corners)), 0.0, True)]
    return _classical(
        "erdmann", Verdict.VIOLATED if bad else Verdict.SATISFIED,
        "corner jumps of L_v and L - v.L_v", "= 0", worst["value"], ev, samples, witness, tol, notes,
    )


def legendre_report(spec: ProblemSpec, path: PiecewisePath, ov: Overrides, count: int = EULER_MESH) -> ConditionReport:
    b = spec.integrand
    samples = []
    for p in _mesh(path, count):
        k = path.segment_index(p, 1)
        t = path._snap(p.t)
        H = b.numeric("L_vv", t, path.eval_segment(k, t, 0), path.eval_segment(k, t, 1))
        lo = float(np.linalg.eigvalsh(0.5 * (H + H.T))[0])
        samples.append({"t": p.t, "side": p.side.value, "value": lo})
    worst = min(samples, key=lambda s: s["value"])
    bad = worst["value"] < -ov.zero_tol
    witness = {"t": worst["t"], "side": worst["side"], "value": worst["value"]} if bad else None
    return _classical(
        "legendre", Verdict.VIOLATED if bad else Verdict.SATISFIED,
        "smallest eigenvalue of L_vv over the mesh", ">= 0", worst["value"], [], samples, witness,
        _tolerances(ov, mesh=count),
    )


# -- execution --------------------------------------------------------------------


def _parallel(tasks, threads: int) -> list:
    if threads <= 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda task: task(), tasks))


def _theorem_reports(spec, path, cmd: Theorem, ov: Overrides) -> list[ConditionReport]:
    base, _ = _split(cmd.theorem)
    eta = cmd.eta
    if eta is None:
        if cmd.mode is Mode.STRONG:
            raise UsageError("--eta is required for strong checks")
        eta = (1.0,) * spec.n
    if len(eta) != spec.n:
        raise UsageError(f"--eta needs {spec.n} components, got {len(eta)}")
    q = DegenerationQuery(
        eta, cmd.lambda_bar, point=cmd.point, interval=cmd.interval,
        tolerance=ov.zero_tol, fd_tolerance=ov.fd_tol, step=ov.step,
    )
    if base in INTERVAL:
        scan = ov.scan() if cmd.mode is Mode.WEAK else None
        return [check_interval(spec, path, q, cmd.theorem, cmd.mode, scan, ov.grid_t)]
    if base in WEAK_POINT:
        return [check_point_weak(spec, path, q, cmd.theorem, ov.scan())]
    return [check_point_strong(spec, path, q, cmd.theorem)]


def execute(request: AnalysisRequest, threads: int = 1) -> tuple[list, int]:
    """Run a request; returns (report objects, exit code)."""
    spec, path = load_problem(request.problem)
    cmd, ov = request.command, request.overrides
    if isinstance(cmd, Oracle):
        report = verify_proposition(
            spec, path, cmd.template, cmd.prop, epsilons=cmd.epsilons, step=ov.step,
            tol=ov.quad_tol, workers=threads,
        )
        return [report], EXIT_OK if report.passed else EXIT_VIOLATED
    if isinstance(cmd, Scan):
        where = cmd.point if cmd.point is not None else cmd.interval
        hits = scan_degenerations(spec, path, where, ov.scan(), ov.grid_t)
        loc = (
            {"t": cmd.point.t, "side": cmd.point.side.value} if cmd.point is not None
            else {"interval": list(cmd.interval), "grid_t": ov.grid_t}
        )
        return [ScanResult(loc, ov.scan(), hits)], EXIT_OK if hits else EXIT_NOT_APPLICABLE
    if isinstance(cmd, Classical):
        reports = _parallel(
            [
                lambda: euler_report(spec, path, ov),
                lambda: erdmann_report(spec, path, ov),
                lambda: legendre_report(spec, path, ov),
            ],
            threads,
        )
    else:
        reports = _theorem_reports(spec, path, cmd, ov)
    verdicts = [r.verdict for r in reports]
    if Verdict.VIOLATED in verdicts:
        code = EXIT_VIOLATED
    elif all(v is Verdict.NOT_APPLICABLE for v in verdicts):
        code = EXIT_NOT_APPLICABLE
    else:
        code = EXIT_OK
    return reports, code


# -- argument parsing ----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive(kind):
    def convert(text):
        try:
            value = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a valid {kind.__name__}: {text!r}") from None
        if not value > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return value

    return convert


def _theta(text: str) -> tuple[float, Side | None]:
    """A time, optionally suffixed with + or - to pick a one-sided limit."""
    text = text.strip()
    side = None
    if len(text) > 1 and text[-1] in "+-" and text[-2] not in "eE":
        side = Side.parse(text[-1])
        text = text[:-1]
    try:
        return float(text), side
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a time: {text!r}") from None


def _lambda(text: str):
    if text.strip().lower() in ("eps", "epsilon"):
        return SPECIAL
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"lambda must be a number or 'epsilon': {text!r}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("problem", help="problem file (TOML)")
    p.add_argument("--json", action="store_true", help="emit JSON instead of text")
    p.add_argument("--zero-tol", type=_positive(float), default=1e-9, help="zero tolerance for exact quantities")
    p.add_argument("--fd-tol", type=_positive(float), default=1e-6, help="zero tolerance for finite-difference quantities")
    p.add_argument("--step", type=_positive(float), default=None, help="finite-difference base step")
    p.add_argument("--quad-tol", type=_positive(float), default=1e-10, help="quadrature tolerance")


def _add_where(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", type=_theta, help="point in time; a trailing + or - selects a side")
    p.add_argument("--side", type=Side.parse, help="+, - or 0 (two-sided)")
    p.add_argument("--interval", type=float, nargs=2, metavar=("A", "B"))


def _add_scan(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delta", type=_positive(float), default=1.0, help="radius of the eta ball")
    p.add_argument("--grid", type=_positive(int), default=21, help="samples per eta axis")
    p.add_argument("--lambda-grid", type=_positive(int), default=21, help="number of lambda samples")
    p.add_argument("--grid-t", type=_positive(int), default=11, help="interior mesh points on an interval")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="varicheck", description="Necessary-condition checks for variational problems.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="classical checks or one degenerate-case condition")
    _add_common(a)
    which = a.add_mutually_exclusive_group(required=True)
    which.add_argument("--classical", action="store_true", help="Euler, corner and Legendre checks")
    which.add_argument("--theorem", help="condition id, e.g. 4.2, 4.2(ii), 3.3, 3.7(j)")
    a.add_argument("--mode", choices=[m.value for m in Mode], help="strong or weak (interval conditions)")
    a.add_argument("--lambda", dest="lam", type=float, help="lambda_bar in (0, 1)")
    a.add_argument("--eta", type=float, nargs="+", help="direction eta")
    _add_where(a)
    _add_scan(a)

    s = sub.add_parser("scan", help="search for degenerate directions")
    _add_common(s)
    _add_where(s)
    _add_scan(s)

    o = sub.add_parser("oracle", help="compare fitted increments with closed-form coefficients")
    _add_common(o)
    o.add_argument("--prop", required=True, choices=sorted(PROP_POWERS), help="expansion to verify")
    o.add_argument("--theta", type=_theta, required=True)
    o.add_argument("--lambda", dest="lam", type=_lambda, default=None, help="number in [0, 1) or 'epsilon'")
    o.add_argument("--xi", type=float, nargs="+", required=True)
    o.add_argument("--side", type=Side.parse, default=None, help="+ or -")
    o.add_argument("--epsilons", type=_positive(float), nargs="+", help="explicit epsilon ladder")
    return parser


def _point(args, default_side: Side) -> SidedPoint | None:
    if args.theta is None:
        if args.side is not None:
            raise UsageError("--side needs --theta")
        return None
    t, suffix = args.theta
    if suffix is not None and args.side is not None and suffix is not args.side:
        raise UsageError("--theta suffix and --side disagree")
    return SidedPoint(t, args.side or suffix or default_side)


def _where(args, default_side: Side = Side.TWO):
    point = _point(args, default_side)
    interval = tuple(args.interval) if args.interval is not None else None
    if (point is None) == (interval is None):
        raise UsageError("give exactly one of --theta or --interval")
    return point, interval


def _theorem_command(args) -> Theorem:
    base, part = _split(args.theorem)
    mode = Mode(args.mode) if args.mode else None
    if base in INTERVAL:
        implied = {None: None, "(i)": Mode.STRONG, "(ii)": Mode.WEAK}.get(part, "bad")
        if implied == "bad":
            raise UsageError(f"{base} has parts (i) and (ii) only")
        if implied is not None and mode is not None and implied is not mode:
            raise UsageError(f"{args.theorem} conflicts with --mode {mode.value}")
        mode = implied or mode or Mode.STRONG
        if args.theta is not None or args.interval is None:
            raise UsageError(f"{base} is checked on an --interval")
    elif base in WEAK_POINT:
        if mode is Mode.STRONG:
            raise UsageError(f"{base} is a weak-minimum condition")
        mode = Mode.WEAK
    elif base in STRONG_POINT:
        if mode is Mode.WEAK:
            raise UsageError(f"{base} is a strong-minimum condition; use its weak counterpart")
        mode = Mode.STRONG
    else:
        raise UsageError(f"unknown theorem {args.theorem!r}")
    point, interval = _where(args)
    if base not in INTERVAL and interval is not None:
        raise UsageError(f"{base} is checked at a point (--theta)")
    eta = tuple(args.eta) if args.eta is not None else None
    return Theorem(args.theorem, mode, eta, args.lam, point, interval)


def request_from_args(args) -> AnalysisRequest:
    ov = Overrides(
        zero_tol=args.zero_tol, fd_tol=args.fd_tol, step=args.step, quad_tol=args.quad_tol,
        delta=getattr(args, "delta", 1.0), grid=getattr(args, "grid", 21),
        lambda_grid=getattr(args, "lambda_grid", 21), grid_t=getattr(args, "grid_t", 11),
    )
    if args.command == "analyze":
        if args.classical:
            extras = [args.lam, args.eta, args.theta, args.side, args.interval, args.mode]
            if any(x is not None for x in extras):
                raise UsageError("--classical takes no theorem arguments")
            cmd = Classical()
        else:
            cmd = _theorem_command(args)
    elif args.command == "scan":
        point, interval = _where(args)
        cmd = Scan(point, interval)
    else:
        point = _point(args, Side.PLUS)
        lam = args.lam
        if lam is None:
            lam = SPECIAL if args.prop == "2.3" else None
        if lam is None:
            raise UsageError(f"--lambda is required for {args.prop}")
        template = VariationParams(point.t, lam, tuple(args.xi), point.side)
        eps = tuple(args.epsilons) if args.epsilons else None
        cmd = Oracle(args.prop, template, eps)
    return AnalysisRequest(args.problem, cmd, "json" if args.json else "text", ov)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        request = request_from_args(args)
        reports, code = execute(request, thread_count())
        data = render_report(reports, request.output, problem=request.problem)
    except UsageError as exc:
        print(f"varicheck: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ProblemError, ExpressionError, FitError, QuadratureError, ValueError, ArithmeticError) as exc:
        print(f"varicheck: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(data.decode("utf-8"))
    sys.stdout.flush()
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
