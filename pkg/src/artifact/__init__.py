"""Necessary-condition checks for variational problems on piecewise smooth candidates."""

from .conditions import (
    companion_factor,
    cubic_form,
    delta_Lx,
    excess,
    g_form,
    k_form,
    k_value,
    legendre_form,
    lxx_combination,
    m_form,
    q_form,
    time_derivative,
    w_form,
)
from .expression import (
    DomainError,
    ExpressionError,
    ExpressionSyntaxError,
    IntegrandBundle,
    UnknownVariableError,
    differentiate,
    evaluate,
    parse_expression,
    to_string,
)
from .oracle import VariationParams, build_variation, bump, fit_expansion, increment, verify_proposition
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
    parse_problem,
    path_eval,
)
from .quadrature import integrate
from .report import render_report
from .theorems import (
    ConditionReport,
    DegenerationQuery,
    Mode,
    ScanConfig,
    Verdict,
    check_interval,
    check_point_strong,
    check_point_weak,
    reevaluate_witness,
    scan_degenerations,
)

__version__ = "0.1.0"
