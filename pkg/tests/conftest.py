from pathlib import Path

import pytest

from artifact.problem import load_problem

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"

FREE_END = PROBLEMS / "free_end_quadratic_velocity.toml"
QUARTIC_PAIR = PROBLEMS / "quartic_pair.toml"
CUBIC = PROBLEMS / "cubic_velocity.toml"
CUBIC_PAIR = PROBLEMS / "cubic_pair.toml"
CORNER = PROBLEMS / "corner_double_well.toml"


@pytest.fixture(scope="session")
def free_end():
    return load_problem(FREE_END)


@pytest.fixture(scope="session")
def quartic_pair():
    return load_problem(QUARTIC_PAIR)


@pytest.fixture(scope="session")
def cubic():
    return load_problem(CUBIC)


@pytest.fixture(scope="session")
def cubic_pair():
    return load_problem(CUBIC_PAIR)


@pytest.fixture(scope="session")
def corner():
    return load_problem(CORNER)


def random_extremal(rng):
    """A random smooth one-dimensional problem whose candidate path is an extremal.

    A generic L0 is corrected by r(t) x, where r is L0's Euler residual along
    the chosen path, so the residual of the corrected integrand vanishes.
    """
    from artifact.expression import IntegrandBundle, T, Var, add, differentiate, mul, parse_expression, sub, substitute
    from artifact.problem import PiecewisePath, ProblemSpec, Side, SidedPoint

    deg = int(rng.integers(3, 5))
    c = rng.uniform(-1, 1, 6).tolist()
    L0 = (
        f"{c[0]!r}*v1^{deg} + (2 + {c[1]!r}*sin(t))*v1^2 + {c[2]!r}*x1*v1^2 + {c[3]!r}*x1^3"
        f" + {c[4]!r}*x1^2*v1 + {c[5]!r}*cos(t)*x1*v1 + exp(t/2)*x1^2"
    )
    p = rng.uniform(-1, 1, 3).tolist()
    xbar = parse_expression(f"{p[0]!r} + {p[1]!r}*t + {p[2]!r}*t^2", 0)
    b = IntegrandBundle.from_text(L0, 1)
    xd = differentiate(xbar, T)
    xdd = differentiate(xd, T)
    r = sub(add(add(b.L_vt[0], mul(b.L_vx[0][0], xd)), mul(b.L_vv[0][0], xdd)), b.L_x[0])
    r = substitute(r, {Var("x", 1): xbar, Var("v", 1): xd})
    path = PiecewisePath([0.0, 1.0], [[xbar]])
    x0 = tuple(path.eval(SidedPoint(0.0, Side.PLUS)))
    x1 = tuple(path.eval(SidedPoint(1.0, Side.MINUS)))
    L = add(b.L, mul(r, Var("x", 1)))
    return ProblemSpec(1, 0.0, 1.0, x0, x1, IntegrandBundle(L, 1)), path
