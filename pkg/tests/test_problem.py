import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from artifact.expression import IntegrandBundle, parse_expression
from artifact.problem import (
    BoundaryError,
    ContinuityError,
    PiecewisePath,
    ProblemSpec,
    SchemaError,
    Side,
    SidedPoint,
    SideError,
    erdmann_gaps,
    euler_residual,
    functional_value,
    lx_gap,
    parse_problem,
    path_eval,
)

from conftest import PROBLEMS


def _path(*pieces, angular=()):
    bps = [pieces[0][0]] + [b for _, b, _ in pieces]
    segs = [[parse_expression(e, 0) for e in comps] for _, _, comps in pieces]
    return PiecewisePath(bps, segs, angular)


def _spec(L, n=1, t0=0.0, t1=1.0, x0=(0.0,), x1=(1.0,)):
    return ProblemSpec(n, t0, t1, x0, x1, IntegrandBundle.from_text(L, n))


BASE = """
[problem]
n = 1
t0 = 0.0
t1 = 1.0
x0 = [0.0]
x1 = [1.0]
lagrangian = "v1^2"
{extra}

[[segment]]
from = 0.0
to = {mid}
x = ["t"]

[[segment]]
from = {mid}
to = 1.0
x = ["{second}"]
"""


def _doc(extra="", mid=0.5, second="t"):
    return BASE.format(extra=extra, mid=mid, second=second)


def test_fixtures_load(cubic, free_end):
    spec, path = cubic
    assert spec.n == 1 and spec.x1 == (1.0,)
    assert not path.angular_points
    spec, path = free_end
    assert spec.free_end


def test_all_fixture_files_load():
    from artifact.problem import load_problem

    files = sorted(PROBLEMS.glob("*.toml"))
    assert len(files) == 5
    for f in files:
        load_problem(f)


def test_segment_mismatch_is_a_continuity_error():
    with pytest.raises(ContinuityError):
        parse_problem(_doc(second="t + 0.1"))


def test_undeclared_corner_is_rejected():
    with pytest.raises(ContinuityError):
        parse_problem(_doc(second="2*t - 0.5").replace('x1 = [1.0]', 'x1 = [1.5]'))
    spec, path = parse_problem(
        _doc(extra="angular_points = [0.5]", second="2*t - 0.5").replace('x1 = [1.0]', 'x1 = [1.5]')
    )
    assert path.angular_points == {0.5}


@pytest.mark.parametrize(
    "doc, err",
    [
        (_doc().replace('x1 = [1.0]', 'x1 = [2.0]'), BoundaryError),
        (_doc().replace('x0 = [0.0]', 'x0 = [0.0, 1.0]'), SchemaError),
        (_doc().replace("t1 = 1.0", "t1 = 0.0"), SchemaError),
        (_doc().replace('lagrangian = "v1^2"', 'lagrangian = "v2^2"'), SchemaError),
        (_doc().replace('lagrangian = "v1^2"', 'lagrangian = "v1^"'), SchemaError),
        (_doc(extra="colour = 1"), SchemaError),
        (_doc(extra="angular_points = [0.25]"), SchemaError),
        (_doc(mid=0.4).replace("from = 0.4", "from = 0.45"), SchemaError),
        (_doc().replace('x = ["t"]', 'x = ["x1"]', 1), SchemaError),
        ("[problem\n", SchemaError),
    ],
)
def test_schema_errors(doc, err):
    with pytest.raises(err):
        parse_problem(doc)


def test_free_end_skips_right_boundary():
    spec, _ = parse_problem(_doc().replace("x1 = [1.0]", 'x1 = "free"'))
    assert spec.x1 is None


def test_path_eval_examples(cubic, cubic_pair):
    _, path = cubic
    for t in (0.0, 0.3, 1.0):
        side = Side.MINUS if t == 1.0 else Side.PLUS
        assert path_eval(path, SidedPoint(t, side), 1)[0] == 1.0
    _, path = cubic_pair
    for order in range(4):
        assert np.array_equal(path_eval(path, SidedPoint(0.4), order), [0.0, 0.0])
    tent = _path((0.0, 0.5, ["t"]), (0.5, 1.0, ["1 - t"]), angular=[0.5])
    assert path_eval(tent, SidedPoint(0.5, Side.MINUS), 1)[0] == 1.0
    assert path_eval(tent, SidedPoint(0.5, Side.PLUS), 1)[0] == -1.0
    assert path_eval(tent, SidedPoint(0.5, Side.TWO), 0)[0] == 0.5


def test_side_rules():
    tent = _path((0.0, 0.5, ["t"]), (0.5, 1.0, ["1 - t"]), angular=[0.5])
    with pytest.raises(SideError):
        path_eval(tent, SidedPoint(0.5, Side.TWO), 1)
    with pytest.raises(SideError):
        path_eval(tent, SidedPoint(1.0, Side.PLUS), 0)
    with pytest.raises(SideError):
        path_eval(tent, SidedPoint(0.0, Side.MINUS), 0)
    with pytest.raises(SideError):
        path_eval(tent, SidedPoint(1.5, Side.TWO), 0)


def test_euler_residual_examples(cubic, free_end):
    for spec, path in (cubic, free_end):
        for t in np.linspace(0, 0.99, 25):
            assert np.max(np.abs(euler_residual(spec, path, SidedPoint(t, Side.PLUS)))) <= 1e-12
    spec = _spec("v1^2/2")
    path = _path((0.0, 1.0, ["t^2"]))
    assert euler_residual(spec, path, SidedPoint(0.3))[0] == pytest.approx(2.0)


def test_euler_residual_is_side_consistent_at_smooth_breakpoints():
    spec = _spec("v1^2 + x1^2*sin(t)")
    path = _path((0.0, 0.4, ["t^3"]), (0.4, 1.0, ["t^3"]))
    left = euler_residual(spec, path, SidedPoint(0.4, Side.MINUS))
    right = euler_residual(spec, path, SidedPoint(0.4, Side.PLUS))
    assert np.allclose(left, right, atol=1e-8)


def test_erdmann_examples(corner):
    spec = _spec("v1^2", x1=(1.0,))
    smooth = _path((0.0, 0.5, ["t"]), (0.5, 1.0, ["t"]), angular=[0.5])
    dp, de = erdmann_gaps(spec, smooth, 0.5)
    assert np.array_equal(dp, [0.0]) and de == 0.0
    kinked = _path((0.0, 0.5, ["t"]), (0.5, 1.0, ["2*t - 0.5"]), angular=[0.5])
    dp, _ = erdmann_gaps(spec, kinked, 0.5)
    assert dp[0] == pytest.approx(2.0)
    spec, path = corner
    dp, de = erdmann_gaps(spec, path, 0.5)
    assert dp[0] == 0.0 and de == 0.0
    assert lx_gap(spec, path, 0.5)[0] == 0.0
    with pytest.raises(SideError):
        erdmann_gaps(spec, path, 0.25)


def test_functional_value_examples(cubic, free_end):
    spec = _spec("v1^2")
    assert functional_value(spec, _path((0.0, 1.0, ["t"]))) == pytest.approx(1.0, abs=1e-10)
    assert functional_value(*cubic) == pytest.approx(-1.0, abs=1e-10)
    assert functional_value(*free_end) == pytest.approx(0.0, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.05, 0.95), min_size=1, max_size=4, unique=True))
def test_functional_value_is_additive_under_refinement(cuts):
    spec = _spec("sin(3*t)*v1^2 + x1^3", x1=(np.sin(1.0) + 1.0,))
    whole = _path((0.0, 1.0, ["sin(t) + t^2"]))
    bps = [0.0] + sorted(cuts) + [1.0]
    pieces = [(a, b, ["sin(t) + t^2"]) for a, b in zip(bps, bps[1:])]
    refined = _path(*pieces)
    tol = 1e-10
    assert abs(functional_value(spec, whole, tol) - functional_value(spec, refined, tol)) <= 2 * tol
