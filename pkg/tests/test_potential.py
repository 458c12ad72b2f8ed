import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diracspec.errors import ArgumentError, DomainError, ParseError
from diracspec.potential import (
    BinOp,
    Call,
    Const,
    ExprProfile,
    Neg,
    Num,
    PotentialSpec,
    SampledProfile,
    Var,
    antiderivative_profile,
    parse,
    to_string,
)

# Smooth Cartesian expressions used for the AD-vs-finite-difference check.
GRAD_CORPUS = [
    "x1*x2",
    "x1^2 + x2^2 - x3^2",
    "sin(x1)*cos(x2)",
    "exp(-(x1^2 + x2^2 + x3^2))",
    "-3/(1 + x1^2 + x2^2 + x3^2)",
    "sqrt(1 + x1^2 + x2^2)",
    "log(2 + sin(x1*x2))",
    "x1^3 - 2*x1*x2 + x3",
    "cos(pi*x1)*exp(x2/3)",
    "1/(2 + cos(x1 + x2 + x3))",
    "(1 + x1^2)^0.75",
    "(2 + x2^2)^(1 + x1^2/10)",
    "sin(x1 + 2*x2 - x3)^2",
    "x1*exp(-x2^2)*sin(x3)",
    "(x1 - x2)/(3 + x3^2)",
    "exp(sin(x1))*x2^2",
    "sqrt(4 + x1^2 + x2^2 + x3^2)^-3",
    "cos(x1)^2 - sin(x2)^2 + x3/4",
    "log(1 + x1^2) + log(1 + x2^2)",
    "-x1^2/2 + x1*x3 - 5",
]


# --- parsing ----------------------------------------------------------------


def test_parse_radial_example():
    spec = PotentialSpec.from_text("-3/(1+r^2)")
    assert spec.kind == "radial"
    assert spec.eval([0.0, 0.0, 0.0]) == -3.0


def test_parse_constant_zero_has_zero_gradient():
    spec = PotentialSpec.from_text("0")
    g = spec.grad(np.random.default_rng(0).normal(size=(5, 3)))
    assert np.all(g.grad == 0) and np.all(g.value == 0)


def test_parse_layered_example():
    spec = PotentialSpec.from_text("sin(2*pi*t)")
    assert spec.kind == "layered"
    assert abs(spec.profile(0.25) - 1.0) < 1e-15


@pytest.mark.parametrize(
    "text, expected",
    [
        ("-x1^2", Neg(BinOp("^", Var("x1"), Num(2.0)))),
        ("2^3^2", BinOp("^", Num(2.0), BinOp("^", Num(3.0), Num(2.0)))),
        ("2^-t", BinOp("^", Num(2.0), Neg(Var("t")))),
        ("1-2-3", BinOp("-", BinOp("-", Num(1.0), Num(2.0)), Num(3.0))),
        ("8/4/2", BinOp("/", BinOp("/", Num(8.0), Num(4.0)), Num(2.0))),
        ("1+2*3", BinOp("+", Num(1.0), BinOp("*", Num(2.0), Num(3.0)))),
        ("-2*r", BinOp("*", Neg(Num(2.0)), Var("r"))),
        ("sin(pi)", Call("sin", Const("pi"))),
        ("+r", Var("r")),
        ("1.5e-3", Num(0.0015)),
    ],
)
def test_precedence(text, expected):
    assert parse(text) == expected


@pytest.mark.parametrize(
    "text, offset",
    [
        ("", 0),
        ("1+", 2),
        ("(1+r", 4),
        ("sin r", 4),
        ("foo(r)", 0),
        ("r + x4", 4),
        ("1 $ 2", 2),
        ("r r", 2),
        ("2*)", 2),
    ],
)
def test_parse_errors_are_positioned(text, offset):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.offset == offset
    assert f"offset {offset}" in str(info.value)


def test_unknown_identifier_message():
    with pytest.raises(ParseError, match="unknown identifier 'foo'"):
        parse("foo + 1")


# --- printing round trip ----------------------------------------------------

leaves = st.one_of(
    st.floats(0, 1e6, allow_nan=False, allow_infinity=False).map(Num),
    st.sampled_from(["x1", "x2", "x3", "r", "t"]).map(Var),
    st.just(Const("pi")),
)


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda a: BinOp(*a)),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "sqrt", "abs", "log"]), children).map(
            lambda a: Call(*a)
        ),
    )


asts = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=300)
@given(asts)
def test_print_parse_fixpoint(tree):
    text = to_string(tree)
    assert parse(text) == tree
    assert to_string(parse(text)) == text


def test_print_is_readable():
    assert to_string(parse("-3/(1+r^2)")) == "-3 / (1 + r^2)"
    assert to_string(parse("(x1-(x2-x3))")) == "x1 - (x2 - x3)"
    assert to_string(parse("(-r)^2")) == "(-r)^2"


# --- evaluation -------------------------------------------------------------


def test_eval_radial_unit_sphere():
    spec = PotentialSpec.from_text("-3/(1+r^2)")
    assert spec.eval([0.0, 1.0, 0.0]) == -1.5


def test_eval_layered_direction():
    spec = PotentialSpec.from_text("sin(t)", direction=[1.0, 0.0, 0.0])
    assert abs(spec.eval([math.pi / 2, 0.0, 0.0]) - 1.0) < 1e-15


def test_eval_cartesian_zero():
    spec = PotentialSpec.from_text("0", d=2)
    assert np.all(spec.eval(np.ones((4, 2))) == 0)


def test_eval_broadcasts_over_batches():
    spec = PotentialSpec.from_text("x1 + 2*x2", d=2)
    x = np.arange(12.0).reshape(3, 2, 2)
    assert np.array_equal(spec.eval(x), x[..., 0] + 2 * x[..., 1])


def test_eval_dimension_mismatch():
    spec = PotentialSpec.from_text("x1", d=3)
    with pytest.raises(ArgumentError):
        spec.eval([1.0, 2.0])


def test_variable_kind_check():
    with pytest.raises(ArgumentError):
        PotentialSpec.from_text("x3", d=2)
    with pytest.raises(ArgumentError):
        PotentialSpec(parse("r + t"), "radial")


@pytest.mark.parametrize(
    "text, point",
    [("sqrt(x1)", [-1.0, 0.0, 0.0]), ("log(x2)", [1.0, 0.0, 0.0]), ("1/x1", [0.0, 2.0, 0.0])],
)
def test_domain_errors_report_point(text, point):
    spec = PotentialSpec.from_text(text)
    pts = np.array([[1.0, 1.0, 1.0], point])
    with pytest.raises(DomainError) as info:
        spec.eval(pts)
    assert info.value.point == point


def test_scalar_and_array_paths_agree():
    prof = ExprProfile("sin(2*pi*r) + (1+r)^-0.5 - abs(r-2)", "r")
    r = np.linspace(0.01, 5, 101)
    assert np.allclose([prof.scalar(v) for v in r], prof(r), rtol=1e-14, atol=1e-14)


def test_scalar_domain_error():
    prof = ExprProfile("log(r - 1)", "r")
    with pytest.raises(DomainError):
        prof.scalar(0.5)


# --- gradients --------------------------------------------------------------


def _central_difference(spec, x, h=1e-5):
    g = np.zeros(x.shape)
    for i in range(x.shape[-1]):
        e = np.zeros(x.shape[-1])
        e[i] = h
        g[..., i] = (spec.eval(x + e) - spec.eval(x - e)) / (2 * h)
    return g


def test_radial_x_dot_grad_example():
    spec = PotentialSpec.from_text("-3/(1+r^2)")
    x = np.array([0.6, 0.0, 0.8])
    assert abs(spec.x_dot_grad(x) - 1.5) < 1e-14
    # symbolic oracle: x.grad q = 6 r^2 / (1 + r^2)^2
    r = np.linspace(0.1, 4, 9)
    pts = np.stack([r, 0 * r, 0 * r], axis=-1)
    assert np.allclose(spec.x_dot_grad(pts), 6 * r**2 / (1 + r**2) ** 2, rtol=1e-14)


def test_cartesian_product_gradient():
    g = PotentialSpec.from_text("x1*x2").grad([2.0, 3.0, 0.0])
    assert np.array_equal(g.grad, [3.0, 2.0, 0.0])


def test_gradient_matches_finite_differences_on_corpus():
    rng = np.random.default_rng(20240611)
    worst = 0.0
    for text in GRAD_CORPUS:
        spec = PotentialSpec.from_text(text, kind="cartesian")
        x = rng.uniform(-1.5, 1.5, size=(50, 3))
        ad = spec.grad(x)
        assert not ad.any_flagged
        fd = _central_difference(spec, x)
        scale = np.maximum(np.linalg.norm(ad.grad, axis=-1), 1.0)
        rel = np.linalg.norm(ad.grad - fd, axis=-1) / scale
        worst = max(worst, rel.max())
    assert worst <= 1e-6, worst


@pytest.mark.parametrize("kind_text", ["-3/(1+r^2)", "sin(t)*exp(-t^2)"])
def test_reduced_kinds_gradient_vs_fd(kind_text):
    spec = PotentialSpec.from_text(kind_text, direction=None if "r" in kind_text else [1.0, 2.0, 2.0])
    x = np.random.default_rng(5).uniform(-2, 2, size=(50, 3))
    ad = spec.grad(x).grad
    fd = _central_difference(spec, x)
    assert np.max(np.abs(ad - fd)) <= 1e-6


def test_abs_at_zero_is_flagged():
    spec = PotentialSpec.from_text("abs(x1) + x2")
    res = spec.grad(np.array([[0.0, 1.0, 0.0], [1.0, 1.0, 0.0]]))
    assert res.flagged.tolist() == [True, False]
    assert np.array_equal(res.grad[1], [1.0, 1.0, 0.0])


def test_radial_gradient_at_origin():
    smooth = PotentialSpec.from_text("-3/(1+r^2)").grad([0.0, 0.0, 0.0])
    assert not smooth.any_flagged and np.all(smooth.grad == 0)
    cone = PotentialSpec.from_text("r").grad([0.0, 0.0, 0.0])
    assert cone.any_flagged


rotations = st.lists(st.floats(-3, 3), min_size=3, max_size=3)


@given(rotations, st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_radial_rotation_invariance(angles, point):
    from scipy.spatial.transform import Rotation

    spec = PotentialSpec.from_text("-3/(1+r^2) + sin(2*pi*r)")
    x = np.array(point)
    rot = Rotation.from_euler("xyz", angles).as_matrix()
    assert abs(spec.eval(x) - spec.eval(rot @ x)) <= 1e-12


# --- antiderivatives --------------------------------------------------------


def test_antiderivative_sin_pi():
    spec = PotentialSpec.from_text("sin(t)")
    assert abs(antiderivative_profile(spec, math.pi, 1e-10) - 2.0) <= 1e-10


def test_antiderivative_zero_and_constant():
    assert antiderivative_profile(PotentialSpec.from_text("cos(t)^3"), 0.0, 1e-10) == 0.0
    assert abs(antiderivative_profile(PotentialSpec.from_text("1", kind="layered"), 3.7, 1e-12) - 3.7) < 1e-12


def test_antiderivative_negative_and_additive():
    spec = PotentialSpec.from_text("exp(-t)*sin(3*t)")
    tol = 1e-9
    a, b, c = -1.3, 0.7, 4.2
    xi = lambda t: antiderivative_profile(spec, t, tol)
    from diracspec.quadrature import integrate

    ab = integrate(spec.profile, a, b, tol)
    bc = integrate(spec.profile, b, c, tol)
    assert abs((xi(c) - xi(a)) - (ab + bc)) <= 2 * tol
    assert abs(xi(-1.0) - integrate(spec.profile, 0.0, -1.0, tol)) <= 2 * tol


def test_antiderivative_vectorized_matches_closed_form():
    prof = ExprProfile("cos(t)", "t")
    t = np.linspace(-20, 20, 333)
    assert np.max(np.abs(prof.antiderivative(t, 1e-11) - np.sin(t))) <= 1e-11


def test_sampled_profile_exact_antiderivative(tmp_path):
    path = tmp_path / "eta.csv"
    path.write_text("r,eta\n0,0\n1,2\n3,2\n4,-2\n")
    prof = SampledProfile.from_csv(path)
    assert prof(0.5) == 1.0
    # trapezoid areas: 1, 4, 0 -> xi(4) = 5; beyond the table eta is held at -2
    assert abs(prof.antiderivative(4.0) - 5.0) < 1e-15
    assert abs(prof.antiderivative(5.0) - 3.0) < 1e-15
    assert abs(prof.antiderivative(0.5) - 0.25) < 1e-15
