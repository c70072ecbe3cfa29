import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catkit.algebra import (
    ParamExpr,
    UnboundParameterError,
    conj_keeping,
    evaluate,
    exp_of,
    im_keeping,
    is_keep_real,
    parse,
    re_keeping,
    to_sexpr,
    unused_keep,
)

q = ParamExpr.symbol("q")
p = ParamExpr.symbol("p")
a = ParamExpr.symbol("a")
b = ParamExpr.symbol("b")
k = ParamExpr.symbol("k")


def test_conj_keeping_q_only():
    f = a * q**2 + b * p**2
    expected = ParamExpr.symbol("a*") * q**2 + ParamExpr.symbol("b*") * ParamExpr.symbol("p*") ** 2
    assert conj_keeping(f, {"q"}) == expected


def test_conj_keeping_q_and_p():
    f = a * q**2 + b * p**2
    expected = ParamExpr.symbol("a*") * q**2 + ParamExpr.symbol("b*") * p**2
    assert conj_keeping(f, {"q", "p"}) == expected


def test_conj_keeping_identity_on_kept_real_monomial():
    assert conj_keeping(q, {"q"}) == q


def test_conj_keeping_coefficient_only():
    assert conj_keeping((2 + 3j) * q * p, {"q", "p"}) == (2 - 3j) * q * p


def test_conj_of_tagged_name_returns_base():
    assert conj_keeping(ParamExpr.symbol("p*"), set()) == p
    assert conj_keeping(ParamExpr.symbol("p*"), {"p"}) == ParamExpr.symbol("p*")


def test_re_im_of_harmonic_term():
    e = 0.5 * k * q**2
    kr = (k + ParamExpr.symbol("k*")) / 2
    ki = (k - ParamExpr.symbol("k*")) / 2j
    assert re_keeping(e, {"q"}) == 0.5 * kr * q**2
    assert im_keeping(e, {"q"}) == 0.5 * ki * q**2
    # numeric version with k = 3 - 2i
    sigma = {"k": 3 - 2j, "q": 0.7 + 0.4j}
    assert evaluate(re_keeping(e, {"q"}), sigma) == pytest.approx(0.5 * 3 * sigma["q"] ** 2)
    assert evaluate(im_keeping(e, {"q"}), sigma) == pytest.approx(0.5 * -2 * sigma["q"] ** 2)


def test_purely_imaginary_monomial():
    e = 1j * q
    assert re_keeping(e, {"q"}) == ParamExpr()
    assert im_keeping(e, {"q"}) == q


def test_re_im_by_hand():
    e = (1 + 1j) * q**3
    assert re_keeping(e, {"q"}) == q**3
    assert im_keeping(e, {"q"}) == q**3


def test_is_keep_real():
    assert is_keep_real(3 * q**2, {"q"})
    assert not is_keep_real(1j * q**2, {"q"})
    pattern = (2 + 1j) * q + (2 - 1j) * ParamExpr.symbol("q*")
    assert not is_keep_real(pattern, {"q"})
    # with nothing kept the pattern is its own conjugate
    assert is_keep_real(pattern, set())


def test_evaluate_examples():
    assert evaluate(a * q**2, {"a": 2, "q": 1 + 1j}) == pytest.approx(4j)
    assert evaluate(ParamExpr(), {}) == 0
    assert evaluate(exp_of(q), {"q": 0}) == pytest.approx(1)


def test_evaluate_missing_names():
    with pytest.raises(UnboundParameterError) as err:
        evaluate(a * q + b, {"q": 1})
    assert err.value.names == ["a", "b"]


def test_unused_keep_flagged():
    assert unused_keep(a * q, {"q", "z"}) == {"z"}


def test_like_terms_merge():
    assert q + q == 2 * q
    assert (q - q) == ParamExpr()
    assert exp_of(q) * exp_of(2 * q) == exp_of(3 * q)


def test_sexpr_round_trip():
    e = (2 + 3j) * q**2 * exp_of(-0.25 * q**2) + ParamExpr.symbol("p*") - 1.5
    assert parse(to_sexpr(e)) == e
    assert parse("(+ (* (c 2 3) (^ q 2)) (exp (* (c 0 1) q)))") == (2 + 3j) * q**2 + exp_of(1j * q)


def test_parse_errors():
    from catkit.algebra import ParseError

    for bad in ["(", "(^ q -1)", "(foo q)", "(exp (+ q p))", "q )"]:
        with pytest.raises((ParseError, ValueError)):
            parse(bad)


# -- properties ---------------------------------------------------------------

names = st.sampled_from(["q", "p", "a", "q*"])
cplx = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


@st.composite
def exprs(draw):
    out = ParamExpr()
    for _ in range(draw(st.integers(0, 4))):
        term = ParamExpr.const(draw(cplx))
        for _ in range(draw(st.integers(0, 3))):
            term = term * ParamExpr.symbol(draw(names))
        if draw(st.booleans()):
            term = term * exp_of(draw(cplx) * 0.3 * ParamExpr.symbol(draw(names)))
        out = out + term
    return out


keeps = st.sets(st.sampled_from(["q", "p", "a"]))


@settings(max_examples=100, deadline=None)
@given(exprs())
def test_involution_with_empty_keep(e):
    assert conj_keeping(conj_keeping(e, set()), set()) == e


@settings(max_examples=100, deadline=None)
@given(exprs(), keeps, st.lists(cplx, min_size=3, max_size=3))
def test_decomposition_identity(e, keep, vals):
    sigma = dict(zip(["q", "p", "a"], vals))
    lhs = evaluate(re_keeping(e, keep) + 1j * im_keeping(e, keep), sigma)
    assert abs(lhs - evaluate(e, sigma)) <= 1e-12 * max(1.0, abs(evaluate(e, sigma)))


@settings(max_examples=100, deadline=None)
@given(exprs(), keeps, st.lists(cplx, min_size=3, max_size=3))
def test_conjugation_matches_numeric_conj_on_real_kept_values(e, keep, vals):
    sigma = {n: (v.real if n in keep else v) for n, v in zip(["q", "p", "a"], vals)}
    lhs = evaluate(conj_keeping(e, keep), sigma)
    rhs = np.conj(evaluate(e, sigma))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(rhs))
