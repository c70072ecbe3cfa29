from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catkit.contour import tamed_delta
from catkit.fock import ModelParams, TruncationError, modified_bra_overlap_qq
from catkit.kernel import (
    DegreeLimitError,
    IllConditionedMomentsError,
    Kernel,
    OperatorPoly,
    gaussian_derivative,
    gaussian_moment,
    kernel_to_operator,
    matrix_element_check,
    operator_to_kernel,
    round_trip_error,
)

EPS = [1e-1, 1e-2, 1e-3]
FOCK = ModelParams(hbar=1.0, m_omega=50.0, mp_omegap=1e-4, n_trunc=160)


def poly(**terms):
    # poly(b21=2+1j) -> {(2, 1): 2+1j}
    return OperatorPoly({(int(k[1]), int(k[2])): v for k, v in terms.items()})


# -- kernels ---------------------------------------------------------------------


@pytest.mark.parametrize("q1,q2", [(0.3, 0.25), (0.1 + 0.05j, 0.0), (-0.4, -0.2 + 0.01j)])
def test_identity_kernel_is_tamed_delta(q1, q2):
    k = operator_to_kernel(poly(b00=1.0), 0.02)
    assert k(q1, q2) == pytest.approx(tamed_delta(q1 - q2, 0.02), rel=1e-14)


def test_position_kernel():
    k = operator_to_kernel(poly(b10=1.0), 0.02)
    assert k(0.3, 0.25) == pytest.approx(0.3 * tamed_delta(0.05, 0.02), rel=1e-14)


@pytest.mark.parametrize("hbar", [1.0, 0.5])
def test_momentum_kernel_is_gaussian_derivative(hbar):
    eps, q1, q2 = 0.02, 0.3, 0.22
    k = operator_to_kernel(poly(b01=1.0), eps, hbar)
    expected = (hbar / 1j) * (-(q1 - q2) / (2 * eps)) * tamed_delta(q1 - q2, eps)
    assert k(q1, q2) == pytest.approx(expected, rel=1e-13)


@pytest.mark.parametrize("n", [0, 1, 2, 3, 5])
def test_gaussian_derivative_matches_finite_differences(n):
    eps, x, h = 0.05, 0.13 + 0.02j, 1e-3
    # central difference of the (n-1)-th derivative
    if n == 0:
        assert gaussian_derivative(x, 0, eps) == pytest.approx(tamed_delta(x, eps))
        return
    fd = (gaussian_derivative(x + h, n - 1, eps) - gaussian_derivative(x - h, n - 1, eps)) / (2 * h)
    assert gaussian_derivative(x, n, eps) == pytest.approx(fd, rel=1e-4)


def test_second_derivative_closed_form():
    eps, x = 0.03, 0.11
    expected = (x**2 / (4 * eps**2) - 1 / (2 * eps)) * tamed_delta(x, eps)
    assert gaussian_derivative(x, 2, eps) == pytest.approx(expected, rel=1e-13)


def test_kernel_broadcasts_over_arrays():
    k = operator_to_kernel(poly(b11=1.0, b20=0.5j), 0.01)
    q1 = np.linspace(-0.5, 0.5, 7)
    grid = k(q1[:, None], q1[None, :] + 0.01)
    assert grid.shape == (7, 7)
    assert grid[2, 3] == pytest.approx(k(q1[2], q1[3] + 0.01))


def test_kernel_rejects_nonpositive_eps():
    with pytest.raises(ValueError):
        operator_to_kernel(poly(b00=1.0), 0.0)


@pytest.mark.parametrize("j,expected", [(0, 1.0), (1, 0.0), (2, 0.2), (4, 3 * 0.2**2), (6, 15 * 0.2**3)])
def test_gaussian_moments(j, expected):
    assert gaussian_moment(j, 0.1) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("k", range(7))
def test_closed_form_moments_match_quadrature(k):
    kern = operator_to_kernel(OperatorPoly.random(np.random.default_rng(3), 6), 0.1)
    q = np.array([-0.7, 0.2, 0.9])
    assert np.allclose(kern.moments(q, k), kern.moments_quadrature(q, k), rtol=1e-10, atol=1e-12)


# -- linearity -------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    alpha=st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
    eps=st.sampled_from(EPS),
)
def test_kernel_is_linear_in_coefficients(seed, alpha, eps):
    rng = np.random.default_rng(seed)
    a, b = OperatorPoly.random(rng, 6), OperatorPoly.random(rng, 6)
    q1 = rng.uniform(-0.5, 0.5, 5)
    q2 = q1 + rng.uniform(-2, 2, 5) * math.sqrt(eps)
    lhs = operator_to_kernel(a.scale(alpha) + b, eps)(q1, q2)
    rhs = alpha * operator_to_kernel(a, eps)(q1, q2) + operator_to_kernel(b, eps)(q1, q2)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(rhs)))


# -- round trip ------------------------------------------------------------------


def test_round_trip_identity():
    assert round_trip_error(poly(b00=1.0), 0.1) <= 1e-10


def test_round_trip_single_term():
    back = kernel_to_operator(operator_to_kernel(poly(b21=2 + 1j), 1e-2))
    assert abs(back.coeffs[(2, 1)] - (2 + 1j)) <= 1e-8
    assert set(back.coeffs) == {(2, 1)}


@pytest.mark.parametrize("eps", EPS)
@pytest.mark.parametrize("seed", range(5))
def test_round_trip_degree_six(eps, seed):
    op = OperatorPoly.random(np.random.default_rng(seed), 6)
    assert round_trip_error(op, eps) < 1e-6


def test_round_trip_from_quadrature_moments():
    op = OperatorPoly.random(np.random.default_rng(11), 6)
    assert round_trip_error(op, 0.1, method="quadrature") < 1e-6


def test_round_trip_recovers_lower_degree_inside_larger_ansatz():
    op = poly(b10=1.0, b02=-0.5j)
    back = kernel_to_operator(operator_to_kernel(op, 1e-2), degree=6)
    assert op.max_coeff_error(back) < 1e-10


def test_ill_conditioned_moment_system_raises():
    op = OperatorPoly({(5, 5): 1.0}, max_degree=10)
    with pytest.raises(IllConditionedMomentsError, match="larger eps or a lower degree"):
        kernel_to_operator(operator_to_kernel(op, 0.1))


def test_unknown_moment_method():
    with pytest.raises(ValueError):
        kernel_to_operator(operator_to_kernel(poly(b00=1.0), 0.1), method="fft")


# -- operator polynomials ----------------------------------------------------------


def test_degree_limit():
    with pytest.raises(DegreeLimitError):
        OperatorPoly({(4, 3): 1.0})
    assert OperatorPoly({(4, 3): 1.0}, max_degree=7).degree == 7


def test_json_round_trip():
    text = '{"terms":[{"m":2,"n":1,"re":2,"im":1},{"m":0,"n":0,"re":-1,"im":0}]}'
    op = OperatorPoly.from_json(text)
    assert op.coeffs == {(2, 1): 2 + 1j, (0, 0): -1}
    assert OperatorPoly.from_json(op.to_json()) == op
    assert json.loads(op.to_json())["terms"][0] == {"m": 0, "n": 0, "re": -1.0, "im": 0.0}


@pytest.mark.parametrize("text", ['{"terms":[{"m":1}]}', '{"coeffs":[]}', '{"terms":[{"m":"x","n":0}]}'])
def test_json_malformed(text):
    with pytest.raises(ValueError):
        OperatorPoly.from_json(text)


def test_zero_coefficients_dropped():
    assert OperatorPoly({(1, 1): 0.0, (0, 0): 1.0}).coeffs == {(0, 0): 1.0}


# -- Fock brute force ------------------------------------------------------------------


def test_identity_matrix_element_is_overlap():
    direct = modified_bra_overlap_qq(0.3, 0.25, FOCK)
    k = operator_to_kernel(poly(b00=1.0), FOCK.eps1)
    assert matrix_element_check(poly(b00=1.0), 0.3, 0.25, FOCK) < 1e-12
    assert k(0.3, 0.25) == pytest.approx(direct, rel=1e-12)


@pytest.mark.parametrize("q1,q2", [(0.3, 0.25), (-0.5, -0.42), (0.8, 0.86)])
def test_position_matrix_element(q1, q2):
    assert matrix_element_check(poly(b10=1.0), q1, q2, FOCK) < 1e-4


@pytest.mark.parametrize("q1,q2", [(0.3, 0.25), (-0.5, -0.42), (0.8, 0.86)])
def test_position_momentum_matrix_element(q1, q2):
    assert matrix_element_check(poly(b11=1.0), q1, q2, FOCK) < 1e-3


def test_momentum_defect_tracks_primed_scale():
    # m<q'|p_new = ((hbar/i) d' + i m'w' q') m<q'|, so the relative defect is 2 m'w' q' eps1 / |q' - q''|
    q1, q2 = 0.3, 0.25
    for mpwp in (1e-4, 1e-3):
        p = FOCK.with_(mp_omegap=mpwp)
        predicted = 2 * mpwp * q1 * p.eps1 / abs(q1 - q2)
        assert matrix_element_check(poly(b01=1.0), q1, q2, p) == pytest.approx(predicted, rel=1e-3)


def test_matrix_element_decreases_with_truncation():
    vals = [
        matrix_element_check(poly(b10=1.0), 1.0, 0.95, FOCK.with_(n_trunc=n), guard=False)
        for n in (30, 40, 50, 60, 70, 80)
    ]
    assert all(b < a for a, b in zip(vals[:4], vals[1:5]))
    assert vals[-1] <= vals[-2] + 1e-14
    assert vals[-1] < 1e-13


def test_matrix_element_guard():
    with pytest.raises(TruncationError):
        matrix_element_check(poly(b10=1.0), 1.0, 0.95, FOCK.with_(n_trunc=40))
