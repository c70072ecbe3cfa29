import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catkit.contour import Contour, tamed_delta
from catkit.fock import (
    ModelParams,
    TruncationError,
    WedgeError,
    braq_pket_new_analytic,
    braq_pket_new_closed_form,
    braq_qket_new_analytic,
    braq_qket_new_closed_form,
    brap_pket_new_analytic,
    brap_pket_new_closed_form,
    brap_qket_new_analytic,
    brap_qket_new_closed_form,
    build_ladder,
    build_qp,
    build_qp_new,
    coherent_position_closed_form,
    coherent_vector,
    commutator_interior_deviation,
    completeness_block,
    completeness_operator_exact,
    completeness_residual,
    derivative_relation_residual,
    eigen_residual,
    fourier_kernel,
    fourier_kernel_exact,
    mbra_q_pket_analytic,
    modified_bra_overlap_pp,
    modified_bra_overlap_qq,
    momentum_wavefunction,
    p_ket_new,
    plane_wave,
    position_wavefunction,
    q_ket_new,
    qdag_minus_q_residual,
    real_limit_deviation,
)

DESK = ModelParams()
FOURIER = ModelParams(hbar=1.0, m_omega=1e4, mp_omegap=1e-4, n_trunc=2000)
REAL = Contour.real_axis()
TILTED = Contour((-2.0, -0.5 - 0.3j, 0.5 + 0.3j, 2.0))


def test_derived_widths():
    p = DESK
    assert p.eps1 == pytest.approx(1 / (50 * (1 - 0.02 / 50)))
    assert p.eps1p == pytest.approx(0.02 / (1 - 0.02 / 50))
    assert (p.eps2, p.eps2p, p.eps3) == pytest.approx((0.01, 0.01, 0.02))
    with pytest.raises(ValueError):
        ModelParams(m_omega=1.0, mp_omegap=2.0)


def test_params_json_round_trip():
    text = '{"hbar":1,"m_omega":50,"mp_omegap":0.02,"n_trunc":120}'
    assert ModelParams.from_json(text) == DESK
    with pytest.raises(ValueError):
        ModelParams.from_dict({"hbar": 1, "mass": 3})


# -- ladder / q, p ----------------------------------------------------------------


def test_ladder_two_levels():
    a, ad = build_ladder(2)
    np.testing.assert_array_equal(a, [[0, 1], [0, 0]])
    np.testing.assert_array_equal(ad, a.T)


@pytest.mark.parametrize("n", [2, 5, 40])
def test_ladder_commutator_corner(n):
    a, ad = build_ladder(n)
    expected = np.eye(n)
    expected[-1, -1] = 1 - n
    np.testing.assert_allclose(a @ ad - ad @ a, expected, atol=1e-12)
    e0 = np.zeros(n)
    e0[0] = 1
    assert np.all(a @ e0 == 0)


def test_q_p_hermitian_and_canonical():
    q, p = build_qp(DESK)
    assert np.linalg.norm(q - q.conj().T) == 0
    assert np.linalg.norm(p - p.conj().T) == 0
    k = DESK.n_trunc - 1
    comm = q @ p - p @ q
    np.testing.assert_allclose(comm[:k, :k], 1j * np.eye(k), atol=1e-12)
    assert (q @ q)[0, 0].real == pytest.approx(1 / (2 * 50))


# -- q_new, p_new ------------------------------------------------------------------


@pytest.mark.parametrize("params", [DESK, ModelParams(1.0, 1e3, 1e-3, 80), ModelParams(0.5, 5.0, 1.0, 60)])
@pytest.mark.parametrize("basis", ["q", "p"])
def test_commutator_interior(params, basis):
    assert commutator_interior_deviation(params, basis) < 1e-12


def test_q_new_non_hermiticity_norm():
    q_new, _ = build_qp_new(DESK)
    _, p = build_qp(DESK)
    lhs = np.linalg.norm(q_new - q_new.conj().T, 2)
    rhs = 2 / DESK.s * np.linalg.norm(p, 2) / DESK.m_omega
    assert lhs == pytest.approx(rhs, rel=1e-12)
    assert lhs > 0


def test_q_new_dagger_approaches_q_like_inverse_sqrt_m_omega():
    ms = [50.0, 200.0, 800.0]
    res = [qdag_minus_q_residual(0.3, ModelParams(1.0, m, 1e-4, 160)) for m in ms]
    assert res[0] > res[1] > res[2]
    slope = np.polyfit(np.log(ms), np.log(res), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.02)


# -- coherent vectors ----------------------------------------------------------------


def test_coherent_zero_is_vacuum():
    v = coherent_vector(0, 10).coeffs
    np.testing.assert_array_equal(v, np.eye(10)[0])


def test_coherent_eigen_residual():
    a, _ = build_ladder(40)
    v = coherent_vector(0.5, 40).coeffs
    assert np.linalg.norm(a @ v - 0.5 * v) / np.linalg.norm(v) < 1e-10


def test_coherent_guard_warns():
    with pytest.warns(UserWarning):
        coherent_vector(4.0, 40)


def test_coherent_overflow_guard():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(OverflowError):
            coherent_vector(60.0, 4000)


@pytest.mark.parametrize("lam", [0.5, 0.3 - 0.8j, 1.2 + 0.4j])
def test_coherent_position_representation(lam):
    m_omega = 2.0
    v = coherent_vector(lam, ModelParams(1.0, m_omega, 0.1, 60))
    x = np.linspace(-2, 2, 21)
    np.testing.assert_allclose(
        position_wavefunction(v, x), coherent_position_closed_form(lam, x, m_omega), rtol=0, atol=1e-8
    )


# -- label kets ----------------------------------------------------------------


@pytest.mark.parametrize("q", [0.3 + 0.1j, -0.5, 0.9 - 0.2j])
def test_q_ket_eigen_residual(q):
    assert eigen_residual(q, DESK, "q") < 1e-6


@pytest.mark.parametrize("p", [0.3 + 0.1j, -0.5, 0.9 - 0.2j])
def test_p_ket_eigen_residual(p):
    assert eigen_residual(p, DESK, "p") < 1e-6


def test_q_ket_at_zero_is_vacuum_multiple():
    v = q_ket_new(0, DESK).coeffs
    assert v[0] == pytest.approx((1 / (4 * math.pi * DESK.eps1)) ** 0.25)
    assert np.all(v[1:] == 0)


def test_truncation_guard_names_minimal_n():
    with pytest.raises(TruncationError) as err:
        q_ket_new(3.0, DESK)
    lam2 = 9.0 / (2 * DESK.eps1)
    assert err.value.n_min == math.ceil(4 * lam2)


def test_eigen_residual_decreases_with_n():
    res = [eigen_residual(0.9, DESK.with_(n_trunc=n), "q") for n in (90, 100, 110, 120)]
    assert all(b < a for a, b in zip(res, res[1:]))


# -- overlaps ----------------------------------------------------------------------


def test_overlap_diagonal_value():
    assert modified_bra_overlap_qq(0.4, 0.4, DESK) == pytest.approx(math.sqrt(1 / (4 * math.pi * DESK.eps1)), rel=1e-12)


def test_overlap_far_apart_vanishes():
    assert abs(modified_bra_overlap_qq(-0.8, 0.9, DESK)) < 1e-12


@pytest.mark.parametrize(
    "q1, q2",
    [(0.3, 0.3), (0.1, 0.25), (0.3 + 0.1j, 0.35 + 0.12j), (0.25 + 0.15j, 0.0), (-0.4 - 0.1j, -0.2 - 0.05j)],
)
def test_overlap_matches_tamed_delta(q1, q2):
    params = DESK.with_(n_trunc=160)
    assert modified_bra_overlap_qq(q1, q2, params) == pytest.approx(tamed_delta(q1 - q2, params.eps1), rel=1e-6)
    assert modified_bra_overlap_pp(q1, q2, params) == pytest.approx(tamed_delta(q1 - q2, params.eps1p), rel=1e-6)


def test_overlap_rejects_wedge_violation():
    with pytest.raises(WedgeError):
        modified_bra_overlap_qq(0.0, 0.2j, DESK)


# closed forms against Hermite synthesis, near each packet where relative error is meaningful


@pytest.mark.parametrize("q", [0.3, 0.3 + 0.1j, -0.4 + 0.05j])
def test_q_ket_representations(q):
    v = q_ket_new(q, DESK)
    centre = DESK.s * q.real if isinstance(q, complex) else DESK.s * q
    x = centre + np.linspace(-0.3, 0.3, 13)
    k = np.linspace(-8, 8, 13) + DESK.m_omega * DESK.s * complex(q).imag
    for closed in (braq_qket_new_closed_form, braq_qket_new_analytic):
        np.testing.assert_allclose(position_wavefunction(v, x), closed(x, q, DESK), rtol=1e-5)
    for closed in (brap_qket_new_closed_form, brap_qket_new_analytic):
        np.testing.assert_allclose(momentum_wavefunction(v, k), closed(k, q, DESK), rtol=1e-5)


@pytest.mark.parametrize("p", [0.3, 0.3 + 0.1j, -0.4 + 0.05j])
def test_p_ket_representations(p):
    v = p_ket_new(p, DESK)
    x = np.linspace(-10, 10, 11)
    k = DESK.s * complex(p).real + np.linspace(-0.2, 0.2, 11)
    for closed in (braq_pket_new_closed_form, braq_pket_new_analytic):
        np.testing.assert_allclose(position_wavefunction(v, x), closed(x, p, DESK), rtol=1e-5)
    for closed in (brap_pket_new_closed_form, brap_pket_new_analytic):
        np.testing.assert_allclose(momentum_wavefunction(v, k), closed(k, p, DESK), rtol=1e-5)


def test_modified_bra_q_on_momentum_ket():
    # m<q|k> is the modified bra of |q>_new contracted with the momentum eigenfunction
    q = 0.3 + 0.1j
    k = np.linspace(-5, 5, 9)
    bra = np.conj(q_ket_new(np.conj(q), DESK).coeffs)
    n = bra.size
    from catkit.fock import hermite_functions

    # <n|k> = conj(<k|n>) = i^n psi_n(k)
    pk = ((1j) ** np.arange(n))[:, None] * hermite_functions(k, n, 1 / DESK.m_omega)
    np.testing.assert_allclose(bra @ pk, mbra_q_pket_analytic(q, k, DESK), rtol=1e-8)


def test_real_limit_collapse():
    devs = [real_limit_deviation(0.3, ModelParams(1.0, m, 0.02, 160)) for m in (50.0, 100.0, 200.0, 400.0)]
    assert all(b < a for a, b in zip(devs, devs[1:]))
    assert devs[-1] < 2e-4


# -- Fourier kernel ----------------------------------------------------------------


def test_fourier_kernel_origin():
    assert fourier_kernel(0, 0, FOURIER) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-7)


@pytest.mark.parametrize("q, p", [(0.3 + 0.1j, 0.2 - 0.05j), (1.0, -1.0), (-0.7 + 0.5j, 0.9 + 0.3j)])
def test_fourier_kernel_limit(q, p):
    val = fourier_kernel(q, p, FOURIER)
    assert val == pytest.approx(fourier_kernel_exact(q, p, FOURIER), rel=1e-10)
    assert abs(val / plane_wave(q, p) - 1) < 1e-3


def test_fourier_kernel_real_labels():
    for q, p in [(0.5, 0.8), (-1.0, 0.3)]:
        assert abs(fourier_kernel(q, p, FOURIER) / plane_wave(q, p) - 1) < 1e-3


@pytest.mark.parametrize("q, p", [(0.3, 0.2), (0.3 + 0.1j, 0.2 - 0.05j), (-0.2 - 0.1j, 0.5)])
def test_fourier_kernel_fock_route_agrees(q, p):
    params = ModelParams(1.0, 4.0, 1.0, 80)
    assert fourier_kernel(q, p, params, "fock") == pytest.approx(fourier_kernel(q, p, params), rel=1e-10)


# -- derivative relations ------------------------------------------------------------


def test_derivative_residual_small_at_fourier_scale():
    # the label-derivative varies on a scale ~ 1/(kappa sqrt(n)), so h must be far below sqrt(eps2)
    assert derivative_relation_residual(0.3 + 0.1j, FOURIER, 1e-6, "q") < 1e-3
    assert derivative_relation_residual(0.2 - 0.05j, FOURIER, 1e-6, "p") < 1e-3


def test_derivative_residual_desk_scale():
    params = ModelParams(1.0, 50.0, 1e-4, 120)
    assert derivative_relation_residual(0.3 + 0.1j, params, 1e-4, "q") < 1e-3


def test_derivative_residual_linear_in_mp_omegap():
    q = 0.3 + 0.1j
    r1 = derivative_relation_residual(q, ModelParams(1.0, 50.0, 0.02, 120), 1e-5, "q")
    r2 = derivative_relation_residual(q, ModelParams(1.0, 50.0, 0.01, 120), 1e-5, "q")
    assert r1 == pytest.approx(0.02 * abs(q), rel=1e-3)
    assert r1 / r2 == pytest.approx(2.0, rel=1e-3)


def test_derivative_residual_p_inverse_in_m_omega():
    p = 0.3 + 0.1j
    r1 = derivative_relation_residual(p, ModelParams(1.0, 50.0, 0.02, 120), 1e-5, "p")
    r2 = derivative_relation_residual(p, ModelParams(1.0, 100.0, 0.02, 120), 1e-5, "p")
    assert r1 == pytest.approx(abs(p) / 50, rel=1e-3)
    assert r1 / r2 == pytest.approx(2.0, rel=1e-3)


# -- completeness --------------------------------------------------------------------


@pytest.mark.parametrize("kind", ["q", "p"])
def test_completeness_block_equals_finite_parameter_operator(kind):
    blk = completeness_block(REAL, DESK, 20, kind)
    np.testing.assert_allclose(blk, completeness_operator_exact(DESK, 20, kind), atol=1e-12)


def test_completeness_block_gaussian_moment_oracle():
    # diagonal entries Gamma(n + 1/2) / (sqrt(2 pi) n!) in closed form
    from scipy.special import gammaln

    blk = completeness_block(REAL, DESK, 10, "q")
    n = np.arange(10)
    expected = np.exp(gammaln(n + 0.5) - gammaln(n + 1)) / math.sqrt(2 * math.pi)
    np.testing.assert_allclose(np.diag(blk).real, expected, rtol=1e-12)


@pytest.mark.parametrize("kind", ["q", "p"])
def test_completeness_deformation_drift(kind):
    a = completeness_block(REAL, DESK, 20, kind)
    b = completeness_block(TILTED, DESK, 20, kind)
    assert np.max(np.abs(a - b)) < 1e-8


def test_completeness_operator_is_scale_free_in_number_basis():
    # exp(-p^2/(hbar m omega)) is dimensionless in the m omega number basis
    blocks = [completeness_operator_exact(ModelParams(1.0, m, 1e-3, 120), 20) for m in (1.0, 50.0, 1e4)]
    np.testing.assert_allclose(blocks[0], blocks[1], atol=1e-13)
    np.testing.assert_allclose(blocks[0], blocks[2], atol=1e-13)


def test_completeness_residual_against_identity_is_order_one():
    # documented gap: the integral equals 1 only as m_omega -> inf
    assert completeness_residual(REAL, DESK, 20) > 0.5


@settings(max_examples=30, deadline=None)
@given(
    st.floats(-0.8, 0.8),
    st.floats(-0.8, 0.8),
    st.floats(-0.3, 0.3),
)
def test_overlap_property_on_shared_horizontal_line(x1, x2, y):
    params = DESK.with_(n_trunc=160)
    q1, q2 = complex(x1, y), complex(x2, y)
    got = modified_bra_overlap_qq(q1, q2, params)
    expected = tamed_delta(q1 - q2, params.eps1)
    assert abs(got - expected) <= 1e-6 * max(abs(expected), 1e-12) + 1e-12
