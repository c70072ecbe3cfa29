"""Truncated Fock-space realisation of the non-hermitian coordinate and momentum.

Two oscillators enter: the unprimed one with mass-frequency product ``m_omega``
and the primed one with ``mp_omegap``.  With ``s = sqrt(1 - mp_omegap/m_omega)``

    q_new = (q - i p / m_omega) / s,      p_new = (p + i mp_omegap q) / s,

and the label kets ``|q>_new``, ``|p>_new`` are (prefactored) coherent states of
the unprimed and primed oscillator respectively.  Each ket family therefore
lives in the number basis of its own oscillator; a :class:`FockVector` records
which one through ``basis_m_omega``.  The momentum kets are hugely squeezed in
the unprimed basis (ratio ``m_omega / mp_omegap``), which is why they are not
forced into a shared space.

The modified bra of a ket family is ``conj(ket(conj(label)))``; for ``|q>_new``
every constant is real and the modified bra has the same coefficients as the
ket, while for ``|p>_new`` the factor ``i`` in the coherent parameter flips sign.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

from .contour import (
    Contour,
    QuadratureSpec,
    delta_sift,
    quadrature_rule,
    require_permitted,
    tamed_delta,
    wedge_margin,
)


class TruncationError(ValueError):
    """The implied coherent parameter does not fit in the truncated space."""

    def __init__(self, lam: complex, n_trunc: int):
        self.n_min = int(math.ceil(4 * abs(lam) ** 2))
        super().__init__(
            f"|lambda|^2 = {abs(lam) ** 2:.4g} exceeds n_trunc/4 for n_trunc = {n_trunc}; "
            f"use n_trunc >= {self.n_min}"
        )


class WedgeError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Physical and truncation parameters.

    Parameters
    ----------
    hbar : float
    m_omega : float
        Mass-frequency product of the oscillator defining ``|q>_new``.
    mp_omegap : float
        Mass-frequency product of the primed oscillator defining ``|p>_new``;
        must be smaller than ``m_omega``.
    n_trunc : int
        Fock dimension N.
    """

    hbar: float = 1.0
    m_omega: float = 50.0
    mp_omegap: float = 0.02
    n_trunc: int = 120

    def __post_init__(self):
        if self.hbar <= 0 or self.m_omega <= 0 or self.mp_omegap <= 0:
            raise ValueError("hbar, m_omega and mp_omegap must be positive")
        if self.mp_omegap >= self.m_omega:
            raise ValueError("mp_omegap must be smaller than m_omega")
        if int(self.n_trunc) != self.n_trunc or self.n_trunc < 2:
            raise ValueError("n_trunc must be an integer >= 2")

    @property
    def ratio(self) -> float:
        return self.mp_omegap / self.m_omega

    @property
    def s(self) -> float:
        """sqrt(1 - m'w'/mw)."""
        return math.sqrt(1.0 - self.ratio)

    @property
    def eps1(self) -> float:
        return self.hbar / (self.m_omega * (1.0 - self.ratio))

    @property
    def eps1p(self) -> float:
        return self.hbar * self.mp_omegap / (1.0 - self.ratio)

    @property
    def eps2(self) -> float:
        return self.hbar / (2.0 * self.m_omega)

    @property
    def eps2p(self) -> float:
        return self.hbar * self.mp_omegap / 2.0

    @property
    def eps3(self) -> float:
        return self.hbar / self.m_omega

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def basis_scale(self, kind: str) -> float:
        if kind == "q":
            return self.m_omega
        if kind == "p":
            return self.mp_omegap
        raise ValueError(f"kind must be 'q' or 'p', got {kind!r}")

    def to_dict(self) -> dict:
        return {"hbar": self.hbar, "m_omega": self.m_omega, "mp_omegap": self.mp_omegap, "n_trunc": self.n_trunc}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        unknown = set(data) - {"hbar", "m_omega", "mp_omegap", "n_trunc"}
        if unknown:
            raise ValueError(f"unknown parameter fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class FockVector:
    """Coefficients on the number basis of the oscillator with ``basis_m_omega``."""

    coeffs: np.ndarray
    basis_m_omega: float
    convention: str = "unnormalized"

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    @property
    def tail(self) -> float:
        """|c_{N-1}| / ||c||, the truncation diagnostic."""
        nrm = self.norm
        return float(abs(self.coeffs[-1]) / nrm) if nrm else 0.0

    def unit(self) -> "FockVector":
        return FockVector(self.coeffs / self.norm, self.basis_m_omega, "unit-norm")


# -- operators -----------------------------------------------------------------


def build_ladder(n: int | ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Annihilation and creation matrices with a|k> = sqrt(k)|k-1>."""
    n = n.n_trunc if isinstance(n, ModelParams) else int(n)
    if n < 2:
        raise ValueError("need at least two levels")
    a = np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)
    return a, a.conj().T.copy()


def build_qp(params: ModelParams, basis: str = "q") -> tuple[np.ndarray, np.ndarray]:
    """q and p on the number basis of the ``basis`` oscillator ('q' unprimed, 'p' primed)."""
    mw = params.basis_scale(basis)
    a, ad = build_ladder(params.n_trunc)
    q = math.sqrt(params.hbar / (2 * mw)) * (a + ad)
    p = -1j * math.sqrt(params.hbar * mw / 2) * (a - ad)
    return q, p


def build_qp_new(params: ModelParams, basis: str = "q") -> tuple[np.ndarray, np.ndarray]:
    q, p = build_qp(params, basis)
    s = params.s
    q_new = (q - 1j * p / params.m_omega) / s
    p_new = (p + 1j * params.mp_omegap * q) / s
    return q_new, p_new


def commutator_interior_deviation(params: ModelParams, basis: str = "q") -> float:
    """Norm of [q_new, p_new] - i hbar on the top-left (N-2) x (N-2) block."""
    qn, pn = build_qp_new(params, basis)
    comm = qn @ pn - pn @ qn
    k = params.n_trunc - 2
    return float(np.linalg.norm(comm[:k, :k] - 1j * params.hbar * np.eye(k), 2))


# -- kets ----------------------------------------------------------------------


def _log_coherent(lam: complex, n: int, log_prefactor: complex = 0.0) -> np.ndarray:
    k = np.arange(n)
    if lam == 0:
        out = np.zeros(n, complex)
        out[0] = np.exp(log_prefactor)
        return out
    logs = log_prefactor + k * np.log(complex(lam)) - 0.5 * gammaln(k + 1)
    if logs.real.max() > 700:
        raise OverflowError(f"coherent coefficients overflow for |lambda| = {abs(lam):.4g}")
    return np.exp(logs)


def coherent_vector(lam: complex, n: int | ModelParams, basis_m_omega: float = 1.0) -> FockVector:
    """Unnormalised coherent vector with coefficients lam^k / sqrt(k!).

    Warns when |lam|^2 > N/4, where the Poisson tail is no longer negligible.
    """
    if isinstance(n, ModelParams):
        basis_m_omega = n.m_omega
        n = n.n_trunc
    if abs(lam) ** 2 > n / 4:
        warnings.warn(f"|lambda|^2 = {abs(lam) ** 2:.3g} > N/4 = {n / 4:.3g}; truncation error may be large")
    return FockVector(_log_coherent(complex(lam), n), basis_m_omega)


def _label_data(label: complex, params: ModelParams, kind: str) -> tuple[complex, complex]:
    """(coherent parameter, log prefactor) of |label>_new in its native basis."""
    label = complex(label)
    if kind == "q":
        eps = params.eps1
        lam = label / math.sqrt(2 * eps)
    elif kind == "p":
        eps = params.eps1p
        lam = 1j * label / math.sqrt(2 * eps)
    else:
        raise ValueError(f"kind must be 'q' or 'p', got {kind!r}")
    return lam, 0.25 * math.log(1 / (4 * math.pi * eps)) - label**2 / (4 * eps)


def label_ket(label: complex, params: ModelParams, kind: str, guard: bool = True) -> FockVector:
    lam, logpre = _label_data(label, params, kind)
    if guard and abs(lam) ** 2 > params.n_trunc / 4:
        raise TruncationError(lam, params.n_trunc)
    return FockVector(_log_coherent(lam, params.n_trunc, logpre), params.basis_scale(kind))


def q_ket_new(q: complex, params: ModelParams, guard: bool = True) -> FockVector:
    """|q>_new on the unprimed number basis; eigenvector of q_new^dagger with eigenvalue q."""
    return label_ket(q, params, "q", guard)


def p_ket_new(p: complex, params: ModelParams, guard: bool = True) -> FockVector:
    """|p>_new on the primed number basis; eigenvector of p_new^dagger with eigenvalue p."""
    return label_ket(p, params, "p", guard)


def modified_bra(label: complex, params: ModelParams, kind: str, guard: bool = True) -> np.ndarray:
    """Row of m<label| = (|conj label>_new)^dagger; analytic in ``label``."""
    return np.conj(label_ket(np.conj(label), params, kind, guard).coeffs)


def eigen_residual(label: complex, params: ModelParams, kind: str = "q") -> float:
    """||(X_new^dagger - label)|label>_new|| / |||label>_new|| with X = q or p."""
    qn, pn = build_qp_new(params, kind)
    op = (qn if kind == "q" else pn).conj().T
    v = label_ket(label, params, kind).coeffs
    return float(np.linalg.norm(op @ v - label * v) / np.linalg.norm(v))


def _require_wedge(diff: complex):
    # compare |Im| with |Re| directly so tiny separations do not underflow to L = 0
    if diff != 0 and abs(diff.imag) >= abs(diff.real):
        raise WedgeError(
            f"L({diff:.4g}) = {wedge_margin(diff):.4g} <= 0: the two labels must lie on a common permitted path"
        )


def modified_bra_overlap(l1: complex, l2: complex, params: ModelParams, kind: str = "q") -> complex:
    """m<l1|l2>_new by brute-force truncated inner product."""
    _require_wedge(complex(l1) - complex(l2))
    return complex(modified_bra(l1, params, kind) @ label_ket(l2, params, kind).coeffs)


def modified_bra_overlap_qq(q_prime: complex, q: complex, params: ModelParams) -> complex:
    """m<q'|q>_new; equals tamed_delta(q' - q, eps1) up to truncation."""
    return modified_bra_overlap(q_prime, q, params, "q")


def modified_bra_overlap_pp(p_prime: complex, p: complex, params: ModelParams) -> complex:
    return modified_bra_overlap(p_prime, p, params, "p")


# -- position / momentum representations -----------------------------------------


def hermite_functions(x, n: int, m_omega: float, hbar: float = 1.0) -> np.ndarray:
    """Oscillator eigenfunctions <x|k>, k < n, as an (n, len(x)) array.

    Uses the normalised three-term recurrence, which stays finite for the
    degrees used here and accepts complex ``x``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    xi = x * math.sqrt(m_omega / hbar)
    out = np.empty((n, x.size), complex)
    base = (m_omega / (math.pi * hbar)) ** 0.25 * np.exp(-(xi**2) / 2)
    h_prev = np.zeros_like(xi)
    h = np.ones_like(xi)
    for k in range(n):
        out[k] = h * base
        h, h_prev = math.sqrt(2 / (k + 1)) * xi * h - math.sqrt(k / (k + 1)) * h_prev, h
    return out


def position_wavefunction(vec: FockVector, x, hbar: float = 1.0) -> np.ndarray:
    """<x|vec> by Hermite-function synthesis."""
    return vec.coeffs @ hermite_functions(x, vec.coeffs.size, vec.basis_m_omega, hbar)


def momentum_wavefunction(vec: FockVector, p, hbar: float = 1.0) -> np.ndarray:
    """<p|vec>; <p|k> = (-i)^k times the Hermite function with scale 1/m_omega."""
    n = vec.coeffs.size
    phases = (-1j) ** np.arange(n)
    return (vec.coeffs * phases) @ hermite_functions(p, n, 1.0 / vec.basis_m_omega, hbar)


def coherent_position_closed_form(lam: complex, x, m_omega: float, hbar: float = 1.0):
    """<x|lam>_coh for the unnormalised coherent state."""
    x = np.asarray(x, dtype=complex)
    pre = (m_omega / (math.pi * hbar)) ** 0.25
    return pre * np.exp(0.5 * lam**2 - m_omega / (2 * hbar) * (x - lam * math.sqrt(2 * hbar / m_omega)) ** 2)


def coherent_momentum_closed_form(lam: complex, p, m_omega: float, hbar: float = 1.0):
    p = np.asarray(p, dtype=complex)
    pre = (1 / (math.pi * hbar * m_omega)) ** 0.25
    return pre * np.exp(-0.5 * lam**2 - (p + 1j * lam * math.sqrt(2 * hbar * m_omega)) ** 2 / (2 * hbar * m_omega))


def phase_space_centre(label: complex, params: ModelParams, kind: str = "q") -> tuple[float, float]:
    """(q0, p0) for |q>_new or (q0', p0') for |p>_new."""
    s = params.s
    label = complex(label)
    if kind == "q":
        return s * label.real, params.m_omega * s * label.imag
    return -s * label.imag / params.mp_omegap, s * label.real


def braq_qket_new_closed_form(x, q: complex, params: ModelParams):
    """<x|q>_new for real x, written through (q0, p0)."""
    h, mw = params.hbar, params.m_omega
    q0, p0 = phase_space_centre(q, params, "q")
    x = np.asarray(x, dtype=float)
    pre = math.sqrt(mw / (2 * math.pi * h)) * params.s**0.5
    return pre * np.exp(p0**2 / (2 * h * mw) - 1j * q0 * p0 / h - mw / (2 * h) * (x - q0) ** 2 + 1j * p0 * x / h)


def brap_qket_new_closed_form(k, q: complex, params: ModelParams):
    """<k|q>_new for real momentum k."""
    h, mw = params.hbar, params.m_omega
    q0, p0 = phase_space_centre(q, params, "q")
    k = np.asarray(k, dtype=float)
    pre = params.s**0.5 / math.sqrt(2 * math.pi * h)
    return pre * np.exp(p0**2 / (2 * h * mw) - (k - p0) ** 2 / (2 * h * mw) - 1j * q0 * k / h)


def brap_pket_new_closed_form(k, p: complex, params: ModelParams):
    """<k|p>_new for real momentum k, written through (q0', p0')."""
    h, mw = params.hbar, params.mp_omegap
    q0, p0 = phase_space_centre(p, params, "p")
    k = np.asarray(k, dtype=float)
    pre = params.s**0.5 / math.sqrt(2 * math.pi * h * mw)
    return pre * np.exp(mw * q0**2 / (2 * h) + 1j * q0 * p0 / h - (k - p0) ** 2 / (2 * h * mw) - 1j * q0 * k / h)


def braq_pket_new_closed_form(x, p: complex, params: ModelParams):
    """<x|p>_new for real x."""
    h, mw = params.hbar, params.mp_omegap
    q0, p0 = phase_space_centre(p, params, "p")
    x = np.asarray(x, dtype=float)
    pre = params.s**0.5 / math.sqrt(2 * math.pi * h)
    return pre * np.exp(mw * q0**2 / (2 * h) - mw / (2 * h) * (x - q0) ** 2 + 1j * p0 * x / h)


# Forms that keep analyticity in the label (and in x, k).


def braq_qket_new_analytic(x, q: complex, params: ModelParams):
    """<x|q>_new = s^(1/2) tamed_delta(x - s q, eps2)."""
    return params.s**0.5 * tamed_delta(np.asarray(x, complex) - params.s * q, params.eps2)


def brap_pket_new_analytic(k, p: complex, params: ModelParams):
    """<k|p>_new = s^(1/2) tamed_delta(k - s p, eps2')."""
    return params.s**0.5 * tamed_delta(np.asarray(k, complex) - params.s * p, params.eps2p)


def brap_qket_new_analytic(k, q: complex, params: ModelParams):
    """<k|q>_new = (2 pi hbar)^(-1/2) s^(1/2) exp(-k^2/(2 hbar mw)) exp(-i s k q / hbar)."""
    h = params.hbar
    k = np.asarray(k, complex)
    return params.s**0.5 / math.sqrt(2 * math.pi * h) * np.exp(-(k**2) / (2 * h * params.m_omega) - 1j * params.s * k * q / h)


def braq_pket_new_analytic(x, p: complex, params: ModelParams):
    """<x|p>_new = (2 pi hbar)^(-1/2) s^(1/2) exp(-m'w' x^2/(2 hbar)) exp(i s p x / hbar)."""
    h = params.hbar
    x = np.asarray(x, complex)
    return params.s**0.5 / math.sqrt(2 * math.pi * h) * np.exp(-params.mp_omegap * x**2 / (2 * h) + 1j * params.s * p * x / h)


def mbra_q_pket_analytic(q: complex, k, params: ModelParams):
    """m<q|k> for real momentum k: the *_q image of <k|q>_new."""
    h = params.hbar
    k = np.asarray(k, complex)
    return params.s**0.5 / math.sqrt(2 * math.pi * h) * np.exp(-(k**2) / (2 * h * params.m_omega) + 1j * params.s * k * q / h)


# -- Fourier kernel ------------------------------------------------------------


def plane_wave(q: complex, p: complex, hbar: float = 1.0) -> complex:
    """(2 pi hbar)^(-1/2) exp(i p q / hbar), the large-m_omega / small-m'w' limit."""
    return complex(np.exp(1j * p * q / hbar) / math.sqrt(2 * math.pi * hbar))


def fourier_kernel_exact(q: complex, p: complex, params: ModelParams) -> complex:
    """Closed-form Gaussian value of m<q|p>_new at finite parameters."""
    h, s, r = params.hbar, params.s, params.ratio
    expo = (1j * s**2 * p * q / h - params.mp_omegap * s**2 * q**2 / (2 * h) - params.eps2 * s**2 * p**2 / h**2) / (1 + r)
    return complex(s / math.sqrt(2 * math.pi * h) / math.sqrt(1 + r) * np.exp(expo))


def fourier_kernel(q: complex, p: complex, params: ModelParams, method: str = "quadrature") -> complex:
    """m<q|p>_new.

    ``method="quadrature"`` integrates m<q|x> <x|p>_new over x along a
    permitted path through the saddle ``s q``; it needs no truncation and works
    at any mass-frequency ratio.  ``method="fock"`` projects the primed-basis
    Fock vector of ``|p>_new`` onto the unprimed number basis and contracts it
    with the modified bra; it needs ``n_trunc`` large enough to hold the
    squeezed momentum ket, so only moderate ratios are practical.
    """
    q, p = complex(q), complex(p)
    if method == "quadrature":
        a = params.s * q
        c = Contour.horizontal_through(a)
        f = lambda x: params.s**0.5 * braq_pket_new_analytic(x, p, params)
        return delta_sift(f, c, params.eps2, a)
    if method == "fock":
        return complex(modified_bra(q, params, "q") @ _project_p_ket(p, params))
    raise ValueError(f"unknown method {method!r}")


def _project_p_ket(p: complex, params: ModelParams, nodes: int = 4000) -> np.ndarray:
    """Coefficients of |p>_new on the unprimed number basis by real-axis quadrature."""
    n = params.n_trunc
    half = 1.2 * math.sqrt(2 * n * params.hbar / params.m_omega) + 10 * math.sqrt(params.hbar / params.mp_omegap)
    x, w = np.polynomial.legendre.leggauss(nodes)
    x, w = half * x, half * w
    psi = position_wavefunction(p_ket_new(p, params), x, params.hbar)
    phi = hermite_functions(x, n, params.m_omega, params.hbar)
    d = (phi.conj() * (w * psi)).sum(axis=1)
    return d


# -- derivative relations --------------------------------------------------------


def derivative_relation_residual(label: complex, params: ModelParams, h: float = 1e-4, kind: str = "q") -> float:
    """Relative defect of p_new^dagger|q> = i hbar d/dq |q> (kind 'q') or of
    q_new^dagger|p> = (hbar/i) d/dp |p> (kind 'p').

    The derivative is a centred difference of step ``h`` in the label.  The
    exact defect is ``m'w' |q|`` (kind 'q') or ``|p| / m_omega`` (kind 'p') plus
    O(h^2) and truncation.
    """
    qn, pn = build_qp_new(params, kind)
    v = label_ket(label, params, kind).coeffs
    dv = (label_ket(label + h, params, kind, guard=False).coeffs - label_ket(label - h, params, kind, guard=False).coeffs) / (2 * h)
    if kind == "q":
        lhs, rhs = pn.conj().T @ v, 1j * params.hbar * dv
    else:
        lhs, rhs = qn.conj().T @ v, -1j * params.hbar * dv
    return float(np.linalg.norm(lhs - rhs) / np.linalg.norm(v))


def real_limit_deviation(q_real: float, params: ModelParams, nodes: int = 2000) -> float:
    """||  |q>_new - |q>_proxy || / || |q>_proxy || for real q.

    The proxy is the Fock projection of the position wavefunction
    tamed_delta(x - q, eps2), computed by real-axis quadrature of Hermite functions.
    """
    n = params.n_trunc
    half = math.sqrt(2 * n * params.hbar / params.m_omega) + abs(q_real) + 1.0
    x, w = np.polynomial.legendre.leggauss(nodes)
    x, w = half * x + q_real, half * w
    phi = hermite_functions(x, n, params.m_omega, params.hbar)
    proxy = (phi.conj() * (w * tamed_delta(x - q_real, params.eps2))).sum(axis=1)
    v = q_ket_new(q_real, params).coeffs
    return float(np.linalg.norm(v - proxy) / np.linalg.norm(proxy))


def qdag_minus_q_residual(q_real: float, params: ModelParams) -> float:
    """||(q_new^dagger - q)|q>_new|| / |||q>_new|| with q the ordinary coordinate matrix."""
    q, _ = build_qp(params, "q")
    qn, _ = build_qp_new(params, "q")
    v = q_ket_new(q_real, params).coeffs
    return float(np.linalg.norm((qn.conj().T - q) @ v) / np.linalg.norm(v))


# -- completeness ----------------------------------------------------------------


def _completeness_window(params: ModelParams, kind: str, k: int, c: Contour) -> tuple[float, float]:
    eps = params.eps1 if kind == "q" else params.eps1p
    smax = c.max_slope()
    half = math.sqrt(eps) * (math.sqrt(4 * k) + 14.0) / math.sqrt(max(1 - smax**2, 1e-12))
    return -half, half


def completeness_block(c: Contour, params: ModelParams, k: int = 20, kind: str = "q", spec: QuadratureSpec | None = None) -> np.ndarray:
    """Top-left k x k block of the integral of |l>_new m<l| dl along ``c``."""
    require_permitted(c)
    if k > params.n_trunc // 2:
        raise ValueError("k must not exceed n_trunc / 2")
    eps = params.eps1 if kind == "q" else params.eps1p
    spec = spec or QuadratureSpec(nodes_per_segment=32, panel_width=math.sqrt(eps))
    lo, hi = _completeness_window(params, kind, k, c)
    # only the first k coefficients matter, so no truncation guard is needed here
    sub = params.with_(n_trunc=max(k, 2))

    def block(n):
        z, w, _ = quadrature_rule(c, n, lo, hi, spec.panel_width)
        kets = np.array([label_ket(zz, sub, kind, guard=False).coeffs for zz in z])
        bras = np.array([modified_bra(zz, sub, kind, guard=False) for zz in z])
        return (kets * w[:, None]).T @ bras

    prev = block(spec.nodes_per_segment)
    cur = block(2 * spec.nodes_per_segment)
    if np.max(np.abs(cur - prev)) > 1e-10:
        cur = block(4 * spec.nodes_per_segment)
    return cur[:k, :k]


def completeness_residual(c: Contour, params: ModelParams, k: int = 20, kind: str = "q", spec: QuadratureSpec | None = None) -> float:
    """Spectral norm of (block of the completeness integral) - identity."""
    blk = completeness_block(c, params, k, kind, spec)
    return float(np.linalg.norm(blk - np.eye(k), 2))


def completeness_operator_exact(params: ModelParams, k: int = 20, kind: str = "q", pad: int = 80) -> np.ndarray:
    """Finite-parameter value of the completeness integral on the k x k block.

    The integral equals exp(-p^2 / (hbar m_omega)) for the coordinate kets and
    exp(-m'w' q^2 / hbar) for the momentum kets; both tend to 1 only in the
    limits m_omega -> inf and m'w' -> 0.
    """
    big = params.with_(n_trunc=k + pad)
    q, p = build_qp(big, kind)
    if kind == "q":
        op = expm(-(p @ p) / (params.hbar * params.m_omega))
    else:
        op = expm(-params.mp_omegap * (q @ q) / params.hbar)
    return op[:k, :k]
