"""Time development under a diagonalizable non-hermitian ``H``.

States are propagated exactly in the eigenbasis,
``psi(t) = P exp(-i D (t - t0) / hbar) P^-1 psi0``.  When the largest imaginary
part ``B`` of the spectrum is positive the raw state grows like
``exp(B (t - t0) / hbar)``; every normalized quantity is therefore computed in
the rescaled gauge ``exp(-B (t - t0) / hbar) psi(t)``, which normalization
removes anyway.

Over long times the eigencomponents with maximal ``Im lambda`` dominate and the
normalized state follows the Q-hermitian generator
``H_eff = P Re(D)|_A P^-1``; :func:`suppression_distance` measures how fast.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from catkit.qmetric import QMetricSystem, iq_inner, normalize_columns

#: rescale when B (t - t0) / hbar exceeds this (exp(300) ~ 1e130)
GAUGE_THRESHOLD = 300.0


class ZeroStateError(ValueError):
    pass


class EmptySuppressionTargetError(ValueError):
    pass


class RescaledGaugeWarning(RuntimeWarning):
    pass


def _eigen_coeffs(system: QMetricSystem, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (system.n,):
        raise ValueError(f"state has shape {psi.shape}, expected ({system.n},)")
    return np.linalg.solve(system.P, psi)


def max_im_set(D, tau_A: float | None = None) -> tuple[np.ndarray, float]:
    """Indices whose ``Im lambda`` is within ``tau_A`` of the maximum ``B``.

    ``D`` may be a diagonal matrix or a vector of eigenvalues.  The default
    tie tolerance is ``1e-9 |B| + 1e-12``.
    """
    lam = np.asarray(D, dtype=complex)
    if lam.ndim == 2:
        lam = np.diag(lam)
    B = float(np.max(lam.imag))
    if tau_A is None:
        tau_A = 1e-9 * abs(B) + 1e-12
    if tau_A < 0:
        raise ValueError("tau_A must be non-negative")
    return np.nonzero(B - lam.imag <= tau_A)[0], B


def spectral_gap(D, A) -> float:
    """``Delta = B - max_{i not in A} Im lambda_i`` (inf when A is everything)."""
    lam = np.asarray(D, dtype=complex)
    if lam.ndim == 2:
        lam = np.diag(lam)
    rest = np.setdiff1d(np.arange(lam.size), A)
    if rest.size == 0:
        return math.inf
    return float(np.max(lam.imag[A]) - np.max(lam.imag[rest]))


def build_h_eff(system: QMetricSystem, A) -> np.ndarray:
    """``H_eff = P D~_R P^-1`` with ``D~_R`` keeping ``Re lambda_i`` on ``A`` only."""
    lam = system.eigenvalues
    d = np.zeros(system.n)
    d[np.asarray(A, dtype=int)] = lam.real[np.asarray(A, dtype=int)]
    return system.P @ np.diag(d) @ system.P_inv


def evolve_gauged(system: QMetricSystem, psi0, t0: float, t: float, hbar: float = 1.0, rescale: bool | None = None):
    """Propagated state and log gauge factor ``g`` with ``psi(t) = exp(g) * out``.

    With ``rescale=None`` the B-gauge is applied only past the overflow
    threshold; ``True`` forces it, ``False`` forbids it.
    """
    tau = t - t0
    lam = system.eigenvalues
    B = float(np.max(lam.imag))
    g = B * tau / hbar
    if rescale is None:
        rescale = g > GAUGE_THRESHOLD
    shift = g if rescale else 0.0
    c = _eigen_coeffs(system, psi0) * np.exp(-1j * lam * tau / hbar - shift)
    return system.P @ c, shift


def evolve(system: QMetricSystem, psi0, t0: float, t: float, hbar: float = 1.0) -> np.ndarray:
    """Exact ``P exp(-i D (t - t0) / hbar) P^-1 psi0``.

    Past the overflow threshold the rescaled state ``exp(-B (t-t0)/hbar) psi``
    is returned and a :class:`RescaledGaugeWarning` is issued.
    """
    out, shift = evolve_gauged(system, psi0, t0, t, hbar)
    if shift:
        warnings.warn(f"returned psi(t) * exp(-{shift:.4g}) to avoid overflow", RescaledGaugeWarning, stacklevel=2)
    return out


def normalize_q(psi, Q) -> np.ndarray:
    """``psi / sqrt(<psi|_Q psi>)``."""
    psi = np.asarray(psi, dtype=complex)
    n2 = iq_inner(psi, psi, Q).real
    if not n2 > 0:
        raise ZeroStateError("cannot normalize the zero state")
    return psi / math.sqrt(n2)


@dataclass
class EvolutionRun:
    """A system, an initial state and the trajectory on ``times``.

    ``psi`` holds the raw state, or its rescaled form when ``rescaled`` is set
    (then ``psi[k] * exp(log_gauge[k])`` is the raw state).  ``psi_N`` is always
    the I_Q-normalized state.
    """

    system: QMetricSystem
    psi0: np.ndarray
    t0: float
    times: np.ndarray
    hbar: float = 1.0
    psi: np.ndarray = field(init=False, repr=False)
    psi_N: np.ndarray = field(init=False, repr=False)
    log_gauge: np.ndarray = field(init=False, repr=False)
    rescaled: bool = field(init=False, default=False)

    def __post_init__(self):
        self.psi0 = np.asarray(self.psi0, dtype=complex)
        self.times = np.atleast_1d(np.asarray(self.times, dtype=float))
        if not np.any(self.psi0):
            raise ZeroStateError("psi0 is the zero vector")
        lam = self.system.eigenvalues
        B = float(np.max(lam.imag))
        self.rescaled = bool(np.any(B * (self.times - self.t0) / self.hbar > GAUGE_THRESHOLD))
        states, gauges = [], []
        for t in self.times:
            s, g = evolve_gauged(self.system, self.psi0, self.t0, t, self.hbar, rescale=self.rescaled)
            states.append(s)
            gauges.append(g)
        self.psi = np.array(states)
        self.log_gauge = np.array(gauges)
        self.psi_N = np.array([self.state_N(t) for t in self.times])

    def coeffs_N(self, t: float) -> np.ndarray:
        """Eigen-coefficients of ``psi_N(t)``; their 2-norm is the I_Q norm."""
        lam = self.system.eigenvalues
        B = float(np.max(lam.imag))
        tau = t - self.t0
        c = _eigen_coeffs(self.system, self.psi0) * np.exp(-1j * lam * tau / self.hbar - B * tau / self.hbar)
        nrm = np.linalg.norm(c)
        if nrm == 0:
            raise ZeroStateError("state vanished")
        return c / nrm

    def state_N(self, t: float) -> np.ndarray:
        return self.system.P @ self.coeffs_N(t)

    def heisenberg_operator(self, O, t: float) -> np.ndarray:
        """``O_QH(t, t0) = (n0^2 / n(t)^2) e^{i H^{dagger Q} tau} O e^{-i H tau}``.

        Built in the eigenbasis; the norm ratio cancels the growth of both
        exponentials, so the B-gauge is applied on each side.
        """
        s = self.system
        lam = s.eigenvalues
        B = float(np.max(lam.imag))
        tau = (t - self.t0) / self.hbar
        c0 = _eigen_coeffs(s, self.psi0)
        left = np.exp(1j * lam.conj() * tau - B * tau)
        right = np.exp(-1j * lam * tau - B * tau)
        n0_sq = np.vdot(c0, c0).real
        nt_sq = np.vdot(c0 * right, c0 * right).real
        Pinv = s.P_inv
        core = (left[:, None] * (Pinv @ np.asarray(O, dtype=complex) @ s.P)) * right[None, :]
        return (n0_sq / nt_sq) * (s.P @ core @ Pinv)


def run_evolution(system: QMetricSystem, psi0, t0: float, times, hbar: float = 1.0) -> EvolutionRun:
    return EvolutionRun(system, np.asarray(psi0, dtype=complex), float(t0), np.asarray(times, dtype=float), hbar)


def expectation_q(O, run: EvolutionRun, t: float) -> complex:
    """Schrodinger-picture ``_N<psi(t)|_Q O |psi(t)>_N``."""
    psi = run.state_N(t)
    return iq_inner(psi, np.asarray(O) @ psi, run.system.Q)


def expectation_q_heisenberg(O, run: EvolutionRun, t: float) -> complex:
    """Same value via ``_N<psi(t0)|_Q O_QH(t, t0) |psi(t0)>_N``."""
    psi0 = run.state_N(run.t0)
    return iq_inner(psi0, run.heisenberg_operator(O, t) @ psi0, run.system.Q)


def h_qa_expectation(run: EvolutionRun, t: float) -> complex:
    """``_N<psi(t)|_Q H_Qa |psi(t)>_N = i sum Im(lambda_i) |c_i|^2`` (purely imaginary)."""
    c = run.coeffs_N(t)
    return 1j * float(np.sum(run.system.eigenvalues.imag * np.abs(c) ** 2))


def schrodinger_residual(run: EvolutionRun, t: float, dt: float) -> float:
    """``|| i hbar (psi_N(t+dt) - psi_N(t-dt)) / 2dt - (H - <H_Qa>_N) psi_N(t) ||``."""
    s = run.system
    dpsi = (run.state_N(t + dt) - run.state_N(t - dt)) / (2 * dt)
    psi = run.state_N(t)
    rhs = s.H @ psi - h_qa_expectation(run, t) * psi
    return float(np.linalg.norm(1j * run.hbar * dpsi - rhs))


def heisenberg_residual(run: EvolutionRun, O, t: float, dt: float) -> float:
    """Frobenius residual of ``i hbar dO_QH/dt = O_QH H - H^{dagger Q} O_QH - 2 <H_Qa>_N O_QH``."""
    s = run.system
    dO = (run.heisenberg_operator(O, t + dt) - run.heisenberg_operator(O, t - dt)) / (2 * dt)
    Ot = run.heisenberg_operator(O, t)
    Hd = s.dag_q(s.H)
    rhs = Ot @ s.H - Hd @ Ot - 2 * h_qa_expectation(run, t) * Ot
    return float(np.linalg.norm(1j * run.hbar * dO - rhs))


def convergence_slope(dts, residuals) -> float:
    """Least-squares slope of log(residual) against log(dt)."""
    return float(np.polyfit(np.log(dts), np.log(residuals), 1)[0])


@dataclass
class SuppressionReport:
    A: np.ndarray
    B: float
    gap: float
    H_eff: np.ndarray
    distances: np.ndarray  # columns t, d(t)
    fitted_rate: float
    tau_A: float
    rescaled: bool = False

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "B": self.B,
            "gap": self.gap,
            "tau_A": self.tau_A,
            "fitted_rate": self.fitted_rate,
            "rescaled": self.rescaled,
            "distances": self.distances.tolist(),
        }


def _target_coeffs(run: EvolutionRun, A) -> np.ndarray:
    c0 = _eigen_coeffs(run.system, run.psi0)
    mask = np.zeros(c0.size, bool)
    mask[A] = True
    if np.linalg.norm(c0[mask]) <= 1e-14 * np.linalg.norm(c0):
        raise EmptySuppressionTargetError("suppression target empty: psi0 has no component on the max-Im eigenspace")
    return np.where(mask, c0, 0)


def effective_state_N(run: EvolutionRun, A, t: float) -> np.ndarray:
    """Eigen-coefficients of ``psi~_N(t)``: the A-projection of ``psi(t0)`` evolved by ``H_eff``."""
    lam = run.system.eigenvalues
    c = _target_coeffs(run, A) * np.exp(-1j * lam.real * (t - run.t0) / run.hbar)
    return c / np.linalg.norm(c)


def suppression_distance(run: EvolutionRun, t: float, A=None) -> float:
    """``min_phi || psi_N(t) - e^{i phi} psi~_N(t) ||_Q``.

    Evaluated on eigen-coefficients, where the I_Q norm is the Euclidean norm.
    """
    if A is None:
        A, _ = max_im_set(run.system.D)
    a = run.coeffs_N(t)
    b = effective_state_N(run, A, t)
    ov = np.vdot(b, a)
    phase = ov / abs(ov) if ov != 0 else 1.0
    return float(np.linalg.norm(a - phase * b))


def effective_norm_drift(run: EvolutionRun, A, t1: float, t2: float) -> float:
    """Change per unit time of the I_Q norm of ``exp(-i H_eff tau) psi~(t0)``.

    Uses ``expm`` and the metric directly so the check does not rely on the
    eigenbasis identity it is meant to confirm.
    """
    s = run.system
    H_eff = build_h_eff(s, A)
    psi_t = s.P @ _target_coeffs(run, A)
    norms = []
    for t in (t1, t2):
        v = sla.expm(-1j * H_eff * (t - run.t0) / run.hbar) @ psi_t
        norms.append(math.sqrt(iq_inner(v, v, s.Q).real))
    return abs(norms[1] - norms[0]) / norms[0] / abs(t2 - t1)


def effective_schrodinger_residual(run: EvolutionRun, A, t: float, dt: float) -> float:
    """``|| i hbar dpsi~_N/dt - H_eff psi~_N ||`` by centred differences."""
    s = run.system
    H_eff = build_h_eff(s, A)
    f = lambda u: s.P @ effective_state_N(run, A, u)
    d = (f(t + dt) - f(t - dt)) / (2 * dt)
    return float(np.linalg.norm(1j * run.hbar * d - H_eff @ f(t)))


def fit_decay_rate(ts, ds) -> float:
    """Minus the least-squares slope of ``log d`` against ``t``."""
    ts = np.asarray(ts, dtype=float)
    ds = np.asarray(ds, dtype=float)
    return float(-np.polyfit(ts, np.log(ds), 1)[0])


def suppression_report(
    system: QMetricSystem,
    psi0,
    t0: float = 0.0,
    t_fit: tuple[float, float] = (5.0, 25.0),
    n_points: int = 81,
    hbar: float = 1.0,
    tau_A: float | None = None,
    d_max: float = 0.1,
) -> SuppressionReport:
    """Decay of the distance to the effective dynamics, fitted over ``t_fit``.

    Only points with ``d <= d_max`` enter the fit (when at least five do):
    for larger ``d`` the normalization bends ``log d`` away from a straight
    line, since ``d^2 = 2 - 2 / sqrt(1 + x^2)`` for a pure two-level mix ``x``.
    """
    A, B = max_im_set(system.D, tau_A)
    if tau_A is None:
        tau_A = 1e-9 * abs(B) + 1e-12
    times = t0 + np.linspace(t_fit[0], t_fit[1], n_points)
    run = run_evolution(system, psi0, t0, times, hbar)
    ds = np.array([suppression_distance(run, t, A) for t in times])
    good = ds > 0
    if np.count_nonzero(good & (ds <= d_max)) >= 5:
        good &= ds <= d_max
    rate = fit_decay_rate(times[good], ds[good]) * hbar if good.sum() >= 2 else math.inf
    return SuppressionReport(
        A=A,
        B=B,
        gap=spectral_gap(system.D, A),
        H_eff=build_h_eff(system, A),
        distances=np.column_stack([times, ds]),
        fitted_rate=rate,
        tau_A=tau_A,
        rescaled=run.rescaled,
    )


def random_phase_state(rng: np.random.Generator, system: QMetricSystem) -> np.ndarray:
    """``P c`` with unit-modulus, random-phase eigen-coefficients ``c``."""
    return system.P @ np.exp(2j * np.pi * rng.uniform(size=system.n))


def random_suppression_system(
    rng: np.random.Generator,
    n: int,
    gap_range: tuple[float, float] = (0.2, 0.5),
    b: float = 0.5,
    rest_gap: float = 0.5,
    spread: float = 0.5,
) -> QMetricSystem:
    """Seeded system with a unique max-Im eigenvalue and a controlled gap.

    ``Im lambda`` is ``b`` for one eigenvalue, ``b - gap`` for the next, and at
    most ``b - gap - rest_gap`` for the others, so a fit over moderate times
    sees a single exponential.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    gap = rng.uniform(*gap_range)
    im = np.empty(n)
    im[0] = b
    im[1] = b - gap
    im[2:] = b - gap - rest_gap - rng.uniform(0, 1, n - 2)
    lam = rng.standard_normal(n) + 1j * im
    for _ in range(200):
        G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        U, _ = np.linalg.qr(G)
        E = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        P = normalize_columns(U + spread * E / np.sqrt(n))
        if np.linalg.cond(P) < 1e3:
            return QMetricSystem.from_hamiltonian(P @ np.diag(lam) @ np.linalg.inv(P))
    raise RuntimeError("could not draw a well-conditioned eigenbasis")


def state_from_json(text: str) -> np.ndarray:
    """Parse ``{"re": [...], "im": [...]}``; ``im`` may be omitted."""
    data = json.loads(text)
    try:
        re_ = np.asarray(data["re"], dtype=float)
        im_ = np.asarray(data.get("im", np.zeros_like(re_)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed state JSON: {exc}") from exc
    if re_.ndim != 1 or re_.shape != im_.shape:
        raise ValueError("state JSON: re and im must be equal-length lists")
    return re_ + 1j * im_


def trajectory_table(run: EvolutionRun, observables: dict[str, np.ndarray] | None = None, A=None) -> tuple[list[str], list[list[float]]]:
    """Rows ``t, d_t, norm, expectation_*`` for CSV output.

    ``norm`` is the I_Q norm of the stored (possibly rescaled) state; complex
    expectations contribute ``_re`` and ``_im`` columns.
    """
    observables = observables or {}
    s = run.system
    if A is None:
        A, _ = max_im_set(s.D)
    header = ["t", "d_t", "norm"]
    for name in observables:
        header += [f"expectation_{name}_re", f"expectation_{name}_im"]
    rows = []
    for k, t in enumerate(run.times):
        try:
            d = suppression_distance(run, t, A)
        except EmptySuppressionTargetError:
            d = float("nan")
        row = [float(t), d, math.sqrt(iq_inner(run.psi[k], run.psi[k], s.Q).real)]
        for O in observables.values():
            v = expectation_q(O, run, t)
            row += [v.real, v.imag]
        rows.append(row)
    return header, rows

