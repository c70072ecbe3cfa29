"""Two-wavefunction density and current for a local Hamiltonian on a contour grid.

For ``H = -(hbar^2 / 2 m) d^2/dq^2 + V(q)`` the pair

* ``psi``   with ``i hbar d psi/dt = H psi`` and
* ``psi_Q`` with ``i hbar d psi_Q/dt = H^{*q} psi_Q``

gives a density ``rho = psi_Q^{*q} psi`` and a current
``j = (i hbar / 2m) (d(psi_Q^{*q}) psi - psi_Q^{*q} d psi)`` obeying
``d rho/dt + d j/dq = 0`` along any permitted contour.  Here ``*q`` conjugates
coefficients (``m``, the coefficients of ``V``) but keeps ``q`` analytic.

On a complex grid ``psi_Q^{*q}(q) = conj(psi_Q(conj q))`` is not a function of
the grid samples of ``psi_Q``, so the four fields ``psi``, ``psi^{*q}``,
``psi_Q`` and ``psi_Q^{*q}`` are each evolved from analytic initial data:
``psi^{*q}`` and ``psi_Q^{*q}`` obey ``-i hbar df/dt = H^{*q} f`` and
``-i hbar df/dt = H f`` respectively.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from catkit.algebra import ParamExpr, conj_keeping, evaluate, exp_poly, parse
from catkit.contour import Contour, require_permitted

MIN_POINTS = 16
Q = ParamExpr.symbol("q")


class CoarseGridWarning(RuntimeWarning):
    pass


def gaussian_packet(q0: complex = 0.0, p0: complex = 0.0, sigma: float = 0.5, hbar: float = 1.0) -> ParamExpr:
    """``(2 pi sigma^2)^(-1/4) exp(-(q - q0)^2 / (4 sigma^2) + i p0 q / hbar)`` in ``q``."""
    quad = -(Q - q0) ** 2 / (4 * sigma**2) + (1j * p0 / hbar) * Q
    return (2 * math.pi * sigma**2) ** -0.25 * exp_poly(quad)


@dataclass(frozen=True)
class LocalHamiltonianSpec:
    """``-(hbar^2 / 2 m_eff) d^2/dq^2 + V_eff(q)`` sampled along ``contour``.

    Parameters
    ----------
    m_eff : complex
        Effective mass.
    V_eff : ParamExpr or callable
        Potential in the variable ``q``.  A callable must come with ``V_star``.
    contour : Contour
        Permitted path carrying the grid.
    q_range : (float, float)
        Real-part range covered by the grid.
    M : int
        Number of grid points, equally spaced in arc length.
    V_star : callable, optional
        ``V^{*q}``; derived with :func:`conj_keeping` for a ParamExpr ``V_eff``.
    """

    m_eff: complex
    V_eff: ParamExpr | Callable
    contour: Contour = Contour.real_axis()
    q_range: tuple[float, float] = (-6.0, 6.0)
    M: int = 241
    hbar: float = 1.0
    V_star: Callable | None = None

    def __post_init__(self):
        if self.M < MIN_POINTS:
            raise ValueError(f"need at least {MIN_POINTS} grid points, got {self.M}")
        if not self.q_range[1] > self.q_range[0]:
            raise ValueError("q_range must be increasing")
        if self.m_eff == 0:
            raise ValueError("m_eff must be nonzero")
        if not isinstance(self.V_eff, ParamExpr) and self.V_star is None:
            raise ValueError("a callable V_eff needs an explicit V_star")
        require_permitted(self.contour)

    def potential(self, q, conjugate: bool = False) -> np.ndarray:
        q = np.asarray(q, dtype=complex)
        if isinstance(self.V_eff, ParamExpr):
            V = conj_keeping(self.V_eff, {"q"}) if conjugate else self.V_eff
            return np.broadcast_to(np.asarray(evaluate(V, {"q": q}), dtype=complex), q.shape).copy()
        f = self.V_star if conjugate else self.V_eff
        return np.asarray(f(q), dtype=complex)

    def mass(self, conjugate: bool = False) -> complex:
        return complex(self.m_eff).conjugate() if conjugate else complex(self.m_eff)

    @property
    def is_real_grid(self) -> bool:
        return all(z.imag == 0 for z in self.contour.nodes)

    def with_points(self, M: int) -> "LocalHamiltonianSpec":
        return replace(self, M=M)


def build_grid(spec: LocalHamiltonianSpec) -> tuple[np.ndarray, float]:
    """``M`` points along the contour, uniform in arc length; returns ``(q, h)``."""
    lo, hi = spec.q_range
    xs = np.unique(np.concatenate(([lo, hi], [z.real for z in spec.contour.nodes if lo < z.real < hi])))
    zs = spec.contour.at(xs)
    seg = np.abs(np.diff(zs))
    s_nodes = np.concatenate(([0.0], np.cumsum(seg)))
    s = np.linspace(0.0, s_nodes[-1], spec.M)
    q = np.interp(s, s_nodes, zs.real) + 1j * np.interp(s, s_nodes, zs.imag)
    return q, float(s_nodes[-1] / (spec.M - 1))


def second_derivative_matrix(q: np.ndarray) -> np.ndarray:
    """Three-point second derivative on complex, possibly uneven nodes.

    Row ``k`` is exact for quadratics:
    ``2 [f_- / (h_-(h_- + h_+)) - f_0 / (h_- h_+) + f_+ / (h_+(h_- + h_+))]``
    with ``h_- = q_k - q_{k-1}`` and ``h_+ = q_{k+1} - q_k``.  End rows use
    ghost spacings equal to their neighbour and a zero ghost value.
    """
    q = np.asarray(q, dtype=complex)
    h = np.diff(q)
    hm = np.concatenate(([h[0]], h))
    hp = np.concatenate((h, [h[-1]]))
    lower = 2 / (hm * (hm + hp))
    diag = -2 / (hm * hp)
    upper = 2 / (hp * (hm + hp))
    return np.diag(diag) + np.diag(lower[1:], -1) + np.diag(upper[:-1], 1)


def first_derivative(f: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Three-point derivative along complex nodes; first-order one-sided at the ends."""
    f = np.asarray(f, dtype=complex)
    q = np.asarray(q, dtype=complex)
    out = np.empty_like(f)
    hm = q[1:-1] - q[:-2]
    hp = q[2:] - q[1:-1]
    out[1:-1] = (
        -hp / (hm * (hm + hp)) * f[:-2]
        + (hp - hm) / (hm * hp) * f[1:-1]
        + hm / (hp * (hm + hp)) * f[2:]
    )
    out[0] = (f[1] - f[0]) / (q[1] - q[0])
    out[-1] = (f[-1] - f[-2]) / (q[-1] - q[-2])
    return out


def discretize_local_h(spec: LocalHamiltonianSpec, conjugate: bool = False) -> np.ndarray:
    """Dense ``M x M`` matrix of ``H`` (or ``H^{*q}``) with Dirichlet ends.

    Issues :class:`CoarseGridWarning` when ``h`` does not resolve the local
    wavelength ``hbar / sqrt(2 |m| |V|)`` anywhere on the grid.
    """
    q, h = build_grid(spec)
    m = spec.mass(conjugate)
    V = spec.potential(q, conjugate)
    k_max = math.sqrt(2 * abs(m) * float(np.max(np.abs(V)))) / spec.hbar
    if k_max * h > 1.0:
        warnings.warn(
            f"grid step {h:.3g} under-resolves the local wavelength (k h = {k_max * h:.3g} > 1)",
            CoarseGridWarning,
            stacklevel=2,
        )
    return -(spec.hbar**2) / (2 * m) * second_derivative_matrix(q) + np.diag(V)


def local_h_sparse(spec: LocalHamiltonianSpec, conjugate: bool = False) -> sp.csr_matrix:
    """Tridiagonal sparse form of :func:`discretize_local_h`."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CoarseGridWarning)
        H = discretize_local_h(spec, conjugate)
    return sp.diags([np.diag(H, -1), np.diag(H), np.diag(H, 1)], [-1, 0, 1], format="csr")


@dataclass(frozen=True)
class GridWavefunction:
    """Samples of the four evolved fields at one time."""

    psi: np.ndarray
    psi_star: np.ndarray
    psiQ: np.ndarray
    psiQ_star: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        n = len(self.psi)
        for name in ("psi_star", "psiQ", "psiQ_star"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} has length {len(getattr(self, name))}, expected {n}")
        for name in ("psi", "psi_star", "psiQ", "psiQ_star"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has non-finite entries")


def initial_wavefunction(
    spec: LocalHamiltonianSpec,
    psi0: ParamExpr,
    psiQ0: ParamExpr | None = None,
    mode: str = "independent",
) -> GridWavefunction:
    """Fields at ``t0`` from analytic initial data.

    ``mode="independent"`` uses ``psiQ0`` (default ``psi0``) as the Q-side
    field.  ``mode="q_induced"`` sets ``psi_Q = Q psi / h`` with the metric
    of the discretized ``H`` (real grids only, where ``*q`` is plain complex
    conjugation of samples).
    """
    q, h = build_grid(spec)
    ev = lambda e: np.broadcast_to(np.asarray(evaluate(e, {"q": q}), dtype=complex), q.shape).copy()
    psi = ev(psi0)
    psi_star = ev(conj_keeping(psi0, {"q"}))
    if mode == "independent":
        src = psi0 if psiQ0 is None else psiQ0
        return GridWavefunction(psi, psi_star, ev(src), ev(conj_keeping(src, {"q"})))
    if mode == "q_induced":
        from catkit.qmetric import QMetricSystem

        if not spec.is_real_grid:
            raise ValueError("Q-induced initialization needs a real grid")
        system = QMetricSystem.from_hamiltonian(discretize_local_h(spec))
        psiQ = system.Q @ psi / h
        return GridWavefunction(psi, psi_star, psiQ, psiQ.conj())
    raise ValueError(f"unknown mode {mode!r}")


def _expm_multiply(G, v0, stop: float, num: int) -> np.ndarray:
    # scipy's 1-norm estimator draws from the global numpy generator when
    # choosing the Taylor degree; pin it so results repeat bit for bit
    state = np.random.get_state()
    try:
        np.random.seed(0)
        return spla.expm_multiply(G, v0, start=0.0, stop=stop, num=num, endpoint=True)
    finally:
        np.random.set_state(state)


def evolve_pair(spec: LocalHamiltonianSpec, wf0: GridWavefunction, dt: float, steps: int) -> list[GridWavefunction]:
    """``steps + 1`` snapshots at spacing ``dt``.

    Each field is advanced by the exponential of its generator applied to
    the state (``expm_multiply`` on the tridiagonal matrix), so there is no
    time-stepping error.
    """
    H = local_h_sparse(spec)
    Hc = local_h_sparse(spec, conjugate=True)
    a = -1j / spec.hbar
    gens = {"psi": a * H, "psi_star": -a * Hc, "psiQ": a * Hc, "psiQ_star": -a * H}
    fields = {}
    for k, G in gens.items():
        v0 = getattr(wf0, k)
        if steps:
            fields[k] = _expm_multiply(G, v0, steps * dt, steps + 1)
        else:
            fields[k] = v0[None, :]
    return [
        GridWavefunction(fields["psi"][i], fields["psi_star"][i], fields["psiQ"][i], fields["psiQ_star"][i], wf0.time + i * dt)
        for i in range(steps + 1)
    ]


def _pair_fields(wf: GridWavefunction, pair: str) -> tuple[np.ndarray, np.ndarray]:
    if pair == "proper":
        return wf.psiQ_star, wf.psi
    if pair == "psi":
        return wf.psi_star, wf.psi
    if pair == "psiQ":
        return wf.psiQ_star, wf.psiQ
    raise ValueError(f"unknown pair {pair!r}")


def rho_eff(wf: GridWavefunction, pair: str = "proper") -> np.ndarray:
    """``psi_Q^{*q} psi`` (or a control pair)."""
    left, right = _pair_fields(wf, pair)
    return left * right


def j_eff(wf: GridWavefunction, spec: LocalHamiltonianSpec, pair: str = "proper") -> np.ndarray:
    """``(i hbar / 2 m) (d left * right - left * d right)`` along the grid."""
    q, _ = build_grid(spec)
    left, right = _pair_fields(wf, pair)
    dl = first_derivative(left, q)
    dr = first_derivative(right, q)
    return 1j * spec.hbar / (2 * spec.m_eff) * (dl * right - left * dr)


def total_probability(wf: GridWavefunction, spec: LocalHamiltonianSpec, pair: str = "proper") -> complex:
    """Trapezoid ``int_C rho dq`` with complex ``dq``."""
    q, _ = build_grid(spec)
    r = rho_eff(wf, pair)
    return complex(np.sum(0.5 * (r[1:] + r[:-1]) * np.diff(q)))


def normalize_pair(wf: GridWavefunction, spec: LocalHamiltonianSpec) -> GridWavefunction:
    """Rescale ``psi`` (and ``psi^{*q}`` consistently) so that ``int rho dq = 1``."""
    c = 1.0 / total_probability(wf, spec)
    return replace(wf, psi=c * wf.psi, psi_star=np.conj(c) * wf.psi_star)


def is_formal_density(spec: LocalHamiltonianSpec) -> bool:
    """True off the real axis, where rho is complex and has no probability reading."""
    return not spec.is_real_grid


def continuity_residual(
    traj: list[GridWavefunction], spec: LocalHamiltonianSpec, dt: float, pair: str = "proper", margin: int = 2
) -> float:
    """``max |(rho(t+dt) - rho(t-dt)) / 2dt + dj/dq|`` over interior times and points.

    ``margin`` grid points at each end are excluded (one-sided stencils there).
    """
    if len(traj) < 3:
        raise ValueError("need at least three stored times")
    q, _ = build_grid(spec)
    worst = 0.0
    inner = slice(margin, len(q) - margin)
    for k in range(1, len(traj) - 1):
        drho = (rho_eff(traj[k + 1], pair) - rho_eff(traj[k - 1], pair)) / (2 * dt)
        dj = first_derivative(j_eff(traj[k], spec, pair), q)
        worst = max(worst, float(np.max(np.abs(drho + dj)[inner])))
    return worst


def negative_controls(traj: list[GridWavefunction], spec: LocalHamiltonianSpec, dt: float) -> dict:
    """Residuals of the proper pair and of the psi-only and psi_Q-only pairs."""
    res = {p: continuity_residual(traj, spec, dt, p) for p in ("proper", "psi", "psiQ")}
    res["formal_density"] = is_formal_density(spec)
    return res


def run_pair(
    spec: LocalHamiltonianSpec,
    psi0: ParamExpr,
    dt: float,
    steps: int,
    t_start: float = 0.0,
    psiQ0: ParamExpr | None = None,
    mode: str = "independent",
) -> list[GridWavefunction]:
    """Initialize, optionally advance to ``t_start`` in one exponential, then sample."""
    wf = normalize_pair(initial_wavefunction(spec, psi0, psiQ0, mode), spec)
    if t_start:
        wf = evolve_pair(spec, wf, t_start, 1)[-1]
    return evolve_pair(spec, wf, dt, steps)


def sampling_step(spec: LocalHamiltonianSpec, h: float, dt_over_h: float = 0.1) -> float:
    """Time step for continuity sampling: ``c h`` on real grids, ``c h^2`` otherwise.

    Off the real axis ``d^2/dq^2 = e^{-2i theta} d^2/ds^2``, so one of ``psi``
    and ``psi_Q^{*q}`` runs backward-parabolic and grid-scale content grows
    like ``exp(sin(2 theta) (pi / h)^2 t / 2)``.  A step ``~ h^2`` keeps that
    factor bounded under refinement.
    """
    return dt_over_h * h if spec.is_real_grid else dt_over_h * h * h


def refinement_sweep(
    spec: LocalHamiltonianSpec,
    psi0: ParamExpr,
    hs: list[float],
    dt_over_h: float = 0.1,
    t_start: float | None = None,
    psiQ0: ParamExpr | None = None,
) -> dict:
    """Residuals of all three pairs for grid steps ``hs``.

    ``dt`` follows :func:`sampling_step`.  ``t_start`` defaults to 0.5 on real
    grids and 0 on complex ones (see :func:`sampling_step` for why).
    Returns ``{"h": [...], "dt": [...], "proper": [...], "psi": [...],
    "psiQ": [...], "slope": s}`` with ``s`` the log-log slope of the
    proper-pair residual.
    """
    if t_start is None:
        t_start = 0.5 if spec.is_real_grid else 0.0
    out: dict = {"h": [], "dt": [], "proper": [], "psi": [], "psiQ": []}
    _, base_h = build_grid(spec)
    length = base_h * (spec.M - 1)
    for h in hs:
        s = spec.with_points(int(round(length / h)) + 1)
        _, h_act = build_grid(s)
        dt = sampling_step(s, h_act, dt_over_h)
        traj = run_pair(s, psi0, dt, 2, t_start=t_start, psiQ0=psiQ0)
        res = negative_controls(traj, s, dt)
        out["h"].append(h_act)
        out["dt"].append(dt)
        for p in ("proper", "psi", "psiQ"):
            out[p].append(res[p])
    out["slope"] = float(np.polyfit(np.log(out["h"]), np.log(out["proper"]), 1)[0])
    return out


def spec_from_json(text: str) -> tuple[LocalHamiltonianSpec, dict]:
    """Parse a continuity run description.

    Keys: ``m_eff`` ([re, im] or number), ``V`` (s-expression in ``q``),
    ``contour`` (``{"nodes": [[re, im], ...]}``, default real axis),
    ``q_range``, ``M``, ``hbar`` and an optional ``packet``
    (``{"q0": [re, im], "p0": [re, im], "sigma": s}``).  The packet and the
    remaining keys are returned as a dict.
    """
    data = json.loads(text)

    def cplx(v, default=0.0):
        if v is None:
            return complex(default)
        if isinstance(v, (list, tuple)):
            return complex(v[0], v[1])
        return complex(v)

    try:
        contour = Contour.from_json(json.dumps(data["contour"])) if "contour" in data else Contour.real_axis()
        spec = LocalHamiltonianSpec(
            m_eff=cplx(data.get("m_eff"), 1.0),
            V_eff=parse(data.get("V", "0")),
            contour=contour,
            q_range=tuple(data.get("q_range", (-6.0, 6.0))),
            M=int(data.get("M", 241)),
            hbar=float(data.get("hbar", 1.0)),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed continuity spec: {exc}") from exc
    pk = data.get("packet", {})
    extra = {
        "packet": gaussian_packet(cplx(pk.get("q0")), cplx(pk.get("p0")), float(pk.get("sigma", 0.5)), spec.hbar),
        "t_start": None if data.get("t_start") is None else float(data["t_start"]),
        "dt_over_h": float(data.get("dt_over_h", 0.1)),
    }
    return spec, extra
