"""The acceptance checks, shared by the command line and the test suite.

Every check draws its randomness from its own child of one seeded
``SeedSequence`` so that running a single suite reproduces the numbers of a
full run.  A check yields named measures ``(name, value, tolerance)``; the
record value is the worst ratio ``value / tolerance`` and passes when it
does not exceed the record tolerance (1 unless overridden).
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator

import numpy as np

from catkit import algebra as alg
from catkit.contour import Contour, QuadratureSpec, delta_sift, integrate, tamed_delta
from catkit.current import LocalHamiltonianSpec, gaussian_packet, refinement_sweep
from catkit.evolution import (
    convergence_slope,
    effective_norm_drift,
    heisenberg_residual,
    random_phase_state,
    random_suppression_system,
    run_evolution,
    schrodinger_residual,
    suppression_report,
)
from catkit.fock import (
    ModelParams,
    completeness_block,
    eigen_residual,
    fourier_kernel,
    modified_bra_overlap_pp,
    modified_bra_overlap_qq,
    plane_wave,
)
from catkit.kernel import OperatorPoly, matrix_element_check, round_trip_error
from catkit.qmetric import (
    QMetricSystem,
    metric_residual,
    q_normality_residual,
    random_hamiltonian,
    rel_fro,
    split_qh_qa,
)

Measure = tuple[str, float, float]

REAL = Contour.real_axis()
TILTED = Contour((-2.0, -0.5 - 0.3j, 0.5 + 0.3j, 2.0))
BUMPED = Contour((-3.0, -2.0, -1.5 + 0.4j, -1.0, 3.0))
DESK = ModelParams(hbar=1.0, m_omega=50.0, mp_omegap=0.02, n_trunc=120)
FOURIER = ModelParams(hbar=1.0, m_omega=1e4, mp_omegap=1e-4, n_trunc=2000)
KERNEL_FOCK = ModelParams(hbar=1.0, m_omega=50.0, mp_omegap=1e-4, n_trunc=160)
TRIANGULAR_H = np.array([[1 + 0.1j, 1], [0, 2 + 0.5j]])
EPS_SIFT = (1e-2, 1e-3, 1e-4)
EPS_KERNEL = (1e-1, 1e-2, 1e-3)
DTS = (0.1, 0.05, 0.025, 0.0125)


@dataclass
class CheckRecord:
    suite: str
    check: str
    criterion: int
    value: float
    tolerance: float
    passed: bool
    runtime_ms: float
    runtime_limit_ms: float | None = None
    details: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


@dataclass(frozen=True)
class Check:
    criterion: int
    suite: str
    name: str
    fn: Callable[[np.random.Generator], Iterator[Measure]]
    runtime_limit_s: float | None = None


def _ratio(value: float, tol: float) -> float:
    return value / tol if tol > 0 else (0.0 if value <= 0 else math.inf)


# -- 1, 2: tamed delta -----------------------------------------------------------------

SIFT_FUNCS = {
    "1": (lambda z: np.ones_like(z), lambda z: np.zeros_like(z)),
    "q": (lambda z: z, lambda z: np.zeros_like(z)),
    "q^2": (lambda z: z**2, lambda z: 2 * np.ones_like(z)),
    "q^3": (lambda z: z**3, lambda z: 6 * z),
    "exp(q)": (np.exp, np.exp),
}


def delta_sifting(rng: np.random.Generator) -> Iterator[Measure]:
    """|delta_sift - f(a)| <= 10 eps max|f''| near a, plus a rounding floor."""
    points = [(REAL, "real", 0.4), (TILTED, "tilted", complex(TILTED.at(0.25)))]
    for c, cname, a in points:
        for fname, (f, f2) in SIFT_FUNCS.items():
            for eps in EPS_SIFT:
                x = a.real + 14 * math.sqrt(eps) * np.linspace(-1, 1, 201)
                bound = 10 * eps * float(np.max(np.abs(f2(c.at(x)))))
                floor = 1e-13 * max(1.0, abs(f(np.array([a]))[0]))
                err = abs(delta_sift(f, c, eps, a) - f(np.array([a]))[0])
                yield f"{cname} {fname} eps={eps:g}", err, bound + floor


def deformation_invariance(rng: np.random.Generator) -> Iterator[Measure]:
    spec = QuadratureSpec(panel_width=0.05, truncation_radius=4.0)
    shift = complex(rng.uniform(-0.3, 0.3))
    funcs = {
        "q^2+exp(q)": lambda z: z**2 + np.exp(z),
        "cos(3q)": lambda z: np.cos(3 * z),
        "q^3 exp(-q)": lambda z: z**3 * np.exp(-z),
    }
    for eps in (1e-2, 1e-3):
        for fname, f in funcs.items():
            g = lambda z, f=f: f(z) * tamed_delta(z - shift, eps)
            ref = integrate(g, REAL, spec)
            for c, cname in ((TILTED, "tilted"), (BUMPED, "bumped")):
                yield f"{fname} eps={eps:g} {cname}", abs(integrate(g, c, spec) - ref), 1e-8


# -- 3, 4, 5: Fock-space bases --------------------------------------------------------


def _wedge_pairs() -> list[tuple[complex, complex]]:
    labels = [x + 1j * y for x in np.linspace(-0.6, 0.6, 5) for y in (-0.1, 0.0, 0.1)]
    out = []
    for a in labels:
        for b in labels:
            d = a - b
            if abs(d) <= 0.4 and (d == 0 or abs(d.imag) < abs(d.real)):
                out.append((a, b))
    return out


def fock_overlap_laws(rng: np.random.Generator) -> Iterator[Measure]:
    pairs = _wedge_pairs()
    worst_q = worst_p = 0.0
    for a, b in pairs:
        dq = tamed_delta(a - b, DESK.eps1)
        dp = tamed_delta(a - b, DESK.eps1p)
        worst_q = max(worst_q, abs(modified_bra_overlap_qq(a, b, DESK) / dq - 1))
        worst_p = max(worst_p, abs(modified_bra_overlap_pp(a, b, DESK) / dp - 1))
    yield f"q overlaps ({len(pairs)} pairs)", worst_q, 1e-5
    yield f"p overlaps ({len(pairs)} pairs)", worst_p, 1e-5
    labels = sorted({a for a, _ in pairs}, key=lambda z: (z.real, z.imag))
    yield "q eigen-residual", max(eigen_residual(z, DESK, "q") for z in labels), 1e-6
    yield "p eigen-residual", max(eigen_residual(z, DESK, "p") for z in labels), 1e-6


def fourier_kernel_check(rng: np.random.Generator) -> Iterator[Measure]:
    grid = [-1.0, -0.5 + 0.3j, 0.0, 0.3 - 0.6j, 0.7 + 0.7j, 1.0]
    worst = 0.0
    for q in grid:
        for p in grid:
            worst = max(worst, abs(fourier_kernel(q, p, FOURIER) / plane_wave(q, p, FOURIER.hbar) - 1))
    yield f"max relative deviation ({len(grid) ** 2} label pairs)", worst, 1e-3


def completeness(rng: np.random.Generator) -> Iterator[Measure]:
    """Faithful to the stated 1e-6; fails at finite parameters (see README)."""
    k = 20
    for kind in ("q", "p"):
        real = completeness_block(REAL, DESK, k, kind)
        tilted = completeness_block(TILTED, DESK, k, kind)
        drift = float(np.max(np.abs(real - tilted)))
        yield f"{kind}-kets real axis", float(np.linalg.norm(real - np.eye(k), 2)), 1e-6
        yield f"{kind}-kets deformed path", float(np.linalg.norm(tilted - np.eye(k), 2)), 1e-6 + 1e-8
        yield f"{kind}-kets drift", drift, 1e-8


# -- 6: metric ---------------------------------------------------------------------------


def qmetric_laws(rng: np.random.Generator) -> Iterator[Measure]:
    worst = {"P^dag Q P = 1": 0.0, "q-normality": 0.0, "dag_q involution": 0.0, "Q H_Qh hermitian": 0.0}
    conds = []
    for _ in range(50):
        n = int(rng.integers(2, 13))
        s = QMetricSystem.from_hamiltonian(random_hamiltonian(rng, n))
        conds.append(s.cond_P)
        sp = split_qh_qa(s)
        QH = s.Q @ sp.H_Qh
        vals = [metric_residual(s), q_normality_residual(s), rel_fro(s.dag_q(s.dag_q(s.H)), s.H), rel_fro(QH, QH.conj().T)]
        for key, v in zip(worst, vals):
            worst[key] = max(worst[key], v)
    tols = (1e-10, 1e-10, 1e-12, 1e-12)
    for (key, v), tol in zip(worst.items(), tols):
        yield key, v, tol
    yield "max cond(P)", max(conds), 1e6


# -- 7, 8: evolution ---------------------------------------------------------------------


def _suppression_measures(label: str, s: QMetricSystem, psi0) -> Iterator[Measure]:
    rep = suppression_report(s, psi0)
    yield f"{label} rate/gap - 1", abs(rep.fitted_rate / rep.gap - 1), 0.05
    yield f"{label} H_eff Q-hermitian", rel_fro(s.dag_q(rep.H_eff), rep.H_eff), 1e-10
    run = run_evolution(s, psi0, 0.0, [0.0])
    yield f"{label} I_Q drift per unit time", effective_norm_drift(run, rep.A, 25.0, 50.0), 1e-12


def suppression_rate(rng: np.random.Generator) -> Iterator[Measure]:
    tri = QMetricSystem.from_hamiltonian(TRIANGULAR_H)
    yield from _suppression_measures("triangular", tri, np.array([1, 1]) / math.sqrt(2))
    for i in range(20):
        s = random_suppression_system(rng, int(rng.integers(2, 7)))
        yield from _suppression_measures(f"random {i}", s, random_phase_state(rng, s))


def modified_equations(rng: np.random.Generator) -> Iterator[Measure]:
    tri = QMetricSystem.from_hamiltonian(TRIANGULAR_H)
    rnd = random_suppression_system(rng, 4)
    cases = [
        ("triangular", tri, np.array([1, 1]) / math.sqrt(2)),
        ("random n=4", rnd, random_phase_state(rng, rnd)),
    ]
    for label, s, psi0 in cases:
        run = run_evolution(s, psi0, 0.0, [0.0])
        n = s.n
        O = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        t = 3.0
        sch = [schrodinger_residual(run, t, dt) for dt in DTS]
        hei = [heisenberg_residual(run, O, t, dt) for dt in DTS]
        yield f"{label} Schrodinger |slope - 2|", abs(convergence_slope(DTS, sch) - 2), 0.3
        yield f"{label} Heisenberg |slope - 2|", abs(convergence_slope(DTS, hei) - 2), 0.3
        yield f"{label} Schrodinger residual dt=1e-4", schrodinger_residual(run, t, 1e-4), 1e-5
        yield f"{label} Heisenberg residual dt=1e-4", heisenberg_residual(run, O, t, 1e-4), 1e-5


# -- 9: continuity ---------------------------------------------------------------------------


def continuity_sweep() -> dict:
    q = alg.ParamExpr.symbol("q")
    spec = LocalHamiltonianSpec(1.0, (1 + 0.1j) * q**2, q_range=(-6, 6), M=241)
    return refinement_sweep(spec, gaussian_packet(1.0, 0.0, 0.5), [0.1, 0.05, 0.025])


def continuity(rng: np.random.Generator) -> Iterator[Measure]:
    sweep = continuity_sweep()
    yield "proper pair |slope - 2|", abs(sweep["slope"] - 2), 0.3
    for pair in ("psi", "psiQ"):
        for h, prop, ctrl in zip(sweep["h"], sweep["proper"], sweep[pair]):
            yield f"proper / {pair}-only control at h={h:.3g}", prop / ctrl, 0.1


# -- 10: kernels --------------------------------------------------------------------------


def kernel_round_trip(rng: np.random.Generator) -> Iterator[Measure]:
    for eps in EPS_KERNEL:
        worst = max(round_trip_error(OperatorPoly.random(rng, int(rng.integers(0, 7))), eps) for _ in range(10))
        worst = max(worst, round_trip_error(OperatorPoly.random(rng, 6), eps))
        yield f"round-trip coefficient error eps={eps:g}", worst, 1e-6
    ops = {"q_new": {(1, 0): 1.0}, "p_new": {(0, 1): 1.0}, "q_new p_new": {(1, 1): 1.0}, "q_new^2 p_new + 0.5": {(2, 1): 1.0, (0, 0): 0.5}}
    pairs = [(0.3, 0.25), (-0.5, -0.42), (0.8, 0.86)]
    for name, coeffs in ops.items():
        op = OperatorPoly(coeffs)
        yield f"matrix element {name} N=160", max(matrix_element_check(op, a, b, KERNEL_FOCK) for a, b in pairs), 1e-3


# -- 11: algebra -----------------------------------------------------------------------------


def _random_expr(rng: np.random.Generator, names=("q", "p", "a", "q*")) -> alg.ParamExpr:
    out = alg.ParamExpr()
    for _ in range(int(rng.integers(1, 5))):
        term = alg.ParamExpr.const(complex(*rng.standard_normal(2)))
        for _ in range(int(rng.integers(0, 4))):
            term = term * alg.ParamExpr.symbol(str(rng.choice(names)))
        if rng.random() < 0.5:
            arg = complex(*(0.3 * rng.standard_normal(2))) * alg.ParamExpr.symbol(str(rng.choice(names)))
            term = term * alg.exp_of(arg)
        out = out + term
    return out


def algebra_layer(rng: np.random.Generator) -> Iterator[Measure]:
    S = alg.ParamExpr.symbol
    q, p, a, b = S("q"), S("p"), S("a"), S("b")
    f = a * q**2 + b * p**2
    ex1 = alg.conj_keeping(f, {"q"}) == S("a*") * q**2 + S("b*") * S("p*") ** 2
    ex2 = alg.conj_keeping(f, {"q", "p"}) == S("a*") * q**2 + S("b*") * p**2
    yield "conj keeping q (exact)", 0.0 if ex1 else 1.0, 0.5
    yield "conj keeping q, p (exact)", 0.0 if ex2 else 1.0, 0.5
    worst = 0.0
    for _ in range(200):
        e = _random_expr(rng)
        keep = {n for n in ("q", "p", "a") if rng.random() < 0.5}
        sigma = dict(zip(("q", "p", "a"), (complex(*v) for v in rng.standard_normal((3, 2)))))
        direct = alg.evaluate(e, sigma)
        split = alg.evaluate(alg.re_keeping(e, keep) + 1j * alg.im_keeping(e, keep), sigma)
        worst = max(worst, abs(split - direct) / max(1.0, abs(direct)))
    yield "Re + i Im decomposition (200 random)", worst, 1e-12


CHECKS: tuple[Check, ...] = (
    Check(1, "delta", "delta_sifting", delta_sifting, 5.0),
    Check(2, "delta", "deformation_invariance", deformation_invariance),
    Check(3, "fock", "fock_overlap_laws", fock_overlap_laws, 60.0),
    Check(4, "fock", "fourier_kernel", fourier_kernel_check),
    Check(5, "fock", "completeness", completeness),
    Check(6, "qmetric", "qmetric_laws", qmetric_laws, 10.0),
    Check(7, "evolve", "suppression_rate", suppression_rate),
    Check(8, "evolve", "modified_equations", modified_equations),
    Check(9, "continuity", "continuity", continuity),
    Check(10, "kernel", "kernel_round_trip", kernel_round_trip),
    Check(11, "delta", "algebra_layer", algebra_layer),
)
CHECK_NAMES = tuple(c.name for c in CHECKS)
SUITES = ("delta", "fock", "qmetric", "evolve", "continuity", "kernel", "all")


def select(suite: str) -> list[Check]:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    return [c for c in CHECKS if suite == "all" or c.suite == suite]


def check_rng(seed: int, check: Check) -> np.random.Generator:
    """Generator of ``check``, the child of ``seed`` at position ``criterion - 1``."""
    child = np.random.SeedSequence(seed).spawn(len(CHECKS))[check.criterion - 1]
    return np.random.default_rng(child)


def run_check(check: Check, seed: int = 0, tolerance: float = 1.0) -> CheckRecord:
    start = time.perf_counter()
    measures = list(check.fn(check_rng(seed, check)))
    runtime_ms = 1e3 * (time.perf_counter() - start)
    details = [{"name": n, "value": float(v), "tolerance": float(t), "ratio": _ratio(float(v), float(t))} for n, v, t in measures]
    value = max(d["ratio"] for d in details)
    limit = None if check.runtime_limit_s is None else 1e3 * check.runtime_limit_s
    passed = value <= tolerance and (limit is None or runtime_ms < limit)
    return CheckRecord(check.suite, check.name, check.criterion, value, tolerance, passed, runtime_ms, limit, details)
