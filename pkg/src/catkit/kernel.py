"""Correspondence between polynomial operators and tamed-delta kernels.

An operator sum b_mn q_new^m p_new^n (q powers to the left) has the
modified-bra kernel

    O(q', q'') = sum b_mn q'^m (hbar/i d/dq')^n delta_eps(q' - q''),

which is entire in both labels for every finite ``eps``.  Derivatives of the
Gaussian are written with Hermite polynomials,

    d^n/dx^n exp(-x^2/(4 eps)) = (-1/(2 sqrt(eps)))^n H_n(x/(2 sqrt(eps))) exp(-x^2/(4 eps)).

The reverse direction uses the shift representation
O = int O(q, q + a) exp(i a p/hbar) da.  Its a-moments are Gaussian
moments, so matching them against the monomial basis is a finite linear solve.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from numpy.polynomial.hermite import hermval
from numpy.polynomial.legendre import leggauss

from catkit.contour import tamed_delta
from catkit.fock import ModelParams, build_qp_new, modified_bra, q_ket_new

DEFAULT_MAX_DEGREE = 6
COND_LIMIT = 1e8


class DegreeLimitError(ValueError):
    def __init__(self, degree: int, limit: int):
        self.degree = degree
        self.limit = limit
        super().__init__(f"operator degree {degree} exceeds the configured limit {limit}")


class IllConditionedMomentsError(np.linalg.LinAlgError):
    def __init__(self, cond: float, limit: float = COND_LIMIT):
        self.cond = cond
        self.limit = limit
        super().__init__(
            f"moment system condition number {cond:.3g} exceeds {limit:.1g}; "
            "try a larger eps or a lower degree"
        )


@dataclass(frozen=True)
class OperatorPoly:
    """Finite sum of b_mn q_new^m p_new^n with every q power left of every p power.

    Parameters
    ----------
    coeffs : mapping
        ``{(m, n): b_mn}``; zero entries are dropped.
    max_degree : int
        Upper bound on m + n.
    """

    coeffs: Mapping[tuple[int, int], complex] = field(default_factory=dict)
    max_degree: int = DEFAULT_MAX_DEGREE

    def __post_init__(self):
        clean = {}
        for key, val in dict(self.coeffs).items():
            m, n = (int(k) for k in key)
            if m < 0 or n < 0:
                raise ValueError(f"powers must be non-negative, got {(m, n)}")
            if m + n > self.max_degree:
                raise DegreeLimitError(m + n, self.max_degree)
            if complex(val) != 0:
                clean[(m, n)] = clean.get((m, n), 0) + complex(val)
        object.__setattr__(self, "coeffs", clean)

    @property
    def degree(self) -> int:
        return max((m + n for m, n in self.coeffs), default=0)

    def __add__(self, other: "OperatorPoly") -> "OperatorPoly":
        out = dict(self.coeffs)
        for key, val in other.coeffs.items():
            out[key] = out.get(key, 0) + val
        return OperatorPoly(out, max(self.max_degree, other.max_degree))

    def scale(self, c: complex) -> "OperatorPoly":
        return OperatorPoly({k: c * v for k, v in self.coeffs.items()}, self.max_degree)

    def max_coeff_error(self, other: "OperatorPoly") -> float:
        keys = set(self.coeffs) | set(other.coeffs)
        return max((abs(self.coeffs.get(k, 0) - other.coeffs.get(k, 0)) for k in keys), default=0.0)

    def to_dict(self) -> dict:
        terms = [{"m": m, "n": n, "re": v.real, "im": v.imag} for (m, n), v in sorted(self.coeffs.items())]
        return {"terms": terms}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict, max_degree: int = DEFAULT_MAX_DEGREE) -> "OperatorPoly":
        try:
            terms = data["terms"]
            coeffs: dict[tuple[int, int], complex] = {}
            for t in terms:
                key = (int(t["m"]), int(t["n"]))
                coeffs[key] = coeffs.get(key, 0) + complex(float(t.get("re", 0.0)), float(t.get("im", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"expected {{'terms': [{{'m', 'n', 're', 'im'}}, ...]}}: {exc}") from exc
        return cls(coeffs, max_degree)

    @classmethod
    def from_json(cls, text: str, max_degree: int = DEFAULT_MAX_DEGREE) -> "OperatorPoly":
        return cls.from_dict(json.loads(text), max_degree)

    @classmethod
    def random(cls, rng: np.random.Generator, degree: int = DEFAULT_MAX_DEGREE, scale: float = 1.0) -> "OperatorPoly":
        """Every coefficient with m + n <= degree drawn from a complex normal."""
        keys = [(m, d - m) for d in range(degree + 1) for m in range(d + 1)]
        vals = scale * (rng.standard_normal(len(keys)) + 1j * rng.standard_normal(len(keys)))
        return cls(dict(zip(keys, vals)), max(degree, DEFAULT_MAX_DEGREE))


def gaussian_derivative(x, n: int, eps: float):
    """n-th derivative of tamed_delta(x, eps)."""
    x = np.asarray(x, dtype=complex)
    c = np.zeros(n + 1)
    c[n] = 1.0
    r = 2.0 * math.sqrt(eps)
    return (-1.0 / r) ** n * hermval(x / r, c) * tamed_delta(x, eps)


@dataclass(frozen=True)
class Kernel:
    """O(q', q'') for a finite ``eps``, generated by ``source``."""

    source: OperatorPoly
    eps: float
    hbar: float = 1.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")

    def __call__(self, q1, q2):
        q1 = np.asarray(q1, dtype=complex)
        x = q1 - np.asarray(q2, dtype=complex)
        out = np.zeros(np.broadcast(q1, x).shape, dtype=complex)
        by_n: dict[int, np.ndarray] = {}
        for (m, n), b in self.source.coeffs.items():
            if n not in by_n:
                by_n[n] = (self.hbar / 1j) ** n * gaussian_derivative(x, n, self.eps)
            out = out + b * q1**m * by_n[n]
        return complex(out) if out.ndim == 0 else out

    def moments(self, q1, k: int):
        """mu_k(q') = int O(q', q' + a) a^k da in closed form."""
        q1 = np.asarray(q1, dtype=complex)
        out = np.zeros(q1.shape, dtype=complex)
        for (m, n), b in self.source.coeffs.items():
            out = out + b * q1**m * (self.hbar / 1j) ** n * moment_weight(n, k, self.eps)
        return out

    def moments_quadrature(self, q1, k: int, nodes: int = 200):
        """mu_k(q') by Gauss-Legendre quadrature over |a| <= 16 sqrt(eps)."""
        q1 = np.asarray(q1, dtype=complex)
        half = 16.0 * math.sqrt(self.eps)
        x, w = leggauss(nodes)
        a, w = half * x, half * w
        vals = self(q1[..., None], q1[..., None] + a)
        return (vals * w * a**k).sum(axis=-1)


def gaussian_moment(j: int, eps: float) -> float:
    """int a^j tamed_delta(a, eps) da = (2 eps)^(j/2) (j - 1)!! for even j, else 0."""
    if j < 0 or j % 2:
        return 0.0
    return (2.0 * eps) ** (j // 2) * float(np.prod(np.arange(j - 1, 0, -2))) if j else 1.0


def moment_weight(n: int, k: int, eps: float) -> float:
    """int a^k delta_eps^(n)(-a) da = k!/(k-n)! M(k-n), the a-moment of one derivative order."""
    if k < n:
        return 0.0
    return math.factorial(k) / math.factorial(k - n) * gaussian_moment(k - n, eps)


def operator_to_kernel(op: OperatorPoly, eps: float, hbar: float = 1.0) -> Kernel:
    """Kernel of ``op`` between modified position bras and position kets."""
    if op.degree > op.max_degree:
        raise DegreeLimitError(op.degree, op.max_degree)
    return Kernel(op, float(eps), hbar)


def moment_matrix(degree: int, eps: float, hbar: float, nodes: np.ndarray) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Linear map from coefficients b_mn to the sampled moments mu_k(q'_j)."""
    keys = [(m, d - m) for d in range(degree + 1) for m in range(d + 1)]
    rows = []
    for q in nodes:
        for k in range(degree + 1):
            rows.append([q**m * (hbar / 1j) ** n * moment_weight(n, k, eps) for m, n in keys])
    return np.array(rows, dtype=complex), keys


def kernel_to_operator(
    kernel: Kernel,
    degree: int | None = None,
    method: str = "closed",
    cond_limit: float = COND_LIMIT,
    tol: float = 1e-13,
) -> OperatorPoly:
    """Recover b_mn from the a-moments of ``kernel``.

    Parameters
    ----------
    kernel : Kernel
    degree : int, optional
        Degree of the ansatz; defaults to the degree of the kernel's source.
    method : {"closed", "quadrature"}
        How the moments are obtained from the kernel.
    cond_limit : float
        Raise :class:`IllConditionedMomentsError` above this condition number.
    tol : float
        Recovered coefficients below this magnitude are dropped.
    """
    deg = kernel.source.degree if degree is None else int(degree)
    nodes = np.cos(np.pi * (np.arange(deg + 1) + 0.5) / (deg + 1))
    A, keys = moment_matrix(deg, kernel.eps, kernel.hbar, nodes)
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > cond_limit:
        raise IllConditionedMomentsError(cond, cond_limit)
    if method == "closed":
        mom = [kernel.moments(nodes, k) for k in range(deg + 1)]
    elif method == "quadrature":
        mom = [kernel.moments_quadrature(nodes, k) for k in range(deg + 1)]
    else:
        raise ValueError(f"method must be 'closed' or 'quadrature', got {method!r}")
    rhs = np.array(mom).T.reshape(-1)
    b = np.linalg.lstsq(A, rhs, rcond=None)[0]
    coeffs = {key: val for key, val in zip(keys, b) if abs(val) > tol}
    return OperatorPoly(coeffs, max(deg, kernel.source.max_degree))


def round_trip_error(op: OperatorPoly, eps: float, hbar: float = 1.0, method: str = "closed") -> float:
    back = kernel_to_operator(operator_to_kernel(op, eps, hbar), degree=op.degree, method=method)
    return op.max_coeff_error(back)


def fock_operator(op: OperatorPoly, params: ModelParams) -> np.ndarray:
    """Truncated matrix of ``op`` on the unprimed number basis."""
    qn, pn = build_qp_new(params, "q")
    n = params.n_trunc
    out = np.zeros((n, n), dtype=complex)
    for (m, k), b in op.coeffs.items():
        out += b * np.linalg.matrix_power(qn, m) @ np.linalg.matrix_power(pn, k)
    return out


def fock_matrix_element(op: OperatorPoly, q1: complex, q2: complex, params: ModelParams, guard: bool = True) -> complex:
    """m<q1| op |q2>_new by brute force in the truncated Fock space."""
    bra = modified_bra(q1, params, "q", guard)
    ket = q_ket_new(q2, params, guard).coeffs
    return complex(bra @ fock_operator(op, params) @ ket)


def matrix_element_check(op: OperatorPoly, q1: complex, q2: complex, params: ModelParams, guard: bool = True) -> float:
    """|brute-force - kernel| / |kernel| with the kernel at eps = eps1.

    The bra relation m<q'| p_new = ((hbar/i) d/dq' + i m'w' q') m<q'| adds a
    term of relative size about 2 m'w' |q'| eps1 / |q' - q''| per momentum
    power, so a small ``mp_omegap`` is needed for a sharp comparison.
    ``guard=False`` skips the truncation guard, which is only useful for
    studying the approach to the converged value as N grows.
    """
    exact = operator_to_kernel(op, params.eps1, params.hbar)(q1, q2)
    brute = fock_matrix_element(op, q1, q2, params, guard)
    return float(abs(brute - exact) / abs(exact))
