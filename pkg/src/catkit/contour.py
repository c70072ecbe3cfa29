"""Complex integration contours, the Gaussian-tamed delta function and sifting.

A :class:`Contour` is a polyline with strictly increasing real parts.  Beyond
its first and last node it continues as horizontal rays to -inf and +inf.
Integrals use composite Gauss-Legendre panels along each straight piece.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

DEFAULT_ANGLE_MARGIN = 1e-6
#: half-width of the sifting window in units of sqrt(eps); exp(-14**2/4) ~ 5e-22
SIFT_CUT = 14.0


class MalformedContourError(ValueError):
    pass


class ContourNotPermittedError(ValueError):
    def __init__(self, segment: int, angle: float):
        self.segment = segment
        self.angle = angle
        super().__init__(
            f"segment {segment} has slope angle {angle:.6g} rad, not inside (-pi/4, pi/4)"
        )


class OffContourError(ValueError):
    pass


class QuadratureError(RuntimeError):
    def __init__(self, segment: int, message: str):
        self.segment = segment
        super().__init__(f"segment {segment}: {message}")


def wedge_margin(q):
    """L(q) = (Re q)^2 - (Im q)^2; positive inside the convergence wedge."""
    q = np.asarray(q, dtype=complex)
    out = q.real**2 - q.imag**2
    return float(out) if out.ndim == 0 else out


def tamed_delta(q, eps: float):
    """sqrt(1/(4 pi eps)) exp(-q^2/(4 eps)), entire in q for finite eps > 0."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    q = np.asarray(q, dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.sqrt(1.0 / (4.0 * np.pi * eps)) * np.exp(-(q**2) / (4.0 * eps))
    return complex(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Contour:
    nodes: tuple[complex, ...]

    def __post_init__(self):
        nodes = tuple(complex(z) for z in self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if len(nodes) < 1:
            raise MalformedContourError("a contour needs at least one node")
        re = np.array([z.real for z in nodes])
        bad = np.nonzero(np.diff(re) <= 0)[0]
        if bad.size:
            raise MalformedContourError(
                f"node real parts must increase strictly; violated between nodes {bad[0]} and {bad[0] + 1}"
            )

    @classmethod
    def real_axis(cls) -> "Contour":
        return cls((-1.0, 1.0))

    @classmethod
    def through(cls, points: Sequence[complex]) -> "Contour":
        return cls(tuple(points))

    @classmethod
    def horizontal_through(cls, a: complex, half_width: float = 1.0) -> "Contour":
        """Path that is horizontal within ``half_width`` of ``a`` and returns to
        the real axis with slope 1/2 on either side."""
        a = complex(a)
        if a.imag == 0:
            return cls((a.real - half_width, a.real + half_width))
        ramp = 2 * abs(a.imag)
        return cls((a.real - half_width - ramp, a - half_width, a + half_width, a.real + half_width + ramp))

    @classmethod
    def from_json(cls, text: str) -> "Contour":
        data = json.loads(text)
        try:
            nodes = [complex(re, im) for re, im in data["nodes"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedContourError(f"expected {{'nodes': [[re, im], ...]}}: {exc}") from exc
        return cls(tuple(nodes))

    def to_json(self) -> str:
        return json.dumps({"nodes": [[z.real, z.imag] for z in self.nodes]})

    @property
    def segments(self) -> list[tuple[complex, complex]]:
        return list(zip(self.nodes[:-1], self.nodes[1:]))

    def angles(self) -> np.ndarray:
        return np.array([math.atan2((b - a).imag, (b - a).real) for a, b in self.segments])

    def max_slope(self) -> float:
        ang = self.angles()
        return float(np.max(np.abs(np.tan(ang)))) if ang.size else 0.0

    def at(self, x):
        """Point(s) of the contour with real part ``x``."""
        x = np.asarray(x, dtype=float)
        re = np.array([z.real for z in self.nodes])
        im = np.array([z.imag for z in self.nodes])
        return x + 1j * np.interp(x, re, im)

    def distance(self, a: complex) -> float:
        """Vertical offset of ``a`` from the contour (zero iff ``a`` lies on it)."""
        a = complex(a)
        return abs(a.imag - float(np.imag(self.at(a.real))))

    def pieces(self, lo: float, hi: float) -> list[tuple[complex, complex, int]]:
        """Straight pieces covering lo <= Re q <= hi, with their segment index.

        Index -1 and len(segments) denote the left and right horizontal tails.
        """
        re = np.array([z.real for z in self.nodes])
        inner = re[(re > lo) & (re < hi)]
        xs = np.concatenate(([lo], inner, [hi]))
        out = []
        for x0, x1 in zip(xs[:-1], xs[1:]):
            if x1 <= x0:
                continue
            seg = int(np.searchsorted(re, 0.5 * (x0 + x1))) - 1
            out.append((complex(self.at(x0)), complex(self.at(x1)), seg))
        return out


def is_permitted(c: Contour, margin: float = DEFAULT_ANGLE_MARGIN) -> tuple[bool, float]:
    """True iff every segment makes an angle |theta| < pi/4 - margin with the real axis."""
    ang = np.abs(c.angles())
    max_ang = float(ang.max()) if ang.size else 0.0
    return bool(max_ang < math.pi / 4 - margin), max_ang


def require_permitted(c: Contour, margin: float = DEFAULT_ANGLE_MARGIN) -> None:
    for i, theta in enumerate(c.angles()):
        if abs(theta) >= math.pi / 4 - margin:
            raise ContourNotPermittedError(i, float(theta))


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre settings.

    ``panel_width`` caps the length of a single panel; ``None`` means one
    panel per straight piece.  The node count doubles (up to
    ``max_doublings`` times) until two successive estimates agree to ``rtol``.
    """

    nodes_per_segment: int = 32
    truncation_radius: float = 50.0
    panel_width: float | None = None
    rtol: float = 1e-13
    atol: float = 1e-300
    max_doublings: int = 4

    def __post_init__(self):
        if self.nodes_per_segment < 2:
            raise ValueError("nodes_per_segment must be >= 2")
        if self.truncation_radius <= 0:
            raise ValueError("truncation_radius must be positive")


@lru_cache(maxsize=64)
def _gl(n: int) -> tuple[np.ndarray, np.ndarray]:
    return leggauss(n)


def quadrature_rule(
    c: Contour, n: int, lo: float, hi: float, panel_width: float | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes ``z``, complex weights ``w`` (including dz/dt) and piece index per node."""
    x, wx = _gl(n)
    zs, ws, idx = [], [], []
    for a, b, seg in c.pieces(lo, hi):
        npan = 1 if panel_width is None else max(1, int(math.ceil(abs(b - a) / panel_width)))
        edges = a + (b - a) * np.linspace(0.0, 1.0, npan + 1)
        for z0, z1 in zip(edges[:-1], edges[1:]):
            half = (z1 - z0) / 2
            zs.append((z0 + z1) / 2 + half * x)
            ws.append(half * wx)
            idx.append(np.full(n, seg))
    if not zs:
        return np.empty(0, complex), np.empty(0, complex), np.empty(0, int)
    return np.concatenate(zs), np.concatenate(ws), np.concatenate(idx)


def _integrate_window(f, c, spec, lo, hi):
    n = spec.nodes_per_segment
    z, w, seg = quadrature_rule(c, n, lo, hi, spec.panel_width)
    prev = np.sum(w * f(z))
    for _ in range(spec.max_doublings):
        n *= 2
        z, w, seg = quadrature_rule(c, n, lo, hi, spec.panel_width)
        vals = w * f(z)
        cur = np.sum(vals)
        err = abs(cur - prev)
        if err <= max(spec.rtol * abs(cur), 1e-15 * np.sum(np.abs(vals)), spec.atol):
            return complex(cur), float(err)
        prev = cur
    worst = int(seg[np.argmax(np.abs(vals))]) if vals.size else -1
    raise QuadratureError(worst, f"no convergence after {spec.max_doublings} doublings (last change {err:.3g})")


def integrate_with_error(
    f: Callable[[np.ndarray], np.ndarray],
    c: Contour,
    spec: QuadratureSpec = QuadratureSpec(),
    window: tuple[float, float] | None = None,
) -> tuple[complex, float]:
    """Integral of ``f`` along ``c`` restricted to |Re q| <= truncation_radius.

    Returns the value and the difference between the last two refinements.
    """
    require_permitted(c)
    lo, hi = window if window is not None else (-spec.truncation_radius, spec.truncation_radius)
    return _integrate_window(f, c, spec, lo, hi)


def integrate(f, c: Contour, spec: QuadratureSpec = QuadratureSpec(), window=None) -> complex:
    return integrate_with_error(f, c, spec, window)[0]


def sift_window(c: Contour, eps: float, a: complex, cut: float = SIFT_CUT) -> tuple[float, float]:
    """Re-range outside which |tamed_delta(q - a)| is negligible along ``c``.

    Along a path with slopes |s| <= s_max, L(q - a) >= (1 - s_max^2) (Re(q - a))^2.
    """
    s = c.max_slope()
    half = cut * math.sqrt(eps) / math.sqrt(max(1.0 - s * s, 1e-12))
    return complex(a).real - half, complex(a).real + half


def delta_integral(f, c: Contour, eps: float, a: complex = 0.0, nodes: int = 32) -> tuple[complex, float]:
    """Integral of f(q) * tamed_delta(q - a, eps) along ``c``, with error estimate."""
    require_permitted(c)
    lo, hi = sift_window(c, eps, a)
    spec = QuadratureSpec(nodes_per_segment=nodes, panel_width=2 * math.sqrt(eps))
    return _integrate_window(lambda z: f(z) * tamed_delta(z - a, eps), c, spec, lo, hi)


def delta_sift(f, c: Contour, eps: float, a: complex, tol: float = 1e-9) -> complex:
    """Integral of f(q) tamed_delta(q - a) along ``c``; tends to f(a) with O(eps) error.

    ``a`` must lie on ``c``: two points are only guaranteed to sit inside each
    other's convergence wedge when they share a permitted path.
    """
    dist = c.distance(a)
    if dist > tol:
        raise OffContourError(f"point {a} is {dist:.3g} away from the contour")
    return delta_integral(f, c, eps, a)[0]


def sift_error_estimate(f, a: complex, eps: float, h: float = 1e-3) -> complex:
    """Leading O(eps) term eps * f''(a) of the sifting error."""
    a = complex(a)
    d2 = (f(np.array([a + h]))[0] - 2 * f(np.array([a]))[0] + f(np.array([a - h]))[0]) / h**2
    return eps * d2
