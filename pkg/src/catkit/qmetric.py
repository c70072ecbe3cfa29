"""Proper inner product I_Q for diagonalizable non-hermitian matrices.

For ``H = P D P^-1`` the metric ``Q = (P^dagger)^-1 P^-1`` makes the
eigencolumns of ``P`` orthonormal, ``<u|_Q v> = u^dagger Q v``.  Relative to
``Q`` every diagonalizable ``H`` is normal and splits into a Q-hermitian part
``P Re(D) P^-1`` and an anti-Q-hermitian part ``i P Im(D) P^-1``.

Conventions
-----------
Eigencolumns are scaled to unit Euclidean norm and phase-fixed so that their
largest-magnitude entry is real and positive.  Eigenvalues are ordered by
decreasing imaginary part, then increasing real part, then original index.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

DEFAULT_COND_LIMIT = 1e8
# beyond this the eigenvector matrix is numerically singular
_SINGULAR_COND = 1.0 / np.finfo(float).eps


class DiagonalizationError(np.linalg.LinAlgError):
    pass


class NonDiagonalizableError(DiagonalizationError):
    pass


class NearDefectiveError(DiagonalizationError):
    def __init__(self, cond: float, limit: float):
        self.cond = cond
        self.limit = limit
        super().__init__(f"eigenvector matrix has condition number {cond:.3g} > {limit:.3g} (nearly defective)")


class SingularMetricError(np.linalg.LinAlgError):
    pass


def _as_square(H) -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    return H


def normalize_columns(P: np.ndarray) -> np.ndarray:
    """Unit Euclidean norm per column, largest-magnitude entry made real positive."""
    P = np.array(P, dtype=complex)
    P /= np.linalg.norm(P, axis=0)
    idx = np.argmax(np.abs(P), axis=0)
    lead = P[idx, np.arange(P.shape[1])]
    return P * (np.abs(lead) / lead)


def eigen_order(lam: np.ndarray) -> np.ndarray:
    """Indices sorting by (Im desc, Re asc, index)."""
    lam = np.asarray(lam, dtype=complex)
    return np.lexsort((np.arange(lam.size), lam.real, -lam.imag))


def diagonalize(H, cond_limit: float = DEFAULT_COND_LIMIT) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition ``H = P D P^-1`` in the canonical column convention.

    Parameters
    ----------
    H : (n, n) array_like
        Complex square matrix.
    cond_limit : float
        Largest accepted 2-norm condition number of ``P``.

    Returns
    -------
    P : (n, n) ndarray
        Eigencolumns, unit norm and phase fixed.
    D : (n, n) ndarray
        Diagonal matrix of eigenvalues, sorted.

    Raises
    ------
    NonDiagonalizableError
        If the eigenvectors are numerically dependent (defective ``H``).
    NearDefectiveError
        If ``cond(P) > cond_limit``.
    """
    H = _as_square(H)
    if not np.all(np.isfinite(H)):
        raise ValueError("H contains non-finite entries")
    lam, P = sla.eig(H)
    order = eigen_order(lam)
    lam, P = lam[order], normalize_columns(P[:, order])
    cond = np.linalg.cond(P)
    if not np.isfinite(cond) or cond > _SINGULAR_COND:
        raise NonDiagonalizableError("H is not diagonalizable: eigenvectors are linearly dependent")
    if cond > cond_limit:
        raise NearDefectiveError(float(cond), cond_limit)
    return P, np.diag(lam)


def build_q_metric(P) -> np.ndarray:
    """``Q = (P^dagger)^-1 P^-1``, symmetrized to be exactly hermitian."""
    P = _as_square(P)
    try:
        Pinv = np.linalg.inv(P)
    except np.linalg.LinAlgError as exc:
        raise SingularMetricError("P is singular; no metric exists") from exc
    if not np.all(np.isfinite(Pinv)) or np.linalg.cond(P) > _SINGULAR_COND:
        raise SingularMetricError("P is numerically singular; no metric exists")
    Q = Pinv.conj().T @ Pinv
    return 0.5 * (Q + Q.conj().T)


def iq_inner(psi2, psi1, Q) -> complex:
    """``I_Q(psi2, psi1) = psi2^dagger Q psi1``, antilinear in the first slot."""
    psi2 = np.asarray(psi2, dtype=complex)
    psi1 = np.asarray(psi1, dtype=complex)
    return complex(np.vdot(psi2, np.asarray(Q) @ psi1))


def iq_norm(psi, Q) -> float:
    return float(np.sqrt(max(iq_inner(psi, psi, Q).real, 0.0)))


def dag_q(A, Q, Q_inv=None) -> np.ndarray:
    """Q-hermitian conjugate ``Q^-1 A^dagger Q``.

    ``Q_inv`` may be supplied (e.g. ``P P^dagger``) to avoid a linear solve
    against the possibly ill-conditioned ``Q``.
    """
    A = np.asarray(A, dtype=complex)
    AdQ = A.conj().T @ Q
    if Q_inv is not None:
        return Q_inv @ AdQ
    return np.linalg.solve(Q, AdQ)


def rel_fro(A, B) -> float:
    """Frobenius distance of ``A`` and ``B`` relative to ``max(|B|, 1)``."""
    return float(np.linalg.norm(A - B) / max(np.linalg.norm(B), 1.0))


@dataclass(frozen=True)
class QMetricSystem:
    """Diagonalizable ``H`` with its eigendata and proper metric.

    Build with :meth:`from_hamiltonian` (canonical columns) or
    :meth:`from_eigendata` (columns taken as given).
    """

    H: np.ndarray
    P: np.ndarray
    D: np.ndarray
    Q: np.ndarray
    cond_P: float

    @classmethod
    def from_hamiltonian(cls, H, cond_limit: float = DEFAULT_COND_LIMIT) -> "QMetricSystem":
        H = _as_square(H)
        P, D = diagonalize(H, cond_limit)
        return cls(H, P, D, build_q_metric(P), float(np.linalg.cond(P)))

    @classmethod
    def from_eigendata(cls, P, D) -> "QMetricSystem":
        """System with ``H = P D P^-1`` for a user-chosen column scaling of ``P``."""
        P = _as_square(P)
        D = np.asarray(D, dtype=complex)
        if D.ndim == 1:
            D = np.diag(D)
        Q = build_q_metric(P)
        H = P @ D @ np.linalg.inv(P)
        return cls(H, P, D, Q, float(np.linalg.cond(P)))

    @classmethod
    def from_json(cls, text: str, cond_limit: float = DEFAULT_COND_LIMIT) -> "QMetricSystem":
        return cls.from_hamiltonian(hamiltonian_from_json(text), cond_limit)

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.diag(self.D).copy()

    @property
    def P_inv(self) -> np.ndarray:
        return np.linalg.inv(self.P)

    @property
    def Q_inv(self) -> np.ndarray:
        """``Q^-1 = P P^dagger``, exact in terms of ``P``."""
        return self.P @ self.P.conj().T

    def dag_q(self, A) -> np.ndarray:
        """``Q^-1 A^dagger Q`` evaluated as ``P (P^-1 A P)^dagger P^-1``.

        Same matrix as :func:`dag_q`, but rounding grows with cond(P) rather
        than cond(Q) = cond(P)^2.
        """
        Pinv = self.P_inv
        B = Pinv @ np.asarray(A, dtype=complex) @ self.P
        return self.P @ B.conj().T @ Pinv

    def check(self) -> dict[str, float]:
        """Residuals of the defining invariants (all should be tiny)."""
        I = np.eye(self.n)
        return {
            "reconstruction": rel_fro(self.P @ self.D @ self.P_inv, self.H),
            "q_hermitian": float(np.linalg.norm(self.Q - self.Q.conj().T)),
            "q_min_eig": float(np.min(np.linalg.eigvalsh(self.Q))),
            "orthonormality": metric_residual(self),
            "q_unitarity": rel_fro(self.P.conj().T @ self.Q, self.P_inv),
            "identity_check": rel_fro(self.P_inv @ self.P, I),
        }


@dataclass(frozen=True)
class QSplit:
    H_Qh: np.ndarray
    H_Qa: np.ndarray
    D_R: np.ndarray
    D_I: np.ndarray


def hamiltonian_from_json(text: str) -> np.ndarray:
    """Parse ``{"n": 2, "re": [[...]], "im": [[...]]}``; ``im`` may be omitted."""
    data = json.loads(text)
    try:
        n = int(data["n"])
        re_ = np.asarray(data["re"], dtype=float)
        im_ = np.asarray(data.get("im", np.zeros((n, n))), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed Hamiltonian JSON: {exc}") from exc
    if re_.shape != (n, n) or im_.shape != (n, n):
        raise ValueError(f"Hamiltonian JSON: re/im must both be {n}x{n}")
    return re_ + 1j * im_


def hamiltonian_to_json(H) -> str:
    H = _as_square(H)
    return json.dumps({"n": H.shape[0], "re": H.real.tolist(), "im": H.imag.tolist()})


def metric_residual(system: QMetricSystem) -> float:
    """Max-entry deviation of ``P^dagger Q P`` from the identity."""
    G = system.P.conj().T @ system.Q @ system.P
    return float(np.max(np.abs(G - np.eye(system.n))))


def split_qh_qa(system: QMetricSystem) -> QSplit:
    """Q-hermitian / anti-Q-hermitian parts ``(H +- H^{dagger Q}) / 2``."""
    Hd = system.dag_q(system.H)
    lam = system.eigenvalues
    return QSplit(
        H_Qh=0.5 * (system.H + Hd),
        H_Qa=0.5 * (system.H - Hd),
        D_R=np.diag(lam.real),
        D_I=np.diag(lam.imag),
    )


def split_cross_check(system: QMetricSystem, split: QSplit | None = None) -> float:
    """Distance between the two constructions of the split (relative Frobenius)."""
    split = split or split_qh_qa(system)
    Pinv = system.P_inv
    return max(
        rel_fro(split.H_Qh, system.P @ split.D_R @ Pinv),
        rel_fro(split.H_Qa, 1j * system.P @ split.D_I @ Pinv),
    )


def q_normality_residual(system: QMetricSystem, Q=None) -> float:
    """``||[H, H^{dagger Q}]||_F / ||H||_F^2``.

    Passing ``Q`` (e.g. the identity) overrides the system metric, which turns
    this into a plain normality test.
    """
    H = system.H
    Hd = system.dag_q(H) if Q is None else dag_q(H, Q)
    scale = np.linalg.norm(H) ** 2
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(H @ Hd - Hd @ H) / scale)


def eigenprojectors(system: QMetricSystem) -> np.ndarray:
    """Stack of ``P e_i e_i^T P^-1``; invariant under column rescaling of ``P``."""
    Pinv = system.P_inv
    return np.einsum("ai,ib->iab", system.P, Pinv)


def random_hamiltonian(
    rng: np.random.Generator,
    n: int,
    cond_max: float = 1e3,
    spread: float = 0.5,
    max_tries: int = 200,
) -> np.ndarray:
    """Seeded diagonalizable ``H = P D P^-1`` with ``cond(P) <= cond_max``.

    ``P`` is a unitary rotated by a random complex perturbation of size
    ``spread``; eigenvalues are complex normal.
    """
    for _ in range(max_tries):
        G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        U, _ = np.linalg.qr(G)
        E = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        P = U + spread * E / np.sqrt(n)
        if np.linalg.cond(normalize_columns(P)) <= cond_max:
            lam = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            return P @ np.diag(lam) @ np.linalg.inv(P)
    raise RuntimeError(f"no P with cond <= {cond_max} in {max_tries} draws")
