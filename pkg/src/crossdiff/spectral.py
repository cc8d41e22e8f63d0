"""Orthonormal eigenstructure of the coupling matrix.

Splits the eigenbasis of a symmetric PSD matrix into kernel rows Q and range
rows P.  All downstream formulas depend only on the spans of Q and P, so any
orthonormal basis of a degenerate cluster is acceptable; the deterministic
sign/order convention below merely makes runs reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EigenFailure

DEFAULT_KERNEL_TOL = 1e-9


@dataclass(frozen=True)
class EigenStructure:
    """Eigendecomposition of B with kernel/range blocks.

    ``basis`` is orthogonal with rows xi^1..xi^n; ``lam`` is sorted ascending
    with the first n-rank entries snapped to exactly zero.  ``Q`` holds the
    kernel rows, ``P`` the range rows, so B = P^T diag(lam_II) P.
    """

    lam: np.ndarray
    basis: np.ndarray
    rank: int

    @property
    def n(self) -> int:
        return self.lam.size

    @property
    def Q(self) -> np.ndarray:
        return self.basis[: self.n - self.rank]

    @property
    def P(self) -> np.ndarray:
        return self.basis[self.n - self.rank :]

    @property
    def lam_range(self) -> np.ndarray:
        """Positive eigenvalues, matching the rows of P."""
        return self.lam[self.n - self.rank :]


def _fix_signs_and_order(lam, vecs_rows):
    """Deterministic convention: largest-magnitude entry of each row positive,
    rows ordered by ascending eigenvalue with a stable tie-break on entries."""
    rows = vecs_rows.copy()
    for i in range(rows.shape[0]):
        j = int(np.argmax(np.abs(rows[i])))
        if rows[i, j] < 0:
            rows[i] = -rows[i]
    order = np.lexsort((*[rows[:, c] for c in reversed(range(rows.shape[1]))], lam))
    return lam[order], rows[order]


def eigenstructure(B: np.ndarray, tol: float = DEFAULT_KERNEL_TOL) -> EigenStructure:
    """Orthonormal eigenbasis of symmetric PSD B with kernel/range split.

    Eigenvalues below tol * max(lam) are snapped to exactly zero; those
    directions form the kernel block Q.
    """
    B = np.asarray(B, dtype=float)
    try:
        lam, vecs = np.linalg.eigh(0.5 * (B + B.T))
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    lam_max = float(lam[-1]) if lam.size else 0.0
    lam = lam.copy()
    lam[np.abs(lam) <= tol * max(lam_max, 0.0)] = 0.0
    lam = np.maximum(lam, 0.0)
    lam, rows = _fix_signs_and_order(lam, vecs.T)
    rank = int(np.count_nonzero(lam > 0.0))
    return EigenStructure(lam=lam, basis=rows, rank=rank)


def verify_block_identities(E: EigenStructure, B: np.ndarray | None = None) -> dict:
    """Max deviation of the elementary block identities.

    Checks Q Q^T = I, P P^T = I, Q^T Q + P^T P = I, P Q^T = 0 and, when B is
    supplied, B Q^T = 0 and B P^T = P^T diag(lam_II).
    """
    Q, P = E.Q, E.P
    n = E.n

    def dev(M):
        return float(np.max(np.abs(M))) if M.size else 0.0

    report = {
        "QQt_minus_I": dev(Q @ Q.T - np.eye(n - E.rank)),
        "PPt_minus_I": dev(P @ P.T - np.eye(E.rank)),
        "QtQ_plus_PtP_minus_I": dev(Q.T @ Q + P.T @ P - np.eye(n)),
        "PQt": dev(P @ Q.T),
    }
    if B is not None:
        B = np.asarray(B, dtype=float)
        report["BQt"] = dev(B @ Q.T)
        report["BPt_minus_Pt_lam"] = dev(B @ P.T - P.T @ np.diag(E.lam_range))
        report["reconstruction"] = dev(E.basis.T @ np.diag(E.lam) @ E.basis - B)
    return report
