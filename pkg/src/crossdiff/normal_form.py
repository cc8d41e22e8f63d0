"""Pointwise coefficient assembly for the hyperbolic-parabolic normal forms.

For the rank-one family the first-order block reads
dt w' = grad(w_n) . Y(w) grad(w') + Y_n(w) |grad w_n|^2 with the diagonal
symmetriser A0 = diag(k_i u_i / (k_n - k_i)), and the scalar parabolic
coefficient is a(w) = sum_i k_i u_i.

For the general family the blocks are built from the kernel/range splitting
of the coupling matrix: A0 = (Q D(u)^{-1} Q^T)^{-1},
Sigma = Q^T A0 Q, A1(w, zeta) = Q Sigma D(u)^{-1} D[P^T lam zeta] Sigma Q^T,
parabolic coefficient D(lam) P D(u) P^T D(lam), and a lower-order term that
is quadratic in the parabolic gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrumGap, SingularA0
from .model import SystemSpec
from .spectral import EigenStructure
from .transforms import dpsi_general, phi_general, psi_general, psi_rank1


@dataclass(frozen=True)
class NormalFormCoeffs:
    """Coefficient matrices of a normal form at one state.

    ``A0`` symmetrises the first-order block; ``A1_dir`` holds one symmetric
    matrix per spatial direction (rank-one systems have a single
    direction-independent matrix); ``lower_order`` is the inhomogeneity of
    the hyperbolic block; ``parab_lhs`` multiplies dt of the parabolic
    variables and ``parab_coeff`` is the SPD diffusion coefficient.
    """

    A0: np.ndarray
    A1_dir: tuple
    lower_order: np.ndarray
    parab_lhs: np.ndarray
    parab_coeff: np.ndarray
    variant: str


# ---------------------------------------------------------------------------
# rank-one assembly
# ---------------------------------------------------------------------------

def rank1_Y(u, spec: SystemSpec):
    """Transport matrix Y and source vector Y_n at one state (a = 1 form)."""
    k = spec.k
    if np.any(k[:-1] >= k[-1]):
        raise DegenerateSpectrumGap("rank-one coefficients need k_i < k_n for i < n")
    ahat = float(np.dot(k, u))
    nn = spec.n - 1
    Y = np.diag(k[:nn]) + np.outer(k[-1] - k[:nn], k[:nn] * u[:nn]) / ahat
    Yn = (k[:nn] - k[-1]) / ahat
    return Y, Yn, ahat


def coeffs_rank1(w, spec: SystemSpec, u=None) -> NormalFormCoeffs:
    """Assemble the rank-one normal-form coefficients at one state."""
    if u is None:
        u = psi_rank1(np.asarray(w, dtype=float), spec)
    u = np.asarray(u, dtype=float)
    k = spec.k
    Y, Yn, ahat = rank1_Y(u, spec)
    nn = spec.n - 1
    X = k[:nn] * u[:nn] / (k[-1] - k[:nn])
    A0 = np.diag(X)
    A1 = A0 @ Y
    Vn = X * Yn
    return NormalFormCoeffs(
        A0=A0,
        A1_dir=(A1,) * spec.d,
        lower_order=Vn,
        parab_lhs=np.array([[1.0]]),
        parab_coeff=np.array([[ahat]]),
        variant="rank1",
    )


# ---------------------------------------------------------------------------
# general-rank assembly
# ---------------------------------------------------------------------------

def _sigma_blocks(u, E: EigenStructure):
    """A0 = (Q D(u)^{-1} Q^T)^{-1} and Sigma = Q^T A0 Q for one state."""
    Q = E.Q
    if Q.shape[0] == 0:
        return np.zeros((0, 0)), np.zeros((E.n, E.n))
    QDQ = Q @ ((1.0 / u)[:, None] * Q.T)
    try:
        A0 = np.linalg.inv(QDQ)
    except np.linalg.LinAlgError as exc:
        raise SingularA0(str(exc)) from exc
    return A0, Q.T @ A0 @ Q


def general_A1_hyp(u, E: EigenStructure, grad_wII_dir):
    """Symmetric first-order coefficient for one direction's parabolic gradient."""
    A0, Sigma = _sigma_blocks(u, E)
    mu_grad = E.P.T @ (E.lam_range * np.asarray(grad_wII_dir, dtype=float))
    inner = Sigma @ ((mu_grad / u)[:, None] * Sigma)
    return E.Q @ inner @ E.Q.T


def lower_order_general(w, E: EigenStructure, grad_wII):
    """Quadratic-in-gradient source of the hyperbolic block, one state.

    ``grad_wII`` has shape (d, rank): one parabolic gradient per direction.
    Uses the parabolic-direction sensitivities d log u / d w_m obtained from
    the implicit minimiser, so the result is homogeneous of degree two in
    the gradient argument.
    """
    grad_wII = np.atleast_2d(np.asarray(grad_wII, dtype=float))
    sens = dpsi_general(np.asarray(w, dtype=float), E)
    u = sens.u
    # d log u_i / d w_m for parabolic directions m: rows i, columns m
    dlogu_II = E.P.T @ sens.dX_dwII
    g = np.zeros(E.n - E.rank)
    for nu in range(grad_wII.shape[0]):
        zeta = grad_wII[nu]
        mu_grad = E.P.T @ (E.lam_range * zeta)  # d mu_i in direction nu
        per_i = (dlogu_II @ zeta) * mu_grad
        g += E.Q @ per_i
    return g


def coeffs_general(w, E: EigenStructure, grad_wII=None, u=None) -> NormalFormCoeffs:
    """Assemble the general normal-form coefficients at one state.

    ``grad_wII`` (shape (d, rank)) supplies the parabolic gradients entering
    the first-order coefficient and the lower-order term; it defaults to
    zero gradients, for which A1 and the source vanish.
    """
    if w is None:
        w = phi_general(np.asarray(u, dtype=float), E)
    w = np.asarray(w, dtype=float)
    if u is None:
        u = psi_general(w, E)
    u = np.asarray(u, dtype=float)
    if grad_wII is None:
        grad_wII = np.zeros((1, E.rank))
    grad_wII = np.atleast_2d(np.asarray(grad_wII, dtype=float))

    A0, _ = _sigma_blocks(u, E)
    A1_dir = tuple(general_A1_hyp(u, E, grad_wII[nu]) for nu in range(grad_wII.shape[0]))
    lam = E.lam_range
    PDP = E.P @ (u[:, None] * E.P.T)
    A1_II = lam[:, None] * PDP * lam[None, :]
    if A0.shape[0] > 0:
        src = A0 @ lower_order_general(w, E, grad_wII)
    else:
        src = np.zeros(0)
    return NormalFormCoeffs(
        A0=A0,
        A1_dir=A1_dir,
        lower_order=src,
        parab_lhs=np.diag(lam),
        parab_coeff=A1_II,
        variant="general",
    )


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

def _asym(M):
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    scale = max(float(np.max(np.abs(M))), 1e-300)
    return float(np.max(np.abs(M - M.T))) / scale


def _min_eig(M):
    M = np.asarray(M)
    if M.size == 0:
        return float("inf")
    return float(np.min(np.linalg.eigvalsh(0.5 * (M + M.T))))


def certify(coeffs: NormalFormCoeffs, tol: float = 1e-12) -> dict:
    """Numerical certificate of symmetry and definiteness at one state."""
    report = {
        "A0_asymmetry": _asym(coeffs.A0),
        "A0_min_eig": _min_eig(coeffs.A0),
        "A1_asymmetry": max((_asym(A1) for A1 in coeffs.A1_dir), default=0.0),
        "parab_asymmetry": _asym(coeffs.parab_coeff),
        "parab_min_eig": _min_eig(coeffs.parab_coeff),
        "tol": tol,
    }
    report["symmetric_ok"] = (
        report["A0_asymmetry"] <= tol
        and report["A1_asymmetry"] <= tol
        and report["parab_asymmetry"] <= tol
    )
    report["spd_ok"] = report["A0_min_eig"] > 0 and report["parab_min_eig"] > 0
    report["ok"] = report["symmetric_ok"] and report["spd_ok"]
    return report
