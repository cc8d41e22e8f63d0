"""Changes of variables between densities and hyperbolic-parabolic variables.

Three diffeomorphisms are implemented, all vectorised over trailing axes
(states are arrays of shape (n,) or (n, ...)):

* rank-one explicit transform: w_i = log(u_i^{1/k_i} / u_n^{1/k_n}) for
  i < n and w_n = sum_j u_j, inverted through a monotone scalar root solve;
* general eigenbasis transform: w_I = Q log u, w_II = P u, inverted by
  minimising a strictly convex potential with a damped Newton method;
* the simplex alternative for the a = k family: w_i = u_i^{1/k_i} / L(u)
  with L(u) = sum_j u_j^{1/k_j} and w_n = sum_j k_j u_j.

The rank-one transform assumes the species are relabelled so that
max_{i<n} k_i < k_n and that the weights a have been absorbed into u
(u_i -> a_i u_i); see :func:`aggregate_equal_k` for equal leading
mobilities.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DegenerateSpectrumGap,
    MinimizerDiverged,
    NonPositiveDensity,
    RootBracketFailure,
    SimplexViolation,
    SingularBlock,
)
from .model import SystemSpec
from .spectral import EigenStructure

# Variant tags for transformed states.
RANK1_EXPLICIT = "rank1_explicit"
GENERAL_EIGEN = "general_eigen"
APPENDIX_ALT = "appendix_alt"

ROOT_RTOL = 1e-12
NEWTON_MAX = 50
BISECT_MAX = 200
DIVERGENCE_FACTOR = 1e3


def _require_positive(u):
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0) or not np.all(np.isfinite(u)):
        raise NonPositiveDensity(f"densities must be positive, min={np.min(u):.3e}")
    return u


def _check_strict_gap(k):
    if np.any(k[:-1] >= k[-1]):
        raise DegenerateSpectrumGap(
            "max_{i<n} k_i < k_n required; aggregate the equal tail first"
        )


# ---------------------------------------------------------------------------
# rank-one explicit transform
# ---------------------------------------------------------------------------

def phi_rank1(u, spec: SystemSpec):
    """Forward rank-one transform, u -> w."""
    u = _require_positive(u)
    k = spec.k
    _check_strict_gap(k)
    kb = k.reshape((-1,) + (1,) * (u.ndim - 1))
    logs = np.log(u) / kb
    w = np.empty_like(u)
    w[:-1] = logs[:-1] - logs[-1]
    w[-1] = u.sum(axis=0)
    return w


def psi_rank1(w, spec: SystemSpec, u_n_guess=None):
    """Inverse rank-one transform, w -> u.

    Solves the monotone scalar equation
    g(s) = s + sum_{j<n} exp(k_j w_j) s^{k_j/k_n} = w_n for s = u_n with a
    bracketed Newton iteration (g is strictly increasing from 0 to infinity,
    so [0, w_n] always brackets the root).  ``u_n_guess`` warm-starts the
    iteration, e.g. with the previous time level during stepping.
    """
    w = np.asarray(w, dtype=float)
    k = spec.k
    _check_strict_gap(k)
    wn = w[-1]
    if np.any(wn <= 0) or not np.all(np.isfinite(w)):
        raise RootBracketFailure("w_n must be positive for the rank-one inverse")

    expo = (k[:-1] / k[-1]).reshape((-1,) + (1,) * (w.ndim - 1))
    coef = np.exp(k[:-1].reshape(expo.shape) * w[:-1])

    def g(s):
        return s + np.sum(coef * s[None] ** expo, axis=0)

    def gprime(s):
        return 1.0 + np.sum(coef * expo * s[None] ** (expo - 1.0), axis=0)

    lo = np.zeros_like(wn)
    hi = np.array(wn, copy=True)  # g(s) >= s, so g(wn) >= wn
    s = np.clip(u_n_guess, 1e-300, hi) if u_n_guess is not None else 0.5 * wn
    s = np.asarray(s, dtype=float).copy()

    tol = ROOT_RTOL * wn
    for _ in range(NEWTON_MAX):
        res = g(s) - wn
        if np.all(np.abs(res) <= tol):
            break
        below = res < 0
        lo = np.where(below, s, lo)
        hi = np.where(below, hi, s)
        step = res / gprime(s)
        s_new = s - step
        bad = (s_new < lo) | (s_new > hi)
        s = np.where(bad, 0.5 * (lo + hi), s_new)
    else:
        for _ in range(BISECT_MAX):
            res = g(s) - wn
            if np.all(np.abs(res) <= tol):
                break
            below = res < 0
            lo = np.where(below, s, lo)
            hi = np.where(below, hi, s)
            s = 0.5 * (lo + hi)
        else:
            raise RootBracketFailure("rank-one inverse did not converge")

    u = np.empty_like(w)
    u[-1] = s
    u[:-1] = coef * s[None] ** expo
    return u


def jacobian_rank1(u, spec: SystemSpec):
    """Jacobian of the rank-one forward transform at a single point.

    Returns (DPhi, det) where det is evaluated from the closed form
    det = sum_l prod_{i != l} 1/(k_i u_i) > 0.
    """
    u = _require_positive(np.asarray(u, dtype=float))
    k = spec.k
    n = spec.n
    D = np.zeros((n, n))
    inv = 1.0 / (k * u)
    for i in range(n - 1):
        D[i, i] = inv[i]
        D[i, -1] = -inv[-1]
    D[-1, :] = 1.0
    total = np.prod(inv)
    det = float(np.sum(total / inv))
    return D, det


def push_forward_rank1(u, udot, spec: SystemSpec):
    """Apply DPhi(u) to a tangent vector (or field of tangents) udot."""
    u = _require_positive(u)
    udot = np.asarray(udot, dtype=float)
    kb = spec.k.reshape((-1,) + (1,) * (u.ndim - 1))
    rates = udot / (kb * u)
    wdot = np.empty_like(udot)
    wdot[:-1] = rates[:-1] - rates[-1]
    wdot[-1] = udot.sum(axis=0)
    return wdot


# ---------------------------------------------------------------------------
# general eigenbasis transform
# ---------------------------------------------------------------------------

def phi_general(u, E: EigenStructure):
    """General transform: w_I = Q log u, w_II = P u."""
    u = _require_positive(u)
    logu = np.log(u)
    w_I = np.tensordot(E.Q, logu, axes=(1, 0))
    w_II = np.tensordot(E.P, u, axes=(1, 0))
    return np.concatenate([w_I, w_II], axis=0)


def _split_w(w, E: EigenStructure):
    m = E.n - E.rank
    return w[:m], w[m:]


def psi_general(w, E: EigenStructure, tol: float = 1e-12, max_iter: int = 100):
    """Inverse general transform via strictly convex minimisation.

    Finds the minimiser X of G(X; w) = 1 . exp(Q^T w_I + P^T X) - w_II . X
    with a damped Newton method (the Hessian P D(u) P^T is SPD for positive
    u) and returns u = exp(Q^T w_I + P^T X).  Divergence of the iterates
    certifies that w_II lies outside the admissible cone P R_+^n.
    """
    w = np.asarray(w, dtype=float)
    w_I, w_II = _split_w(w, E)
    Q, P = E.Q, E.P
    shape_tail = w.shape[1:]
    flat = int(np.prod(shape_tail)) if shape_tail else 1
    wI2 = w_I.reshape(E.n - E.rank, flat)
    wII2 = w_II.reshape(E.rank, flat)

    base = Q.T @ wI2  # (n, M), fixed part of log u
    # start from the projection of a clamped proxy density
    proxy = np.maximum(P.T @ wII2, 1e-8)
    X = P @ np.log(proxy)

    scale = 1.0 + np.linalg.norm(wII2, axis=0)
    diverged = np.zeros(flat, dtype=bool)

    def G_val(Xc):
        # overflow to inf is fine here: such a trial step is simply rejected
        with np.errstate(over="ignore"):
            expo = base + P.T @ Xc
            return np.exp(expo).sum(axis=0) - np.sum(wII2 * Xc, axis=0)

    g_cur = G_val(X)
    for _ in range(max_iter):
        u = np.exp(base + P.T @ X)
        F = P @ u - wII2
        if np.all(np.linalg.norm(F, axis=0) <= tol * scale):
            break
        # batched SPD Hessian P D(u) P^T, shape (M, r, r)
        H = np.einsum("ai,im,bi->mab", P, u, P)
        try:
            step = np.linalg.solve(H, -F.T[..., None])[..., 0].T
        except np.linalg.LinAlgError as exc:
            raise SingularBlock(str(exc)) from exc
        # backtracking line search on G, with roundoff slack so that steps
        # near the minimum are not rejected spuriously
        t = np.ones(flat)
        descent = np.sum(F * step, axis=0)  # grad . step, negative
        slack = 1e-14 * (1.0 + np.abs(g_cur))
        for _ in range(60):
            Xt = X + t * step
            g_new = G_val(Xt)
            ok = g_new <= g_cur + 1e-4 * t * descent + slack
            if np.all(ok | diverged):
                break
            t = np.where(ok, t, 0.5 * t)
        X = X + t * step
        g_cur = G_val(X)
        diverged |= np.linalg.norm(X, axis=0) > DIVERGENCE_FACTOR * (
            1.0 + np.linalg.norm(w.reshape(E.n, flat), axis=0)
        )
        if np.any(diverged):
            raise MinimizerDiverged(
                "convex inversion diverged: w_II outside the cone P R_+^n"
            )
    else:
        raise MinimizerDiverged("convex inversion did not converge")

    u = np.exp(base + P.T @ X)
    return u.reshape((E.n,) + shape_tail)


@dataclass(frozen=True)
class GeneralSensitivity:
    """Derivatives of the general inverse at one state.

    ``dXF`` is the SPD block P D(u) P^T; ``dXF_inv`` its inverse assembled
    from the kernel/range block formula; ``dX_dwI[:, m]`` is the derivative
    of the implicit minimiser X with respect to the m-th hyperbolic variable
    and ``dX_dwII`` the derivative with respect to the parabolic variables.
    """

    u: np.ndarray
    dXF: np.ndarray
    dXF_inv: np.ndarray
    dX_dwI: np.ndarray
    dX_dwII: np.ndarray


def dpsi_general(w, E: EigenStructure) -> GeneralSensitivity:
    """Sensitivities of the general inverse at a single point."""
    u = psi_general(np.asarray(w, dtype=float), E)
    Q, P = E.Q, E.P
    Du_inv = 1.0 / u
    dXF = P @ (u[:, None] * P.T)
    QDQ = Q @ (Du_inv[:, None] * Q.T)
    if QDQ.size:
        QDQ_inv = np.linalg.inv(QDQ)
        correction = (
            P @ (Du_inv[:, None] * Q.T) @ QDQ_inv @ (Q @ (Du_inv[:, None] * P.T))
        )
    else:
        correction = np.zeros_like(dXF)
    dXF_inv = P @ (Du_inv[:, None] * P.T) - correction
    # dX/dw_m = -(dXF)^{-1} P D(u) xi^m for kernel directions m
    dX_dwI = -dXF_inv @ (P @ (u[:, None] * Q.T))
    # parabolic directions enter F as -w_II, so dX/dw_m = (dXF)^{-1} e^m
    dX_dwII = dXF_inv.copy()
    return GeneralSensitivity(u=u, dXF=dXF, dXF_inv=dXF_inv, dX_dwI=dX_dwI, dX_dwII=dX_dwII)


def push_forward_general(u, udot, E: EigenStructure):
    """Apply the general forward Jacobian to a tangent field."""
    u = _require_positive(u)
    udot = np.asarray(udot, dtype=float)
    w_I_dot = np.tensordot(E.Q, udot / u, axes=(1, 0))
    w_II_dot = np.tensordot(E.P, udot, axes=(1, 0))
    return np.concatenate([w_I_dot, w_II_dot], axis=0)


# ---------------------------------------------------------------------------
# simplex alternative (a = k)
# ---------------------------------------------------------------------------

def phi_alt(u, spec: SystemSpec):
    """Simplex transform for the a = k family."""
    u = _require_positive(u)
    k = spec.k
    kb = k.reshape((-1,) + (1,) * (u.ndim - 1))
    roots = u ** (1.0 / kb)
    L = roots.sum(axis=0)
    w = np.empty_like(u)
    w[:-1] = roots[:-1] / L
    w[-1] = (kb * u).sum(axis=0)
    return w


def psi_alt(w, spec: SystemSpec):
    """Inverse simplex transform via a monotone scalar root solve in u_n.

    Uses L = (1 - sum_I w_i)^{-1} u_n^{1/k_n} and u_j = (L w_j)^{k_j}, then
    solves sum_I k_j (L w_j)^{k_j} + k_n u_n = w_n for u_n.
    """
    w = np.asarray(w, dtype=float)
    k = spec.k
    wI = w[:-1]
    wn = w[-1]
    rem = 1.0 - wI.sum(axis=0)
    if np.any(wI <= 0) or np.any(rem <= 0):
        raise SimplexViolation("hyperbolic components must lie in the open simplex")
    if np.any(wn <= 0):
        raise SimplexViolation("parabolic component must be positive")

    kb = k[:-1].reshape((-1,) + (1,) * (w.ndim - 1))
    kn = k[-1]

    def h(s):
        L = s ** (1.0 / kn) / rem
        return np.sum(kb * (L * wI) ** kb, axis=0) + kn * s

    # h is increasing from 0 to infinity; kn * s = wn gives an upper bracket
    lo = np.zeros_like(wn)
    hi = np.array(wn / kn, copy=True)
    s = 0.5 * hi
    tol = ROOT_RTOL * wn
    for _ in range(200):
        res = h(s) - wn
        if np.all(np.abs(res) <= tol):
            break
        below = res < 0
        lo = np.where(below, s, lo)
        hi = np.where(below, hi, s)
        s = 0.5 * (lo + hi)
    else:
        raise RootBracketFailure("simplex inverse did not converge")
    # polish with Newton (smooth away from zero)
    for _ in range(10):
        L = s ** (1.0 / kn) / rem
        val = np.sum(kb * (L * wI) ** kb, axis=0) + kn * s
        dL = L / (kn * s)
        dval = np.sum(kb * kb * (L * wI) ** (kb - 1.0) * wI * dL, axis=0) + kn
        s_new = s - (val - wn) / dval
        s = np.where((s_new > 0) & np.isfinite(s_new), s_new, s)

    L = s ** (1.0 / kn) / rem
    u = np.empty_like(w)
    u[:-1] = (L * wI) ** kb
    u[-1] = s
    return u


# ---------------------------------------------------------------------------
# equal-mobility aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AggregationPlan:
    """How to rebuild individual species after an equal-tail aggregation.

    ``merged_from`` lists the original indices folded into the last reduced
    species; those species must afterwards be advected by the fixed velocity
    field of the reduced solution.  ``identity`` is True when nothing was
    merged.
    """

    merged_from: tuple[int, ...]
    identity: bool


def aggregate_equal_k(spec: SystemSpec, u_field=None):
    """Merge the trailing species that share the largest mobility.

    Requires a rank-one spec sorted by k.  Returns (reduced_spec,
    reduced_field, plan); the reduced spec satisfies the strict gap
    condition (or is scalar when all mobilities agree).  Weights a must
    already be absorbed (a = 1), since summed species share one pressure
    weight only in that normalisation.
    """
    k = spec.k
    if np.any(np.diff(k) < 0):
        raise DegenerateSpectrumGap("spec must be sorted by k before aggregation")
    tail = np.flatnonzero(k == k[-1])
    m = int(tail[0])
    if m == spec.n - 1:
        plan = AggregationPlan(merged_from=(), identity=True)
        return spec, u_field, plan

    k_red = np.concatenate([k[:m], [k[-1]]])
    a_red = np.ones(m + 1)
    reduced = replace(spec, n=m + 1, k=k_red, a=a_red)
    plan = AggregationPlan(merged_from=tuple(range(m, spec.n)), identity=False)
    if u_field is None:
        return reduced, None, plan
    u_field = np.asarray(u_field, dtype=float)
    merged = u_field[m:].sum(axis=0, keepdims=True)
    reduced_field = np.concatenate([u_field[:m], merged], axis=0)
    return reduced, reduced_field, plan
