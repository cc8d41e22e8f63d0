"""Time integration for the cross-diffusion systems.

Two interchangeable solvers are provided: a direct solver in the original
densities (conservative fluxes, exact discrete mass conservation) and a
normal-form solver in the transformed variables (non-conservative central
transport for the hyperbolic block, conservative diffusion for the parabolic
block).  Agreement between the two at matched resolution is the main
cross-validation of the coefficient assembly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .entropy import pressure
from .errors import (
    DomainExit,
    NonPositiveDensity,
    PositivityLost,
    SolverError,
    StepRejected,
)
from .grid import Grid, derivative, fourth_difference
from .model import SystemSpec
from .spectral import EigenStructure
from .transforms import psi_general, psi_rank1


@dataclass
class PicardConfig:
    """Controls for the linearised successive-approximation loop."""

    max_iters: int = 10
    contraction_tol: float = 1e-9
    stage_horizon: float | None = None  # None: monitor-selected
    horizon_factor: float = 50.0  # initial horizon = factor * explicit dt limit
    KR_factor: float | None = None  # override for the working-bound factor K


@dataclass
class SolverConfig:
    t_end: float = 0.05
    dt: float | None = None  # None selects the step automatically
    scheme: str = "explicit_rk2"  # or "imex"
    space_scheme: str = "central2"
    cfl_hyp: float = 0.4
    diff_number: float = 0.25
    dissipation: float = 0.01  # fourth-order artificial dissipation strength
    positivity_floor: float = 1e-10
    snapshot_every: float | None = None
    picard: PicardConfig = field(default_factory=PicardConfig)

    def __post_init__(self):
        if self.dt is not None and self.dt <= 0:
            raise SolverError("dt must be positive when fixed")
        if not 0 < self.cfl_hyp <= 1:
            raise SolverError("cfl_hyp must lie in (0, 1]")
        if self.scheme not in ("explicit_rk2", "imex"):
            raise SolverError(f"unknown scheme {self.scheme!r}")


def monitor_sobolev_order(d: int) -> int:
    """Smallest integer exceeding d/2 + 1: the working regularity index."""
    return 2 if d == 1 else 3


# ---------------------------------------------------------------------------
# discrete operators
# ---------------------------------------------------------------------------

def _cons_div(coef, pot, grid: Grid, axis: int):
    """d/dx_axis(coef * d pot/dx_axis) with half-point averaged coefficient."""
    ax = np.asarray(pot).ndim - grid.d + axis
    dx = grid.dx
    dp = (np.roll(pot, -1, axis=ax) - pot) / dx
    chalf = 0.5 * (coef + np.roll(coef, -1, axis=ax))
    flux = chalf * dp
    return (flux - np.roll(flux, 1, axis=ax)) / dx


def _cons_div_matrix(A, wfield, grid: Grid):
    """Conservative divergence of a matrix-coefficient flux.

    ``A`` has shape (*grid, r, r); ``wfield`` has shape (r, *grid).  Returns
    sum_axis d/dx(A_half dw/dx) with arithmetic half-point averaging of A.
    """
    r = wfield.shape[0]
    out = np.zeros_like(wfield)
    dx = grid.dx
    for axis in range(grid.d):
        ax_w = 1 + axis
        ax_A = axis
        dw = (np.roll(wfield, -1, axis=ax_w) - wfield) / dx  # (r, *grid)
        Ahalf = 0.5 * (A + np.roll(A, -1, axis=ax_A))
        flux = np.einsum("...ab,b...->a...", Ahalf, dw)
        out += (flux - np.roll(flux, 1, axis=ax_w)) / dx
    return out


def rhs_direct(u, spec: SystemSpec, grid: Grid, scheme: str = "central2"):
    """Right side of the conservation-law system in the original densities.

    Conservative fluxes with arithmetic-mean interpolation at half points;
    the grid sum of every component vanishes to roundoff.  The spectral
    variant is used by the push-forward oracle.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise NonPositiveDensity("direct right side needs positive densities")
    kshape = (-1,) + (1,) * grid.d
    if spec.is_rank1:
        pot = pressure(u, spec)[None]  # shared potential
        coef = spec.k.reshape(kshape) * u
    else:
        pot = np.tensordot(spec.B, u, axes=(1, 0))
        coef = u
    out = np.zeros_like(u)
    if scheme == "spectral":
        for axis in range(grid.d):
            dpot = derivative(pot, grid, axis, "spectral")
            out += derivative(coef * dpot, grid, axis, "spectral")
        return out
    pot_b = np.broadcast_to(pot, u.shape)
    for axis in range(grid.d):
        out += _cons_div(coef, pot_b, grid, axis)
    return out


def rhs_normal_form_rank1(
    w,
    spec: SystemSpec,
    grid: Grid,
    scheme: str = "central2",
    dissipation: float = 0.0,
    u=None,
):
    """Right side of the rank-one normal form on a w field.

    Hyperbolic components use pointwise transport coefficients and central
    differences (plus optional fourth-order artificial dissipation);
    the parabolic component uses a conservative discretisation of
    div(a(w) grad w_n).  ``spec`` must be in canonical form (sorted k,
    strict gap, weights absorbed).
    """
    w = np.asarray(w, dtype=float)
    if np.any(w[-1] <= 0):
        raise DomainExit("parabolic variable left the positive half-space")
    if u is None:
        u = psi_rank1(w, spec)
    k = spec.k
    nn = spec.n - 1
    kshape = (-1,) + (1,) * grid.d
    ahat = np.sum(k.reshape(kshape) * u, axis=0)

    out = np.zeros_like(w)
    wn = w[-1]
    if nn > 0:
        kI = k[:nn].reshape((-1,) + (1,) * grid.d)
        gradsq = np.zeros_like(wn)
        for axis in range(grid.d):
            dwn = derivative(wn, grid, axis, scheme)
            dwp = derivative(w[:nn], grid, axis, scheme)
            s = np.sum(kI * u[:nn] * dwp, axis=0)
            out[:nn] += dwn[None] * (kI * dwp + (k[-1] - kI) * s[None] / ahat[None])
            gradsq += dwn**2
        out[:nn] += (kI - k[-1]) / ahat[None] * gradsq[None]
        if dissipation > 0.0 and scheme == "central2":
            for axis in range(grid.d):
                out[:nn] -= (dissipation / grid.dx) * fourth_difference(
                    w[:nn], grid, axis
                )
    if scheme == "spectral":
        for axis in range(grid.d):
            dwn = derivative(wn, grid, axis, "spectral")
            out[-1] += derivative(ahat * dwn, grid, axis, "spectral")
    else:
        for axis in range(grid.d):
            out[-1] += _cons_div(ahat, wn, grid, axis)
    return out


def _general_pointwise(w, E: EigenStructure, grid: Grid, u=None):
    """Flattened state, inverse transform and batched SPD blocks."""
    n, r = E.n, E.rank
    m = n - r
    wflat = w.reshape(n, -1)
    if u is None:
        uflat = psi_general(wflat, E)
    else:
        uflat = np.asarray(u, dtype=float).reshape(n, -1)
    # batched Hessian of the convex inversion: P D(u) P^T, shape (M, r, r)
    dXF = np.einsum("ai,im,bi->mab", E.P, uflat, E.P)
    if m > 0:
        A0inv = np.einsum("ai,im,bi->mab", E.Q, 1.0 / uflat, E.Q)  # (M, m, m)
        A0 = np.linalg.inv(A0inv)
    else:
        A0 = None
    return wflat, uflat, dXF, A0


def rhs_normal_form_general(
    w,
    E: EigenStructure,
    grid: Grid,
    scheme: str = "central2",
    dissipation: float = 0.0,
    u=None,
):
    """Right side of the general normal form on a w field.

    Solves the batched convex inversion for the densities, applies the
    assembled first-order coefficients to the hyperbolic gradients, adds the
    quadratic lower-order term, and a conservative matrix-coefficient
    diffusion for the parabolic block.
    """
    w = np.asarray(w, dtype=float)
    n, r = E.n, E.rank
    m = n - r
    gshape = w.shape[1:]
    wflat, uflat, dXF, A0 = _general_pointwise(w, E, grid, u=u)
    ufield = uflat.reshape((n,) + gshape)

    out = np.zeros_like(w)
    w_I = w[:m]
    w_II = w[m:]
    lam = E.lam_range

    if m > 0:
        hyp = np.zeros((m, uflat.shape[1]))
        for axis in range(grid.d):
            dwI = derivative(w_I, grid, axis, scheme).reshape(m, -1)
            dwII = derivative(w_II, grid, axis, scheme).reshape(r, -1)
            mu_grad = E.P.T @ (lam[:, None] * dwII)  # (n, M)
            # transport: Z dwI with Z = Q D(mu'/u) Sigma Q^T and
            # Sigma Q^T v = Q^T A0 v
            t1 = np.einsum("mab,bm->am", A0, dwI)  # A0 dwI, (m, M)
            t2 = E.Q.T @ t1  # (n, M)
            hyp += E.Q @ (mu_grad / uflat * t2)
            # quadratic lower-order term: Q [ (P^T dXF^{-1} dwII) * mu' ]
            y = np.linalg.solve(dXF, dwII.T[..., None])[..., 0].T  # (r, M)
            hyp += E.Q @ ((E.P.T @ y) * mu_grad)
        out[:m] = hyp.reshape((m,) + gshape)
        if dissipation > 0.0 and scheme == "central2":
            for axis in range(grid.d):
                out[:m] -= (dissipation / grid.dx) * fourth_difference(
                    w[:m], grid, axis
                )

    # parabolic block: D(lam) dt w_II = div(D(lam) P D(u) P^T D(lam) grad w_II)
    A_II = lam[None, :, None] * dXF * lam[None, None, :]  # (M, r, r)
    if scheme == "spectral":
        par = np.zeros((r,) + gshape)
        Afield = A_II.reshape(gshape + (r, r))
        for axis in range(grid.d):
            dwII = derivative(w_II, grid, axis, "spectral")
            flux = np.einsum("...ab,b...->a...", Afield, dwII)
            par += derivative(flux, grid, axis, "spectral")
    else:
        Afield = A_II.reshape(gshape + (r, r))
        par = _cons_div_matrix(Afield, w_II, grid)
    out[m:] = par / lam.reshape((-1,) + (1,) * grid.d)
    return out


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------

def rk2_step(y, dt, rhs):
    """Heun / SSP second-order step."""
    k1 = rhs(y)
    y1 = y + dt * k1
    k2 = rhs(y1)
    return y + 0.5 * dt * (k1 + k2)


def _max_grad(f, grid: Grid):
    g = 0.0
    for axis in range(grid.d):
        g = max(g, float(np.max(np.abs(derivative(f, grid, axis, "central2")))))
    return g


def auto_dt_direct(u, spec: SystemSpec, grid: Grid, cfg: SolverConfig) -> float:
    """Diffusion-limited step for the conservative direct solver."""
    if spec.is_rank1:
        amax = float(np.max(np.sum((spec.k * spec.a).reshape((-1,) + (1,) * grid.d) * u, axis=0)))
    else:
        lam_max = float(np.max(np.linalg.eigvalsh(spec.B)))
        amax = lam_max * float(np.max(np.sum(u, axis=0)))
    amax = max(amax, 1e-14)
    return cfg.diff_number * grid.dx**2 / amax


def auto_dt_rank1_nf(w, u, spec: SystemSpec, grid: Grid, cfg: SolverConfig) -> float:
    """CFL/diffusion-limited step for the rank-one normal-form solver."""
    kmax = float(np.max(spec.k))
    vmax = max(2.0 * kmax * _max_grad(w[-1], grid), 1e-14)
    dt_h = cfg.cfl_hyp * grid.dx / vmax
    if cfg.scheme == "imex":
        return dt_h
    amax = max(float(np.max(np.sum(spec.k.reshape((-1,) + (1,) * grid.d) * u, axis=0))), 1e-14)
    return min(dt_h, cfg.diff_number * grid.dx**2 / amax)


def auto_dt_general_nf(w, u, E: EigenStructure, grid: Grid, cfg: SolverConfig) -> float:
    m = E.n - E.rank
    lam_max = float(np.max(E.lam_range))
    vmax = 1e-14
    for j in range(E.rank):
        vmax = max(vmax, lam_max * _max_grad(w[m + j], grid))
    dt_h = cfg.cfl_hyp * grid.dx / vmax
    amax = max(lam_max**2 * float(np.max(np.sum(u, axis=0))), 1e-14)
    if cfg.scheme == "imex":
        return dt_h
    return min(dt_h, cfg.diff_number * grid.dx**2 / amax)


def imex_step_rank1(w, dt, spec: SystemSpec, grid: Grid, cfg: SolverConfig):
    """IMEX step for the rank-one normal form.

    Hyperbolic components advance with an explicit SSP-RK2 using the frozen
    old parabolic variable; the parabolic component takes a backward Euler
    step with the lagged coefficient a(w_old), solved by conjugate gradients
    on the SPD operator.
    """
    u_old = psi_rank1(w, spec)
    kshape = (-1,) + (1,) * grid.d
    ahat = np.sum(spec.k.reshape(kshape) * u_old, axis=0)
    nn = spec.n - 1

    def hyp_rhs(wp):
        full = np.concatenate([wp, w[-1][None]], axis=0)
        rhs = rhs_normal_form_rank1(
            full, spec, grid, cfg.space_scheme, cfg.dissipation
        )
        return rhs[:nn]

    w_new = w.copy()
    if nn > 0:
        w_new[:nn] = rk2_step(w[:nn], dt, hyp_rhs)

    shape = grid.shape
    size = int(np.prod(shape))

    def matvec(x):
        xn = np.asarray(x, dtype=float).reshape(shape)
        out = xn.copy()
        for axis in range(grid.d):
            out -= dt * _cons_div(ahat, xn, grid, axis)
        return out.ravel()

    op = spla.LinearOperator((size, size), matvec=matvec, dtype=np.float64)
    sol, info = spla.cg(op, w[-1].ravel(), x0=w[-1].ravel(), rtol=1e-10, atol=0.0)
    if info != 0:
        raise StepRejected(f"parabolic CG solve failed (info={info})")
    w_new[-1] = sol.reshape(shape)
    return w_new


def integrate(y0, t0, t_end, rhs, dt_fun, snapshot_times, on_snapshot, max_steps=2_000_000):
    """March RK2 from t0 to t_end, landing exactly on each snapshot time."""
    y = np.array(y0, copy=True)
    t = t0
    snaps = sorted(tt for tt in snapshot_times if tt > t0 + 1e-14)
    si = 0
    steps = 0
    while t < t_end - 1e-14:
        dt = dt_fun(y)
        if dt < 1e-13:
            raise StepRejected(f"auto time step collapsed to {dt:.3e} at t={t:.6f}")
        target = snaps[si] if si < len(snaps) else t_end
        dt = min(dt, target - t)
        y = rk2_step(y, dt, rhs)
        t += dt
        steps += 1
        if steps > max_steps:
            raise SolverError("step budget exhausted")
        if si < len(snaps) and abs(t - snaps[si]) < 1e-13:
            on_snapshot(t, y)
            si += 1
    return y, t
