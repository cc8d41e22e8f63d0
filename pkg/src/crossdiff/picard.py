"""Linearised successive approximation with mollified starts.

Each stage solves the two decoupled linear problems obtained by freezing the
coefficients at the previous iterate's trajectory: a transport equation for
the hyperbolic components driven by the frozen parabolic gradient, and a
linear divergence-form heat flow for the parabolic component.  The monitor
tracks the contraction quantity

    N^l = sup_t ||w^l - w^{l-1}||_{L2}
          + ( integral_0^{T*} ||grad(w_n^l - w_n^{l-1})||_{L2}^2 dt )^{1/2}

and a working Sobolev bound; the stage horizon is halved whenever the bound
is violated.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainExit, NoContraction
from .grid import Grid, derivative, fourth_difference, l2_norm, mollify, sobolev_norm
from .model import SystemSpec, canonical_relabel
from .solver import (
    PicardConfig,
    SolverConfig,
    _cons_div,
    auto_dt_rank1_nf,
    monitor_sobolev_order,
)
from .transforms import aggregate_equal_k, phi_rank1, psi_rank1


@dataclass(frozen=True)
class PicardRecord:
    """One row of the contraction monitor."""

    iterate: int
    sup_increment: float
    grad_increment: float
    N: float
    max_hs: float
    min_wn: float


@dataclass
class PicardTrace:
    records: list
    horizon: float
    dt: float
    restarts: int
    K: float
    R: float

    def ratios(self):
        """Successive contraction ratios N^{l+1} / N^l."""
        Ns = [r.N for r in self.records]
        return [Ns[i + 1] / Ns[i] for i in range(len(Ns) - 1) if Ns[i] > 0]


def rhs_linear_stage(w, v, spec: SystemSpec, grid: Grid, scheme: str, dissipation: float):
    """Right side of the frozen-coefficient stage at one time level.

    ``v`` supplies every coefficient (densities, parabolic coefficient and
    the driving gradient); ``w`` supplies only the unknowns being advanced.
    With v = w this coincides with the quasilinear right side.
    """
    w = np.asarray(w, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(v[-1] <= 0) or np.any(w[-1] <= 0):
        raise DomainExit("parabolic variable left the positive half-space")
    uv = psi_rank1(v, spec)
    k = spec.k
    nn = spec.n - 1
    kshape = (-1,) + (1,) * grid.d
    ahat = np.sum(k.reshape(kshape) * uv, axis=0)

    out = np.zeros_like(w)
    vn = v[-1]
    if nn > 0:
        kI = k[:nn].reshape(kshape)
        gradsq = np.zeros_like(vn)
        for axis in range(grid.d):
            dvn = derivative(vn, grid, axis, scheme)
            dwp = derivative(w[:nn], grid, axis, scheme)
            s = np.sum(kI * uv[:nn] * dwp, axis=0)
            out[:nn] += dvn[None] * (kI * dwp + (k[-1] - kI) * s[None] / ahat[None])
            gradsq += dvn**2
        out[:nn] += (kI - k[-1]) / ahat[None] * gradsq[None]
        if dissipation > 0.0 and scheme == "central2":
            for axis in range(grid.d):
                out[:nn] -= (dissipation / grid.dx) * fourth_difference(w[:nn], grid, axis)
    for axis in range(grid.d):
        out[-1] += _cons_div(ahat, w[-1], grid, axis)
    return out


def picard_stage(v_traj, z, spec: SystemSpec, grid: Grid, dt: float, cfg: SolverConfig):
    """Advance the linear decoupled stage over the full frozen trajectory.

    ``v_traj`` has shape (S+1, n, *grid) on the uniform time grid of step
    ``dt``; the returned trajectory lives on the same grid and starts from
    ``z``.  Heun stages evaluate the frozen coefficients at the matching
    time levels (v_j for the predictor, v_{j+1} for the corrector).
    """
    steps = v_traj.shape[0] - 1
    out = np.empty_like(v_traj)
    out[0] = z
    w = np.array(z, copy=True)
    for j in range(steps):
        k1 = rhs_linear_stage(w, v_traj[j], spec, grid, cfg.space_scheme, cfg.dissipation)
        w1 = w + dt * k1
        k2 = rhs_linear_stage(w1, v_traj[j + 1], spec, grid, cfg.space_scheme, cfg.dissipation)
        w = w + 0.5 * dt * (k1 + k2)
        out[j + 1] = w
    return out


def _increments(w_new, w_old, grid: Grid, dt: float):
    """sup-in-time L2 distance and the parabolic-gradient increment."""
    sup = 0.0
    grad_sq = 0.0
    for j in range(w_new.shape[0]):
        sup = max(sup, l2_norm(w_new[j] - w_old[j], grid))
        diff_n = w_new[j, -1] - w_old[j, -1]
        g = 0.0
        for axis in range(grid.d):
            g += l2_norm(derivative(diff_n, grid, axis, "central2"), grid) ** 2
        weight = 0.5 if j in (0, w_new.shape[0] - 1) else 1.0
        grad_sq += weight * g * dt
    return sup, float(np.sqrt(grad_sq))


def _stage_bounds(w_traj, grid: Grid, s: int):
    max_hs = max(sobolev_norm(w_traj[j], grid, s) for j in range(w_traj.shape[0]))
    min_wn = float(np.min(w_traj[:, -1]))
    return max_hs, min_wn


def run_picard(spec: SystemSpec, u0, grid: Grid, cfg: SolverConfig):
    """Mollified successive approximation for a rank-one system.

    Returns the final stage trajectory (in the canonical reduced w
    variables) and the contraction trace.  Raises NoContraction when the
    monitored Sobolev bound keeps failing down to horizons of a few steps.
    """
    pc: PicardConfig = cfg.picard
    spec_c, _ = canonical_relabel(spec)
    u0 = np.asarray(u0, dtype=float)
    # absorb the pressure weights and merge any equal trailing mobilities
    perm_field = u0[np.argsort(spec.k, kind="stable")]
    ut = spec_c.a.reshape((-1,) + (1,) * grid.d) * perm_field
    spec_abs = replace(spec_c, a=np.ones(spec_c.n))
    reduced, red_field, _ = aggregate_equal_k(spec_abs, ut)

    w_in = phi_rank1(red_field, reduced)
    s = monitor_sobolev_order(grid.d)

    # working bound K R from the symmetriser's eigenvalue spread at t = 0
    u_in = psi_rank1(w_in, reduced)
    if pc.KR_factor is not None:
        K = float(pc.KR_factor)
    elif reduced.n > 1:
        k = reduced.k
        X = k[:-1].reshape((-1,) + (1,) * grid.d) * u_in[:-1]
        X = X / (k[-1] - k[:-1]).reshape((-1,) + (1,) * grid.d)
        K = 2.0 * float(np.sqrt(np.max(X) / np.min(X)))
    else:
        K = 2.0
    R = 1.2 * sobolev_norm(w_in, grid, s)
    bound = K * R

    dt = cfg.dt if cfg.dt is not None else auto_dt_rank1_nf(w_in, u_in, reduced, grid, cfg)
    horizon = pc.stage_horizon
    if horizon is None:
        horizon = pc.horizon_factor * dt

    restarts = 0
    while True:
        steps = max(int(round(horizon / dt)), 2)
        if horizon < 4 * dt:
            raise NoContraction(
                f"stage horizon {horizon:.3e} shrank below four steps of dt={dt:.3e}"
            )
        records = []
        z0 = mollify(w_in, grid, 0)
        w_prev = np.broadcast_to(z0, (steps + 1,) + z0.shape).copy()
        ok = True
        for ell in range(1, pc.max_iters + 1):
            z = mollify(w_in, grid, ell)
            w_new = picard_stage(w_prev, z, reduced, grid, dt, cfg)
            sup, grad = _increments(w_new, w_prev, grid, dt)
            max_hs, min_wn = _stage_bounds(w_new, grid, s)
            records.append(
                PicardRecord(
                    iterate=ell,
                    sup_increment=sup,
                    grad_increment=grad,
                    N=sup + grad,
                    max_hs=max_hs,
                    min_wn=min_wn,
                )
            )
            if max_hs >= bound or min_wn <= 0:
                ok = False
                break
            w_prev = w_new
            if sup + grad <= pc.contraction_tol:
                break
        if ok:
            trace = PicardTrace(
                records=records, horizon=steps * dt, dt=dt, restarts=restarts, K=K, R=R
            )
            return w_prev, trace
        horizon *= 0.5
        restarts += 1
