"""End-to-end simulation runs in either variable set, plus cross-validation.

The direct solver marches the original densities with conservative fluxes.
The normal-form solver relabels the species canonically, absorbs the
pressure weights, merges any equal trailing mobilities, marches the
transformed variables and advects the merged species passively in the
reduced velocity field, then maps every snapshot back to densities.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .entropy import entropy_kind, total_energy
from .errors import PositivityLost, SolverError
from .grid import Grid, sobolev_norm
from .model import SystemSpec, canonical_relabel, invert_permutation
from .picard import PicardTrace, run_picard
from .solver import (
    SolverConfig,
    _cons_div,
    auto_dt_direct,
    auto_dt_general_nf,
    auto_dt_rank1_nf,
    imex_step_rank1,
    integrate,
    monitor_sobolev_order,
    rhs_direct,
    rhs_normal_form_general,
    rhs_normal_form_rank1,
    rk2_step,
)
from .spectral import eigenstructure
from .transforms import aggregate_equal_k, phi_general, phi_rank1, psi_general, psi_rank1


RANK1_ENTROPY_TAGS = ("shannon_f1", "quadratic_f2", "plogp_f3")
GENERAL_ENTROPY_TAGS = ("boltzmann_shannon", "rao")


@dataclass
class RunResult:
    """In-memory outcome of one run.

    ``snapshots`` maps solver label ("direct", "normal_form") to a list of
    density fields at the snapshot ``times``; the invariant series are
    computed from the primary solver (direct when available).
    """

    spec: SystemSpec
    grid: Grid
    cfg: SolverConfig
    mode: str
    times: list
    snapshots: dict
    masses: list
    entropies: dict
    min_density: list
    hs_norms: list
    cross_distance: list | None = None
    picard: PicardTrace | None = None
    wn_range: tuple | None = None  # (min over run, max over run) of w_n
    exit_status: str = "ok"


def snapshot_times(cfg: SolverConfig):
    every = cfg.snapshot_every if cfg.snapshot_every else cfg.t_end / 10.0
    times = [0.0]
    t = every
    while t < cfg.t_end - 1e-12:
        times.append(t)
        t += every
    times.append(cfg.t_end)
    return times


def _check_floor(u, floor, where):
    m = float(np.min(u))
    if m < floor:
        raise PositivityLost(f"min density {m:.3e} fell below floor {floor:.1e} {where}")


def run_direct(spec: SystemSpec, u0, grid: Grid, cfg: SolverConfig):
    """Direct solver trajectory; returns (times, list of density fields)."""
    u0 = np.asarray(u0, dtype=float)
    _check_floor(u0, cfg.positivity_floor, "at t = 0")
    times = snapshot_times(cfg)
    recorded = [u0.copy()]

    def rhs(u):
        return rhs_direct(u, spec, grid, cfg.space_scheme)

    def dtf(u):
        return cfg.dt if cfg.dt is not None else auto_dt_direct(u, spec, grid, cfg)

    def on_snap(t, y):
        _check_floor(y, cfg.positivity_floor, f"at t = {t:.6f}")
        recorded.append(y.copy())

    integrate(u0, 0.0, cfg.t_end, rhs, dtf, times, on_snap)
    return times, recorded


@dataclass
class _Rank1Prep:
    spec_c: SystemSpec
    perm: np.ndarray
    reduced: SystemSpec
    w0: np.ndarray
    passive0: np.ndarray  # merged species in absorbed variables, may be empty
    n_passive: int


def _prepare_rank1(spec: SystemSpec, u0, grid: Grid) -> _Rank1Prep:
    spec_c, perm = canonical_relabel(spec)
    u_p = np.asarray(u0, dtype=float)[perm]
    a_c = spec_c.a.reshape((-1,) + (1,) * grid.d)
    ut = a_c * u_p
    spec_abs = replace(spec_c, a=np.ones(spec_c.n))
    reduced, red_field, plan = aggregate_equal_k(spec_abs, ut)
    w0 = phi_rank1(red_field, reduced)
    if plan.identity:
        passive0 = np.zeros((0,) + grid.shape)
    else:
        passive0 = ut[reduced.n - 1 :]
    return _Rank1Prep(
        spec_c=spec_c,
        perm=perm,
        reduced=reduced,
        w0=w0,
        passive0=passive0,
        n_passive=passive0.shape[0],
    )


def _reconstruct_rank1(y, prep: _Rank1Prep, grid: Grid):
    nred = prep.reduced.n
    w = y[:nred]
    u_red = psi_rank1(w, prep.reduced)
    if prep.n_passive:
        ut = np.concatenate([u_red[: nred - 1], y[nred:]], axis=0)
    else:
        ut = u_red
    a_c = prep.spec_c.a.reshape((-1,) + (1,) * grid.d)
    u_p = ut / a_c
    return u_p[invert_permutation(prep.perm)]


def run_normal_form_rank1(spec: SystemSpec, u0, grid: Grid, cfg: SolverConfig):
    """Normal-form trajectory for a rank-one spec.

    Returns (times, density snapshots, reduced w snapshots, w_n range).
    """
    prep = _prepare_rank1(spec, u0, grid)
    _check_floor(np.asarray(u0), cfg.positivity_floor, "at t = 0")
    nred = prep.reduced.n
    ktail = float(prep.reduced.k[-1])
    y0 = np.concatenate([prep.w0, prep.passive0], axis=0)
    times = snapshot_times(cfg)

    def rhs(y):
        out = np.zeros_like(y)
        w = y[:nred]
        out[:nred] = rhs_normal_form_rank1(
            w, prep.reduced, grid, cfg.space_scheme, cfg.dissipation
        )
        for j in range(prep.n_passive):
            for axis in range(grid.d):
                out[nred + j] += _cons_div(ktail * y[nred + j], w[-1], grid, axis)
        return out

    def dtf(y):
        if cfg.dt is not None:
            return cfg.dt
        w = y[:nred]
        u = psi_rank1(w, prep.reduced)
        return auto_dt_rank1_nf(w, u, prep.reduced, grid, cfg)

    u_snaps = [_reconstruct_rank1(y0, prep, grid)]
    w_snaps = [prep.w0.copy()]
    wn_min = [float(np.min(prep.w0[-1]))]
    wn_max = [float(np.max(prep.w0[-1]))]

    def on_snap(t, y):
        u = _reconstruct_rank1(y, prep, grid)
        _check_floor(u, cfg.positivity_floor, f"at t = {t:.6f}")
        u_snaps.append(u)
        w_snaps.append(y[:nred].copy())
        wn_min.append(float(np.min(y[nred - 1])))
        wn_max.append(float(np.max(y[nred - 1])))

    if cfg.scheme == "imex":
        _march_imex(y0, nred, prep, ktail, grid, cfg, times, dtf, on_snap)
    else:
        integrate(y0, 0.0, cfg.t_end, rhs, dtf, times, on_snap)
    return times, u_snaps, w_snaps, (min(wn_min), max(wn_max))


def _march_imex(y0, nred, prep, ktail, grid, cfg, times, dtf, on_snap):
    y = np.array(y0, copy=True)
    t = 0.0
    snaps = [tt for tt in times if tt > 1e-14]
    si = 0
    while t < cfg.t_end - 1e-14:
        dt = dtf(y)
        target = snaps[si] if si < len(snaps) else cfg.t_end
        dt = min(dt, target - t)
        w_new = imex_step_rank1(y[:nred], dt, prep.reduced, grid, cfg)
        for j in range(prep.n_passive):
            adv = np.zeros_like(y[nred + j])
            for axis in range(grid.d):
                adv += _cons_div(ktail * y[nred + j], y[nred - 1], grid, axis)
            y[nred + j] = y[nred + j] + dt * adv
        y[:nred] = w_new
        t += dt
        if si < len(snaps) and abs(t - snaps[si]) < 1e-13:
            on_snap(t, y)
            si += 1


def run_normal_form_general(spec: SystemSpec, u0, grid: Grid, cfg: SolverConfig):
    """Normal-form trajectory for a general spec; returns (times, snapshots)."""
    u0 = np.asarray(u0, dtype=float)
    _check_floor(u0, cfg.positivity_floor, "at t = 0")
    E = eigenstructure(spec.B)
    w0 = phi_general(u0, E)
    times = snapshot_times(cfg)

    def rhs(w):
        return rhs_normal_form_general(w, E, grid, cfg.space_scheme, cfg.dissipation)

    def dtf(w):
        if cfg.dt is not None:
            return cfg.dt
        u = psi_general(w.reshape(spec.n, -1), E).reshape(u0.shape)
        return auto_dt_general_nf(w, u, E, grid, cfg)

    u_snaps = [u0.copy()]

    def on_snap(t, w):
        u = psi_general(w.reshape(spec.n, -1), E).reshape(u0.shape)
        _check_floor(u, cfg.positivity_floor, f"at t = {t:.6f}")
        u_snaps.append(u)

    integrate(w0, 0.0, cfg.t_end, rhs, dtf, times, on_snap)
    return times, u_snaps


def _series(spec: SystemSpec, grid: Grid, times, snaps):
    tags = RANK1_ENTROPY_TAGS if spec.is_rank1 else GENERAL_ENTROPY_TAGS
    kinds = {tag: entropy_kind(tag, spec) for tag in tags}
    s = monitor_sobolev_order(grid.d)
    masses, mins, hs = [], [], []
    entropies = {tag: [] for tag in tags}
    for u in snaps:
        masses.append([float(np.sum(ui) * grid.cell_volume) for ui in u])
        mins.append(float(np.min(u)))
        hs.append(sobolev_norm(u, grid, s))
        for tag, kind in kinds.items():
            entropies[tag].append(total_energy(u, kind, spec, grid))
    return masses, entropies, mins, hs


def run(spec: SystemSpec, u0, grid: Grid, cfg: SolverConfig, mode: str = "direct",
        with_picard: bool = False) -> RunResult:
    """Execute one simulation in the requested mode.

    ``mode`` is one of direct, normal_form, both; in mode both the
    per-snapshot max-norm distance between the two reconstructions is
    recorded.  ``with_picard`` additionally runs the successive
    approximation monitor (rank-one specs only).
    """
    if mode not in ("direct", "normal_form", "both"):
        raise SolverError(f"unknown mode {mode!r}")
    u0 = np.asarray(u0, dtype=float)
    snapshots = {}
    wn_range = None
    times = None

    if mode in ("direct", "both"):
        times, snaps_d = run_direct(spec, u0, grid, cfg)
        snapshots["direct"] = snaps_d
    if mode in ("normal_form", "both"):
        if spec.is_rank1:
            times, snaps_n, _, wn_range = run_normal_form_rank1(spec, u0, grid, cfg)
        else:
            times, snaps_n = run_normal_form_general(spec, u0, grid, cfg)
        snapshots["normal_form"] = snaps_n

    primary = snapshots.get("direct", snapshots.get("normal_form"))
    masses, entropies, mins, hs = _series(spec, grid, times, primary)

    cross = None
    if mode == "both":
        cross = [
            float(np.max(np.abs(a - b)))
            for a, b in zip(snapshots["direct"], snapshots["normal_form"])
        ]

    trace = None
    if with_picard and spec.is_rank1:
        _, trace = run_picard(spec, u0, grid, cfg)

    return RunResult(
        spec=spec,
        grid=grid,
        cfg=cfg,
        mode=mode,
        times=list(times),
        snapshots=snapshots,
        masses=masses,
        entropies=entropies,
        min_density=mins,
        hs_norms=hs,
        cross_distance=cross,
        picard=trace,
        wn_range=wn_range,
    )
