"""Run-report serialisation and offline re-validation.

A report directory holds `report.json` (metadata plus invariant time
series), a `snapshots/` subdirectory with one CSV or binary field per
snapshot and solver, and `picard_trace.csv` when the contraction monitor
ran.  Reports are self-describing: `validate_report` re-checks the recorded
invariants, recomputing masses and entropies from the snapshot files when
they are present.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .entropy import entropy_kind, total_energy
from .grid import FieldState, Grid, read_field_binary, write_field_binary, write_field_csv
from .model import SystemSpec, build_system_spec
from .runner import RunResult


def spec_to_dict(spec: SystemSpec) -> dict:
    out = {"n": spec.n, "d": spec.d, "kind": spec.kind, "domain_length": spec.domain_length}
    if spec.is_rank1:
        out["k"] = spec.k.tolist()
        out["a"] = spec.a.tolist()
    else:
        out["B"] = spec.B.tolist()
        out["rank"] = spec.rank
    return out


def spec_from_dict(d: dict) -> SystemSpec:
    raw = {"d": d["d"], "domain_length": d.get("domain_length", 2 * np.pi)}
    if d["kind"] == "rank1":
        raw["k"] = d["k"]
        raw["a"] = d["a"]
    else:
        raw["B"] = d["B"]
    return build_system_spec(raw)


def _cfg_to_dict(cfg) -> dict:
    pc = cfg.picard
    return {
        "t_end": cfg.t_end,
        "dt": cfg.dt,
        "scheme": cfg.scheme,
        "space_scheme": cfg.space_scheme,
        "cfl_hyp": cfg.cfl_hyp,
        "diff_number": cfg.diff_number,
        "dissipation": cfg.dissipation,
        "positivity_floor": cfg.positivity_floor,
        "snapshot_every": cfg.snapshot_every,
        "picard": {
            "max_iters": pc.max_iters,
            "contraction_tol": pc.contraction_tol,
            "stage_horizon": pc.stage_horizon,
            "horizon_factor": pc.horizon_factor,
            "KR_factor": pc.KR_factor,
        },
    }


def write_report(result: RunResult, outdir, fmt: str = "csv") -> Path:
    """Serialise a RunResult to a report directory; returns its path."""
    outdir = Path(outdir)
    snapdir = outdir / "snapshots"
    snapdir.mkdir(parents=True, exist_ok=True)

    snapshot_files = {}
    for label, snaps in result.snapshots.items():
        files = []
        for idx, (t, u) in enumerate(zip(result.times, snaps)):
            state = FieldState(result.grid, u, time=t)
            if fmt == "binary":
                name = f"{label}_{idx:04d}.bin"
                write_field_binary(snapdir / name, state)
            else:
                name = f"{label}_{idx:04d}.csv"
                write_field_csv(snapdir / name, state)
            files.append(f"snapshots/{name}")
        snapshot_files[label] = files

    payload = {
        "spec": spec_to_dict(result.spec),
        "grid": {"d": result.grid.d, "N": result.grid.N, "L": result.grid.L},
        "config": _cfg_to_dict(result.cfg),
        "mode": result.mode,
        "snapshot_format": fmt,
        "times": result.times,
        "masses": result.masses,
        "entropies": result.entropies,
        "min_density": result.min_density,
        "hs_norms": result.hs_norms,
        "cross_distance": result.cross_distance,
        "wn_range": list(result.wn_range) if result.wn_range else None,
        "snapshot_files": snapshot_files,
        "exit_status": result.exit_status,
    }
    with open(outdir / "report.json", "w") as fh:
        json.dump(payload, fh, indent=2)

    if result.picard is not None:
        with open(outdir / "picard_trace.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["iterate", "sup_increment", "grad_increment", "N", "max_hs", "min_wn"]
            )
            for rec in result.picard.records:
                writer.writerow(
                    [rec.iterate, rec.sup_increment, rec.grad_increment, rec.N,
                     rec.max_hs, rec.min_wn]
                )
    return outdir


def _read_snapshot(path: Path, grid: Grid, n: int):
    if path.suffix == ".bin":
        return read_field_binary(path).comps
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    comps = data[:, grid.d :].T
    return comps.reshape((n,) + grid.shape)


def validate_report(report_dir, mass_tol: float = 1e-9, entropy_slack: float = 1e-6):
    """Offline consistency checks of a written report.

    Returns (ok, list of (check name, passed, detail)).  Structural checks
    always run; snapshot-derived checks run when the files are available.
    """
    report_dir = Path(report_dir)
    with open(report_dir / "report.json") as fh:
        payload = json.load(fh)

    checks = []
    times = np.asarray(payload["times"], dtype=float)
    increasing = bool(np.all(np.diff(times) > 0))
    checks.append(("times strictly increasing", increasing, f"{len(times)} samples"))

    nsnap = len(times)
    lengths_ok = (
        len(payload["masses"]) == nsnap
        and len(payload["min_density"]) == nsnap
        and len(payload["hs_norms"]) == nsnap
        and all(len(v) == nsnap for v in payload["entropies"].values())
    )
    checks.append(("series lengths consistent", lengths_ok, f"expect {nsnap}"))

    masses = np.asarray(payload["masses"], dtype=float)
    drift = float(np.max(np.abs(masses - masses[0]))) if masses.size else 0.0
    checks.append(("mass drift", drift <= mass_tol, f"max drift {drift:.3e}"))

    ent_ok = True
    worst = 0.0
    for series in payload["entropies"].values():
        vals = np.asarray(series, dtype=float)
        rises = np.diff(vals) - entropy_slack * (1.0 + np.abs(vals[:-1]))
        worst = max(worst, float(np.max(rises, initial=-np.inf)))
        if np.any(rises > 0):
            ent_ok = False
    checks.append(("entropy monotone within slack", ent_ok, f"worst excess {worst:.3e}"))

    pos_ok = all(m > 0 for m in payload["min_density"])
    checks.append(("densities positive", pos_ok, f"min {min(payload['min_density']):.3e}"))

    spec = spec_from_dict(payload["spec"])
    g = payload["grid"]
    grid = Grid(d=g["d"], N=g["N"], L=g["L"])
    files = payload.get("snapshot_files") or {}
    for label, names in files.items():
        paths = [report_dir / name for name in names]
        if not all(p.exists() for p in paths):
            checks.append((f"{label} snapshots present", False, "missing files"))
            continue
        recomputed_ok = True
        worst_m = 0.0
        for idx, p in enumerate(paths):
            u = _read_snapshot(p, grid, spec.n)
            m = [float(np.sum(ui) * grid.cell_volume) for ui in u]
            dev = max(abs(a - b) for a, b in zip(m, payload["masses"][idx])) if label == "direct" else 0.0
            worst_m = max(worst_m, dev)
            if label == "direct" and dev > 1e-6 * (1.0 + abs(m[0])):
                recomputed_ok = False
        checks.append(
            (f"{label} snapshot masses match series", recomputed_ok, f"max dev {worst_m:.3e}")
        )
        if label == "direct":
            tags = payload["entropies"].keys()
            u_end = _read_snapshot(paths[-1], grid, spec.n)
            ent_dev = 0.0
            for tag in tags:
                kind = entropy_kind(tag, spec)
                ent_dev = max(
                    ent_dev,
                    abs(total_energy(u_end, kind, spec, grid) - payload["entropies"][tag][-1]),
                )
            checks.append(
                ("terminal entropies recompute", ent_dev <= 1e-6, f"max dev {ent_dev:.3e}")
            )

    ok = all(passed for _, passed, _ in checks)
    return ok, checks
