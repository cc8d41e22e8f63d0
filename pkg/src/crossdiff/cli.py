"""Command-line front end.

    crossdiff run <config> [--out DIR] [--mode direct|normal_form|both]
    crossdiff verify <config> [--seed N] | crossdiff verify --report DIR
    crossdiff compare <config> [--out DIR] [--refine]

Configs are TOML files with sections [system], [initial], [solver] and
[output]; initial data are closed-form expressions in the coordinates over a
small whitelisted grammar.  Exit codes: 0 ok, 2 config error, 3 solver
error, 4 verification failure.
"""

from __future__ import annotations

import argparse
import ast
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .errors import ConfigError, CrossDiffError, SolverError
from .grid import Grid
from .model import SystemSpec, build_system_spec
from .normal_form import certify, coeffs_general, coeffs_rank1
from .reporting import validate_report, write_report
from .runner import run
from .solver import PicardConfig, SolverConfig, rhs_direct, rhs_normal_form_general, rhs_normal_form_rank1
from .spectral import eigenstructure, verify_block_identities
from .transforms import (
    phi_alt,
    phi_general,
    phi_rank1,
    psi_alt,
    psi_general,
    psi_rank1,
    push_forward_general,
    push_forward_rank1,
)

DEFAULT_SEED = 1234

_ALLOWED_CALLS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}


def _eval_node(node, env):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, env)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name):
        if node.id in env:
            return env[node.id]
        raise ConfigError(f"unknown name {node.id!r} in initial-data expression")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        val = _eval_node(node.operand, env)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.BinOp) and isinstance(
        node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
    ):
        left = _eval_node(node.left, env)
        right = _eval_node(node.right, env)
        ops = {
            ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
            ast.Div: np.divide, ast.Pow: np.power,
        }
        return ops[type(node.op)](left, right)
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        fn = _ALLOWED_CALLS.get(node.func.id)
        if fn is None or node.keywords or len(node.args) != 1:
            raise ConfigError(f"call {ast.dump(node.func)} not in the expression grammar")
        return fn(_eval_node(node.args[0], env))
    raise ConfigError(f"expression node {type(node).__name__} not allowed")


def eval_expression(text: str, grid: Grid) -> np.ndarray:
    """Evaluate a whitelisted closed-form expression on the grid."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"bad initial-data expression {text!r}: {exc}") from exc
    coords = grid.meshgrid()
    env = {"pi": np.pi, "x": coords[0]}
    if grid.d == 2:
        env["y"] = coords[1]
    val = _eval_node(tree, env)
    return np.broadcast_to(np.asarray(val, dtype=float), grid.shape).copy()


def load_config(path):
    """Parse and validate a config file; returns (spec, grid, u0, cfg, output)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from exc

    system = raw.get("system")
    if not isinstance(system, dict):
        raise ConfigError("missing [system] section")
    try:
        spec = build_system_spec(system)
    except CrossDiffError as exc:
        raise ConfigError(f"[system]: {exc}") from exc

    solver = raw.get("solver", {})
    N = int(solver.get("N", 128))
    grid = Grid(d=spec.d, N=N, L=spec.domain_length)

    initial = raw.get("initial")
    if not isinstance(initial, dict):
        raise ConfigError("missing [initial] section")
    comps = []
    for i in range(1, spec.n + 1):
        key = f"u{i}"
        if key not in initial:
            raise ConfigError(f"[initial]: missing expression for {key}")
        comps.append(eval_expression(str(initial[key]), grid))
    u0 = np.stack(comps, axis=0)

    pic_raw = solver.get("picard", {})
    pc = PicardConfig(
        max_iters=int(pic_raw.get("max_iters", 10)),
        contraction_tol=float(pic_raw.get("contraction_tol", 1e-9)),
        stage_horizon=pic_raw.get("stage_horizon"),
        horizon_factor=float(pic_raw.get("horizon_factor", 50.0)),
        KR_factor=pic_raw.get("KR_factor"),
    )
    dt = solver.get("dt")
    try:
        cfg = SolverConfig(
            t_end=float(solver.get("t_end", 0.05)),
            dt=float(dt) if dt is not None else None,
            scheme=str(solver.get("scheme", "explicit_rk2")),
            space_scheme=str(solver.get("space_scheme", "central2")),
            cfl_hyp=float(solver.get("cfl_hyp", 0.4)),
            diff_number=float(solver.get("diff_number", 0.25)),
            dissipation=float(solver.get("dissipation", 0.01)),
            positivity_floor=float(solver.get("positivity_floor", 1e-10)),
            snapshot_every=solver.get("snapshot_every"),
            picard=pc,
        )
    except SolverError as exc:
        raise ConfigError(f"[solver]: {exc}") from exc

    output = raw.get("output", {})
    out = {
        "format": str(output.get("format", "csv")),
        "dir": output.get("dir"),
    }
    if out["format"] not in ("csv", "binary"):
        raise ConfigError(f"[output]: unknown snapshot format {out['format']!r}")
    return spec, grid, u0, cfg, out


# ---------------------------------------------------------------------------
# verification battery
# ---------------------------------------------------------------------------

def _random_positive(rng, n, size=None, low=0.2, high=2.0):
    shape = (n,) if size is None else (n,) + tuple(np.atleast_1d(size))
    return rng.uniform(low, high, size=shape)


def _smooth_field(rng, n, grid: Grid, modes=3, amp=0.25):
    base = np.ones((n,) + grid.shape)
    coords = grid.meshgrid()
    for i in range(n):
        for _ in range(modes):
            kvec = rng.integers(1, 4, size=grid.d)
            phase = rng.uniform(0, 2 * np.pi)
            wave = np.zeros(grid.shape)
            for axis in range(grid.d):
                wave = wave + kvec[axis] * coords[axis]
            base[i] += amp / modes * np.cos(wave + phase)
    return base


def verify_battery(spec: SystemSpec, seed: int = DEFAULT_SEED, samples: int = 200,
                   skew_A1: float = 0.0):
    """Certification checks for one spec; returns (ok, list of result rows).

    Each row is (name, passed, measured deviation, tolerance).  ``skew_A1``
    perturbs the assembled first-order coefficient and exists so that the
    battery can be shown to fail when given wrong coefficients.
    """
    rng = np.random.default_rng(seed)
    rows = []

    def record(name, dev, tol):
        rows.append((name, dev <= tol, dev, tol))

    if spec.is_rank1:
        dev_rt = 0.0
        for _ in range(samples):
            u = _random_positive(rng, spec.n)
            w = phi_rank1(u, spec)
            dev_rt = max(dev_rt, float(np.max(np.abs(psi_rank1(w, spec) - u))) / float(np.max(np.abs(u))))
        record("rank1 round trip", dev_rt, 1e-10)

        dev_sym = 0.0
        min_eig = np.inf
        for _ in range(samples):
            u = _random_positive(rng, spec.n)
            c = coeffs_rank1(None, spec, u=u)
            A1 = c.A1_dir[0].copy()
            if skew_A1:
                A1 = A1 + skew_A1 * np.triu(np.ones_like(A1), 1)
            scale = max(float(np.max(np.abs(A1))), 1e-300)
            dev_sym = max(dev_sym, float(np.max(np.abs(A1 - A1.T))) / scale)
            if c.A0.size:
                min_eig = min(min_eig, float(np.min(np.diag(c.A0))))
        record("rank1 symmetriser A0 Y symmetric", dev_sym, 1e-12)
        record("rank1 A0 positive", 0.0 if min_eig > 0 else 1.0, 0.5)

        if np.allclose(spec.a, spec.k):
            dev_alt = 0.0
            for _ in range(samples):
                u = _random_positive(rng, spec.n)
                w = phi_alt(u, spec)
                dev_alt = max(dev_alt, float(np.max(np.abs(psi_alt(w, spec) - u))) / float(np.max(np.abs(u))))
            record("simplex round trip", dev_alt, 1e-10)

        grid = Grid(d=spec.d, N=64 if spec.d == 1 else 32, L=spec.domain_length)
        u = _smooth_field(rng, spec.n, grid)
        udot = rhs_direct(u, spec, grid, "spectral")
        from .model import canonical_relabel
        from dataclasses import replace as _replace

        spec_c, perm = canonical_relabel(spec)
        if np.all(spec_c.k[:-1] < spec_c.k[-1]):
            ac = spec_c.a.reshape((-1,) + (1,) * grid.d)
            ut = ac * u[perm]
            spec_abs = _replace(spec_c, a=np.ones(spec.n))
            wdot = push_forward_rank1(ut, ac * udot[perm], spec_abs)
            w = phi_rank1(ut, spec_abs)
            rhs_w = rhs_normal_form_rank1(w, spec_abs, grid, "spectral", 0.0, u=ut)
            dev_pf = float(np.max(np.abs(wdot - rhs_w)))
            record("rank1 push-forward oracle", dev_pf, 1e-6)
    else:
        E = eigenstructure(spec.B)
        ids = verify_block_identities(E, spec.B)
        record("eigenbasis block identities", max(ids.values()), 1e-12)

        dev_rt = 0.0
        for _ in range(samples):
            u = _random_positive(rng, spec.n)
            w = phi_general(u, E)
            dev_rt = max(dev_rt, float(np.max(np.abs(psi_general(w, E) - u))) / float(np.max(np.abs(u))))
        record("general round trip", dev_rt, 1e-10)

        dev_sym = 0.0
        spd_ok = True
        for _ in range(samples):
            u = _random_positive(rng, spec.n)
            zeta = rng.standard_normal((spec.d, E.rank))
            c = coeffs_general(None, E, grad_wII=zeta, u=u)
            if skew_A1 and c.A1_dir[0].size:
                c = type(c)(
                    A0=c.A0,
                    A1_dir=tuple(A + skew_A1 * np.triu(np.ones_like(A), 1) for A in c.A1_dir),
                    lower_order=c.lower_order,
                    parab_lhs=c.parab_lhs,
                    parab_coeff=c.parab_coeff,
                    variant=c.variant,
                )
            cert = certify(c)
            dev_sym = max(dev_sym, cert["A0_asymmetry"], cert["A1_asymmetry"], cert["parab_asymmetry"])
            spd_ok = spd_ok and cert["spd_ok"]
        record("general coefficients symmetric", dev_sym, 1e-12)
        record("general A0 / parabolic block SPD", 0.0 if spd_ok else 1.0, 0.5)

        grid = Grid(d=spec.d, N=64 if spec.d == 1 else 32, L=spec.domain_length)
        u = _smooth_field(rng, spec.n, grid)
        udot = rhs_direct(u, spec, grid, "spectral")
        wdot = push_forward_general(u, udot, E)
        w = phi_general(u, E)
        rhs_w = rhs_normal_form_general(w, E, grid, "spectral", 0.0, u=u)
        dev_pf = float(np.max(np.abs(wdot - rhs_w)))
        record("general push-forward oracle", dev_pf, 1e-6)

    ok = all(passed for _, passed, _, _ in rows)
    return ok, rows


def _print_battery(rows):
    for name, passed, dev, tol in rows:
        tag = "PASS" if passed else "FAIL"
        print(f"{tag}  {name}: measured {dev:.3e} (tol {tol:.1e})")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    try:
        spec, grid, u0, cfg, out = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        result = run(spec, u0, grid, cfg, mode=args.mode)
    except CrossDiffError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    outdir = args.out or out["dir"] or (Path(args.config).stem + "_report")
    write_report(result, outdir, fmt=out["format"])
    last = result.times[-1]
    print(f"run complete: t_end={last:g}, report written to {outdir}")
    if result.cross_distance is not None:
        print(f"max cross-solver distance: {max(result.cross_distance):.3e}")
    return 0


def cmd_verify(args) -> int:
    if args.report:
        ok, checks = validate_report(args.report)
        for name, passed, detail in checks:
            tag = "PASS" if passed else "FAIL"
            print(f"{tag}  {name}: {detail}")
        return 0 if ok else 4
    try:
        spec, _, _, _, _ = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    ok, rows = verify_battery(spec, seed=args.seed)
    _print_battery(rows)
    return 0 if ok else 4


def cmd_compare(args) -> int:
    try:
        spec, grid, u0, cfg, out = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.refine:
            print("N    max cross distance    ratio vs previous")
            prev = None
            for level in range(3):
                g = Grid(d=grid.d, N=grid.N * 2**level, L=grid.L)
                u0g = _refined_initial(args.config, g)
                res = run(spec, u0g, g, cfg, mode="both")
                dist = max(res.cross_distance)
                ratio = "" if prev is None else f"{prev / dist:.2f}"
                print(f"{g.N:<5d}{dist:<22.3e}{ratio}")
                prev = dist
            return 0
        result = run(spec, u0, grid, cfg, mode="both")
    except CrossDiffError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    outdir = args.out or out["dir"] or (Path(args.config).stem + "_compare")
    write_report(result, outdir, fmt=out["format"])
    print("snapshot time    cross distance")
    for t, dval in zip(result.times, result.cross_distance):
        print(f"{t:<17.6f}{dval:.3e}")
    print(f"max cross-solver distance: {max(result.cross_distance):.3e}")
    return 0


def _refined_initial(config_path, grid: Grid):
    with open(config_path, "rb") as fh:
        raw = tomllib.load(fh)
    initial = raw["initial"]
    comps = [eval_expression(str(initial[f"u{i+1}"]), grid) for i in range(len(initial))]
    return np.stack(comps, axis=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossdiff",
        description="Simulate degenerate cross-diffusion systems on the periodic box.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a simulation and write a report directory")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_run.add_argument("--mode", choices=("direct", "normal_form", "both"), default="direct")
    p_run.set_defaults(func=cmd_run)

    p_ver = sub.add_parser("verify", help="run the structural certification battery")
    p_ver.add_argument("config", nargs="?", default=None)
    p_ver.add_argument("--report", default=None, help="re-validate a written report directory")
    p_ver.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_ver.set_defaults(func=cmd_verify)

    p_cmp = sub.add_parser("compare", help="run both solvers and tabulate their distance")
    p_cmp.add_argument("config")
    p_cmp.add_argument("--out", default=None)
    p_cmp.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_cmp.add_argument("--refine", action="store_true", help="grid-refinement sweep")
    p_cmp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify" and not args.report and not args.config:
        print("verify needs a config file or --report DIR", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
