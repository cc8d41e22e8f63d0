"""Mollified Picard iteration: watch the contraction happen.

Constructs the benchmark initial data, mollifies it at increasing sharpness
per iterate, and solves the sequence of linear decoupled stages with
coefficients frozen at the previous iterate.  The printed table shows the
stage-increment functional N^l shrinking geometrically once the mollifier
has resolved the data, while the monitored Sobolev norms stay below the
working bound K R.

Usage: python demos/picard_contraction.py [--N 64] [--iters 8]
"""

import argparse

import numpy as np

from crossdiff.grid import Grid
from crossdiff.model import build_system_spec
from crossdiff.picard import run_picard
from crossdiff.solver import PicardConfig, SolverConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--iters", type=int, default=8)
    args = ap.parse_args()

    spec = build_system_spec({"k": [1.0, 2.0], "a": [1.0, 1.0], "d": 1})
    grid = Grid(d=1, N=args.N)
    x = grid.axes()[0]
    u0 = np.stack([1 + 0.3 * np.cos(x), 1 + 0.3 * np.sin(x)])

    cfg = SolverConfig(picard=PicardConfig(max_iters=args.iters))
    _, trace = run_picard(spec, u0, grid, cfg)

    print(f"Picard iteration on the benchmark, N = {args.N}")
    print(f"stage horizon T* = {trace.horizon:.5f}  (dt = {trace.dt:.2e}, "
          f"{trace.restarts} horizon restart(s))")
    print(f"working bound K R = {trace.K * trace.R:.3f}")
    print()
    print("iter   sup increment   grad increment   N^l          ratio    max H^s")
    prev = None
    for rec in trace.records:
        ratio = "" if prev is None or prev == 0 else f"{rec.N / prev:.3f}"
        print(f"{rec.iterate:<7d}{rec.sup_increment:<16.3e}{rec.grad_increment:<17.3e}"
              f"{rec.N:<13.3e}{ratio:<9s}{rec.max_hs:.3f}")
        prev = rec.N
    print()
    ratios = trace.ratios()
    if ratios:
        print(f"final contraction ratio: {ratios[-1]:.3f}")


if __name__ == "__main__":
    main()
