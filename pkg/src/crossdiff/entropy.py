"""Free-energy functionals and their discrete dissipation along trajectories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveDensity
from .grid import Grid
from .model import EntropyKind, SystemSpec, entropy_kind


@dataclass(frozen=True)
class EntropyValue:
    value: float
    tag: str
    time: float


def pressure(u, spec: SystemSpec):
    """p(u) = sum_i a_i u_i for rank-one specs."""
    a = spec.a.reshape((-1,) + (1,) * (np.asarray(u).ndim - 1))
    return np.sum(a * u, axis=0)


def free_energy_density(u, kind: EntropyKind, spec: SystemSpec):
    """Pointwise free-energy density for one of the admitted functionals.

    Vectorised over trailing axes of ``u``.
    """
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise NonPositiveDensity("free energies are evaluated on positive densities")
    tag = kind.tag
    if tag == "shannon_f1":
        pi = kind.pi.reshape((-1,) + (1,) * (u.ndim - 1))
        return np.sum(pi * (u * np.log(u) - u), axis=0)
    if tag == "quadratic_f2":
        return 0.5 * pressure(u, spec) ** 2
    if tag == "plogp_f3":
        p = pressure(u, spec)
        return p * np.log(p) - p
    if tag == "boltzmann_shannon":
        return np.sum(u * np.log(u) - u, axis=0)
    if tag == "rao":
        Bu = np.tensordot(spec.B, u, axes=(1, 0))
        return 0.5 * np.sum(u * Bu, axis=0)
    raise ValueError(f"unknown entropy tag {tag!r}")


def chemical_potential(u, kind: EntropyKind, spec: SystemSpec):
    """Gradient of the free-energy density with respect to the densities."""
    u = np.asarray(u, dtype=float)
    tag = kind.tag
    if tag == "shannon_f1":
        pi = kind.pi.reshape((-1,) + (1,) * (u.ndim - 1))
        return pi * np.log(u)
    if tag == "quadratic_f2":
        a = spec.a.reshape((-1,) + (1,) * (u.ndim - 1))
        return a * pressure(u, spec)[None]
    if tag == "plogp_f3":
        a = spec.a.reshape((-1,) + (1,) * (u.ndim - 1))
        return a * np.log(pressure(u, spec))[None]
    if tag == "boltzmann_shannon":
        return np.log(u)
    if tag == "rao":
        return np.tensordot(spec.B, u, axes=(1, 0))
    raise ValueError(f"unknown entropy tag {tag!r}")


def gibbs_duhem_residual(u, spec: SystemSpec):
    """p - (-f3 + sum_i u_i df3/du_i); identically zero for the p log p density."""
    u = np.asarray(u, dtype=float)
    kind = entropy_kind("plogp_f3", spec)
    f3 = free_energy_density(u, kind, spec)
    mu = chemical_potential(u, kind, spec)
    return pressure(u, spec) - (-f3 + np.sum(u * mu, axis=0))


def total_energy(u, kind: EntropyKind, spec: SystemSpec, grid: Grid) -> float:
    """F(u) = integral of the density over the box (grid-cell quadrature)."""
    return float(np.sum(free_energy_density(u, kind, spec)) * grid.cell_volume)


def dissipation_series(times, values, slack: float = 1e-8):
    """Centered-difference dF/dt along a sampled trajectory.

    Returns a list of (t, F, dFdt) triples plus the indices of intervals on
    which F increased by more than slack * (1 + |F|).
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    n = times.size
    dFdt = np.gradient(values, times) if n > 1 else np.zeros(1)
    violations = []
    for i in range(n - 1):
        rise = values[i + 1] - values[i]
        if rise > slack * (1.0 + abs(values[i])):
            violations.append(i)
    series = [(float(t), float(F), float(dd)) for t, F, dd in zip(times, values, dFdt)]
    return series, violations
