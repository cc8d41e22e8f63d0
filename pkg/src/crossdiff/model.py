"""Problem specifications and scalar coefficient data.

A :class:`SystemSpec` describes one cross-diffusion problem on the periodic
box: either the rank-one family with per-species mobilities ``k`` and pressure
weights ``a``, or the general family driven by a symmetric positive
semidefinite coupling matrix ``B``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    BadDimension,
    NonPositiveCoefficient,
    NonSymmetric,
    NotPositiveSemidefinite,
)

TWO_PI = 2.0 * np.pi

# Relative thresholds used when validating a general coupling matrix.
SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10
RANK_TOL = 1e-9


@dataclass(frozen=True)
class SystemSpec:
    """Validated cross-diffusion problem.

    Exactly one of the two parameterisations is populated:

    * ``kind == "rank1"``: positive vectors ``k`` and ``a`` of length ``n``;
      the pressure is p(u) = sum_i a_i u_i.
    * ``kind == "general"``: symmetric PSD matrix ``B`` with rank ``rank``.
    """

    n: int
    d: int
    kind: str
    domain_length: float = TWO_PI
    k: np.ndarray | None = None
    a: np.ndarray | None = None
    B: np.ndarray | None = None
    rank: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise BadDimension(f"need at least one species, got n={self.n}")
        if self.d not in (1, 2):
            raise BadDimension(f"spatial dimension must be 1 or 2, got d={self.d}")
        if self.domain_length <= 0:
            raise BadDimension("domain_length must be positive")
        if self.kind not in ("rank1", "general"):
            raise BadDimension(f"unknown spec kind {self.kind!r}")

    @property
    def is_rank1(self) -> bool:
        return self.kind == "rank1"


@dataclass(frozen=True)
class EntropyKind:
    """One of the free-energy densities admitted by a spec.

    ``tag`` is one of ``shannon_f1``, ``quadratic_f2``, ``plogp_f3``,
    ``boltzmann_shannon``, ``rao``.  For rank-one specs the Shannon weights
    pi_i = a_i / k_i are derived on construction.
    """

    tag: str
    pi: np.ndarray | None = field(default=None)

    TAGS = ("shannon_f1", "quadratic_f2", "plogp_f3", "boltzmann_shannon", "rao")

    def __post_init__(self):
        if self.tag not in self.TAGS:
            raise ValueError(f"unknown entropy tag {self.tag!r}")
        if self.pi is not None and np.any(self.pi <= 0):
            raise NonPositiveCoefficient("entropy weights pi must be positive")


def entropy_kind(tag: str, spec: SystemSpec) -> EntropyKind:
    """Build an EntropyKind for ``spec``, deriving Shannon weights if needed."""
    pi = None
    if tag == "shannon_f1":
        if not spec.is_rank1:
            raise ValueError("shannon_f1 weights require a rank1 spec")
        pi = spec.a / spec.k
    return EntropyKind(tag=tag, pi=pi)


def build_system_spec(raw: dict) -> SystemSpec:
    """Validate a raw config record and return a SystemSpec.

    ``raw`` supplies either ``k`` and ``a`` (rank-one) or ``B`` (general),
    plus ``d`` and optionally ``domain_length``.  For the general family the
    matrix is checked for symmetry and positive semidefiniteness and its
    rank is recorded.
    """
    d = int(raw.get("d", 1))
    length = float(raw.get("domain_length", TWO_PI))

    has_ka = "k" in raw and "a" in raw
    has_B = "B" in raw
    if has_ka == has_B:
        raise BadDimension("supply either (k, a) or B, not both or neither")

    if has_ka:
        k = np.asarray(raw["k"], dtype=float)
        a = np.asarray(raw["a"], dtype=float)
        if k.ndim != 1 or a.shape != k.shape:
            raise BadDimension("k and a must be 1-d arrays of equal length")
        if np.any(k <= 0):
            raise NonPositiveCoefficient(f"mobilities k must be positive, got {k}")
        if np.any(a <= 0):
            raise NonPositiveCoefficient(f"weights a must be positive, got {a}")
        return SystemSpec(n=k.size, d=d, kind="rank1", domain_length=length, k=k, a=a)

    B = np.asarray(raw["B"], dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1]:
        raise BadDimension(f"B must be square, got shape {B.shape}")
    scale = np.max(np.abs(B))
    if scale == 0:
        raise NotPositiveSemidefinite("B must be nonzero")
    asym = np.max(np.abs(B - B.T))
    if asym > SYMMETRY_TOL * scale:
        raise NonSymmetric(f"B asymmetry {asym:.3e} exceeds {SYMMETRY_TOL:.0e} * max|B|")
    evals = np.linalg.eigvalsh(0.5 * (B + B.T))
    lam_max = evals[-1]
    if evals[0] < -PSD_TOL * lam_max:
        raise NotPositiveSemidefinite(
            f"B has eigenvalue {evals[0]:.3e} below -{PSD_TOL:.0e} * lambda_max"
        )
    rank = int(np.count_nonzero(evals > RANK_TOL * lam_max))
    if rank < 1:
        raise NotPositiveSemidefinite("B has numerical rank zero")
    return SystemSpec(
        n=B.shape[0], d=d, kind="general", domain_length=length, B=0.5 * (B + B.T), rank=rank
    )


def canonical_relabel(spec: SystemSpec) -> tuple[SystemSpec, np.ndarray]:
    """Sort the species of a rank-one spec so that k is non-decreasing.

    Returns the permuted spec and the permutation ``perm`` such that the new
    species ``i`` is the old species ``perm[i]``.  The sort is stable, so an
    already sorted spec gets the identity permutation.
    """
    if not spec.is_rank1:
        raise BadDimension("canonical_relabel applies to rank1 specs only")
    perm = np.argsort(spec.k, kind="stable")
    relabelled = replace(spec, k=spec.k[perm], a=spec.a[perm])
    return relabelled, perm


def apply_permutation(values: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Reorder the leading (species) axis of ``values`` by ``perm``."""
    return np.asarray(values)[np.asarray(perm)]


def invert_permutation(perm: np.ndarray) -> np.ndarray:
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return inv
