"""Degenerate cross-diffusion systems on the periodic box.

Changes of variables to symmetric hyperbolic-parabolic normal forms,
matched direct and normal-form solvers, entropy diagnostics, and a
linearised successive-approximation monitor.
"""

from .errors import (
    ConfigError,
    CrossDiffError,
    DomainExit,
    MinimizerDiverged,
    NoContraction,
    NonPositiveDensity,
    PositivityLost,
    SolverError,
)
from .grid import FieldState, Grid, l2_norm, mollify, sobolev_norm
from .model import SystemSpec, build_system_spec, canonical_relabel, entropy_kind
from .normal_form import NormalFormCoeffs, certify, coeffs_general, coeffs_rank1
from .picard import PicardTrace, run_picard
from .reporting import validate_report, write_report
from .runner import RunResult, run
from .solver import SolverConfig, rhs_direct, rhs_normal_form_general, rhs_normal_form_rank1
from .spectral import EigenStructure, eigenstructure, verify_block_identities
from .transforms import (
    aggregate_equal_k,
    phi_alt,
    phi_general,
    phi_rank1,
    psi_alt,
    psi_general,
    psi_rank1,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "CrossDiffError",
    "DomainExit",
    "EigenStructure",
    "FieldState",
    "Grid",
    "MinimizerDiverged",
    "NoContraction",
    "NonPositiveDensity",
    "NormalFormCoeffs",
    "PicardTrace",
    "PositivityLost",
    "RunResult",
    "SolverConfig",
    "SolverError",
    "SystemSpec",
    "aggregate_equal_k",
    "build_system_spec",
    "canonical_relabel",
    "certify",
    "coeffs_general",
    "coeffs_rank1",
    "eigenstructure",
    "entropy_kind",
    "l2_norm",
    "mollify",
    "phi_alt",
    "phi_general",
    "phi_rank1",
    "psi_alt",
    "psi_general",
    "psi_rank1",
    "rhs_direct",
    "rhs_normal_form_general",
    "rhs_normal_form_rank1",
    "run",
    "run_picard",
    "sobolev_norm",
    "validate_report",
    "verify_block_identities",
    "write_report",
]
