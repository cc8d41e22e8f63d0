"""Exception hierarchy shared by all crossdiff modules."""


class CrossDiffError(Exception):
    """Base class for all library errors."""


class ConfigError(CrossDiffError):
    """Malformed or inconsistent configuration input."""


class NonSymmetric(ConfigError):
    """Coupling matrix is not symmetric to tolerance."""


class NotPositiveSemidefinite(ConfigError):
    """Coupling matrix has a significantly negative eigenvalue."""


class NonPositiveCoefficient(ConfigError):
    """A mobility or weight coefficient is not strictly positive."""


class BadDimension(ConfigError):
    """Unsupported spatial dimension or inconsistent sizes."""


class EigenFailure(CrossDiffError):
    """Symmetric eigensolver did not converge."""


class NonPositiveDensity(CrossDiffError):
    """A density left the positive cone where a transform is defined."""


class RootBracketFailure(CrossDiffError):
    """Scalar monotone root solve failed to bracket its root."""


class MinimizerDiverged(CrossDiffError):
    """Convex inversion diverged; the target lies outside the admissible cone."""


class SingularBlock(CrossDiffError):
    """A block that is SPD in exact arithmetic failed to factorise."""


class SingularA0(SingularBlock):
    """Hyperbolic symmetriser block not invertible numerically."""


class DegenerateSpectrumGap(CrossDiffError):
    """Equal leading mobilities; aggregate the equal tail before transforming."""


class SimplexViolation(CrossDiffError):
    """Simplex-valued hyperbolic variables left the open simplex."""


class DomainExit(CrossDiffError):
    """Transformed state left the domain of the change of variables."""


class PositivityLost(CrossDiffError):
    """A density dropped below the positivity floor during time stepping."""


class StepRejected(CrossDiffError):
    """Time step could not be completed at the requested size."""


class NoContraction(CrossDiffError):
    """Successive-approximation loop failed to contract at any admissible horizon."""


class SolverError(CrossDiffError):
    """Generic time-integration failure."""
