"""Exception types shared across the package."""


class FieldLabError(Exception):
    """Base class for every package-specific failure."""


class LagrangianSyntaxError(FieldLabError):
    """Lagrangian text failed to parse; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class NonQuadraticKinetic(FieldLabError):
    """Kinetic term is not a positive quadratic in zt."""


class UnsupportedMixing(FieldLabError):
    """Monomial outside the supported zt / zx / z forms."""


class DegreeTooHigh(FieldLabError):
    """Potential degree above the configured maximum."""


class DegenerateKinetic(FieldLabError):
    """Effective kinetic coefficient vanished; the momentum solve is singular."""


class UnsupportedOrdering(FieldLabError):
    """A momentum factor shares a site with its coefficient and no symmetrization rule applies."""


class NonPositiveCovariance(FieldLabError):
    """Gaussian covariance is not positive-definite."""


class GridUnresolved(FieldLabError):
    """Gaussian width falls below one grid cell."""


class MasslessZeroMode(FieldLabError):
    """Massless lattice has an undamped zero mode; no normalizable ground state."""


class ConfigMismatch(FieldLabError):
    """States live on different lattice configurations."""


class DimensionTooLarge(FieldLabError):
    """State dimension exceeds the dense-operator guard."""


class NonSeparableHamiltonian(FieldLabError):
    """Operator has cross terms; split-step integration is unavailable."""


class SolverDivergence(FieldLabError):
    """Iterative linear solve exceeded its iteration cap."""


class NotSpacelike(FieldLabError):
    """Surface link slope reached or exceeded the characteristic speed."""


class ScheduleMismatch(FieldLabError):
    """Deformation schedules do not share start and end surfaces."""


class ShapeMismatch(FieldLabError):
    """Field history dimensions do not match the path-integral layout."""


class EnumerationTooLarge(FieldLabError):
    """Brute-force history count exceeds the enumeration guard."""


class SingularBVP(FieldLabError):
    """Two-time boundary value problem is singular or near-singular."""


class NewtonDivergence(FieldLabError):
    """Damped Newton iteration failed to converge."""


class ConfigError(FieldLabError):
    """Run configuration is invalid; carries the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
