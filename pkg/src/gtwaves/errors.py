"""Exception hierarchy shared by all gtwaves modules."""


class GtwError(Exception):
    """Base class for all gtwaves errors."""


class ConfigError(GtwError):
    """Malformed or schema-violating configuration / input file."""


class ComplexEigenvalues(GtwError):
    """The coefficient matrix has non-real eigenvalues at the queried state."""

    def __init__(self, state, max_imag):
        self.state = state
        self.max_imag = max_imag
        super().__init__(
            f"non-real eigenvalues at state {state} (max |Im| = {max_imag:g})")


class DegenerateSpeeds(GtwError):
    """Strict hyperbolicity violated: two characteristic speeds coincide."""

    def __init__(self, state, pair, gap, tol):
        self.state = state
        self.pair = pair
        self.gap = gap
        super().__init__(
            f"characteristic speeds {pair} separated by {gap:g} <= tol {tol:g} "
            f"at state {state}")


class EvaluationOutsideAdmissibleSet(GtwError):
    """A state outside the model's admissible set was queried."""


class NonpositiveDensity(EvaluationOutsideAdmissibleSet):
    """Violated the admissibility predicate rho > rho_min of the fluid model."""

    def __init__(self, rho, rho_min):
        self.rho = rho
        self.rho_min = rho_min
        super().__init__(
            f"admissibility predicate 'rho > rho_min' violated: "
            f"rho = {rho:g}, rho_min = {rho_min:g}")


class SonicPoint(GtwError):
    """The advection speed crossed the wave speed along a profile integration."""


class ProfileBlowup(GtwError):
    """A profile / solution integration left the admissible set or diverged."""


class SubShockSingularity(GtwError):
    """A characteristic speed equals the frame speed with non-vanishing source
    projection, so the constrained wave develops a sub-shock."""

    def __init__(self, family, state, gap, projection):
        self.family = family
        self.state = state
        self.gap = gap
        self.projection = projection
        super().__init__(
            f"sub-shock: family {family} has speed gap {gap:g} at state "
            f"{state} while the source projection is {projection:g}")


class CompatibilityViolation(GtwError):
    """Constraint compatibility residual exceeded its tolerance."""


class StructuralConditionViolation(CompatibilityViolation):
    """A structural condition on the system coefficients failed on the
    sampled region."""


class InitialDataViolatesConstraints(GtwError):
    """Initial data does not satisfy the differential constraints."""

    def __init__(self, max_residual, tol, worst_x):
        self.max_residual = max_residual
        self.worst_x = worst_x
        super().__init__(
            f"initial data violates the constraints: worst residual "
            f"{max_residual:g} > tol {tol:g} at x = {worst_x:g}")


class ConstraintViolatedByInitialData(InitialDataViolatesConstraints):
    """Initial invariants do not satisfy their spatial constraint."""


class CharacteristicCrossing(GtwError):
    """Characteristics crossed (gradient catastrophe) inside the window."""

    def __init__(self, time):
        self.time = time
        super().__init__(f"characteristics cross at t = {time:g}")


class PostBreakingQuery(GtwError):
    """A simple wave was evaluated at or past its breaking time."""


class NotDecoupled(GtwError):
    """The distinguished speed varies with the retained coordinate, so the
    invariant subsystem does not decouple."""


class ChartEvaluationFailure(GtwError):
    """A Riemann chart quantity could not be evaluated."""


class ChartInversionFailure(ChartEvaluationFailure):
    """The chart inverse (R, v) -> U could not be solved."""


class QuadratureFailure(ChartEvaluationFailure):
    """The invariant-defining integration failed."""


class CFLViolation(GtwError):
    """Grid time step does not respect the CFL bound."""


class AdmissibilityLoss(GtwError):
    """A grid solution left the admissible set during time stepping."""

    def __init__(self, time, cell, state):
        self.time = time
        self.cell = cell
        self.state = state
        super().__init__(
            f"inadmissible state {state} in cell {cell} at t = {time:g}")
