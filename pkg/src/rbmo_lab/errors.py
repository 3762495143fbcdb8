"""Exception hierarchy for rbmo_lab."""


class RBMOLabError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(RBMOLabError, ValueError):
    """Bad input; the CLI maps these to exit code 2."""


class DegenerateCube(ValidationError):
    pass


class EmptyFamily(ValidationError):
    pass


class BadDilation(ValidationError):
    pass


class TopLevelTooSmall(ValidationError):
    pass


class BadBeta(ValidationError):
    pass


class NotNested(ValidationError):
    pass


class SamePoint(ValidationError):
    pass


class NoAdmissibleTriples(ValidationError):
    pass


class BadAnnulus(ValidationError):
    pass


class ZeroMassCube(ValidationError):
    pass


class NoEligibleCubes(RBMOLabError):
    pass


class SolverFailure(RBMOLabError):
    """The LP backend did not report an optimal solution."""
