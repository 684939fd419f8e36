"""Exception and warning classes raised across the package."""


class CoopregError(Exception):
    """Base class for every error raised by coopreg."""


class DimensionError(CoopregError, ValueError):
    """Matrix shapes are incompatible with the requested operation."""


class NumericFailure(CoopregError, ArithmeticError):
    """A numerical routine failed to converge or lost too much accuracy."""


class MinimalPolynomialAmbiguity(NumericFailure):
    """A Krylov rank decision fell inside the tolerance band.

    Attributes
    ----------
    singular_value : float
        The borderline singular value that made the decision indecisive.
    threshold : float
        The rank threshold it was compared against.
    """

    def __init__(self, message, singular_value, threshold):
        super().__init__(message)
        self.singular_value = singular_value
        self.threshold = threshold


class GridRefinementError(NumericFailure):
    """The pseudospectral root estimate did not settle under grid doubling."""


class RegulatorSingular(NumericFailure):
    """The delay regulator operator is numerically singular."""


class AssumptionViolation(CoopregError):
    """A standing assumption on the plant, exosystem or graph fails."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NoSpanningTree(AssumptionViolation):
    """The leader does not root a directed spanning tree of the graph."""


class SynthesisInfeasible(CoopregError):
    """No admissible controller was found with the given settings."""


class GraphConsistencyError(CoopregError):
    """Graph traversal and the spectrum of H disagree beyond tolerance."""


class SimulationDivergence(CoopregError):
    """The integrated state became non-finite or exceeded the blow-up bound."""

    def __init__(self, message, time):
        super().__init__(message)
        self.time = time


class BorderlineRankWarning(UserWarning):
    """A singular value sits within a factor 10 of the rank threshold."""
