"""Exception hierarchy shared by all modules."""


class SpinSqueezeError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SpinSqueezeError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ResourceError(SpinSqueezeError):
    """A request exceeds a configured size guard."""


class ConsistencyError(SpinSqueezeError):
    """Input violates a structural assumption (e.g. permutation symmetry)."""


class LayoutError(SpinSqueezeError):
    """A state and an operator use incompatible representations."""


class AmbiguityError(SpinSqueezeError):
    """A steady state is not unique and no disambiguating hint was given."""


class PositivityError(SpinSqueezeError):
    """A density matrix has an eigenvalue below the allowed negative floor."""


class NumericalError(SpinSqueezeError):
    """A numerical routine failed to converge or lost accuracy."""


class StiffnessError(NumericalError):
    """Adaptive time stepping collapsed; the problem is too stiff."""


class IntegrationError(NumericalError):
    """Time integration violated a conserved quantity."""


class ConvergenceError(NumericalError):
    """An iterative solve did not reach its tolerance."""


class CutoffError(SpinSqueezeError):
    """A truncated Fock space is too small for the populated states."""


class ValidityError(SpinSqueezeError):
    """A parameter mapping produced an unphysical (negative) rate."""


class SearchError(SpinSqueezeError):
    """An optimizer could not bracket an interior optimum."""


class ValidationError(SpinSqueezeError, ValueError):
    """A configuration, sequence, or schedule is malformed."""
