"""Exception hierarchy.

Every numerical failure derives from :class:`NumericalError`, which the CLI
maps to exit code 2.
"""


class NumericalError(RuntimeError):
    """A computation did not reach its accuracy target."""


class NonConvergence(NumericalError):
    pass


class WrongCutCount(NumericalError):
    """Endpoint solve converged but the density is negative somewhere on J."""

    def __init__(self, message, endpoints=None, min_density=None):
        super().__init__(message)
        self.endpoints = endpoints
        self.min_density = min_density


class BranchCut(ValueError):
    pass


class PrecisionLoss(NumericalError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class NonPositiveGamma(ValueError):
    pass


class LineSearchFailure(NumericalError):
    pass


class QuadratureNonConvergence(NumericalError):
    pass


class NewtonDivergence(NumericalError):
    pass


class YOutOfGrid(ValueError):
    pass


class IntegrandTail(NumericalError):
    pass


class IllConditioned(NumericalError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class CoincidentPoints(ValueError):
    pass
