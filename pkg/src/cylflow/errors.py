"""Exception types shared across the solver."""


class CylflowError(Exception):
    """Base class for all solver errors."""


class ConfigurationError(CylflowError):
    """A run configuration or profile parameter is unusable as given."""


class NodeConvergenceError(CylflowError):
    """Quadrature node finding failed to converge."""

    def __init__(self, poly_index, detail=""):
        self.poly_index = poly_index
        msg = f"root finding did not converge for radial polynomial index {poly_index}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class SolverError(CylflowError):
    """A linear solve could not be completed (singular closure, bad pivot...)."""


class DivergenceError(CylflowError):
    """Time integration produced non-finite fields."""
