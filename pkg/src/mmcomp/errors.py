"""Exception and warning types shared by the engines and the CLI."""


class NonConvergenceError(RuntimeError):
    """A quadrature or inversion failed to meet its tolerance."""


class UnsupportedCoopError(ValueError):
    """Cooperation size beyond what the ordered-simplex integrator handles."""


class ResidueMismatchError(ArithmeticError):
    """Residue route and incomplete-gamma route disagree."""


class InsufficientPointsError(RuntimeError):
    """A realization kept fewer than n stations after all window retries."""


class ClampingWarning(UserWarning):
    """A raw probability left [0, 1] by more than the allowed slack."""
