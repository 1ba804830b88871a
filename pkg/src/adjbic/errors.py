"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the domain an operation is defined on."""


class SingularityError(ArithmeticError):
    """The Laplace approximation does not apply (degenerate Hessian)."""


class IntegrationError(RuntimeError):
    """An integrator could not produce a finite estimate with a finite error bar."""


class VerificationError(RuntimeError):
    """A construction or a numerical verification did not come out as required."""
