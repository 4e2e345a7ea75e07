"""Exception hierarchy shared by every module of the package."""


class FasKeygenError(Exception):
    """Base class for all package errors."""


class ContractError(FasKeygenError, ValueError):
    """A caller violated an operation's preconditions."""


class DomainError(ContractError):
    """An argument lies outside the mathematical domain of a function."""


class ConfigError(ContractError):
    """A configuration document is malformed or violates an invariant."""


class NotPSDError(ContractError):
    """A matrix expected to be positive semidefinite is clearly indefinite."""


class AnchorDegenerateError(ContractError):
    """An SCA anchor has zero quadratic energy and cannot be linearized."""


class NumericalError(FasKeygenError, ArithmeticError):
    """An iterative numerical routine failed to converge.

    Attributes
    ----------
    residual : float
        The last residual observed before giving up.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual
