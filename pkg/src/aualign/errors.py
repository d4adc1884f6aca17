"""Exception hierarchy shared by all aualign modules.

The CLI maps these onto exit-code categories, so library code should
raise the most specific class that applies.
"""


class AualignError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(AualignError):
    """A caller violated a documented precondition or invariant."""


class ShapeError(ContractError):
    """Operands have incompatible shapes. Message names the operation."""


class NumericDomainError(AualignError):
    """An operation received values outside its numeric domain
    (non-finite input, log of a non-positive value, zero vector, ...)."""
