"""Numerical tolerances and the exception hierarchy used across qcert."""

from __future__ import annotations

import contextlib
import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    norm: float = 1e-10
    herm: float = 1e-10
    unit: float = 1e-8
    eig: float = 1e-8
    psd: float = 1e-9
    prob: float = 1e-12
    geo: float = 1e-6
    opt: float = 1e-7
    feas: float = 1e-8
    # branch A of the measurement strategy is taken below this value of nu
    zero_nu: float = 1e-9
    max_dim: int = 4096


_current = Tolerances()


def tol() -> Tolerances:
    """Return the active tolerance set."""
    return _current


def set_tolerances(**overrides) -> Tolerances:
    """Replace fields of the active tolerance set, returning the previous one."""
    global _current
    previous = _current
    _current = dataclasses.replace(_current, **overrides)
    return previous


@contextlib.contextmanager
def tolerances(**overrides):
    """Temporarily override tolerances::

        with tolerances(psd=1e-6):
            ...
    """
    global _current
    previous = set_tolerances(**overrides)
    try:
        yield _current
    finally:
        _current = previous


class QcertError(Exception):
    """Base class for all qcert errors."""


class ValidationError(QcertError, ValueError):
    """Input violates a domain invariant (normalization, unitarity, range)."""


class DimensionLimitError(ValidationError):
    def __init__(self, dim: int, cap: int):
        super().__init__(f"dimension limit: {dim} exceeds cap {cap}")
        self.dim = dim
        self.cap = cap


class NotPSDError(ValidationError):
    pass


class EigensolverError(QcertError):
    pass


class OptimizerError(QcertError):
    """A numerical optimization or feasibility search did not succeed."""


class SupportPointError(OptimizerError):
    def __init__(self, index: int, message: str = ""):
        super().__init__(f"support point failure at direction {index}" + (f": {message}" if message else ""))
        self.index = index


class FeasibilityError(OptimizerError):
    def __init__(self, residual: float):
        super().__init__(f"discriminator feasibility failure (residual {residual:.3e})")
        self.residual = residual
