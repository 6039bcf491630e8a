"""Two-point certification of pure states."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import ValidationError, tol
from .linalg import Effect, PureState, as_state, tensor_power

DEGENERATE_IDENTICAL = "degenerate: identical states"


def _check_unit(name: str, x: float) -> float:
    x = float(x)
    if not (0.0 <= x <= 1.0):
        raise ValidationError(f"{name} must lie in [0, 1], got {x!r}")
    return x


@dataclass(frozen=True)
class StateCertProblem:
    """H0: ``psi`` versus H1: ``phi``, type-I error bounded by ``delta``."""

    psi: PureState
    phi: PureState
    delta: float
    copies: int = 1

    def __post_init__(self):
        object.__setattr__(self, "psi", as_state(self.psi))
        object.__setattr__(self, "phi", as_state(self.phi))
        if self.psi.dim != self.phi.dim:
            raise ValidationError(f"state dimensions differ: {self.psi.dim} vs {self.phi.dim}")
        object.__setattr__(self, "delta", _check_unit("delta", self.delta))
        if int(self.copies) < 1:
            raise ValidationError("copies must be at least 1")

    @property
    def overlap(self) -> float:
        return min(1.0, abs(self.psi.overlap(self.phi)))


@dataclass(frozen=True)
class StateStrategy:
    effect: Effect
    p2: float
    p1: float
    flags: tuple[str, ...] = field(default=())


def p2_states(overlap_m: float, delta: float) -> float:
    """Minimal type-II error for pure states with overlap modulus ``m``.

    Zero once ``m <= sqrt(delta)``; otherwise
    ``(m sqrt(1-delta) - sqrt(1-m^2) sqrt(delta))^2``.
    """
    m = _check_unit("overlap", overlap_m)
    delta = _check_unit("delta", delta)
    if m <= math.sqrt(delta):
        return 0.0
    return (m * math.sqrt(1 - delta) - math.sqrt(1 - m * m) * math.sqrt(delta)) ** 2


def p2_states_parallel(overlap_m: float, delta: float, n: int) -> float:
    if int(n) < 1:
        raise ValidationError("n must be at least 1")
    m = _check_unit("overlap", overlap_m)
    return p2_states(m ** int(n), delta)


def min_copies_perfect_states(overlap_m: float, delta: float) -> int | None:
    """Smallest N with ``m**N <= sqrt(delta)``, or None when no N works."""
    m = _check_unit("overlap", overlap_m)
    delta = _check_unit("delta", delta)
    root = math.sqrt(delta)
    if m <= root:
        return 1
    if m >= 1.0 or root == 0.0:
        return None
    n = max(1, math.ceil(math.log(root) / math.log(m) - 1e-12))
    # guard the ceiling against rounding on exact boundaries
    while m ** n > root:
        n += 1
    while n > 1 and m ** (n - 1) <= root:
        n -= 1
    return n


def _orthogonal_to(psi: np.ndarray) -> np.ndarray:
    """First canonical basis vector with a nonzero component orthogonal to psi."""
    for k in range(psi.size):
        e = np.zeros(psi.size, dtype=complex)
        e[k] = 1.0
        r = e - psi * np.vdot(psi, e)
        if np.linalg.norm(r) > 1e-8:
            return r / np.linalg.norm(r)
    raise ValidationError("no orthogonal complement in dimension 1")


def optimal_effect(psi: np.ndarray, phi: np.ndarray, delta: float) -> tuple[np.ndarray, tuple[str, ...]]:
    """Accepting effect for H0=psi vs H1=phi as a matrix, plus flags.

    ``phi`` is first rotated by a global phase so that <psi|phi> >= 0.
    """
    ov = np.vdot(psi, phi)
    m = min(1.0, abs(ov))
    if abs(ov) > 0:
        phi = phi * np.exp(-1j * np.angle(ov))
    flags: tuple[str, ...] = ()
    identical = 1.0 - m <= tol().norm
    if identical:
        flags = (DEGENERATE_IDENTICAL,)
    if m <= math.sqrt(delta):
        w = psi - m * phi
        n = np.linalg.norm(w)
        if identical or n <= 1e-12:
            # only reachable with delta = 1: always rejecting meets the bound
            return np.zeros((psi.size, psi.size), dtype=complex), flags
        w = w / n
    else:
        if psi.size == 1:
            return np.ones((1, 1), dtype=complex), flags
        perp = phi - m * psi
        if identical or np.linalg.norm(perp) <= 1e-12:
            perp = _orthogonal_to(psi)
        else:
            perp = perp / np.linalg.norm(perp)
        w = math.sqrt(1 - delta) * psi - math.sqrt(delta) * perp
    return np.outer(w, w.conj()), flags


def optimal_state_measurement(problem: StateCertProblem) -> StateStrategy:
    """Optimal accepting effect and its achieved (p1, p2).

    For ``copies > 1`` the construction is applied to the tensor powers.
    """
    psi = problem.psi.amplitudes
    phi = problem.phi.amplitudes
    if problem.copies > 1:
        psi = tensor_power(psi[:, None], problem.copies)[:, 0]
        phi = tensor_power(phi[:, None], problem.copies)[:, 0]
    omega, flags = optimal_effect(psi, phi, problem.delta)
    effect = Effect(omega)
    p1 = 1.0 - float(np.vdot(psi, omega @ psi).real)
    p2 = float(np.vdot(phi, omega @ phi).real)
    return StateStrategy(effect=effect, p2=max(0.0, p2), p1=max(0.0, p1), flags=flags)
