"""Two-point certification of unitary channels (identity versus ``U``)."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .config import ValidationError
from .linalg import Effect, PureState, UnitaryOperator, as_unitary, eig_unitary, tensor_power
from .numrange import nu_from_spread, nu_q_unitary, parallel_nu, spread_of_phases
from .states import _check_unit, optimal_effect, p2_states


@dataclass(frozen=True)
class UnitaryCertProblem:
    """H0: identity channel versus H1: ``Phi_U``."""

    u: UnitaryOperator
    delta: float
    copies: int = 1

    def __post_init__(self):
        object.__setattr__(self, "u", as_unitary(self.u))
        object.__setattr__(self, "delta", _check_unit("delta", self.delta))
        if int(self.copies) < 1:
            raise ValidationError("copies must be at least 1")


@dataclass(frozen=True)
class UnitaryStrategy:
    input: PureState
    effect: Effect
    p2: float
    p1: float
    flags: tuple[str, ...] = field(default=())


def _spread(u) -> float:
    return spread_of_phases([p for p, _ in eig_unitary(u)])[0]


def p2_unitary(u, delta: float) -> float:
    """Minimal type-II error, ``nu_q(U)^2`` at ``q = sqrt(1 - delta)``."""
    delta = _check_unit("delta", delta)
    return nu_q_unitary(u, math.sqrt(1 - delta)) ** 2


def helstrom_error_unitary(u) -> float:
    """Symmetric discrimination error ``(1 - sqrt(1 - nu^2)) / 2`` for identity vs U."""
    nu = nu_from_spread(_spread(u))
    return (1 - math.sqrt(max(0.0, 1 - nu * nu))) / 2


def p2_unitary_parallel(u, delta: float, n: int) -> float:
    """Type-II error with ``n`` parallel uses; the eigenphase spread of
    ``U^{(x)n}`` is ``n`` times that of ``U`` (capped at the full circle)."""
    if int(n) < 1:
        raise ValidationError("n must be at least 1")
    delta = _check_unit("delta", delta)
    return p2_states(parallel_nu(_spread(u), n), delta)


def min_copies_perfect_unitary(u, delta: float) -> int | None:
    """Smallest N giving zero type-II error, ``ceil(2 arccos(sqrt(delta)) / theta)``.

    None when the spread is zero and ``delta < 1``.
    """
    delta = _check_unit("delta", delta)
    theta = _spread(u)
    if p2_unitary_parallel(u, delta, 1) == 0.0:
        return 1
    if theta <= 1e-14:
        return None
    n = max(1, math.ceil(2 * math.acos(math.sqrt(delta)) / theta - 1e-9))
    while p2_unitary_parallel(u, delta, n) > 0.0:
        n += 1
    while n > 1 and p2_unitary_parallel(u, delta, n - 1) == 0.0:
        n -= 1
    return n


def _zero_combination(lam: np.ndarray, prefer: tuple[int, int]) -> np.ndarray:
    """Probability vector p with sum p_i lam_i = 0 on at most three eigenvalues."""
    d = lam.size
    eps = 1e-10
    pairs = sorted(itertools.combinations(range(d), 2), key=lambda ij: -len(set(ij) & set(prefer)))
    for i, j in pairs:
        if abs(lam[i] + lam[j]) <= eps:
            p = np.zeros(d)
            p[[i, j]] = 0.5
            return p
    triples = sorted(itertools.combinations(range(d), 3), key=lambda t: -len(set(t) & set(prefer)))
    for t in triples:
        a, b, c = lam[list(t)]
        m = np.array([[a.real, b.real, c.real], [a.imag, b.imag, c.imag], [1.0, 1.0, 1.0]])
        try:
            w = np.linalg.solve(m, [0.0, 0.0, 1.0])
        except np.linalg.LinAlgError:
            continue
        if np.all(w >= -eps):
            p = np.zeros(d)
            p[list(t)] = np.clip(w, 0, None)
            return p / p.sum()
    raise ValidationError("origin is not a convex combination of the eigenvalues")


def optimal_input(u) -> PureState:
    """Optimal (ancilla-free) input state; independent of delta.

    Equal superposition of the extreme-pair eigenvectors when 0 is outside
    the numerical range, otherwise ``sum sqrt(p_i) |x_i>`` with
    ``sum p_i lambda_i = 0``.
    """
    eig = eig_unitary(u)
    phases = np.array([p for p, _ in eig])
    vecs = [v.amplitudes for _, v in eig]
    theta, start, end = spread_of_phases(phases)
    if theta < np.pi:
        if start == end:
            return PureState(vecs[start])
        return PureState.normalized(vecs[start] + vecs[end])
    p = _zero_combination(np.exp(1j * phases), (start, end))
    return PureState.normalized(sum(math.sqrt(pi) * v for pi, v in zip(p, vecs)))


def optimal_unitary_strategy(problem: UnitaryCertProblem) -> UnitaryStrategy:
    """Optimal input and accepting effect; ``copies > 1`` acts on ``U^{(x)N}``."""
    u = problem.u.matrix
    if problem.copies > 1:
        u = tensor_power(u, problem.copies)
    psi = optimal_input(u)
    phi = u @ psi.amplitudes
    omega, flags = optimal_effect(psi.amplitudes, phi, problem.delta)
    p1 = 1.0 - float(np.vdot(psi.amplitudes, omega @ psi.amplitudes).real)
    p2 = float(np.vdot(phi, omega @ phi).real)
    return UnitaryStrategy(psi, Effect(omega), max(0.0, p2), max(0.0, p1), flags)
