"""Certification of von Neumann measurements (computational basis versus ``U``).

The measurement ``P_U`` coincides with the dephased unitary channel
``Delta o Phi_{(UE)^dag}`` for every diagonal unitary ``E``, so the
single-copy quantities are governed by ``max_E nu(UE)``.  That maximum is
found numerically over the torus of diagonal phases.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar, nnls, root

from .config import FeasibilityError, OptimizerError, ValidationError, tol
from .linalg import (
    DensityOperator,
    Effect,
    PureState,
    UnitaryOperator,
    as_unitary,
    conditional_branches,
    eig_unitary,
    psd_sqrt,
    tensor_power,
)
from .numrange import nu_from_spread, nu_q_unitary, parallel_nu, spread_of_phases
from .states import _check_unit, optimal_effect, p2_states

UNCERTIFIED = "uncertified optimum"
BRANCH_PERFECT = "perfect discrimination branch"


@dataclass(frozen=True)
class PovmCertProblem:
    """H0: ``P_1`` versus H1: ``P_U``, both possibly extended by an ancilla."""

    u: UnitaryOperator
    delta: float
    copies: int = 1

    def __post_init__(self):
        object.__setattr__(self, "u", as_unitary(self.u))
        object.__setattr__(self, "delta", _check_unit("delta", self.delta))
        if int(self.copies) < 1:
            raise ValidationError("copies must be at least 1")


@dataclass(frozen=True)
class PhaseOptimum:
    e0: UnitaryOperator
    nu_star: float
    spread: float
    certified: bool

    @property
    def flags(self) -> tuple[str, ...]:
        return () if self.certified else (UNCERTIFIED,)


@dataclass(frozen=True)
class DephasedStrategy:
    e0: UnitaryOperator
    rho0: DensityOperator
    input: PureState
    conditional_effects: dict[int, Effect]
    p2: float
    p1: float
    nu_star: float
    branch: str  # "perfect" (diamond distance 2) or "dephased"
    flags: tuple[str, ...] = field(default=())

    def to_json(self) -> dict:
        from .linalg import matrix_to_json

        return {
            "branch": self.branch,
            "e0": [[float(z.real), float(z.imag)] for z in np.diag(self.e0.matrix)],
            "rho0": matrix_to_json(self.rho0.matrix),
            "input": matrix_to_json(self.input.amplitudes),
            "conditional_effects": {str(i): matrix_to_json(g.matrix)
                                    for i, g in sorted(self.conditional_effects.items())},
            "nu_star": self.nu_star,
            "p1": self.p1,
            "p2": self.p2,
            "flags": list(self.flags),
        }


# ---------------------------------------------------------------------------
# optimization over diagonal unitaries
# ---------------------------------------------------------------------------

def _phases_matrix(angles: np.ndarray) -> np.ndarray:
    return np.exp(1j * np.concatenate([[0.0], angles]))


def _spread_of(u: np.ndarray, angles: np.ndarray) -> float:
    lam = np.linalg.eigvals(u * _phases_matrix(angles)[None, :])
    return spread_of_phases(np.angle(lam))[0]


def _stationarity(u: np.ndarray, angles: np.ndarray):
    """Gradient of the spread: ``|x_d|^2 - |x_1|^2`` per free phase."""
    w = u * _phases_matrix(angles)[None, :]
    eig = eig_unitary(w)
    theta, start, end = spread_of_phases([p for p, _ in eig])
    x1 = eig[start][1].amplitudes
    xd = eig[end][1].amplitudes
    return (np.abs(xd) ** 2 - np.abs(x1) ** 2)[1:], theta


def _polish(u: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Solve the stationarity equations from a near-optimal point."""
    base = _spread_of(u, angles)
    if base >= np.pi or angles.size == 0:
        return angles
    try:
        sol = root(lambda a: _stationarity(u, a)[0], angles, method="hybr", options={"xtol": 1e-14})
    except (np.linalg.LinAlgError, ValueError):
        return angles
    # hybr reports failure when xtol is unreachable even at an exact root
    if np.max(np.abs(sol.fun)) < 1e-12 and _spread_of(u, sol.x) <= base + 1e-12:
        return np.mod(sol.x, 2 * np.pi)
    return angles


def optimize_e0(u, *, starts: int = 24, seed: int = 0, grid: int = 4096) -> PhaseOptimum:
    """Diagonal unitary ``E0`` (first entry 1) maximizing ``nu(U E)``.

    Minimizes the eigenphase spread of ``U E``, which is equivalent whenever
    the optimum has ``nu > 0``.  For d = 2 a dense scan of the single phase
    is refined by a bounded search, giving a certified optimum; for d >= 3 a
    seeded multistart Nelder-Mead search is used and the result carries the
    ``uncertified optimum`` flag.  In both cases the point is polished by
    solving the stationarity conditions.
    """
    u = as_unitary(u).matrix
    d = u.shape[0]
    if d == 1:
        return PhaseOptimum(UnitaryOperator(np.eye(1)), 1.0, 0.0, True)
    if d == 2:
        phis = 2 * np.pi * np.arange(grid) / grid
        mats = u[None, :, :] * np.stack([np.ones(grid), np.exp(1j * phis)], axis=1)[:, None, :]
        lam = np.linalg.eigvals(mats)
        gap = np.abs(np.angle(lam[:, 0] * lam[:, 1].conj()))
        k = int(np.argmin(gap))
        step = 2 * np.pi / grid
        r = minimize_scalar(lambda a: _spread_of(u, np.array([a])),
                            bounds=(phis[k] - step, phis[k] + step),
                            method="bounded", options={"xatol": 1e-13})
        best = np.array([r.x]) if r.fun <= gap[k] else np.array([phis[k]])
        certified = True
    else:
        best, best_val = np.zeros(d - 1), _spread_of(u, np.zeros(d - 1))
        for k in range(starts):
            x0 = np.zeros(d - 1) if k == 0 else np.random.default_rng([seed, k]).uniform(0, 2 * np.pi, d - 1)
            r = minimize(lambda a: _spread_of(u, a), x0, method="Nelder-Mead",
                         options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000 * d})
            if r.fun < best_val:
                best, best_val = r.x, r.fun
        certified = False
    best = _polish(u, np.mod(best, 2 * np.pi))
    theta = _spread_of(u, best)
    e0 = UnitaryOperator(np.diag(_phases_matrix(best)))
    return PhaseOptimum(e0, nu_from_spread(theta), theta, certified)


def diamond_distance_povm(u) -> float:
    """``||P_U - P_1||_diamond = 2 sqrt(1 - max_E nu(UE)^2)``."""
    nu = optimize_e0(u).nu_star
    return 2 * math.sqrt(max(0.0, 1 - nu * nu))


def p2_povm(u, delta: float) -> float:
    """Minimal type-II error ``max_E nu_q(UE)^2`` at ``q = sqrt(1 - delta)``."""
    delta = _check_unit("delta", delta)
    opt = optimize_e0(u)
    return nu_q_unitary(as_unitary(u).matrix @ opt.e0.matrix, math.sqrt(1 - delta)) ** 2


def p2_povm_parallel(u, delta: float, n: int, *, optimum: PhaseOptimum | None = None) -> float:
    """Type-II error for ``n`` parallel copies, from the single-copy optimal phases."""
    if int(n) < 1:
        raise ValidationError("n must be at least 1")
    delta = _check_unit("delta", delta)
    opt = optimum or optimize_e0(u)
    return p2_states(parallel_nu(opt.spread, n), delta)


# ---------------------------------------------------------------------------
# discriminator state
# ---------------------------------------------------------------------------

def discriminator_residual(u, e0, rho) -> float:
    """Largest violation of the equal-ratio and norm-match conditions.

    equal ratio: ``<i|rho U E0|i> = c <i|rho|i>`` with ``c = (l1 + ld)/2``;
    norm match:  ``<i|U^dag rho U|i> = <i|rho|i>``.
    """
    u = as_unitary(u).matrix
    w = u @ np.asarray(getattr(e0, "matrix", e0))
    rho = np.asarray(getattr(rho, "matrix", rho))
    c = _centre(w)
    diag = np.diag(rho)
    ratio = np.diag(rho @ w) - c * diag
    norm = np.diag(u.conj().T @ rho @ u) - diag
    return float(max(np.max(np.abs(ratio)), np.max(np.abs(norm))))


def _centre(w: np.ndarray) -> complex:
    eig = eig_unitary(w)
    phases = [p for p, _ in eig]
    _, start, end = spread_of_phases(phases)
    return (np.exp(1j * phases[start]) + np.exp(1j * phases[end])) / 2


def _candidate_states(w: np.ndarray, k_phases: int) -> list[np.ndarray]:
    eig = eig_unitary(w)
    phases = np.array([p for p, _ in eig])
    vecs = [v.amplitudes for _, v in eig]
    theta, start, end = spread_of_phases(phases)

    def near(ref):
        return [k for k in range(len(vecs)) if abs(np.exp(1j * phases[k]) - np.exp(1j * phases[ref])) <= 1e-9]

    lows, highs = near(start), near(end)
    out = []
    if theta <= 1e-12:
        out.extend(vecs)
    rel = np.exp(2j * np.pi * np.arange(k_phases) / k_phases)
    for a in lows:
        for b in highs:
            if a == b:
                continue
            for z in rel:
                out.append((vecs[a] + z * vecs[b]) / math.sqrt(2))
    if not out:
        out.append(vecs[start])
    return out


def construct_rho0(u, e0) -> DensityOperator:
    """Discriminator state for the dephased branch.

    Mixtures of ``(x_1 + e^{i phi_k} x_d)/sqrt(2)`` over ``K = 8d`` equispaced
    phases, built from the extreme-pair eigenvectors of ``U E0`` (all such
    pairs when an extreme eigenvalue is degenerate).  Each candidate has
    ``<psi|U E0|psi> = c``.  The uniform mixture is tried first; otherwise the
    weights come from nonnegative least squares on the linear conditions.
    """
    u = as_unitary(u).matrix
    e = np.asarray(getattr(e0, "matrix", e0))
    w = u @ e
    d = u.shape[0]
    if nu_from_spread(spread_of_phases([p for p, _ in eig_unitary(w)])[0]) <= tol().zero_nu:
        raise ValidationError("discriminator requires nu(U E0) > 0")
    cands = _candidate_states(w, 8 * d)
    projs = np.array([np.outer(v, v.conj()) for v in cands])
    uniform = projs.mean(axis=0)
    res = discriminator_residual(u, e, uniform)
    if res < tol().feas:
        return DensityOperator((uniform + uniform.conj().T) / 2)

    c = _centre(w)
    rows = []
    for P in projs:
        dg = np.diag(P)
        ratio = np.diag(P @ w) - c * dg
        norm = np.diag(u.conj().T @ P @ u) - dg
        rows.append(np.concatenate([[1.0], ratio.real, ratio.imag, norm.real]))
    a = np.array(rows).T
    b = np.zeros(a.shape[0])
    b[0] = 1.0
    weights, _ = nnls(a, b)
    if weights.sum() <= 0:
        raise FeasibilityError(float("inf"))
    weights = weights / weights.sum()
    rho = np.tensordot(weights, projs, axes=1)
    rho = (rho + rho.conj().T) / 2
    res = discriminator_residual(u, e, rho)
    if res >= tol().feas:
        raise FeasibilityError(res)
    return DensityOperator(rho)


def perfect_discriminator(u) -> DensityOperator:
    """State with ``diag(rho U) = 0``; exists exactly when ``max_E nu(UE) = 0``.

    Solved as a small semidefinite feasibility problem, then checked.
    """
    import cvxpy as cp

    u = as_unitary(u).matrix
    d = u.shape[0]
    rho = cp.Variable((d, d), hermitian=True)
    constraints = [rho >> 0, cp.real(cp.trace(rho)) == 1, cp.diag(rho @ u) == 0]
    prob = cp.Problem(cp.Minimize(0), constraints)
    try:
        with warnings.catch_warnings():
            # accuracy is checked on the returned point below
            warnings.simplefilter("ignore", UserWarning)
            prob.solve(solver=cp.CLARABEL)
    except cp.error.SolverError as exc:
        raise OptimizerError(f"perfect-discrimination witness search failed: {exc}") from exc
    if rho.value is None:
        raise OptimizerError(f"perfect-discrimination witness search failed: {prob.status}")
    r = (rho.value + rho.value.conj().T) / 2
    wv, vv = np.linalg.eigh(r)
    r = (vv * np.clip(wv, 0, None)) @ vv.conj().T
    r = r / np.trace(r).real
    resid = float(np.max(np.abs(np.diag(r @ u))))
    if resid > 1e-7:
        raise FeasibilityError(resid)
    return DensityOperator(r)


# ---------------------------------------------------------------------------
# Algorithm assembly
# ---------------------------------------------------------------------------

def purification(rho) -> PureState:
    """``sum_i sqrt(rho)|i> (x) |i>``."""
    return PureState.normalized(psd_sqrt(rho).reshape(-1))


def assemble_povm_strategy(problem: PovmCertProblem, *, optimum: PhaseOptimum | None = None) -> DephasedStrategy:
    """Entangled input and label-conditioned effects for P_1 vs P_U.

    With ``copies > 1`` the construction runs on ``U^{(x)N}`` with phases
    ``E0^{(x)N}`` taken from the single-copy optimum.
    """
    u = problem.u.matrix
    delta = problem.delta
    opt = optimum or optimize_e0(u)
    e = opt.e0.matrix
    if problem.copies > 1:
        u = tensor_power(u, problem.copies)
        e = tensor_power(e, problem.copies)
    w = u @ e
    nu = nu_from_spread(spread_of_phases([p for p, _ in eig_unitary(w)])[0])
    flags = list(opt.flags)
    d = u.shape[0]
    ident = np.eye(d)

    if nu <= tol().zero_nu:
        rho = perfect_discriminator(u)
        branch = "perfect"
        flags.append(BRANCH_PERFECT)
    else:
        rho = construct_rho0(u, e)
        branch = "dephased"
    psi = purification(rho.matrix)
    h0 = conditional_branches(ident, psi)
    h1 = conditional_branches(u, psi)

    effects: dict[int, Effect] = {}
    p1 = p2 = 0.0
    for (i, q0, v0), (_, q1, v1) in zip(h0, h1):
        if v0 is None:
            effects[i] = Effect(np.zeros((d, d)))
            continue
        if branch == "perfect" or v1 is None:
            gamma = np.outer(v0, v0.conj())
        else:
            gamma, _ = optimal_effect(v0, v1, delta)
        effects[i] = Effect(gamma)
        p1 += q0 * (1 - float(np.vdot(v0, gamma @ v0).real))
        if v1 is not None:
            p2 += q1 * float(np.vdot(v1, gamma @ v1).real)
    return DephasedStrategy(
        e0=UnitaryOperator(e),
        rho0=rho,
        input=psi,
        conditional_effects=effects,
        p2=max(0.0, p2),
        p1=max(0.0, p1),
        nu_star=nu,
        branch=branch,
        flags=tuple(flags),
    )
