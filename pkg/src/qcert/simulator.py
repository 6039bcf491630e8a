"""Independent oracle: exact error probabilities by full density-matrix
contraction, and seeded Monte-Carlo runs of the certification protocols.

Nothing here reuses the closed-form error expressions; the exact path only
contracts states, channels and effects.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize

from .config import ValidationError, tol
from .linalg import as_matrix, as_state, extended_measure_and_condition
from .povm import DephasedStrategy, PovmCertProblem
from .states import StateCertProblem, StateStrategy
from .unitary import UnitaryCertProblem, UnitaryStrategy

GENERATOR = f"numpy.random.Philox/numpy-{np.__version__}"
Z_SCORE = 4.0
_CHUNK = 1 << 18  # shots per vectorized block; must be even


@dataclass(frozen=True)
class SimReport:
    exact_p1: float
    exact_p2: float
    shots: int
    empirical_p1: float | None
    empirical_p2: float | None
    ci_halfwidth_p1: float | None
    ci_halfwidth_p2: float | None
    seed: int
    generator: str = GENERATOR

    def contains(self) -> bool:
        """True when every simulated rate lies within its CI of the exact value."""
        ok = True
        for emp, exact, hw in ((self.empirical_p1, self.exact_p1, self.ci_halfwidth_p1),
                               (self.empirical_p2, self.exact_p2, self.ci_halfwidth_p2)):
            if emp is not None:
                ok &= abs(emp - exact) <= hw
        return ok

    def to_json(self) -> dict:
        return asdict(self)


def _ci(p_hat: float, shots: int) -> float:
    return Z_SCORE * math.sqrt(p_hat * (1 - p_hat) / shots)


# ---------------------------------------------------------------------------
# exact evaluation
# ---------------------------------------------------------------------------

def _dephase_first(basis: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """(P_V (x) 1)(rho) = sum_i (|i><v_i| (x) 1) rho (|v_i><i| (x) 1)."""
    d = basis.shape[0]
    aux = rho.shape[0] // d
    out = np.zeros_like(rho)
    eye = np.eye(aux)
    for i in range(d):
        ket_i = np.zeros((d, 1))
        ket_i[i] = 1.0
        k = np.kron(ket_i @ basis[:, i].conj()[None, :], eye)
        out += k @ rho @ k.conj().T
    return out


def _outputs(problem, strategy):
    """Output density matrices under H0 and H1 plus the accepting effect."""
    if isinstance(problem, StateCertProblem):
        if not isinstance(strategy, StateStrategy):
            raise ValidationError("state problems take a StateStrategy")
        psi, phi = problem.psi.amplitudes, problem.phi.amplitudes
        for _ in range(problem.copies - 1):
            psi = np.kron(psi, problem.psi.amplitudes)
            phi = np.kron(phi, problem.phi.amplitudes)
        omega = strategy.effect.matrix
        if omega.shape[0] != psi.size:
            raise ValidationError("dimension mismatch between problem and strategy")
        return np.outer(psi, psi.conj()), np.outer(phi, phi.conj()), omega
    if isinstance(problem, UnitaryCertProblem):
        if not isinstance(strategy, UnitaryStrategy):
            raise ValidationError("unitary problems take a UnitaryStrategy")
        u = problem.u.matrix
        full = u
        for _ in range(problem.copies - 1):
            full = np.kron(full, u)
        psi = strategy.input.amplitudes
        if psi.size != full.shape[0]:
            raise ValidationError("dimension mismatch between problem and strategy")
        rho = np.outer(psi, psi.conj())
        return rho, full @ rho @ full.conj().T, strategy.effect.matrix
    if isinstance(problem, PovmCertProblem):
        if not isinstance(strategy, DephasedStrategy):
            raise ValidationError("measurement problems take a DephasedStrategy")
        u = problem.u.matrix
        full = u
        for _ in range(problem.copies - 1):
            full = np.kron(full, u)
        d = full.shape[0]
        psi = strategy.input.amplitudes
        if psi.size % d:
            raise ValidationError("dimension mismatch between problem and strategy")
        aux = psi.size // d
        rho = np.outer(psi, psi.conj())
        omega = np.zeros_like(rho)
        for i, gamma in strategy.conditional_effects.items():
            proj = np.zeros((d, d))
            proj[i, i] = 1.0
            omega += np.kron(proj, gamma.matrix.reshape(aux, aux))
        return _dephase_first(np.eye(d), rho), _dephase_first(full, rho), omega
    raise ValidationError(f"unsupported problem type {type(problem).__name__}")


def exact_errors(problem, strategy) -> tuple[float, float]:
    """(p1, p2) = (Tr((1-Omega) out_H0), Tr(Omega out_H1)) by contraction."""
    out0, out1, omega = _outputs(problem, strategy)
    p1 = 1.0 - float(np.trace(omega @ out0).real)
    p2 = float(np.trace(omega @ out1).real)
    return p1, p2


# ---------------------------------------------------------------------------
# Monte-Carlo protocol runs
# ---------------------------------------------------------------------------

def _label_model(problem, strategy, hypothesis: int):
    """Label distribution and per-label acceptance probability."""
    if isinstance(problem, PovmCertProblem):
        u = problem.u.matrix
        full = u
        for _ in range(problem.copies - 1):
            full = np.kron(full, u)
        basis = np.eye(full.shape[0]) if hypothesis == 0 else full
        probs, accept = [], []
        for i, p, cond in extended_measure_and_condition(basis, strategy.input):
            gamma = strategy.conditional_effects.get(i)
            a = 0.0 if gamma is None else float(np.trace(gamma.matrix @ cond.matrix).real)
            probs.append(p)
            accept.append(min(1.0, max(0.0, a)))
        probs = np.array(probs)
        return probs / probs.sum(), np.array(accept)
    out0, out1, omega = _outputs(problem, strategy)
    out = out0 if hypothesis == 0 else out1
    a = float(np.trace(omega @ out).real)
    return np.array([1.0]), np.array([min(1.0, max(0.0, a))])


def _count_accepts(cdf: np.ndarray, accept: np.ndarray, shots: int, seed: int, hypothesis: int) -> int:
    """Shot k consumes uniforms 2k and 2k+1 of the Philox stream keyed by
    (seed, hypothesis), so counts do not depend on the chunking."""
    total = 0
    for start in range(0, shots, _CHUNK):
        n = min(_CHUNK, shots - start)
        bitgen = np.random.Philox(key=np.array([seed, hypothesis], dtype=np.uint64),
                                  counter=np.array([start // 2, 0, 0, 0], dtype=np.uint64))
        u = np.random.Generator(bitgen).random(2 * n).reshape(n, 2)
        labels = np.minimum(np.searchsorted(cdf, u[:, 0], side="right"), cdf.size - 1)
        total += int(np.count_nonzero(u[:, 1] < accept[labels]))
    return total


def run_protocol(problem, strategy, shots: int, seed: int, truth: str = "both") -> SimReport:
    """Simulate ``shots`` independent protocol runs under H0, H1 or both.

    Each shot samples the measurement label from the exact conditional
    distribution, then the binary outcome from ``Tr(Gamma_i rho_i)``.
    """
    if shots < 1:
        raise ValidationError("shots must be at least 1")
    if not 0 <= int(seed) < 2 ** 64:
        raise ValidationError("seed must be a 64-bit unsigned integer")
    if truth not in ("h0", "h1", "both"):
        raise ValidationError("truth must be h0, h1 or both")
    seed = int(seed)
    p1, p2 = exact_errors(problem, strategy)
    emp1 = emp2 = ci1 = ci2 = None
    if truth in ("h0", "both"):
        probs, accept = _label_model(problem, strategy, 0)
        rejects = shots - _count_accepts(np.cumsum(probs), accept, shots, seed, 0)
        emp1 = rejects / shots
        ci1 = _ci(emp1, shots)
    if truth in ("h1", "both"):
        probs, accept = _label_model(problem, strategy, 1)
        emp2 = _count_accepts(np.cumsum(probs), accept, shots, seed, 1) / shots
        ci2 = _ci(emp2, shots)
    return SimReport(p1, p2, shots, emp1, emp2, ci1, ci2, seed)


# ---------------------------------------------------------------------------
# brute-force oracles
# ---------------------------------------------------------------------------

def _best_two_outcome(cost0, cost1, gain0, gain1, need):
    """min a c0 + b c1 subject to a g0 + b g1 >= need, a, b in [0, 1] (vectorized)."""
    # order the two eigen-directions by cost per unit gain
    r0 = np.where(gain0 > 0, cost0 / np.maximum(gain0, 1e-300), np.inf)
    r1 = np.where(gain1 > 0, cost1 / np.maximum(gain1, 1e-300), np.inf)
    first = r0 <= r1
    cf = np.where(first, cost0, cost1)
    gf = np.where(first, gain0, gain1)
    cs = np.where(first, cost1, cost0)
    gs = np.where(first, gain1, gain0)
    a = np.where(gf > 0, np.minimum(1.0, need / np.maximum(gf, 1e-300)), 0.0)
    rest = np.maximum(0.0, need - a * gf)
    b = np.where(gs > 0, rest / np.maximum(gs, 1e-300), np.inf)
    feasible = b <= 1.0 + 1e-12
    val = a * cf + np.minimum(b, 1.0) * cs
    return np.where(feasible, val, np.inf)


def _p2_over_directions(psi, phi, delta, theta, azim):
    n = np.stack([np.cos(theta / 2), np.sin(theta / 2) * np.exp(1j * azim)], axis=-1)
    nperp = np.stack([-np.sin(theta / 2) * np.exp(-1j * azim), np.cos(theta / 2)], axis=-1)
    g0 = np.abs(n.conj() @ psi) ** 2
    g1 = np.abs(nperp.conj() @ psi) ** 2
    c0 = np.abs(n.conj() @ phi) ** 2
    c1 = np.abs(nperp.conj() @ phi) ** 2
    return _best_two_outcome(c0, c1, g0, g1, 1.0 - delta)


def brute_force_best_p2(psi, phi, delta: float, resolution: float = 1e-4) -> float:
    """Minimum of <phi|Omega|phi> over qubit effects with <psi|Omega|psi> >= 1 - delta.

    Every qubit effect is ``a |n><n| + b |n_perp><n_perp|``; for a fixed Bloch
    direction ``n`` the best ``(a, b)`` is a two-variable linear program solved
    exactly.  Directions are enumerated on a sphere grid that is repeatedly
    zoomed around the best cells until the angular step reaches ``resolution``.
    """
    psi = as_state(psi).amplitudes
    phi = as_state(phi).amplitudes
    if psi.size != 2 or phi.size != 2:
        raise ValidationError("brute-force oracle is qubit-only")
    delta = float(delta)
    if delta >= 1.0:
        return 0.0
    th = np.linspace(0, np.pi, 181)
    az = np.linspace(0, 2 * np.pi, 361)
    T, A = np.meshgrid(th, az, indexing="ij")
    vals = _p2_over_directions(psi, phi, delta, T, A)
    best = float(vals.min())
    flat = np.argsort(vals, axis=None)[:8]
    centres = [(T.flat[k], A.flat[k]) for k in flat]
    step = np.pi / 180
    while step > resolution:
        new_centres = []
        for t0, a0 in centres:
            t = np.clip(np.linspace(t0 - step, t0 + step, 21), 0, np.pi)
            a = np.linspace(a0 - step, a0 + step, 21)
            TT, AA = np.meshgrid(t, a, indexing="ij")
            v = _p2_over_directions(psi, phi, delta, TT, AA)
            k = int(np.argmin(v))
            best = min(best, float(v.flat[k]))
            new_centres.append((TT.flat[k], AA.flat[k]))
        centres = new_centres
        step /= 10
    return best


def product_input_p2(u, delta: float, psi) -> float:
    """Best type-II error for P_1 vs P_U from an ancilla-free input ``psi``.

    Without an ancilla only the label is observed, so the test is a classical
    Neyman-Pearson problem on the two label distributions (solved greedily,
    randomizing on the boundary label).
    """
    u = as_matrix(u)
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    p = np.abs(psi) ** 2
    q = np.abs(u.conj().T @ psi) ** 2
    need = 1.0 - delta
    order = sorted(range(p.size), key=lambda i: (q[i] / p[i]) if p[i] > tol().prob else np.inf)
    cost = 0.0
    for i in order:
        if need <= 0 or p[i] <= tol().prob:
            break
        a = min(1.0, need / p[i])
        cost += a * q[i]
        need -= a * p[i]
    return float(cost)


def best_product_input_p2(u, delta: float, samples: int = 20000, seed: int = 0, polish: int = 8) -> float:
    """Estimated minimum of :func:`product_input_p2` over ancilla-free inputs.

    Random inputs plus the computational basis states are scored, then the
    best ``polish`` candidates are refined by Nelder-Mead.  The result is an
    upper estimate of the true minimum.
    """
    u = as_matrix(u)
    d = u.shape[0]
    rng = np.random.default_rng(seed)
    cands = list(rng.standard_normal((samples, d)) + 1j * rng.standard_normal((samples, d)))
    cands += list(np.eye(d, dtype=complex))
    scores = np.array([product_input_p2(u, delta, v) for v in cands])

    def f(x):
        v = x[:d] + 1j * x[d:]
        return product_input_p2(u, delta, v) if np.linalg.norm(v) > 1e-9 else np.inf

    best = float(scores.min())
    for k in np.argsort(scores)[:polish]:
        v = cands[k] / np.linalg.norm(cands[k])
        r = minimize(f, np.concatenate([v.real, v.imag]), method="Nelder-Mead",
                     options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000 * d})
        best = min(best, float(r.fun))
    return best
