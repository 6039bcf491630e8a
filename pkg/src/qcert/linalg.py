"""Dense complex linear algebra and the quantum object types shared by qcert.

All objects wrap read-only numpy arrays and validate their invariants on
construction.  Operations are pure functions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .config import (
    DimensionLimitError,
    EigensolverError,
    NotPSDError,
    ValidationError,
    tol,
)


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=complex)
    arr.setflags(write=False)
    return arr


def as_matrix(x) -> np.ndarray:
    """Return the underlying complex array of a qcert object or array-like."""
    if isinstance(x, VonNeumannMeasurement):
        return x.basis.matrix
    if hasattr(x, "matrix"):
        return x.matrix
    if isinstance(x, PureState):
        return x.amplitudes
    return np.asarray(x, dtype=complex)


def _square(a: np.ndarray, what: str) -> np.ndarray:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"{what} must be a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{what} has non-finite entries")
    if a.shape[0] > tol().max_dim:
        raise DimensionLimitError(a.shape[0], tol().max_dim)
    return a


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if v.size == 0 or not np.all(np.isfinite(v)):
            raise ValidationError("state amplitudes must be finite and non-empty")
        norm2 = float(np.vdot(v, v).real)
        if abs(norm2 - 1.0) > tol().norm:
            raise ValidationError(f"state is not normalized (|psi|^2 = {norm2!r})")
        object.__setattr__(self, "amplitudes", _frozen(v))

    @classmethod
    def normalized(cls, v) -> "PureState":
        v = np.asarray(v, dtype=complex).reshape(-1)
        n = np.linalg.norm(v)
        if n == 0:
            raise ValidationError("cannot normalize the zero vector")
        return cls(v / n)

    @classmethod
    def basis(cls, dim: int, index: int) -> "PureState":
        v = np.zeros(dim, dtype=complex)
        v[index] = 1.0
        return cls(v)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def projector(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def overlap(self, other: "PureState") -> complex:
        """<self|other>"""
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True, eq=False)
class DensityOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = _square(np.asarray(self.matrix, dtype=complex), "density operator")
        t = tol()
        if np.max(np.abs(m - m.conj().T)) > t.herm:
            raise ValidationError("density operator is not Hermitian")
        if abs(np.trace(m).real - 1.0) > t.norm:
            raise ValidationError(f"density operator trace is {np.trace(m).real!r}, expected 1")
        if np.linalg.eigvalsh(m).min() < -t.psd:
            raise NotPSDError("density operator is not PSD")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def from_state(cls, psi: PureState) -> "DensityOperator":
        return cls(psi.projector())

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class UnitaryOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = _square(np.asarray(self.matrix, dtype=complex), "unitary")
        err = np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0])))
        if err > tol().unit:
            raise ValidationError(f"matrix is not unitary (max |U^dag U - 1| = {err:.3e})")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def identity(cls, dim: int) -> "UnitaryOperator":
        return cls(np.eye(dim))

    @classmethod
    def diagonal(cls, entries) -> "UnitaryOperator":
        return cls(np.diag(np.asarray(entries, dtype=complex)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_diagonal(self) -> bool:
        m = self.matrix
        return bool(np.max(np.abs(m - np.diag(np.diag(m)))) <= tol().unit)

    def __matmul__(self, other: "UnitaryOperator") -> "UnitaryOperator":
        return UnitaryOperator(self.matrix @ as_matrix(other))


@dataclass(frozen=True, eq=False)
class Effect:
    """One element of a binary measurement; 0 <= effect <= 1."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _square(np.asarray(self.matrix, dtype=complex), "effect")
        t = tol()
        if np.max(np.abs(m - m.conj().T), initial=0.0) > t.herm:
            raise ValidationError("effect is not Hermitian")
        w = np.linalg.eigvalsh(m) if m.size else np.zeros(0)
        if w.size and (w.min() < -t.psd or w.max() > 1 + t.psd):
            raise NotPSDError(f"effect eigenvalues {w.min():.3e}..{w.max():.3e} outside [0, 1]")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def rank_one(cls, v) -> "Effect":
        v = np.asarray(as_matrix(v), dtype=complex).reshape(-1)
        return cls(np.outer(v, v.conj()))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def expectation(self, psi: PureState) -> float:
        a = psi.amplitudes
        return float(np.vdot(a, self.matrix @ a).real)


@dataclass(frozen=True, eq=False)
class VonNeumannMeasurement:
    """Rank-one projective measurement whose effects are the columns of ``basis``."""

    basis: UnitaryOperator

    def __post_init__(self):
        if not isinstance(self.basis, UnitaryOperator):
            object.__setattr__(self, "basis", UnitaryOperator(self.basis))

    @property
    def dim(self) -> int:
        return self.basis.dim

    def vector(self, i: int) -> np.ndarray:
        return self.basis.matrix[:, i]


def as_unitary(u) -> UnitaryOperator:
    if isinstance(u, UnitaryOperator):
        return u
    if isinstance(u, VonNeumannMeasurement):
        return u.basis
    return UnitaryOperator(u)


def as_state(v) -> PureState:
    return v if isinstance(v, PureState) else PureState(v)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def tensor_product(a, b) -> np.ndarray:
    """Kronecker product, refusing results beyond the configured dimension cap."""
    a = as_matrix(a)
    b = as_matrix(b)
    a2 = a.reshape(a.shape[0], -1) if a.ndim == 2 else a.reshape(-1, 1)
    b2 = b.reshape(b.shape[0], -1) if b.ndim == 2 else b.reshape(-1, 1)
    cap = tol().max_dim
    for dim in (a2.shape[0] * b2.shape[0], a2.shape[1] * b2.shape[1]):
        if dim > cap:
            raise DimensionLimitError(dim, cap)
    out = np.kron(a2, b2)
    return out.reshape(-1) if a.ndim == 1 and b.ndim == 1 else out


def tensor_power(a, n: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    a = as_matrix(a)
    for _ in range(n):
        out = tensor_product(out, a)
    return out


def wrap_phase(theta):
    """Map angles to (-pi, pi]."""
    w = np.angle(np.exp(1j * np.asarray(theta, dtype=float)))
    return np.where(w <= -np.pi, np.pi, w)


def eig_unitary(u) -> list[tuple[float, PureState]]:
    """Eigenphases and orthonormal eigenvectors of a unitary.

    Phases lie in (-pi, pi] and are sorted ascending.  The complex Schur form
    of a normal matrix is diagonal, so its Schur vectors are orthonormal even
    inside degenerate eigenspaces.
    """
    m = as_unitary(u).matrix
    t = tol()
    try:
        T, Z = scipy.linalg.schur(m, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigensolverError(f"eigensolver failure: {exc}") from exc
    lam = np.diag(T)
    if np.max(np.abs(np.abs(lam) - 1.0)) > t.eig:
        raise EigensolverError("eigensolver failure: eigenvalues off the unit circle")
    phases = wrap_phase(np.angle(lam))
    lam = np.exp(1j * phases)
    recon = (Z * lam) @ Z.conj().T
    if np.max(np.abs(recon - m)) > t.eig:
        raise EigensolverError("eigensolver failure: reconstruction error above tolerance")

    vecs = []
    for k in range(Z.shape[1]):
        v = Z[:, k]
        lead = np.flatnonzero(np.abs(v) > 1e-12)[0]
        v = v * np.exp(-1j * np.angle(v[lead]))
        vecs.append(v / np.linalg.norm(v))

    def key(k):
        v = vecs[k]
        lead = int(np.flatnonzero(np.abs(v) > 1e-12)[0])
        return (float(phases[k]), lead, tuple(np.round(np.abs(v), 12)))

    order = sorted(range(len(vecs)), key=key)
    return [(float(phases[k]), PureState(vecs[k])) for k in order]


def psd_sqrt(rho) -> np.ndarray:
    """Hermitian PSD square root; eigenvalues within -tau_psd of zero are clipped."""
    m = as_matrix(rho)
    m = (m + m.conj().T) / 2
    w, v = np.linalg.eigh(m)
    if w.min() < -tol().psd:
        raise NotPSDError(f"not PSD: smallest eigenvalue {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def apply_measurement_channel(m, rho) -> DensityOperator:
    """Measure-and-prepare channel: rho -> sum_i <u_i|rho|u_i> |i><i|."""
    basis = as_unitary(m).matrix
    r = as_matrix(rho)
    if r.shape != basis.shape:
        raise ValidationError(f"dimension mismatch: measurement {basis.shape[0]}, state {r.shape}")
    probs = np.einsum("ki,kl,li->i", basis.conj(), r, basis).real
    return DensityOperator(np.diag(probs))


def extended_measure_and_condition(m, psi) -> list[tuple[int, float, DensityOperator]]:
    """Measure the first factor of a bipartite pure state.

    Returns ``(label, probability, conditional ancilla state)`` for every label
    with probability at least ``tau_prob``.  The conditional state is formed by
    direct contraction ``(<u_i| x 1)|psi>``; no transpose or conjugation
    shortcut is applied.
    """
    basis = as_unitary(m).matrix
    amps = as_state(psi).amplitudes
    d = basis.shape[0]
    if amps.size % d:
        raise ValidationError(f"dimension mismatch: {amps.size} is not a multiple of {d}")
    joint = amps.reshape(d, amps.size // d)
    out = []
    for i in range(d):
        branch = basis[:, i].conj() @ joint
        p = float(np.vdot(branch, branch).real)
        if p < tol().prob:
            continue
        cond = np.outer(branch, branch.conj()) / p
        out.append((i, p, DensityOperator(cond)))
    return out


def conditional_branches(m, psi) -> list[tuple[int, float, np.ndarray]]:
    """Like :func:`extended_measure_and_condition` but returns unit ancilla vectors."""
    basis = as_unitary(m).matrix
    amps = as_state(psi).amplitudes
    d = basis.shape[0]
    if amps.size % d:
        raise ValidationError(f"dimension mismatch: {amps.size} is not a multiple of {d}")
    joint = amps.reshape(d, amps.size // d)
    out = []
    for i in range(d):
        branch = basis[:, i].conj() @ joint
        p = float(np.vdot(branch, branch).real)
        out.append((i, p, branch / np.sqrt(p) if p >= tol().prob else None))
    return out


# ---------------------------------------------------------------------------
# Matrix JSON format: {"rows": n, "cols": m, "entries": [[re, im], ...]}
# ---------------------------------------------------------------------------

def matrix_to_json(a) -> dict:
    a = as_matrix(a)
    a2 = a.reshape(-1, 1) if a.ndim == 1 else a
    return {
        "rows": int(a2.shape[0]),
        "cols": int(a2.shape[1]),
        "entries": [[float(z.real), float(z.imag)] for z in a2.reshape(-1)],
    }


def matrix_from_json(obj, source: str = "matrix") -> np.ndarray:
    if not isinstance(obj, dict):
        raise ValidationError(f"{source}: expected an object with rows/cols/entries")
    for field in ("rows", "cols", "entries"):
        if field not in obj:
            raise ValidationError(f"{source}: missing field '{field}'")
    rows, cols, entries = obj["rows"], obj["cols"], obj["entries"]
    if not (isinstance(rows, int) and isinstance(cols, int) and rows > 0 and cols > 0):
        raise ValidationError(f"{source}: field 'rows'/'cols' must be positive integers")
    if not isinstance(entries, list) or len(entries) != rows * cols:
        n = len(entries) if isinstance(entries, list) else "non-list"
        raise ValidationError(f"{source}: field 'entries' has {n} items, expected {rows * cols}")
    if rows * cols > tol().max_dim ** 2:
        raise DimensionLimitError(max(rows, cols), tol().max_dim)
    vals = np.empty(rows * cols, dtype=complex)
    for k, e in enumerate(entries):
        if (not isinstance(e, (list, tuple)) or len(e) != 2
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in e)):
            raise ValidationError(f"{source}: field 'entries[{k}]' must be a [re, im] pair of numbers")
        vals[k] = complex(e[0], e[1])
    if not np.all(np.isfinite(vals)):
        raise ValidationError(f"{source}: entries must be finite")
    return vals.reshape(rows, cols)


def load_matrix(path) -> np.ndarray:
    """Read a matrix JSON file, reporting the line of any syntax error."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return matrix_from_json(obj, source=str(path))
