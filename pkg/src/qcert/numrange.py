"""Numerical range and q-numerical range geometry.

For a unitary ``U`` the numerical range ``W(U)`` is the convex hull of its
eigenvalues, so its distance to the origin depends only on the smallest arc
covering the eigenphases.  ``W_q`` of a general square matrix is sampled
through its support function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar
from scipy.spatial import ConvexHull, QhullError

from .config import SupportPointError, ValidationError
from .linalg import as_matrix, eig_unitary

TWO_PI = 2 * np.pi


@dataclass(frozen=True, eq=False)
class RangeSet:
    kind: str  # "hull-polygon" or "sampled-boundary"
    q: float
    points: np.ndarray
    dist_to_zero: float
    directions: np.ndarray | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "q": float(self.q),
            "points": [[float(z.real), float(z.imag)] for z in self.points],
            "dist_to_zero": float(self.dist_to_zero),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RangeSet":
        pts = np.array([complex(re, im) for re, im in obj["points"]], dtype=complex)
        return cls(obj.get("kind", "sampled-boundary"), float(obj["q"]), pts, float(obj["dist_to_zero"]))


@dataclass(frozen=True)
class SpectralSpread:
    theta: float
    extreme_pair: tuple[int, int]


def _check_q(q: float) -> float:
    q = float(q)
    if not (0.0 <= q <= 1.0) or math.isnan(q):
        raise ValidationError(f"q must lie in [0, 1], got {q!r}")
    return q


def spread_of_phases(phases) -> tuple[float, int, int]:
    """Width of the smallest arc containing all phases, and its endpoints.

    Returns ``(theta, start, end)`` where ``start``/``end`` index into
    ``phases``; the arc runs counterclockwise from ``start`` to ``end``.
    """
    ph = np.mod(np.asarray(phases, dtype=float), TWO_PI)
    n = ph.size
    if n == 1:
        return 0.0, 0, 0
    order = np.argsort(ph, kind="stable")
    s = ph[order]
    gaps = np.diff(np.append(s, s[0] + TWO_PI))
    # the widest gap is left uncovered; first one wins ties
    g = int(np.argmax(gaps >= gaps.max() - 1e-15))
    theta = float(TWO_PI - gaps[g])
    start = int(order[(g + 1) % n])
    end = int(order[g])
    return max(theta, 0.0), start, end


# n * theta computed from rounded phases can land a few ulps below pi
ARC_SLACK = 1e-12
_ROUNDOFF = 8 * np.finfo(float).eps


def parallel_nu(theta: float, n: int) -> float:
    """``nu`` of an n-fold tensor power from the single-copy spread."""
    total = theta * int(n)
    return 0.0 if total >= np.pi - ARC_SLACK * n else nu_from_spread(total)


def nu_from_spread(theta: float) -> float:
    """Distance from 0 to the hull of unit-circle points spanning an arc of width theta."""
    if theta >= np.pi:
        return 0.0
    return float(max(math.cos(theta / 2), 0.0))


def spectral_spread(u) -> SpectralSpread:
    """Angular width of the smallest arc containing the eigenphases of ``u``.

    ``extreme_pair`` indexes the (ascending) ordering of :func:`eig_unitary`.
    """
    phases = [p for p, _ in eig_unitary(u)]
    theta, start, end = spread_of_phases(phases)
    return SpectralSpread(theta=theta, extreme_pair=(start, end))


def nu_unitary(u) -> float:
    return nu_from_spread(spectral_spread(u).theta)


def hull_of_unitary(u) -> RangeSet:
    """Numerical range of a unitary as the polygon of its distinct eigenvalues."""
    phases = np.array([p for p, _ in eig_unitary(u)])
    theta, _, _ = spread_of_phases(phases)
    distinct = []
    for p in np.sort(phases):
        if not distinct or abs(np.exp(1j * p) - np.exp(1j * distinct[-1])) > 1e-9:
            distinct.append(p)
    if len(distinct) > 1 and abs(np.exp(1j * distinct[0]) - np.exp(1j * distinct[-1])) <= 1e-9:
        distinct.pop()
    return RangeSet("hull-polygon", 1.0, np.exp(1j * np.array(distinct)), nu_from_spread(theta))


def nu_q_from_nu(m: float, q: float) -> float:
    """Distance of W_q to the origin for a unitary whose W sits at distance m."""
    q = _check_q(q)
    s = math.sqrt(max(0.0, 1.0 - q * q))
    if m <= s:
        return 0.0
    v = q * m - s * math.sqrt(max(0.0, 1.0 - m * m))
    # on the threshold m = sqrt(1 - q^2) rounding leaves a residue of a few ulps
    return v if v > _ROUNDOFF else 0.0


def nu_q_unitary(u, q: float) -> float:
    """nu_q(U) for a unitary, via the closed form in terms of nu(U)."""
    q = _check_q(q)
    return nu_q_from_nu(nu_unitary(u), q)


# ---------------------------------------------------------------------------
# sampled q-numerical range
# ---------------------------------------------------------------------------

def _value_and_grad(v: np.ndarray, x: np.ndarray, rot: complex, q: float, s: float):
    """Support objective at the unnormalized vector ``v`` and its Wirtinger gradient.

    ``f(v) = q Re(rot <v|X|v>)/n + s sqrt(|X^dag v|^2/n - |<v|X^dag|v>|^2/n^2)``
    with ``n = <v|v>``; ``2 df/d(conj v)`` packs the real gradient as re + i*im.
    """
    n = np.vdot(v, v).real
    xv = x @ v
    xdv = x.conj().T @ v
    a = rot * np.vdot(v, xv)
    t1 = a.real / n
    hv = (rot * xv + np.conj(rot) * xdv) / 2
    g1 = (hv - t1 * v) / n
    b = np.vdot(xdv, xdv).real / n
    e = np.vdot(v, xdv) / n
    rad = b - abs(e) ** 2
    f = q * t1
    grad = q * g1
    if s > 0 and rad > 1e-300:
        root = np.sqrt(rad)
        f += s * root
        db = (x @ xdv - b * v) / n
        de2 = (np.conj(e) * (xdv - e * v) + e * (xv - np.conj(e) * v)) / n
        grad = grad + s * (db - de2) / (2 * root)
    return f, 2 * grad


def _support_point(psi: np.ndarray, x: np.ndarray, q: float, s: float, t: float) -> complex:
    a = np.vdot(psi, x @ psi)
    w = x.conj().T @ psi
    w = w - psi * np.vdot(psi, w)
    return complex(q * a + s * np.exp(1j * t) * np.linalg.norm(w))


def support(x, q: float, t: float, *, starts: int = 32, seed: int = 0, index: int = 0):
    """Support value ``max Re(e^{-it} z)`` over ``z`` in ``W_q(x)`` and a maximizer.

    Writing ``phi = q psi + sqrt(1-q^2) psi_perp`` the inner maximum over
    ``psi_perp`` is the norm of ``X^dag psi`` projected off ``psi``.  The outer
    maximum over ``psi`` is a seeded multistart quasi-Newton search (one start
    at the top eigenvector of the Hermitian part, the rest Gaussian).
    """
    x = as_matrix(x)
    d = x.shape[0]
    s = math.sqrt(max(0.0, 1.0 - q * q))
    rot = np.exp(-1j * t)
    herm = (rot * x + (rot * x).conj().T) / 2
    top = np.linalg.eigh(herm)[1][:, -1]
    if d == 1:
        z = complex(q * x[0, 0])
        return float((rot * z).real), z
    if s == 0.0:
        z = complex(np.vdot(top, x @ top))
        return float((rot * z).real), z

    def fun(p):
        v = p[:d] + 1j * p[d:]
        f, g = _value_and_grad(v, x, rot, q, s)
        return -f, -np.concatenate([g.real, g.imag])

    rng = np.random.default_rng([seed, index])
    candidates = [np.concatenate([top.real, top.imag])]
    candidates += [rng.standard_normal(2 * d) for _ in range(starts - 1)]
    best = None
    for p0 in candidates:
        r = minimize(fun, p0, jac=True, method="L-BFGS-B",
                     options={"ftol": 1e-15, "gtol": 1e-11, "maxiter": 2000})
        if np.isfinite(r.fun) and (best is None or r.fun < best.fun):
            best = r
    if best is None:
        raise SupportPointError(index, "non-finite objective")
    v = best.x[:d] + 1j * best.x[d:]
    if np.linalg.norm(v) == 0:
        raise SupportPointError(index, "collapsed to the zero vector")
    psi = v / np.linalg.norm(v)
    z = _support_point(psi, x, q, s, t)
    return float((rot * z).real), z


def _segment_distance(a: complex, b: complex) -> float:
    ab = b - a
    denom = abs(ab) ** 2
    t = 0.0 if denom == 0 else min(1.0, max(0.0, -(np.conj(ab) * a).real / denom))
    return abs(a + t * ab)


def polygon_distance_to_zero(points) -> float:
    """Distance from the origin to the convex hull of a point set (0 if inside)."""
    pts = np.asarray(points, dtype=complex).reshape(-1)
    if pts.size == 1:
        return float(abs(pts[0]))
    if pts.size >= 3:
        xy = np.column_stack([pts.real, pts.imag])
        try:
            hull = ConvexHull(xy)
        except QhullError:
            hull = None
        if hull is not None:
            if np.all(hull.equations[:, 2] <= 0.0):
                return 0.0
            return float(min(_segment_distance(pts[i], pts[j]) for i, j in hull.simplices))
    # collinear or two points: the hull is a segment
    lo = pts[np.argmin(pts.real + 1e-3 * pts.imag)]
    far = pts[np.argmax(np.abs(pts - lo))]
    return float(_segment_distance(lo, far))


def wq_boundary_samples(x, q: float, n_dirs: int = 64, *, starts: int = 32, seed: int = 0) -> RangeSet:
    """Support points of ``W_q(x)`` for ``n_dirs`` equispaced directions.

    ``dist_to_zero`` is the maximum over directions of ``-h(t + pi)``,
    refined by a bounded scalar search around the best sampled direction;
    the refined nearest point is inserted into the sample list so the stored
    polygon reproduces the distance.  A value of zero means every sampled
    half-plane contains the origin.
    """
    q = _check_q(q)
    if n_dirs < 8:
        raise ValidationError("n_dirs must be at least 8")
    x = as_matrix(x)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValidationError("W_q requires a square matrix")
    dirs = TWO_PI * np.arange(n_dirs) / n_dirs
    h = np.empty(n_dirs)
    pts = np.empty(n_dirs, dtype=complex)
    for k, t in enumerate(dirs):
        h[k], pts[k] = support(x, q, t, starts=starts, seed=seed, index=k)

    def lower(t):
        # min over the set of Re(e^{-it} z) = -h(t + pi)
        val, z = support(x, q, t + np.pi, starts=starts, seed=seed, index=n_dirs)
        return -val, z

    g = np.array([-h[(k + n_dirs // 2) % n_dirs] for k in range(n_dirs)]) if n_dirs % 2 == 0 \
        else np.array([lower(t)[0] for t in dirs])
    dist = 0.0
    directions = dirs.copy()
    if g.max() > 0:
        k = int(np.argmax(g))
        step = TWO_PI / n_dirs
        r = minimize_scalar(lambda t: -lower(t)[0], bounds=(dirs[k] - step, dirs[k] + step),
                            method="bounded", options={"xatol": 1e-10})
        t_star = float(r.x)
        g_star, z_star = lower(t_star)
        dist = max(0.0, float(g_star), float(g.max()))
        if g_star >= g.max():
            t_near = np.mod(t_star + np.pi, TWO_PI)
            pos = int(np.searchsorted(directions, t_near))
            directions = np.insert(directions, pos, t_near)
            pts = np.insert(pts, pos, z_star)
    return RangeSet("sampled-boundary", q, pts, dist, directions)


def scaled_support_contains(points, support_dirs, support_vals, scale: float, margin: float) -> bool:
    """Check ``Re(e^{-it} z) <= scale * h(t) + margin`` for all points and directions."""
    pts = np.asarray(points, dtype=complex)
    proj = (np.exp(-1j * np.asarray(support_dirs))[:, None] * pts[None, :]).real
    return bool(np.all(proj <= scale * np.asarray(support_vals)[:, None] + margin))


def is_convex_polygon(points, margin: float) -> bool:
    """True when consecutive edges never turn clockwise by more than ``margin``."""
    pts = np.asarray(points, dtype=complex)
    keep = [pts[0]]
    for z in pts[1:]:
        if abs(z - keep[-1]) > margin:
            keep.append(z)
    if len(keep) > 2 and abs(keep[-1] - keep[0]) <= margin:
        keep.pop()
    p = np.array(keep)
    if p.size < 3:
        return True
    e1 = np.roll(p, -1) - p
    e2 = np.roll(p, -2) - np.roll(p, -1)
    cross = (e1.conj() * e2).imag
    return bool(np.all(cross >= -margin))
