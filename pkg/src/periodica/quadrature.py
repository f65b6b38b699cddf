"""Quadrature on balls, boxes, their complements in the cell, and their boundaries.

Every region is a union of smooth maps of the unit cube.  Reference cubes
are bisected around singular points (images of the evaluation point) and a
cube holding one singular point is split into pyramids with apex there
(Duffy).  In the pyramid radius u the integrand is u^a g(u), a = n - 1 - p
for a kernel ~ |y|^(-p): Gauss-Jacobi with weight u^a when p is known,
geometrically graded Gauss-Legendre otherwise (logarithmic kernels).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_jacobi

from .cell import PeriodicityCell, fold_to_box, unit_ball_volume, unit_sphere_measure

GRADING_RATIO = 0.25
DEFAULT_PATCH_DEPTH = 6
ON_BOUNDARY_TOL = 1e-12
MIN_DUFFY_DEPTH = 1
# boundary panels are split until no wider than their distance to a singular image
MAX_PANEL_DEPTH = 14


class QuadratureError(ValueError):
    pass


# ------------------------------------------------------------------ shapes

@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    @property
    def dimension(self):
        return len(self.center)

    def volume(self):
        return unit_ball_volume(self.dimension) * self.radius**self.dimension

    def boundary_measure(self):
        return unit_sphere_measure(self.dimension) * self.radius ** (self.dimension - 1)

    def signed_distance(self, y):
        """Negative inside, positive outside."""
        y = np.atleast_2d(y)
        return np.linalg.norm(y - np.asarray(self.center), axis=1) - self.radius

    def bounds(self):
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(c) for c in self.lo))
        object.__setattr__(self, "hi", tuple(float(c) for c in self.hi))
        if len(self.lo) != len(self.hi) or not all(a < b for a, b in zip(self.lo, self.hi)):
            raise ValueError("box requires lo < hi componentwise")

    @property
    def dimension(self):
        return len(self.lo)

    def volume(self):
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def boundary_measure(self):
        side = np.subtract(self.hi, self.lo)
        return float(sum(2 * self.volume() / s for s in side))

    def signed_distance(self, y):
        y = np.atleast_2d(y)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        d = np.maximum(lo - y, y - hi)
        outside = np.linalg.norm(np.maximum(d, 0.0), axis=1)
        inside = np.minimum(np.max(d, axis=1), 0.0)
        return outside + inside

    def bounds(self):
        return np.asarray(self.lo), np.asarray(self.hi)


def clearance(cell: PeriodicityCell, shape) -> float:
    """dist(cl Omega, boundary of Q); negative if cl Omega is not inside Q."""
    lo, hi = shape.bounds()
    return float(min(np.min(lo), np.min(cell.q - hi)))


def check_inside_cell(cell: PeriodicityCell, shape):
    if shape.dimension != cell.dimension:
        raise QuadratureError("domain and cell dimensions differ")
    c = clearance(cell, shape)
    if c <= 0:
        raise QuadratureError(
            f"hypothesis cl(Omega) ⊂ Q violated: the domain closure must lie strictly inside the "
            f"periodicity cell (clearance {c:.3g} <= 0)"
        )
    return c


# ------------------------------------------------------------------ 1d rules

def gauss_legendre(m, a=0.0, b=1.0):
    x, w = np.polynomial.legendre.leggauss(m)
    return a + (b - a) * (x + 1) / 2, w * (b - a) / 2


def graded_rule(p, levels, ratio=GRADING_RATIO):
    """Rule on [0, 1] for u^a g(u), a > -1: u = t^2 with t graded geometrically
    towards 0.  Exact for a in {-1/2, 0, 1/2, 1, ..} up to the Gauss order."""
    edges = [ratio**k for k in range(levels + 1)] + [0.0]
    nodes, weights = [], []
    for a, b in zip(edges[1:], edges[:-1]):
        t, w = gauss_legendre(p, a, b)
        nodes.append(t * t)
        weights.append(2 * t * w)
    return np.concatenate(nodes), np.concatenate(weights)


def jacobi_rule(p, a):
    """Rule on [0, 1] for u^a g(u), a > -1, exact for polynomial g of degree 2p - 1.
    Weights are divided by u^a so the rule applies to the full integrand."""
    x, w = roots_jacobi(p, 0.0, a)
    u = (x + 1) / 2
    return u, w * 2.0 ** (-a - 1) / u**a


def radial_rule(p, levels, n, power=None):
    if power is not None and n - 1 - power > -1:
        return jacobi_rule(2 * p, n - 1 - power)
    return graded_rule(p, levels)


def tensor_rule(lo, hi, m):
    """Tensor Gauss-Legendre on the box [lo, hi]."""
    rules = [gauss_legendre(m, a, b) for a, b in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*[r[0] for r in rules], indexing="ij"), axis=-1).reshape(-1, len(lo))
    w = np.ones(pts.shape[0])
    for j, g in enumerate(np.meshgrid(*[r[1] for r in rules], indexing="ij")):
        w = w * g.reshape(-1)
    return pts, w


# ------------------------------------------------------------------ pieces

class AffinePiece:
    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.n = len(self.lo)

    def map(self, xi):
        return self.lo + xi * (self.hi - self.lo), np.full(xi.shape[0], float(np.prod(self.hi - self.lo)))

    def inverse(self, y):
        return (y - self.lo) / (self.hi - self.lo)


class BlendPiece:
    """y = c + g(u, w) w with w = w0 + W s affine in the face coordinates s and
    g = A0 + A1 u + (B0 + B1 u) / |w|.  Reference coordinates are (s, u)."""

    def __init__(self, center, w0, W, A, B, face_axis, face_value):
        self.c = np.asarray(center, dtype=float)
        self.w0 = np.asarray(w0, dtype=float)
        self.W = np.asarray(W, dtype=float)  # (n-1, n)
        self.A = A
        self.B = B
        self.face_axis = face_axis  # w[face_axis] == face_value on the whole face
        self.face_value = face_value
        self.n = len(self.c)

    def map(self, xi):
        s, u = xi[:, :-1], xi[:, -1]
        w = self.w0 + s @ self.W
        nw = np.linalg.norm(w, axis=1)
        A = self.A[0] + self.A[1] * u
        B = self.B[0] + self.B[1] * u
        g = A + B / nw
        y = self.c + g[:, None] * w
        J = np.empty((xi.shape[0], self.n, self.n))
        for i in range(self.n - 1):
            wi = self.W[i]
            dg = -B * (w @ wi) / nw**3
            J[:, :, i] = g[:, None] * wi[None, :] + dg[:, None] * w
        J[:, :, -1] = (self.A[1] + self.B[1] / nw)[:, None] * w
        return y, np.abs(np.linalg.det(J))

    def inverse(self, y):
        d = np.atleast_2d(y) - self.c
        k, val = self.face_axis, self.face_value
        out = np.full(d.shape, np.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = val / d[:, k]
            ok = np.isfinite(t) & (t > 0)
            t = np.where(ok, t, 0.0)
        w = d * t[:, None]
        s = np.linalg.lstsq(self.W.T, (w - self.w0).T, rcond=None)[0].T
        nw = np.linalg.norm(w, axis=1)
        nw = np.where(ok, nw, 1.0)
        g = np.linalg.norm(d, axis=1) / nw
        # g = A0 + A1 u + (B0 + B1 u)/|w|  ->  linear in u
        denom = self.A[1] + self.B[1] / nw
        u = (g - self.A[0] - self.B[0] / nw) / denom
        out[ok, :-1] = s[ok]
        out[ok, -1] = u[ok]
        return out


def _faces_of_unit_cube(n):
    for k in range(n):
        for side in (-1.0, 1.0):
            yield k, side


def _face_param(n, k):
    """Rows spanning the face of [-1,1]^n normal to axis k, parameterized over [0,1]^(n-1)."""
    others = [i for i in range(n) if i != k]
    W = np.zeros((n - 1, n))
    for r, i in enumerate(others):
        W[r, i] = 2.0
    return others, W


def ball_pieces(center, radius):
    n = len(center)
    a = radius / (2 * np.sqrt(n))
    c = np.asarray(center, dtype=float)
    pieces = [AffinePiece(c - a, c + a)]
    for k, side in _faces_of_unit_cube(n):
        others, W = _face_param(n, k)
        w0 = np.zeros(n)
        w0[k] = side * a
        for i in others:
            w0[i] = -a
        pieces.append(BlendPiece(c, w0, W * a, (1.0, -1.0), (0.0, radius), k, side * a))
    return pieces


def ball_complement_pieces(cell, center, radius):
    n = len(center)
    c = np.asarray(center, dtype=float)
    q = cell.q
    pieces = []
    for k in range(n):
        for val in (0.0, q[k]):
            others = [i for i in range(n) if i != k]
            W = np.zeros((n - 1, n))
            for r, i in enumerate(others):
                W[r, i] = q[i]
            w0 = -c.copy()
            w0[k] = val - c[k]
            pieces.append(BlendPiece(c, w0, W, (0.0, 1.0), (radius, -radius), k, val - c[k]))
    return pieces


def box_complement_pieces(cell, lo, hi):
    q = cell.q
    n = cell.dimension
    cuts = [((0.0, lo[j]), (lo[j], hi[j]), (hi[j], q[j])) for j in range(n)]
    pieces = []
    for combo in itertools.product(range(3), repeat=n):
        if all(c == 1 for c in combo):
            continue
        a = np.array([cuts[j][combo[j]][0] for j in range(n)])
        b = np.array([cuts[j][combo[j]][1] for j in range(n)])
        pieces.append(AffinePiece(a, b))
    return pieces


# ------------------------------------------------------------------ engine

def _duffy(lo, hi, apex, m, p, levels, power=None):
    """Nodes/weights on the reference box [lo, hi] split into pyramids with apex."""
    n = len(lo)
    un, uw = radial_rule(p, levels, n, power)
    pts, wts = [], []
    for k in range(n):
        for b in (lo[k], hi[k]):
            d = abs(b - apex[k])
            if d == 0.0:
                continue
            others = [i for i in range(n) if i != k]
            fz, fw = tensor_rule(lo[others], hi[others], m)
            zeta = np.empty((fz.shape[0], n))
            zeta[:, others] = fz
            zeta[:, k] = b
            xi = apex[None, None, :] + un[None, :, None] * (zeta[:, None, :] - apex[None, None, :])
            w = fw[:, None] * (uw * un ** (n - 1))[None, :] * d
            pts.append(xi.reshape(-1, n))
            wts.append(w.reshape(-1))
    if not pts:
        return np.empty((0, n)), np.empty(0)
    return np.concatenate(pts), np.concatenate(wts)


_SAMPLE = np.linspace(0.0, 1.0, 5)


def _box_geometry(piece, lo, hi):
    """Mapped sample grid of a reference box and its half-diagonal radius."""
    g = np.stack(np.meshgrid(*[lo[i] + _SAMPLE * (hi[i] - lo[i]) for i in range(len(lo))], indexing="ij"), -1)
    y = piece.map(g.reshape(-1, len(lo)))[0]
    corners = np.array(list(itertools.product(*zip(lo, hi))))
    yc = piece.map(corners)[0]
    ym = piece.map(((lo + hi) / 2)[None, :])[0][0]
    return y, float(np.max(np.linalg.norm(yc - ym, axis=1)))


def _leaf_order(m, depth):
    return max(8, int(np.ceil(m / 2 ** (depth / 2))))


def _off_center_axes(apex, lo, hi, margin=0.33):
    """Axes along which the apex is neither on a face nor well inside (flat pyramids are inaccurate)."""
    t = (apex - lo) / (hi - lo)
    edge = (t <= 1e-12) | (t >= 1 - 1e-12)
    return np.flatnonzero(~edge & ((t < margin) | (t > 1 - margin)))


def _split(lo, hi, axes, cuts):
    """Children of [lo, hi] cut at cuts[k] along each axis k in axes."""
    out = []
    for combo in itertools.product((0, 1), repeat=len(axes)):
        a, b = lo.copy(), hi.copy()
        for k, c in zip(axes, combo):
            if c:
                a[k] = cuts[k]
            else:
                b[k] = cuts[k]
        out.append((a, b))
    return out


def _long_axes(lo, hi, ratio=2.0):
    L = hi - lo
    return np.flatnonzero(L > L.max() / ratio) if L.max() > ratio * L.min() else np.arange(len(lo))


def _integrate_piece(piece, singular, m, p, levels, max_depth, near_factor=0.5, power=None):
    """Adaptive rule on one piece.  A singular point inside a reference box is
    the apex of a Duffy split once it sits on a face or well inside a box of
    moderate aspect ratio; otherwise the box is cut through the apex.  Boxes
    merely close to a singular point are bisected along their long axes."""
    n = piece.n
    pre = piece.inverse(singular) if singular.shape[0] else np.empty((0, n))
    valid = np.all(np.isfinite(pre), axis=1)
    out_pts, out_w = [], []
    tol = 1e-12
    # curved pieces: a Duffy box spanning the whole piece sees too much of the map's nonlinearity
    min_depth = 0 if isinstance(piece, AffinePiece) else MIN_DUFFY_DEPTH

    def recurse(lo, hi, depth):
        inside = valid & np.all((pre >= lo - tol) & (pre <= hi + tol), axis=1)
        near = False
        if singular.shape[0] and not inside.all():
            ys, rad = _box_geometry(piece, lo, hi)
            far = singular[~inside]
            dmin = np.min(np.linalg.norm(far[:, None, :] - ys[None, :, :], axis=2))
            cand = valid & ~inside
            if cand.any():
                yc = piece.map(np.clip(pre[cand], lo, hi))[0]
                dmin = min(dmin, float(np.min(np.linalg.norm(yc - singular[cand], axis=1))))
            near = dmin < near_factor * rad
        n_in = int(inside.sum())
        stop = depth >= max_depth
        mid = (lo + hi) / 2
        children = None
        if n_in == 0:
            if near and not stop:
                children = _split(lo, hi, _long_axes(lo, hi), mid)
            else:
                xi, w = tensor_rule(lo, hi, _leaf_order(m, depth))
        else:
            # snap to faces within the inside tolerance so no pyramid is degenerate
            apex = np.clip(pre[inside][0], lo, hi)
            apex = np.where(apex - lo <= tol, lo, np.where(hi - apex <= tol, hi, apex))
            if stop:
                xi, w = _duffy(lo, hi, apex, m, p, levels, power)
            elif n_in > 1 or near or depth < min_depth:
                children = _split(lo, hi, np.arange(n), mid)
            else:
                bad = _off_center_axes(apex, lo, hi)
                if bad.size:
                    children = _split(lo, hi, bad, apex)
                elif (hi - lo).max() > 2 * (hi - lo).min():
                    children = _split(lo, hi, _long_axes(lo, hi), mid)
                else:
                    # Duffy leaves keep the full order: the angular integrand is anisotropic
                    xi, w = _duffy(lo, hi, apex, m, p, levels, power)
        if children is not None:
            for a, b in children:
                recurse(a, b, depth + 1)
            return
        if xi.shape[0]:
            y, jac = piece.map(xi)
            out_pts.append(y)
            out_w.append(w * jac)

    recurse(np.zeros(n), np.ones(n), 0)
    return out_pts, out_w


@dataclass
class Rule:
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def __len__(self):
        return self.weights.shape[0]


def _run(pieces, singular, m, p, levels, max_depth, power=None):
    pts, wts = [], []
    for piece in pieces:
        a, b = _integrate_piece(piece, singular, m, p, levels, max_depth, power=power)
        pts += a
        wts += b
    return Rule(np.concatenate(pts), np.concatenate(wts))


@dataclass(frozen=True)
class QuadratureParams:
    """resolution -> per-axis Gauss order (doubled in 2d, where nodes are cheap);
    patch_depth -> graded levels of the singular patch."""

    resolution: int = 64
    patch_depth: int = DEFAULT_PATCH_DEPTH
    dimension: int = 3
    max_depth: int = 12

    @property
    def order(self):
        return max(4, self.resolution // (2 if self.dimension == 2 else 4))

    @property
    def radial_order(self):
        return max(6, self.resolution // 8)


def singular_images(cell, point, region_lo, region_hi, reach):
    """Lattice images of point within distance reach of the box [region_lo, region_hi]."""
    base = fold_to_box(cell, np.asarray(point, dtype=float))
    n = cell.dimension
    shifts = np.array(list(itertools.product((-1, 0, 1, 2), repeat=n))) * cell.q
    imgs = base + shifts
    d = np.linalg.norm(np.maximum(np.maximum(region_lo - imgs, imgs - region_hi), 0.0), axis=1)
    return imgs[d <= reach]


@dataclass
class InteriorQuadrature:
    nodes: np.ndarray
    weights: np.ndarray
    shape: object
    resolution: int
    singular_center: np.ndarray | None = None
    singular_points: np.ndarray = field(default_factory=lambda: np.empty((0, 0)))

    def integrate(self, values):
        return float(np.dot(self.weights, values))


@dataclass
class ComplementQuadrature(InteriorQuadrature):
    cell: PeriodicityCell | None = None


def _reject_on_boundary(shape, pts):
    if shape is None or pts.shape[0] == 0:
        return
    sd = shape.signed_distance(pts)
    if np.any(np.abs(sd) <= ON_BOUNDARY_TOL):
        raise QuadratureError("evaluation point folds onto the domain boundary; the identities hold off the boundary")


def _params(resolution, patch_depth, dimension):
    if resolution < 8:
        raise QuadratureError("resolution must be at least 8")
    if patch_depth < 1:
        raise QuadratureError("patch_depth must be at least 1")
    return QuadratureParams(int(resolution), int(patch_depth), int(dimension))


def build_interior(shape, resolution: int = 64, singular_center=None, cell: PeriodicityCell | None = None,
                   patch_depth: int = DEFAULT_PATCH_DEPTH, power=None) -> InteriorQuadrature:
    """Rule on Omega.  With a cell, singular_center is replaced by its lattice images near Omega.
    power is the kernel's singularity exponent at singular_center (None: unknown or logarithmic)."""
    prm = _params(resolution, patch_depth, shape.dimension)
    lo, hi = shape.bounds()
    sing = np.empty((0, shape.dimension))
    if singular_center is not None:
        sc = np.asarray(singular_center, dtype=float)
        if cell is not None:
            gap = float(np.linalg.norm(np.maximum(np.maximum(lo - sc, sc - hi), 0.0)))
            if gap > cell.diameter:
                raise QuadratureError("singular center farther than one cell from the domain; fold it first")
            sing = singular_images(cell, sc, lo, hi, reach=0.5 * float(np.max(hi - lo)))
        else:
            sing = sc[None, :]
        _reject_on_boundary(shape, sing)
    pieces = ball_pieces(shape.center, shape.radius) if isinstance(shape, Ball) else [AffinePiece(lo, hi)]
    rule = _run(pieces, sing, prm.order, prm.radial_order, prm.patch_depth, prm.max_depth, power)
    return InteriorQuadrature(rule.nodes, rule.weights, shape, prm.resolution,
                              None if singular_center is None else np.asarray(singular_center, float), sing)


def build_complement(cell: PeriodicityCell, shape=None, resolution: int = 64, singular_center=None,
                     patch_depth: int = DEFAULT_PATCH_DEPTH, power=None) -> ComplementQuadrature:
    """Rule on Q minus cl Omega (all of Q when shape is None)."""
    prm = _params(resolution, patch_depth, cell.dimension)
    if shape is not None:
        check_inside_cell(cell, shape)
    q = cell.q
    sing = np.empty((0, cell.dimension))
    if singular_center is not None:
        sing = singular_images(cell, singular_center, np.zeros_like(q), q, reach=0.5 * float(np.min(q)))
        _reject_on_boundary(shape, sing)
    if shape is None:
        pieces = [AffinePiece(np.zeros_like(q), q)]
    elif isinstance(shape, Ball):
        pieces = ball_complement_pieces(cell, shape.center, shape.radius)
    else:
        pieces = box_complement_pieces(cell, np.asarray(shape.lo), np.asarray(shape.hi))
    rule = _run(pieces, sing, prm.order, prm.radial_order, prm.patch_depth, prm.max_depth, power)
    return ComplementQuadrature(rule.nodes, rule.weights, shape, prm.resolution,
                                None if singular_center is None else np.asarray(singular_center, float),
                                sing, cell)


def singular_ball_rule(center, radius, singular_point=None, resolution=64, patch_depth=DEFAULT_PATCH_DEPTH,
                       power=None) -> Rule:
    """Rule on an arbitrary ball (no cell constraint) with one optional singular point."""
    prm = _params(resolution, patch_depth, len(center))
    sing = np.empty((0, len(center))) if singular_point is None else np.atleast_2d(singular_point).astype(float)
    return _run(ball_pieces(center, radius), sing, prm.order, prm.radial_order, prm.patch_depth, prm.max_depth,
                power)


def centered_cell_rule(cell: PeriodicityCell, resolution=64, patch_depth=DEFAULT_PATCH_DEPTH, power=None) -> Rule:
    """Rule on the centered cell with the singular point at the origin."""
    prm = _params(resolution, patch_depth, cell.dimension)
    q = cell.q
    return _run([AffinePiece(-q / 2, q / 2)], np.zeros((1, cell.dimension)), prm.order, prm.radial_order,
                prm.patch_depth, prm.max_depth, power)


def power_integral_centered_cell(cell: PeriodicityCell, lam: float, resolution=64) -> float:
    """I_lambda = integral over the centered cell of |y|^(-lambda)."""
    rule = centered_cell_rule(cell, resolution, power=lam)
    return rule.integrate(np.linalg.norm(rule.nodes, axis=1) ** (-lam))


# ------------------------------------------------------------------ boundaries

@dataclass
class BoundaryQuadrature:
    nodes: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    resolution: int

    def integrate(self, values):
        return float(np.dot(self.weights, values))


def sphere_rule(n, M):
    """Unit-sphere nodes/weights: trapezoid in angle (n=2), Gauss in cos(theta) x trapezoid (n=3)."""
    if n == 2:
        t = 2 * np.pi * np.arange(M) / M
        return np.stack([np.cos(t), np.sin(t)], axis=1), np.full(M, 2 * np.pi / M)
    ct, wt = np.polynomial.legendre.leggauss(M // 2)
    ph = 2 * np.pi * np.arange(M) / M
    C, P = np.meshgrid(ct, ph, indexing="ij")
    S = np.sqrt(1 - C**2)
    pts = np.stack([S * np.cos(P), S * np.sin(P), C], axis=-1).reshape(-1, 3)
    w = (wt[:, None] * np.full(M, 2 * np.pi / M)[None, :]).reshape(-1)
    return pts, w


def _face_panels(a, b, k, val, m, near, depth=0):
    """Gauss panels on the face {y_k = val}, [a, b] in the other coordinates, bisected toward near."""
    if near is not None and len(near) and depth < MAX_PANEL_DEPTH:
        others = [i for i in range(near.shape[1]) if i != k]
        gap = np.maximum(np.maximum(a - near[:, others], near[:, others] - b), 0.0)
        dist = np.sqrt(np.min(np.sum(gap**2, axis=1) + (near[:, k] - val) ** 2))
        if np.linalg.norm(b - a) > dist:
            mid = 0.5 * (a + b)
            parts = [_face_panels(np.where(c, mid, a), np.where(c, b, mid), k, val, m, near, depth + 1)
                     for c in itertools.product((0, 1), repeat=len(a))]
            return np.concatenate([q[0] for q in parts]), np.concatenate([q[1] for q in parts])
    return tensor_rule(a, b, m)


def _box_faces(lo, hi, m, near=None):
    n = len(lo)
    pts, wts, nrm = [], [], []
    for k in range(n):
        others = [i for i in range(n) if i != k]
        for val, sgn in ((lo[k], -1.0), (hi[k], 1.0)):
            fz, fw = _face_panels(lo[others], hi[others], k, val, m, near)
            y = np.empty((fz.shape[0], n))
            y[:, others] = fz
            y[:, k] = val
            nu = np.zeros((fz.shape[0], n))
            nu[:, k] = sgn
            pts.append(y)
            wts.append(fw)
            nrm.append(nu)
    return np.concatenate(pts), np.concatenate(wts), np.concatenate(nrm)


def build_boundary(shape, resolution: int = 64, near=None, cell: PeriodicityCell | None = None) -> BoundaryQuadrature:
    """Boundary rule for a Ball, a Box or a PeriodicityCell (the faces of cl Q).

    With near (an evaluation point) the flat faces get panels refined toward the lattice
    images of near, so that h(near - y) is resolved when near sits close to a face.
    """
    if resolution < 16:
        raise QuadratureError("boundary resolution must be at least 16")
    if isinstance(shape, Ball):
        n = shape.dimension
        u, w = sphere_rule(n, resolution)
        c = np.asarray(shape.center)
        return BoundaryQuadrature(c + shape.radius * u, w * shape.radius ** (n - 1), u, resolution)
    if isinstance(shape, PeriodicityCell):
        lo, hi = np.zeros(shape.dimension), shape.q
    else:
        lo, hi = np.asarray(shape.lo), np.asarray(shape.hi)
    imgs = None
    if near is not None:
        cell = shape if isinstance(shape, PeriodicityCell) else cell
        if cell is None:
            raise QuadratureError("refining toward a point needs the periodicity cell")
        imgs = singular_images(cell, near, lo, hi, float(np.linalg.norm(hi - lo)))
    pts, w, nu = _box_faces(lo, hi, max(4, resolution // 4), imgs)
    return BoundaryQuadrature(pts, w, nu, resolution)
