"""Periodic volume potentials P+ (over Omega) and P- (over Q minus cl Omega),
their derivatives, boundary moments and the derivative identities."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .cell import PeriodicityCell, dist_to_lattice, fold_to_box, unit_ball_volume
from .density import Density
from .kernels import MAX_ORDER, PeriodicKernel, estimate_norms
from .quadrature import (
    Ball,
    Box,
    BoundaryQuadrature,
    ComplementQuadrature,
    InteriorQuadrature,
    QuadratureError,
    build_boundary,
    build_complement,
    build_interior,
    power_integral_centered_cell,
)
from .symbol import EllipticOperator, frequency_zero_set, certification_radius

FD_STEP_1 = 1e-4
# residual denominators never drop below this fraction of |P(x)| / diam(Q)
RESIDUAL_FLOOR = 1e-6
FD_STEP_2 = 1e-3
DEFAULT_MARGIN = 0.05


class MarginError(ValueError):
    pass


# ------------------------------------------------------------------ regions

@dataclass(frozen=True)
class EvaluationRegion:
    """inner: dist(fold(x), complement of Omega) >= margin; outer: dist(fold(x), cl Omega) >= margin."""

    kind: str
    margin: float
    shape: object
    cell: PeriodicityCell

    def __post_init__(self):
        if self.kind not in ("inner", "outer"):
            raise ValueError("region kind must be 'inner' or 'outer'")
        if not self.margin > 0:
            raise ValueError("margin must be positive")

    def signed_distance(self, x):
        x = np.atleast_2d(x)
        base = fold_to_box(self.cell, x)
        best = None
        for z in itertools.product((-1, 0, 1), repeat=self.cell.dimension):
            d = self.shape.signed_distance(base + np.asarray(z) * self.cell.q)
            best = d if best is None else np.minimum(best, d)
        return best

    def contains(self, x):
        d = self.signed_distance(x)
        return d <= -self.margin if self.kind == "inner" else d >= self.margin

    def sample(self, count, rng):
        n = self.cell.dimension
        out = []
        while len(out) < count:
            if self.kind == "inner":
                lo, hi = self.shape.bounds()
                y = lo + rng.random((4 * count, n)) * (hi - lo)
            else:
                y = rng.random((4 * count, n)) * self.cell.q
            y = y[self.contains(y)]
            out.extend(y[: count - len(out)])
        return np.array(out)


# ------------------------------------------------------------------ report

@dataclass
class PotentialReport:
    values: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)
    bound_checks: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def add_bound(self, name, lhs, rhs):
        ok = bool(lhs <= rhs * (1 + 1e-12))
        self.bound_checks[name] = {"lhs": float(lhs), "rhs": float(rhs), "pass": ok}
        return ok

    def to_dict(self):
        return {
            "values": [[list(map(float, p)), float(v)] for p, v in self.values],
            "residuals": {k: float(v) for k, v in self.residuals.items()},
            "bound_checks": self.bound_checks,
            "metadata": self.metadata,
        }


# ------------------------------------------------------------------ core

def _point(x, n):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != n:
        raise ValueError(f"expected a point of dimension {n}")
    return x


def _in_closure(shape, cell, x):
    if shape is None:
        return False
    images = fold_to_box(cell, x) + np.array(list(itertools.product((-1, 0, 1), repeat=cell.dimension))) * cell.q
    return bool(np.any(shape.signed_distance(images) <= 0))


def _refined_at(quad, cell, x):
    sp = quad.singular_points
    return sp.size > 0 and float(np.min(dist_to_lattice(cell, sp - x[None, :]))) <= 1e-12


def _check_singular_center(quad, cell, x):
    """The integrand is singular at the images of x; if one lies in the
    integration region the rule must be refined there."""
    if isinstance(quad, ComplementQuadrature):
        singular_inside = quad.shape is None or float(
            np.min(EvaluationRegion("inner", 1.0, quad.shape, cell).signed_distance(x))) >= 0
    else:
        singular_inside = _in_closure(quad.shape, cell, x)
    if singular_inside and not _refined_at(quad, cell, x):
        raise QuadratureError(
            "the integration region contains an image of x but the quadrature is not refined at fold(x); "
            "rebuild it with singular_center=x"
        )


def _check_integrable(h, gamma):
    k = 0 if gamma is None else sum(gamma)
    if k and h.lam + k >= h.dimension:
        raise ValueError(f"d^{tuple(gamma)} h ~ |x|^-{h.lam + k:g} is not integrable in dimension {h.dimension}; "
                         f"the kernel route needs lambda + |gamma| < n")


def _integrate(h, phi, quad, x, gamma=None):
    _check_integrable(h, gamma)
    d = x[None, :] - quad.nodes
    kv = h.evaluate(d) if gamma is None else h.derivative(d, gamma)
    return float(np.dot(quad.weights, kv * phi.evaluate(quad.nodes)))


def potential_plus(h: PeriodicKernel, phi: Density, quad: InteriorQuadrature, x) -> float:
    """P+[h, phi](x) = int_Omega h(x - y) phi(y) dy."""
    x = _point(x, h.dimension)
    _check_singular_center(quad, h.cell, x)
    return _integrate(h, phi, quad, x)


def potential_minus(h: PeriodicKernel, phi: Density, quad: ComplementQuadrature, x) -> float:
    """P-[h, phi](x) = int_{Q minus cl Omega} h(x - y) phi(y) dy."""
    x = _point(x, h.dimension)
    _check_singular_center(quad, h.cell, x)
    return _integrate(h, phi, quad, x)


def grad_potential(h: PeriodicKernel, phi: Density, quad, x, j: int) -> float:
    """d/dx_j P[h, phi](x) = P[d_j h, phi](x) (kernel route)."""
    if not h.differentiable:
        raise ValueError("gradient needs a differentiable (A1) kernel")
    x = _point(x, h.dimension)
    _check_singular_center(quad, h.cell, x)
    gamma = tuple(int(i == j) for i in range(h.dimension))
    return _integrate(h, phi, quad, x, gamma)


def check_margin(h: PeriodicKernel, bquad: BoundaryQuadrature, x, margin):
    d = dist_to_lattice(h.cell, x[None, :] - bquad.nodes)
    i = int(np.argmin(d))
    if d[i] < margin:
        raise MarginError(
            f"kernel window violated: boundary node {bquad.nodes[i].tolist()} gives "
            f"dist_to_lattice(x - y) = {d[i]:.3g} < margin {margin}"
        )


def boundary_moment(h: PeriodicKernel, phi: Density, bquad: BoundaryQuadrature, j: int, x,
                    margin: float = DEFAULT_MARGIN, gamma=None, beta=None) -> float:
    """int_{boundary} (d^gamma h)(x - y) (d^beta phi)(y) nu_j(y) dsigma_y."""
    n = h.dimension
    x = _point(x, n)
    check_margin(h, bquad, x, margin)
    gamma = (0,) * n if gamma is None else tuple(gamma)
    beta = (0,) * n if beta is None else tuple(beta)
    kv = h.derivative(x[None, :] - bquad.nodes, gamma)
    return float(np.dot(bquad.weights * bquad.normals[:, j], kv * phi.derivative(bquad.nodes, beta)))


# ------------------------------------------------------------------ quadrature plumbing

@dataclass
class PotentialSetup:
    """Cell, shape and resolution; builds singular-aware rules per evaluation point."""

    cell: PeriodicityCell
    shape: object  # Ball, Box or None (Omega empty; only P- is meaningful)
    resolution: int = 64
    boundary_resolution: int = 64
    patch_depth: int = 6
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def interior(self, x=None, power=None) -> InteriorQuadrature:
        if self.shape is None:
            raise ValueError("P+ over an empty Omega is outside the theorem's hypotheses")
        return build_interior(self.shape, self.resolution, x, self.cell, self.patch_depth, power)

    def complement(self, x=None, power=None) -> ComplementQuadrature:
        return build_complement(self.cell, self.shape, self.resolution, x, self.patch_depth, power)

    def boundary(self, x=None) -> BoundaryQuadrature:
        """Rule on d Omega; flat faces are refined toward x when given (balls need no refinement)."""
        x = None if x is None or isinstance(self.shape, Ball) else np.asarray(x, dtype=float)
        key = ("boundary", None if x is None else x.tobytes())
        if key not in self._cache:
            self._cache[key] = build_boundary(self.shape, self.boundary_resolution, x, self.cell)
        return self._cache[key]

    def cell_boundary(self, x=None) -> BoundaryQuadrature:
        """Rule on the faces of Q, refined toward the images of x when given."""
        x = None if x is None else np.asarray(x, dtype=float)
        key = ("cell_boundary", None if x is None else x.tobytes())
        if key not in self._cache:
            self._cache[key] = build_boundary(self.cell, self.boundary_resolution, x)
        return self._cache[key]

    def rule(self, side, x=None, power=None):
        """Cached rule; power is the singularity exponent of the kernel about to be integrated."""
        power = None if x is None or power is None else float(power)
        key = (side, None if x is None else np.asarray(x, dtype=float).tobytes(), power)
        if key not in self._cache:
            if len(self._cache) >= 64:
                for k in [k for k in self._cache if isinstance(k, tuple)]:
                    del self._cache[k]
            self._cache[key] = self.interior(x, power) if side == "plus" else self.complement(x, power)
        return self._cache[key]

    def potential(self, h, phi, side, x):
        x = _point(x, self.cell.dimension)
        if side == "plus" and self.shape is None:
            return 0.0
        q = self.rule(side, x, h.singular_power())
        return _integrate(h, phi, q, x)

    def potential_derivative(self, h, phi, side, x, gamma):
        x = _point(x, self.cell.dimension)
        return _integrate(h, phi, self.rule(side, x, h.singular_power(gamma)), x, tuple(gamma))


def fd_gradient(f, x, j, step=FD_STEP_1):
    e = np.zeros_like(x)
    e[j] = step
    return (f(x + e) - f(x - e)) / (2 * step)


def fd_partial(f, x, beta, step=FD_STEP_2):
    """Nested central differences for d^beta f(x)."""
    axes = [j for j, b in enumerate(beta) for _ in range(int(b))]
    total = 0.0
    for signs in itertools.product((1, -1), repeat=len(axes)):
        e = np.zeros_like(x)
        for j, s in zip(axes, signs):
            e[j] += s * step
        total += np.prod(signs) * f(x + e)
    return total / (2 * step) ** len(axes)


# ------------------------------------------------------------------ identities

@dataclass
class IdentityResult:
    A: float  # kernel route
    B: float  # density route
    C: float  # finite differences
    boundary: float  # the d Omega moment
    cell_boundary: float = 0.0  # the d Q moment (P- only)
    floor: float = 0.0  # RESIDUAL_FLOOR * |P(x)| / diam(Q)

    @property
    def scale(self):
        # the floor matters only where d_j P vanishes (symmetry points)
        return max(abs(self.A), abs(self.B), abs(self.C), self.floor, 1e-300)

    @property
    def residual_AB(self):
        return abs(self.A - self.B) / self.scale

    @property
    def residual_AC(self):
        return abs(self.A - self.C) / self.scale

    @property
    def residual_BC(self):
        return abs(self.B - self.C) / self.scale

    @property
    def max_residual(self):
        return max(self.residual_AB, self.residual_AC, self.residual_BC)


def _floor(setup, h, phi, side, x):
    return RESIDUAL_FLOOR * abs(setup.potential(h, phi, side, x)) / setup.cell.diameter


def derivative_identity_plus(h, phi, setup: PotentialSetup, x, j, margin=DEFAULT_MARGIN,
                             step=FD_STEP_1) -> IdentityResult:
    """d_j P+[h,phi] three ways: P+[d_j h, phi]; P+[h, d_j phi] - int_{dOmega} h phi nu_j; FD."""
    x = _point(x, setup.cell.dimension)
    ej = tuple(int(i == j) for i in range(setup.cell.dimension))
    A = setup.potential_derivative(h, phi, "plus", x, ej)
    bm = boundary_moment(h, phi, setup.boundary(x), j, x, margin)
    B = setup.potential(h, phi.partial(j), "plus", x) - bm
    C = fd_gradient(lambda p: setup.potential(h, phi, "plus", p), x, j, step)
    return IdentityResult(A, B, C, bm, floor=_floor(setup, h, phi, "plus", x))


def derivative_identity_minus(h, phi, setup: PotentialSetup, x, j, margin=DEFAULT_MARGIN,
                              step=FD_STEP_1, include_cell_boundary=True) -> IdentityResult:
    """d_j P-[h,phi] = P-[h, d_j phi] + int_{dOmega} h phi nu_j - int_{dQ} h phi nu_j
    (without the d Omega term when Omega is empty)."""
    x = _point(x, setup.cell.dimension)
    ej = tuple(int(i == j) for i in range(setup.cell.dimension))
    A = setup.potential_derivative(h, phi, "minus", x, ej)
    bm = 0.0 if setup.shape is None else boundary_moment(h, phi, setup.boundary(x), j, x, margin)
    cm = boundary_moment(h, phi, setup.cell_boundary(x), j, x, margin)
    B = setup.potential(h, phi.partial(j), "minus", x) + bm - (cm if include_cell_boundary else 0.0)
    C = fd_gradient(lambda p: setup.potential(h, phi, "minus", p), x, j, step)
    return IdentityResult(A, B, C, bm, cm, _floor(setup, h, phi, "minus", x))


def higher_derivative_terms(beta):
    """(k, gamma, delta) triples of the iterated boundary terms for d^beta P+.

    Derivatives are applied axis by axis (all of axis 1 first); for the
    (l+1)-th to last derivative along axis k the kernel carries gamma with
    gamma_k = l, gamma_i = beta_i (i > k), and the density carries
    delta = (beta_1, .., beta_{k-1}, beta_k - 1 - l, 0, ..).
    """
    n = len(beta)
    out = []
    for k in range(n):
        for l in range(beta[k]):
            gamma = tuple(l if i == k else (beta[i] if i > k else 0) for i in range(n))
            delta = tuple(beta[i] if i < k else (beta[k] - 1 - l if i == k else 0) for i in range(n))
            out.append((k, gamma, delta))
    return out


def higher_derivative_plus(h, phi, setup: PotentialSetup, x, beta, margin=DEFAULT_MARGIN,
                           step=None, with_fd=True):
    """(formula value, nested-FD value) for d^beta P+[h, phi](x), |beta| <= 3."""
    beta = tuple(int(b) for b in beta)
    if sum(beta) > MAX_ORDER:
        raise ValueError(f"|beta| > {MAX_ORDER} is not supported")
    x = _point(x, setup.cell.dimension)
    value = setup.potential(h, _shifted(phi, beta), "plus", x)
    if sum(beta):
        bq = setup.boundary(x)
        check_margin(h, bq, x, margin)
        for k, gamma, delta in higher_derivative_terms(beta):
            value -= boundary_moment(h, phi, bq, k, x, margin, gamma, delta)
    fd = None
    if with_fd:
        f = lambda p: setup.potential(h, phi, "plus", p)
        if sum(beta) == 0:
            fd = f(x)
        else:
            st = step if step is not None else (FD_STEP_1 if sum(beta) == 1 else FD_STEP_2 * (sum(beta) - 1))
            fd = fd_partial(f, x, beta, st)
    return value, fd


def _shifted(phi, beta):
    from .density import DerivativeDensity

    return phi if sum(beta) == 0 else DerivativeDensity(phi, beta)


# ------------------------------------------------------------------ fundamental solution check

def solve_verify(op: EllipticOperator, S: PeriodicKernel, phi: Density, setup: PotentialSetup, x,
                 margin=DEFAULT_MARGIN, step=FD_STEP_2):
    """(lhs, rhs, residual) with lhs = P(D) P+[S, phi](x) by FD and
    rhs = phi(x) - sum_{z in Z(P)} (1/|Q|) int_Omega E_z(x - y) phi(y) dy."""
    cell = setup.cell
    n = cell.dimension
    x = _point(x, n)
    zs = frequency_zero_set(op, cell, certification_radius(op, cell))
    if not zs.certified_complete:
        raise ValueError("Z(P) is not certified complete")
    region = EvaluationRegion("inner", margin, setup.shape, cell)
    if not region.contains(x)[0]:
        raise MarginError("solve_verify needs x inside Omega at the requested margin")
    u = lambda p: setup.potential(S, phi, "plus", p)
    cache = {}

    def ev(offset):
        key = tuple(np.round(offset / step).astype(int))
        if key not in cache:
            cache[key] = u(x + offset)
        return cache[key]

    lhs = 0j
    for alpha, a in op.coeffs:
        order = sum(alpha)
        if order == 0:
            lhs += a * ev(np.zeros(n))
            continue
        axes = [j for j, b in enumerate(alpha) for _ in range(b)]
        if order == 1 or axes[0] != axes[1]:
            val = 0.0
            for signs in itertools.product((1, -1), repeat=order):
                e = np.zeros(n)
                for j, s in zip(axes, signs):
                    e[j] += s * step
                val += np.prod(signs) * ev(e)
            lhs += a * val / (2 * step) ** order
        else:
            e = np.zeros(n)
            e[axes[0]] = step
            lhs += a * (ev(e) - 2 * ev(np.zeros(n)) + ev(-e)) / step**2
    rhs = complex(phi.evaluate(x))
    if len(zs):
        quad = setup.interior()
        for z in zs.members:
            k = 2 * np.pi * np.asarray(z) / cell.q
            E = np.exp(1j * (x[None, :] - quad.nodes) @ k)
            rhs -= np.dot(quad.weights, E * phi.evaluate(quad.nodes)) / cell.volume
    lhs, rhs = complex(lhs), complex(rhs)
    return lhs.real, rhs.real, abs(lhs - rhs)


# ------------------------------------------------------------------ sup bound

def sup_bound_check(h: PeriodicKernel, lam: float, phi: Density, setup: PotentialSetup, side,
                    sample_points, a0_norm=None, report: PotentialReport | None = None, name=None):
    """(max |P(x)| over samples, 2^n I_lambda ||h||_A0 sup|phi|, pass)."""
    n = setup.cell.dimension
    if a0_norm is None:
        a0_norm = estimate_norms(h).a0_norm
    I_lam = power_integral_centered_cell(setup.cell, lam, setup.resolution)
    region_rule = setup.rule(side)
    sup_phi = float(np.max(np.abs(phi.evaluate(region_rule.nodes))))
    lhs = max(abs(setup.potential(h, phi, side, x)) for x in np.atleast_2d(sample_points))
    rhs = 2**n * I_lam * a0_norm * sup_phi
    ok = bool(lhs <= rhs * (1 + 1e-12))
    if report is not None:
        report.add_bound(name or f"qopoi_{side}", lhs, rhs)
    return lhs, rhs, ok
