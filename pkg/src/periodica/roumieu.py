"""Finite-order Roumieu seminorms, the kernel class norm, continuity probes of
the bilinear map (h, phi) -> P+[h, phi] and the absolute-continuity modulus."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .cell import PeriodicityCell, dist_to_lattice, unit_ball_volume, unit_sphere_measure
from .density import BumpDensity, Density, PolyDensity, TrigDensity
from .kernels import (
    MAX_ORDER,
    PeriodicKernel,
    _angular_grid,
    estimate_norms,
    norm_sample_points,
    synthetic_power_kernel,
    weighted_sup,
)
from .potentials import EvaluationRegion, PotentialSetup, higher_derivative_plus
from .quadrature import Ball, Box, build_interior, power_integral_centered_cell, singular_ball_rule


def multi_indices(n, max_order):
    """All beta in N^n with |beta| <= max_order, ordered by |beta|."""
    out = []
    for k in range(max_order + 1):
        out += sorted((b for b in itertools.product(range(k + 1), repeat=n) if sum(b) == k), reverse=True)
    return out


def _check_order(max_order):
    if not 0 <= int(max_order) <= MAX_ORDER:
        raise ValueError(f"max_order must lie in 0..{MAX_ORDER}")
    return int(max_order)


@dataclass(frozen=True)
class RoumieuEstimate:
    """max over |beta| <= max_order of rho^|beta| / |beta|! * sup |d^beta u| (a truncation of the full sup)."""

    rho: float
    max_order: int
    value: float
    attaining_beta: tuple
    sups: dict = field(default_factory=dict, compare=False)
    truncated: bool = True

    def to_dict(self):
        return {"rho": self.rho, "order": self.max_order, "value": self.value, "beta": list(self.attaining_beta)}


def roumieu_from_sups(sups: dict, rho, max_order) -> RoumieuEstimate:
    """Seminorm from precomputed sup |d^beta u| keyed by multi-index."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    max_order = _check_order(max_order)
    best, arg = -1.0, None
    for beta, s in sups.items():
        k = sum(beta)
        if k > max_order:
            continue
        v = rho**k / math.factorial(k) * float(s)
        if v > best:
            best, arg = v, tuple(beta)
    return RoumieuEstimate(float(rho), max_order, float(best), arg, dict(sups))


def derivative_sups(u, points, max_order):
    """sup over points of |d^beta u| for |beta| <= max_order.

    u has .derivative(points, beta) (densities, kernels) or is a callable u(points, beta).
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    f = u.derivative if hasattr(u, "derivative") else u
    return {b: float(np.max(np.abs(f(points, b)))) for b in multi_indices(points.shape[1], _check_order(max_order))}


def roumieu_seminorm(u, points, rho, max_order=MAX_ORDER) -> RoumieuEstimate:
    """Truncated Roumieu seminorm of u over the sample points (or an EvaluationRegion-like sample set)."""
    return roumieu_from_sups(derivative_sups(u, points, max_order), rho, max_order)


# ------------------------------------------------------------------ kernel class norm

def window_points(cell: PeriodicityCell, margin, samples_per_axis=32):
    """Samples of {x : dist_to_lattice(x) >= margin}: a cell grid plus shells at and just above the margin."""
    if not margin > 0:
        raise ValueError("window margin must be positive")
    grid = norm_sample_points(cell, samples_per_axis, 0)
    ang = _angular_grid(cell.dimension, max(8, samples_per_axis))
    shells = [margin * f * ang for f in (1.0, 1.1, 1.25, 1.5, 2.0)]
    pts = np.concatenate([grid] + shells, axis=0)
    keep = dist_to_lattice(cell, pts) >= margin * (1 - 1e-12)
    if not np.any(keep):
        raise ValueError("the kernel window is empty at this margin")
    return pts[keep]


def a1_norm(h: PeriodicKernel, lam=None, samples_per_axis=32):
    """Sampled A^1 norm; lam defaults to the kernel's own singularity exponent."""
    if lam is None or lam == h.lam:
        return estimate_norms(h, samples_per_axis).a1_norm
    n = h.dimension
    pts = norm_sample_points(h.cell, samples_per_axis, 12)
    out = weighted_sup(h, pts, lam)
    for j in range(n):
        out += weighted_sup(h, pts, lam + 1, tuple(int(i == j) for i in range(n)))
    return out


def kernel_class_norm(h: PeriodicKernel, lam=None, rho=0.05, window_margin=0.25, max_order=MAX_ORDER,
                      samples_per_axis=32, details=False):
    """||h||_A1 + truncated Roumieu seminorm of h on the window dist_to_lattice >= window_margin."""
    if not h.differentiable:
        raise ValueError("the kernel class norm needs a differentiable kernel")
    a1 = a1_norm(h, lam, samples_per_axis)
    est = roumieu_seminorm(h, window_points(h.cell, window_margin, samples_per_axis), rho, max_order)
    total = a1 + est.value
    return (total, a1, est) if details else total


# ------------------------------------------------------------------ continuity probe

@dataclass
class ProbeInstance:
    """One (h, phi, Omega, Omega_1) instance; Omega_1 is the inner region at `margin`."""

    h: PeriodicKernel
    phi: Density
    shape: object
    margin: float
    lam: float | None = None
    points: np.ndarray | None = None
    resolution: int = 64
    boundary_resolution: int = 64

    def setup(self):
        return PotentialSetup(self.h.cell, self.shape, self.resolution, self.boundary_resolution)


@dataclass
class ProbeResult:
    C: float
    instances: list
    bound_checks: dict
    skipped: list

    @property
    def all_pass(self):
        return all(v["pass"] for v in self.bound_checks.values())


def potential_derivative_sups(h, phi, setup, points, max_order, margin):
    """sup over points of |d^beta P+[h, phi]|: kernel route for order 1, the iterated boundary-term
    formula for orders 2 and 3."""
    n = setup.cell.dimension
    sups = {}
    for beta in multi_indices(n, max_order):
        vals = []
        for x in points:
            k = sum(beta)
            if k == 0:
                v = setup.potential(h, phi, "plus", x)
            elif k == 1:
                v = setup.potential_derivative(h, phi, "plus", x, beta)
            else:
                v = higher_derivative_plus(h, phi, setup, x, beta, margin, with_fd=False)[0]
            vals.append(abs(v))
        sups[beta] = max(vals)
    return sups


def density_sups(phi, setup, max_order):
    """sup over cl Omega (coarse interior rule plus boundary nodes) of |d^beta phi|."""
    pts = np.concatenate([build_interior(setup.shape, 16).nodes, setup.boundary().nodes])
    return derivative_sups(phi, pts, max_order)


def continuity_probe(instances, rho, max_order=MAX_ORDER, n_points=4, seed=0, kernel_samples=32):
    """Empirical constant C = max seminorm(P+ on Omega_1) / (||h||_H ||phi||_rho) plus the per-order
    bound sup|d^b P+| <= 2^n I_lam a0 sup|d^b phi| + n rho m(dOmega) ||h||_H ||phi||_rho |b|!/rho^|b|."""
    max_order = _check_order(max_order)
    rng = np.random.default_rng(seed)
    rows, checks, skipped = [], {}, []
    C = 0.0
    for i, inst in enumerate(instances):
        h, phi, shape = inst.h, inst.phi, inst.shape
        cell = h.cell
        n = cell.dimension
        lam = h.lam if inst.lam is None else inst.lam
        setup = inst.setup()
        phi_sups = density_sups(phi, setup, max_order)
        phi_norm = roumieu_from_sups(phi_sups, rho, max_order)
        H, a1, h_est = kernel_class_norm(h, lam, rho, inst.margin, max_order, kernel_samples, details=True)
        if phi_norm.value == 0 or H == 0:
            skipped.append({"instance": i, "note": "zero norm, ratio undefined"})
            continue
        pts = inst.points
        if pts is None:
            pts = EvaluationRegion("inner", inst.margin, shape, cell).sample(n_points, rng)
        # boundary nodes sit exactly at distance >= margin; allow rounding
        P_sups = potential_derivative_sups(h, phi, setup, pts, max_order, inst.margin * (1 - 1e-9))
        P_norm = roumieu_from_sups(P_sups, rho, max_order)
        ratio = P_norm.value / (H * phi_norm.value)
        C = max(C, ratio)
        a0 = estimate_norms(h, kernel_samples).a0_norm
        I_lam = power_integral_centered_cell(cell, lam, setup.resolution)
        for beta in multi_indices(n, max_order):
            k = sum(beta)
            rhs = 2**n * I_lam * a0 * phi_sups[beta]
            if k:
                rhs += n * rho * shape.boundary_measure() * H * phi_norm.value * math.factorial(k) / rho**k
            lhs = P_sups[beta]
            checks[f"instance{i}_beta{''.join(map(str, beta))}"] = {
                "lhs": lhs, "rhs": rhs, "residual": lhs / rhs if rhs > 0 else math.inf,
                "pass": bool(lhs <= rhs * (1 + 1e-12)),
            }
        rows.append({"instance": i, "ratio": ratio, "P_seminorm": P_norm.value, "h_norm": H, "a1": a1,
                     "h_seminorm": h_est.value, "phi_seminorm": phi_norm.value, "a0": a0, "I_lambda": I_lam})
    return ProbeResult(C, rows, checks, skipped)


def random_instances(n, count, seed=0, resolution=None):
    """Random admissible instances: synthetic kernels with lambda in ]0, n-1[, ball or box domains in the
    unit cell and bump, trig or polynomial densities."""
    from .cell import make_cell

    rng = np.random.default_rng(seed)
    cell = make_cell([1.0] * n)
    res = resolution or (64 if n == 2 else 32)
    out = []
    for _ in range(count):
        lam = rng.uniform(0.2, n - 1.2)
        h = synthetic_power_kernel(cell, lam, rng.uniform(0.5, 2.0))
        c = 0.5 + rng.uniform(-0.05, 0.05, n)
        if rng.random() < 0.5:
            shape = Ball(c, rng.uniform(0.2, 0.3))
        else:
            half = rng.uniform(0.18, 0.28, n)
            shape = Box(c - half, c + half)
        kind = rng.integers(3)
        if kind == 0:
            phi = BumpDensity(c + rng.uniform(-0.05, 0.05, n), rng.uniform(0.2, 0.5), rng.uniform(-2, 2))
        elif kind == 1:
            phi = TrigDensity(cell, rng.integers(-1, 2, n), rng.uniform(0.5, 1.5), rng.uniform(0, 2 * np.pi))
        else:
            coeffs = {tuple(int(i == j) for i in range(n)): rng.uniform(-1, 1) for j in range(n)}
            coeffs[(0,) * n] = rng.uniform(-1, 1)
            phi = PolyDensity(coeffs, n)
        out.append(ProbeInstance(h, phi, shape, 0.08, points=None, resolution=res, boundary_resolution=64))
    return out


# ------------------------------------------------------------------ absolute continuity

def acper_modulus(h: PeriodicKernel, delta_list, n_random=20, seed=0, resolution=32):
    """[(delta, worst integral over E of |h(x - y)| dy)] for balls E of measure delta.

    E = x + E' with E' the ball centered at 0 (the singularity) or one of n_random balls centered at
    r s v (|v| = 1, 0 <= s < 0.9).  By periodicity the integral depends on E' only, so x drops out and
    the kernel is evaluated at the exact relative argument -z.  s and v are fixed across delta: the
    balls are nested as delta decreases.
    """
    cell = h.cell
    n = cell.dimension
    deltas = [float(d) for d in delta_list]
    if any(not 0 < d <= cell.volume for d in deltas):
        raise ValueError("each delta must lie in ]0, m_n(Q)]")
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(n_random, n))
    v /= np.linalg.norm(v, axis=1)[:, None]
    s = rng.uniform(0.0, 0.9, n_random)
    offsets = np.concatenate([np.zeros((1, n)), s[:, None] * v])
    out = []
    for d in deltas:
        r = (d / unit_ball_volume(n)) ** (1.0 / n)
        worst = 0.0
        for off in offsets:
            rule = singular_ball_rule(r * off, r, np.zeros(n), resolution, power=h.singular_power())
            worst = max(worst, float(rule.weights @ np.abs(h.evaluate(-rule.nodes))))
        out.append((d, worst))
    return out


def power_ball_integral(n, lam, r):
    """Closed form of the integral of |y|^(-lam) over the ball of radius r at the origin."""
    return unit_sphere_measure(n) * r ** (n - lam) / (n - lam)
