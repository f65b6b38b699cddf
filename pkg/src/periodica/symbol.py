"""Second-order constant-coefficient operators P(D) = sum a_alpha D^alpha."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cell import PeriodicityCell, lattice_window

ELLIPTICITY_THRESHOLD = 1e-10


class EllipticityError(ValueError):
    pass


@dataclass(frozen=True)
class EllipticOperator:
    """Coefficients keyed by multi-index tuples, e.g. {(2, 0): 1, (0, 2): 1}."""

    coeffs: tuple  # sorted ((alpha, a_alpha), ...)
    dimension: int

    def __post_init__(self):
        for alpha, _ in self.coeffs:
            if len(alpha) != self.dimension or min(alpha) < 0 or sum(alpha) > 2:
                raise ValueError(f"invalid multi-index {alpha} for a second-order operator")
        if not any(sum(a) == 2 and c != 0 for a, c in self.coeffs):
            raise ValueError("operator has no nonzero second-order coefficient")

    @classmethod
    def from_dict(cls, coeffs: dict) -> "EllipticOperator":
        items = {}
        n = None
        for alpha, c in coeffs.items():
            alpha = tuple(int(a) for a in alpha)
            n = len(alpha) if n is None else n
            if len(alpha) != n:
                raise ValueError("mixed multi-index lengths")
            items[alpha] = items.get(alpha, 0) + complex(c)
        items = {a: c for a, c in items.items() if c != 0}
        return cls(tuple(sorted(items.items())), n)

    @property
    def coeff_dict(self) -> dict:
        return dict(self.coeffs)

    def coeff(self, alpha) -> complex:
        return self.coeff_dict.get(tuple(alpha), 0j)

    @property
    def coeff_norm(self) -> float:
        return float(sum(abs(c) for _, c in self.coeffs))

    @property
    def is_real(self) -> bool:
        return all(c.imag == 0 for _, c in self.coeffs)

    def principal_matrix(self) -> np.ndarray:
        """Symmetric complex matrix A with sum_{|alpha|=2} a_alpha xi^alpha = xi^T A xi."""
        n = self.dimension
        A = np.zeros((n, n), dtype=complex)
        for alpha, c in self.coeffs:
            if sum(alpha) != 2:
                continue
            idx = [i for i in range(n) for _ in range(alpha[i])]
            i, j = idx
            if i == j:
                A[i, i] += c
            else:
                A[i, j] += c / 2
                A[j, i] += c / 2
        return A

    def first_order_norm(self) -> float:
        return float(sum(abs(c) for a, c in self.coeffs if sum(a) == 1))

    def constant_term(self) -> complex:
        return self.coeff((0,) * self.dimension)

    def __call__(self, xi) -> np.ndarray:
        """Evaluate the polynomial P at (possibly complex) points xi of shape (..., n)."""
        xi = np.asarray(xi)
        out = np.zeros(xi.shape[:-1], dtype=complex)
        for alpha, c in self.coeffs:
            term = np.full(xi.shape[:-1], c, dtype=complex)
            for j, a in enumerate(alpha):
                if a:
                    term = term * xi[..., j] ** a
            out = out + term
        return out


def laplace(n: int) -> EllipticOperator:
    return EllipticOperator.from_dict({tuple(2 if i == j else 0 for i in range(n)): 1.0 for j in range(n)})


def modified_helmholtz(n: int, kappa: float) -> EllipticOperator:
    """Delta - kappa^2."""
    coeffs = {tuple(2 if i == j else 0 for i in range(n)): 1.0 for j in range(n)}
    coeffs[(0,) * n] = -float(kappa) ** 2
    return EllipticOperator.from_dict(coeffs)


def symbol(op: EllipticOperator, cell: PeriodicityCell, z) -> np.ndarray:
    """P(2 pi i q^{-1} z) for integer z of shape (n,) or (m, n)."""
    z = np.asarray(z, dtype=float)
    return op(2j * np.pi * z / cell.q)


def unit_sphere_samples(n: int, nsamples: int) -> np.ndarray:
    if n == 2:
        t = 2 * np.pi * np.arange(nsamples) / nsamples
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    # Fibonacci lattice on S^2
    k = np.arange(nsamples) + 0.5
    z = 1 - 2 * k / nsamples
    phi = np.pi * (1 + 5**0.5) * k
    r = np.sqrt(1 - z * z)
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def principal_real_min(op: EllipticOperator) -> float:
    """Exact min over the unit sphere of |Re xi^T A xi|."""
    ev = np.linalg.eigvalsh(op.principal_matrix().real)
    if ev[0] <= 0.0 <= ev[-1]:
        return 0.0
    return float(np.min(np.abs(ev)))


def check_strong_ellipticity(op: EllipticOperator, nsamples: int = 400):
    """Return (certified, min |Re principal symbol| on the unit sphere).

    The sampled minimum is refined with the exact eigenvalue minimum of the
    real part of the principal quadratic form, so sign changes that fall
    between samples are not missed.
    """
    if nsamples < 100:
        raise ValueError("nsamples must be at least 100")
    xi = unit_sphere_samples(op.dimension, nsamples)
    A = op.principal_matrix().real
    sampled = float(np.min(np.abs(np.einsum("mi,ij,mj->m", xi, A, xi))))
    m = min(sampled, principal_real_min(op))
    return m > ELLIPTICITY_THRESHOLD, m


@dataclass(frozen=True)
class FrequencyZeroSet:
    members: tuple
    search_bound: int
    certified_complete: bool
    tolerance: float

    def __contains__(self, z) -> bool:
        return tuple(int(v) for v in z) in self.members

    def __len__(self):
        return len(self.members)


def zero_tolerance(op: EllipticOperator) -> float:
    return 1e-12 * (1.0 + op.coeff_norm)


def coercivity_bound(op: EllipticOperator, t: float, c: float | None = None) -> float:
    """Lower bound c t^2 - C t - |a_0| for |P(2 pi i xi)| at |2 pi xi| = t."""
    if c is None:
        c = check_strong_ellipticity(op)[1]
    return c * t * t - op.first_order_norm() * t - abs(op.constant_term())


def frequency_zero_set(op: EllipticOperator, cell: PeriodicityCell, nmax: int) -> FrequencyZeroSet:
    ok, c = check_strong_ellipticity(op)
    if not ok:
        raise EllipticityError(
            f"operator is not certified strongly elliptic (min |Re principal symbol| = {c:.3e})"
        )
    zs = lattice_window(cell, nmax)
    vals = np.abs(symbol(op, cell, zs))
    tol = zero_tolerance(op)
    members = tuple(sorted(tuple(int(v) for v in z) for z in zs[vals <= tol]))
    # every z outside the window has ||z||_2 >= ||z||_inf >= nmax + 1
    t = 2 * np.pi * (nmax + 1) / float(np.max(cell.q))
    certified = coercivity_bound(op, t, c) > 0.0
    return FrequencyZeroSet(members, nmax, bool(certified), tol)


def certification_radius(op: EllipticOperator, cell: PeriodicityCell, limit: int = 10_000) -> int:
    """Smallest nmax whose window is certified complete."""
    c = check_strong_ellipticity(op)[1]
    qmax = float(np.max(cell.q))
    for nmax in range(limit):
        if coercivity_bound(op, 2 * np.pi * (nmax + 1) / qmax, c) > 0.0:
            return nmax
    raise EllipticityError("no certification radius below limit")
