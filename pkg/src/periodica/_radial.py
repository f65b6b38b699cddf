"""Radial profiles f(r) and Cartesian derivatives of x -> f(|x|) up to order 3."""

from __future__ import annotations

import math

import numpy as np
from scipy import special

SQRT_PI = math.sqrt(math.pi)


def leibniz(a, b, k):
    """k-th derivative of a product from derivative lists a, b."""
    return sum(math.comb(k, i) * a[i] * b[k - i] for i in range(k + 1))


def inverse_powers(r, k):
    """Derivatives 0..k of 1/r."""
    out = [1.0 / r]
    for i in range(1, k + 1):
        out.append(-i * out[-1] / r)
    return out


class Radial:
    """Base class: subclasses return [f, f', ..., f^(k)] at radii r."""

    def derivs(self, r, k):
        raise NotImplementedError

    def __call__(self, r):
        return self.derivs(r, 0)[0]


class LaplaceFree(Radial):
    """Fundamental solution of the Laplacian with Delta S = delta."""

    def __init__(self, n):
        self.n = n

    def derivs(self, r, k):
        if self.n == 3:
            w = inverse_powers(r, k)
            return [-wi / (4 * np.pi) for wi in w]
        out = [np.log(r) / (2 * np.pi)]
        if k >= 1:
            w = inverse_powers(r, k - 1)
            out += [wi / (2 * np.pi) for wi in w]
        return out


class YukawaFree(Radial):
    """Fundamental solution of Delta - kappa^2 with (Delta - kappa^2) S = delta."""

    def __init__(self, n, kappa):
        self.n = n
        self.kappa = float(kappa)

    def derivs(self, r, k):
        kap = self.kappa
        if self.n == 3:
            e = np.exp(-kap * r)
            ed = [e * (-kap) ** i for i in range(k + 1)]
            w = inverse_powers(r, k)
            return [-leibniz(ed, w, i) / (4 * np.pi) for i in range(k + 1)]
        z = kap * r
        k0 = special.k0(z)
        out = [-k0 / (2 * np.pi)]
        if k >= 1:
            k1 = special.k1(z)
            # d/dz K0 = -K1, d2/dz2 K0 = K0 + K1/z, d3/dz3 K0 = -K1 - K0/z - 2 K1/z^2
            dz = [-k1, k0 + k1 / z, -k1 - k0 / z - 2 * k1 / z**2]
            out += [-(kap ** (i + 1)) * dz[i] / (2 * np.pi) for i in range(k)]
        return out


class EwaldReal(Radial):
    """Screened real-space part of the periodic Laplace Green's function.

    n=3: erfc(eta r) / (4 pi r); n=2: E1(eta^2 r^2) / (4 pi).
    """

    def __init__(self, n, eta):
        self.n = n
        self.eta = float(eta)

    def derivs(self, r, k):
        eta = self.eta
        g = np.exp(-((eta * r) ** 2))
        if self.n == 3:
            c = 2 * eta / SQRT_PI
            e = [special.erfc(eta * r)]
            if k >= 1:
                e.append(-c * g)
            if k >= 2:
                e.append(2 * c * eta**2 * r * g)
            if k >= 3:
                e.append(2 * c * eta**2 * g * (1 - 2 * (eta * r) ** 2))
            w = inverse_powers(r, k)
            return [leibniz(e, w, i) / (4 * np.pi) for i in range(k + 1)]
        out = [special.exp1((eta * r) ** 2)]
        if k >= 1:
            out.append(-2 * g / r)
        if k >= 2:
            out.append(4 * eta**2 * g + 2 * g / r**2)
        if k >= 3:
            out.append(g * (-8 * eta**4 * r - 4 * eta**2 / r - 4 / r**3))
        return [o / (4 * np.pi) for o in out]


def radial_partial(x, r, f, idx):
    """Partial derivative of F(x) = f(|x|) along the axis list idx (len <= 3).

    x: (m, n) points, r: (m,) norms, f: list of radial derivatives f^(i)(r).
    """
    k = len(idx)
    if k == 0:
        return f[0]
    A = f[1] / r
    if k == 1:
        return A * x[:, idx[0]]
    B = (f[2] - f[1] / r) / r**2
    i, j = idx[0], idx[1]
    if k == 2:
        return B * x[:, i] * x[:, j] + (A if i == j else 0.0)
    C = (f[3] - 3 * f[2] / r + 3 * f[1] / r**2) / r**3
    l = idx[2]
    out = C * x[:, i] * x[:, j] * x[:, l]
    if i == j:
        out = out + B * x[:, l]
    if i == l:
        out = out + B * x[:, j]
    if j == l:
        out = out + B * x[:, i]
    return out


def axes_of(gamma):
    """Multi-index (2, 0, 1) -> axis list [0, 0, 2]."""
    return [j for j, g in enumerate(gamma) for _ in range(int(g))]


def set_partitions(items):
    """All set partitions of a list (as lists of blocks)."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]
        yield [[first]] + part
