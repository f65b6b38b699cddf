"""q-periodic weakly singular kernels and their weighted sup-norm estimates.

Every kernel evaluates through folding onto the centered cell, so periodicity
holds by construction.  Derivatives up to order 3 are analytic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _radial
from .cell import PeriodicityCell, fold_to_cell, lattice_window
from .symbol import (
    EllipticOperator,
    certification_radius,
    check_strong_ellipticity,
    coercivity_bound,
    frequency_zero_set,
    symbol,
)

MAX_ORDER = 3


class TruncationError(ValueError):
    """A lattice/frequency truncation cannot meet the requested tolerance."""


def _as_points(x, n):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != n:
        raise ValueError(f"expected points of dimension {n}, got shape {x.shape}")
    return x, single


def _check_gamma(gamma, n):
    gamma = tuple(int(g) for g in gamma)
    if len(gamma) != n or min(gamma) < 0:
        raise ValueError(f"invalid multi-index {gamma}")
    if sum(gamma) > MAX_ORDER:
        raise ValueError(f"derivatives above order {MAX_ORDER} are not supported")
    return gamma


class PeriodicKernel:
    """A q-periodic function singular (at most) on the lattice qZ^n."""

    name = "kernel"
    # exact leading singularity: h ~ |x|^(-power) * (analytic), or log|x| when log_singular
    power = None
    log_singular = False

    def __init__(self, cell: PeriodicityCell, lam: float, differentiable: bool = True,
                 truncation_error: float = 0.0):
        self.cell = cell
        self.lam = float(lam)
        self.differentiable = differentiable
        self.truncation_error = float(truncation_error)

    def singular_power(self, gamma=None):
        """Exponent p with d^gamma h = |x|^(-p) g, g analytic along rays; None if unknown or logarithmic."""
        k = 0 if gamma is None else int(sum(gamma))
        if self.power is not None:
            return self.power + k
        if self.log_singular and k >= 1:
            return float(k)
        return None

    @property
    def dimension(self):
        return self.cell.dimension

    def _derivative(self, rep, gamma):
        raise NotImplementedError

    def derivative(self, x, gamma):
        """partial^gamma h at points x; |gamma| <= 3."""
        n = self.dimension
        gamma = _check_gamma(gamma, n)
        if sum(gamma) > 0 and not self.differentiable:
            raise ValueError(f"{self.name} kernel is not differentiable")
        x, single = _as_points(x, n)
        rep = fold_to_cell(self.cell, x).representative
        out = np.asarray(self._derivative(rep, gamma), dtype=float)
        out = np.broadcast_to(out, (x.shape[0],)).copy()
        return out[0] if single else out

    def _derivatives(self, rep, gammas):
        return [self._derivative(rep, g) for g in gammas]

    def derivatives(self, x, gammas):
        """List of partial^gamma h at points x, sharing the folding (and, where
        a kernel supports it, the expensive lattice sums) across gammas."""
        n = self.dimension
        gammas = [_check_gamma(g, n) for g in gammas]
        if any(sum(g) > 0 for g in gammas) and not self.differentiable:
            raise ValueError(f"{self.name} kernel is not differentiable")
        x, single = _as_points(x, n)
        rep = fold_to_cell(self.cell, x).representative
        outs = []
        for o in self._derivatives(rep, gammas):
            o = np.broadcast_to(np.asarray(o, dtype=float), (x.shape[0],)).copy()
            outs.append(o[0] if single else o)
        return outs

    def evaluate(self, x):
        return self.derivative(x, (0,) * self.dimension)

    __call__ = evaluate

    def gradient(self, x):
        n = self.dimension
        cols = self.derivatives(x, [tuple(int(i == j) for i in range(n)) for j in range(n)])
        return np.stack(cols, axis=-1)

    def partial(self, j):
        """The kernel component partial_j h, as a kernel with exponent lambda + 1."""
        return DerivativeKernel(self, tuple(int(i == j) for i in range(self.dimension)))

    def __mul__(self, a):
        return LinearCombination([self], [float(a)])

    __rmul__ = __mul__

    def __add__(self, other):
        return LinearCombination([self, other], [1.0, 1.0])

    def __sub__(self, other):
        return LinearCombination([self, other], [1.0, -1.0])

    def metadata(self) -> dict:
        return {"kind": self.name, "lambda": self.lam, "differentiable": self.differentiable,
                "truncation_error": self.truncation_error}


class LinearCombination(PeriodicKernel):
    name = "combination"

    def __init__(self, kernels, weights):
        cell = kernels[0].cell
        if any(k.cell != cell for k in kernels):
            raise ValueError("kernels live on different cells")
        super().__init__(cell, max(k.lam for k in kernels), all(k.differentiable for k in kernels),
                         sum(abs(w) * k.truncation_error for k, w in zip(kernels, weights)))
        self.kernels = list(kernels)
        self.weights = list(weights)
        powers = {k.power for k in self.kernels}
        if len(powers) == 1:
            self.power = powers.pop()
        elif all(k.log_singular or k.power == 0 for k in self.kernels):
            self.log_singular = True

    def _derivative(self, rep, gamma):
        return sum(w * np.asarray(k._derivative(rep, gamma)) for k, w in zip(self.kernels, self.weights))


class DerivativeKernel(PeriodicKernel):
    name = "derivative"

    def __init__(self, base: PeriodicKernel, shift):
        if not base.differentiable:
            raise ValueError("base kernel is not differentiable")
        super().__init__(base.cell, base.lam + sum(shift), True, base.truncation_error)
        self.base = base
        self.shift = tuple(shift)
        self.power = base.singular_power(self.shift)

    def _derivative(self, rep, gamma):
        total = tuple(a + b for a, b in zip(gamma, self.shift))
        if sum(total) > MAX_ORDER:
            raise ValueError(f"derivatives above order {MAX_ORDER} are not supported")
        return self.base._derivative(rep, total)


class ConstantKernel(PeriodicKernel):
    name = "constant"

    def __init__(self, cell, value=1.0, lam=0.5):
        super().__init__(cell, lam, True, 0.0)
        self.value = float(value)

    def _derivative(self, rep, gamma):
        if sum(gamma) == 0:
            return np.full(rep.shape[0], self.value)
        return np.zeros(rep.shape[0])


class SyntheticPowerKernel(PeriodicKernel):
    """h(x) = scale * r_p(x)^(-lambda), r_p^2 = sum_j (q_j/pi)^2 sin^2(pi x_j / q_j)."""

    name = "synthetic_power"

    def __init__(self, cell, lam, scale=1.0):
        n = cell.dimension
        if not 0.0 < lam < n:
            raise ValueError(f"lambda must lie in ]0, {n}[, got {lam}")
        super().__init__(cell, lam, True, 0.0)
        self.scale = float(scale)
        self.power = float(lam)

    def r_p(self, x):
        x, single = _as_points(x, self.dimension)
        rep = fold_to_cell(self.cell, x).representative
        out = np.sqrt(self._u(rep)[0])
        return out[0] if single else out

    def _u(self, rep):
        """u = r_p^2 and its separable partials g_j^(d) for d = 1..3."""
        q = self.cell.q
        t = 2 * np.pi * rep / q
        s, c = np.sin(t), np.cos(t)
        u = np.sum((q / np.pi) ** 2 * np.sin(np.pi * rep / q) ** 2, axis=1)
        g = {1: (q / np.pi) * s, 2: 2 * c, 3: -(4 * np.pi / q) * s}
        return u, g

    def _derivative(self, rep, gamma):
        u, g = self._u(rep)
        a = self.lam / 2
        # d^k/du^k of scale * u^(-a)
        coef = [1.0, -a, a * (a + 1), -a * (a + 1) * (a + 2)]
        phi = [self.scale * coef[k] * u ** (-a - k) for k in range(4)]
        idx = _radial.axes_of(gamma)
        if not idx:
            return phi[0]
        out = np.zeros(rep.shape[0])
        for part in _radial.set_partitions(idx):
            term = phi[len(part)]
            for block in part:
                if any(b != block[0] for b in block):
                    term = 0.0
                    break
                term = term * g[len(block)][:, block[0]]
            out = out + term
        return out


# far images (||z||_inf >= 2) form a function analytic on the centered cell; it is
# replaced by a tensor Chebyshev interpolant with this many nodes per axis
FAR_NODES = 20
NEAR_WINDOW = 1
_FAR_CACHE = {}


class ChebyshevField:
    """Tensor Chebyshev interpolant on the centered cell prod [-q_j/2, q_j/2]."""

    def __init__(self, half, coeffs):
        self.half = np.asarray(half, dtype=float)
        self.coeffs = coeffs

    @classmethod
    def fit(cls, half, f, m=FAR_NODES):
        n = len(half)
        t = np.cos(np.pi * (np.arange(m) + 0.5) / m)
        grid = np.stack(np.meshgrid(*[h * t for h in half], indexing="ij"), axis=-1).reshape(-1, n)
        c = f(grid).reshape((m,) * n)
        vinv = np.linalg.inv(np.polynomial.chebyshev.chebvander(t, m - 1))
        for a in range(n):
            c = np.moveaxis(np.tensordot(vinv, c, axes=([1], [a])), 0, a)
        return cls(half, c)

    def derivative(self, x, gamma, chunk=8192):
        c = self.coeffs
        for j, g in enumerate(gamma):
            if g:
                c = np.polynomial.chebyshev.chebder(c, g, axis=j) / self.half[j] ** g
        n = len(gamma)
        t = x / self.half
        out = np.empty(x.shape[0])
        for s in range(0, x.shape[0], chunk):
            tt = t[s:s + chunk]
            V = [np.polynomial.chebyshev.chebvander(tt[:, a], c.shape[a] - 1) for a in range(n)]
            T = np.tensordot(V[-1], c, axes=([1], [n - 1]))
            T = np.moveaxis(T, 0, -1) if n > 1 else T
            # T[..., m] now carries axes 0..n-2; contract them from the back
            for a in range(n - 2, -1, -1):
                T = np.einsum("...km,mk->...m", T, V[a])
            out[s:s + chunk] = T
        return out


def _far_field(cell, profile, nmax):
    key = (type(profile).__name__, tuple(sorted(vars(profile).items())), tuple(cell.q), int(nmax))
    if key not in _FAR_CACHE:
        shifts = lattice_window(cell, nmax) * cell.q
        far = shifts[np.abs(shifts / cell.q).max(axis=1) > NEAR_WINDOW]

        def f(x, block=256):
            total = np.zeros(x.shape[0])
            for b in range(0, len(far), block):
                s = far[b:b + block]
                # |x + s|^2 without the (block, points, n) intermediate
                r2 = (x * x).sum(axis=1)[None, :] + 2 * s @ x.T + (s * s).sum(axis=1)[:, None]
                total += profile.derivs(np.sqrt(r2), 0)[0].sum(axis=0)
            return total

        field = ChebyshevField.fit(cell.q / 2, f)
        probe = (np.random.default_rng(0).random((32, cell.dimension)) - 0.5) * cell.q
        err = float(np.max(np.abs(field.derivative(probe, (0,) * cell.dimension) - f(probe))))
        _FAR_CACHE[key] = (field, err)
    return _FAR_CACHE[key]


class ImageSumKernel(PeriodicKernel):
    """sum over ||z||_inf <= nmax of f(|x + qz|) for an exponentially decaying radial f.

    Images with ||z||_inf <= 1 are summed directly; the rest, smooth on the centered
    cell, through a Chebyshev interpolant whose sampled error joins truncation_error.
    """

    name = "image_sum"

    def __init__(self, cell, profile, lam, nmax, truncation_error):
        super().__init__(cell, lam, True, truncation_error)
        self.profile = profile
        self.nmax = int(nmax)
        self.far = None
        window = min(self.nmax, NEAR_WINDOW)
        self.shifts = lattice_window(cell, window) * cell.q
        if self.nmax > NEAR_WINDOW:
            self.far, err = _far_field(cell, profile, self.nmax)
            self.truncation_error += err

    def _derivative(self, rep, gamma):
        idx = _radial.axes_of(gamma)
        out = np.zeros(rep.shape[0])
        for shift in self.shifts:
            y = rep + shift
            r = np.linalg.norm(y, axis=1)
            f = self.profile.derivs(r, len(idx))
            out += _radial.radial_partial(y, r, f, idx)
        if self.far is not None:
            out += self.far.derivative(rep, gamma)
        return out


def _shell_count(n, m):
    return (2 * m + 1) ** n - (2 * m - 1) ** n


def image_tail_bound(cell, envelope, nmax, terms=400):
    """Bound for sum over ||z||_inf > nmax of envelope(|x + qz|), x in the centered cell.

    envelope must be nonincreasing in r.
    """
    n = cell.dimension
    qmin = float(np.min(cell.q))
    total = 0.0
    for m in range(nmax + 1, nmax + 1 + terms):
        term = _shell_count(n, m) * float(envelope((m - 0.5) * qmin))
        total += term
        if term < 1e-300 or (total > 0 and term < 1e-18 * total):
            break
    return total


def minimal_nmax(cell, envelope, tol, limit=200):
    for nmax in range(1, limit):
        if image_tail_bound(cell, envelope, nmax) <= tol:
            return nmax
    raise TruncationError("no image window below limit meets the tolerance")


def yukawa_periodic(cell: PeriodicityCell, kappa: float, nmax: int | None = None,
                    tol: float = 1e-12) -> ImageSumKernel:
    """Periodic fundamental solution of Delta - kappa^2 by direct image summation."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    n = cell.dimension
    profile = _radial.YukawaFree(n, kappa)

    def envelope(r):
        return abs(profile.derivs(np.array([r]), 0)[0][0])

    needed = minimal_nmax(cell, envelope, tol)
    if nmax is None:
        nmax = needed
    if nmax < 1:
        raise ValueError("nmax must be at least 1")
    err = image_tail_bound(cell, envelope, nmax)
    if err > tol:
        raise TruncationError(
            f"image tail bound {err:.3e} exceeds tolerance {tol:.1e}; minimal sufficient nmax is {needed}"
        )
    k = ImageSumKernel(cell, profile, n - 2 if n == 3 else 0.5, nmax, err)
    if n == 3:
        k.power = 1.0
    else:
        k.log_singular = True
    k.name = "yukawa"
    k.kappa = float(kappa)
    return k


class SeparableFourierSum:
    """sum_z C(z) prod_j exp(i k_j(z_j) x_j) over a box of integer frequencies, with derivatives."""

    def __init__(self, coeffs, freqs):
        self.coeffs = coeffs  # complex tensor of shape (2N+1,)*n
        self.freqs = freqs  # list of per-axis angular frequencies, each (2N+1,)

    def __call__(self, x, gamma, chunk=8192):
        return self.multi(x, [gamma], chunk)[0]

    def multi(self, x, gammas, chunk=8192):
        n = x.shape[1]
        N = self.coeffs.shape[-1]
        flat = self.coeffs.reshape(-1, N)
        outs = [np.empty(x.shape[0], dtype=complex) for _ in gammas]
        for s in range(0, x.shape[0], chunk):
            xs = x[s : s + chunk]
            phases = [np.exp(1j * xs[:, j : j + 1] * self.freqs[j][None, :]) for j in range(n)]
            for out, gamma in zip(outs, gammas):
                factors = [((1j * self.freqs[j]) ** gamma[j])[None, :] * phases[j] for j in range(n)]
                # last axis through BLAS, remaining axes elementwise
                t = flat @ factors[-1].T
                for j in range(n - 2, -1, -1):
                    t = (t.reshape(-1, N, xs.shape[0]) * factors[j].T[None, :, :]).sum(axis=1)
                out[s : s + chunk] = t.reshape(-1)
        return outs


def _frequency_box(cell, nmax):
    rng = np.arange(-nmax, nmax + 1)
    n = cell.dimension
    grids = np.meshgrid(*([rng] * n), indexing="ij")
    z = np.stack(grids, axis=-1)
    freqs = [2 * np.pi * rng / cell.q[j] for j in range(n)]
    return z, freqs


def _ewald_real_envelope(n, eta):
    prof = _radial.EwaldReal(n, eta)
    return lambda r: abs(prof.derivs(np.array([r]), 0)[0][0])


def _ewald_recip_tail(cell, eta, nrecip, terms=400):
    n = cell.dimension
    qmax = float(np.max(cell.q))
    total = 0.0
    for m in range(nrecip + 1, nrecip + 1 + terms):
        k = 2 * np.pi * m / qmax
        term = _shell_count(n, m) * math.exp(-k * k / (4 * eta * eta)) / (cell.volume * k * k)
        total += term
        if term < 1e-300 or (total > 0 and term < 1e-18 * total):
            break
    return total


def _minimal_recip(cell, eta, tol, limit=400):
    for m in range(1, limit):
        if _ewald_recip_tail(cell, eta, m) <= tol:
            return m
    raise TruncationError("no reciprocal window below limit meets the tolerance")


class EwaldLaplaceKernel(PeriodicKernel):
    """Zero-mean periodic Laplace Green's function, Delta S_q = sum delta_{qz} - 1/|Q|.

    S_q = -( sum_z R(|x + qz|) + (1/|Q|) sum_{k != 0} exp(-|k|^2 / 4 eta^2) / |k|^2 e^{ik.x}
             - 1 / (4 |Q| eta^2) )
    """

    name = "laplace_ewald"

    def __init__(self, cell, eta, nreal, nrecip, truncation_error):
        n = cell.dimension
        super().__init__(cell, n - 2 if n == 3 else 0.5, True, truncation_error)
        if n == 3:
            self.power = 1.0
        else:
            self.log_singular = True
        self.eta = float(eta)
        self.nreal = int(nreal)
        self.nrecip = int(nrecip)
        self.profile = _radial.EwaldReal(n, eta)
        self.shifts = lattice_window(cell, self.nreal) * cell.q
        z, freqs = _frequency_box(cell, self.nrecip)
        k2 = sum((2 * np.pi * z[..., j] / cell.q[j]) ** 2 for j in range(n))
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.exp(-k2 / (4 * eta * eta)) / (cell.volume * k2)
        c[(self.nrecip,) * n] = 0.0
        self.recip = SeparableFourierSum(c.astype(complex), freqs)
        self.constant = -1.0 / (4 * cell.volume * eta * eta)

    def _derivative(self, rep, gamma):
        return self._derivatives(rep, [gamma])[0]

    def _derivatives(self, rep, gammas):
        idxs = [_radial.axes_of(g) for g in gammas]
        kmax = max(len(i) for i in idxs)
        outs = [np.zeros(rep.shape[0]) for _ in gammas]
        for shift in self.shifts:
            y = rep + shift
            r = np.linalg.norm(y, axis=1)
            f = self.profile.derivs(r, kmax)
            for out, idx in zip(outs, idxs):
                out += _radial.radial_partial(y, r, f, idx)
        for out, idx, rec in zip(outs, idxs, self.recip.multi(rep, gammas)):
            out += rec.real
            if not idx:
                out += self.constant
        return [-o for o in outs]

    def metadata(self):
        d = super().metadata()
        d.update(eta=self.eta, nreal=self.nreal, nrecip=self.nrecip)
        return d


def default_ewald_eta(cell):
    return 3.5 / float(np.min(cell.q))


def laplace_periodic_ewald(cell: PeriodicityCell, eta: float | None = None, nreal: int | None = None,
                           nrecip: int | None = None, tol: float = 1e-12) -> EwaldLaplaceKernel:
    if eta is None:
        eta = default_ewald_eta(cell)
    if eta <= 0:
        raise ValueError("eta must be positive")
    env = _ewald_real_envelope(cell.dimension, eta)
    need_real = minimal_nmax(cell, env, tol)
    need_recip = _minimal_recip(cell, eta, tol)
    nreal = need_real if nreal is None else nreal
    nrecip = need_recip if nrecip is None else nrecip
    real_err = image_tail_bound(cell, env, nreal)
    recip_err = _ewald_recip_tail(cell, eta, nrecip)
    if real_err > tol or recip_err > tol:
        raise TruncationError(
            f"Ewald tails (real {real_err:.2e}, reciprocal {recip_err:.2e}) exceed {tol:.1e}; "
            f"suggested radii nreal={need_real}, nrecip={need_recip}"
        )
    return EwaldLaplaceKernel(cell, eta, nreal, nrecip, real_err + recip_err)


def richardson_weights(nodes):
    """Weights w with sum_l w_l s_l^p = delta_{p0}, p < len(nodes) (extrapolation to s = 0)."""
    nodes = np.asarray(nodes, dtype=float)
    V = np.vander(nodes, increasing=True).T
    rhs = np.zeros(len(nodes))
    rhs[0] = 1.0
    return np.linalg.solve(V, rhs)


class FourierOracleKernel(PeriodicKernel):
    """Damped truncation of sum_{z not in Z(P)} e^{2 pi i q^{-1}z . x} / (|Q| P(2 pi i q^{-1} z)).

    The damping exp(-sigma |z|^2) is optionally replaced by its Richardson
    combination over sigma, 2 sigma, 4 sigma, ... which cancels the leading
    powers of sigma in the damping bias.
    """

    name = "fourier_oracle"

    def __init__(self, op, cell, zmax, sigma, levels=1):
        n = cell.dimension
        if op.dimension != n:
            raise ValueError("operator and cell dimensions differ")
        zset = frequency_zero_set(op, cell, zmax)
        if not zset.certified_complete:
            raise ValueError(
                f"Z(P) not certified complete within zmax={zmax}; "
                f"need zmax >= {certification_radius(op, cell)}"
            )
        z, freqs = _frequency_box(cell, zmax)
        P = symbol(op, cell, z.reshape(-1, n)).reshape(z.shape[:-1])
        z2 = np.sum(z.astype(float) ** 2, axis=-1)
        sigmas = sigma * 2.0 ** np.arange(levels)
        w = richardson_weights(sigmas)
        damp = sum(wl * np.exp(-sl * z2) for wl, sl in zip(w, sigmas))
        mask = np.ones(z.shape[:-1], dtype=bool)
        for m in zset.members:
            mask[tuple(np.asarray(m) + zmax)] = False
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(mask, damp / (cell.volume * P), 0.0)
        lam = n - 2 if n == 3 else 0.5
        # tail: |P| >= coercive bound beyond the window, damping <= sum |w_l| e^{-sigma_l m^2}
        ellip = check_strong_ellipticity(op)[1]
        tail = 0.0
        for m in range(zmax + 1, zmax + 400):
            d = sum(abs(wl) * math.exp(-sl * m * m) for wl, sl in zip(w, sigmas))
            t = 2 * np.pi * m / float(np.max(cell.q))
            lower = coercivity_bound(op, t, ellip)
            if lower <= 0:
                tail = float("inf")
                break
            term = _shell_count(n, m) * d / (cell.volume * lower)
            tail += term
            if term < 1e-18 * max(tail, 1e-300):
                break
        super().__init__(cell, lam, True, tail)
        self.op = op
        self.zmax = int(zmax)
        self.sigma = float(sigma)
        self.levels = int(levels)
        self.zero_set = zset
        self.series = SeparableFourierSum(c, freqs)

    def complex_derivative(self, x, gamma):
        x, single = _as_points(x, self.dimension)
        rep = fold_to_cell(self.cell, x).representative
        out = self.series(rep, _check_gamma(gamma, self.dimension))
        return out[0] if single else out

    def imag_residue(self, x):
        return np.abs(self.complex_derivative(x, (0,) * self.dimension).imag)

    def _derivative(self, rep, gamma):
        return self.series(rep, gamma).real


def fourier_oracle(op: EllipticOperator, cell: PeriodicityCell, zmax: int, sigma: float | None = None,
                   levels: int = 1) -> FourierOracleKernel:
    """Gaussian-damped Fourier series oracle; sigma defaults to 36 / (2**(levels-1) zmax^2)."""
    if sigma is None:
        sigma = 36.0 / zmax**2 / 2.0 ** (levels - 1)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return FourierOracleKernel(op, cell, zmax, sigma, levels)


def synthetic_power_kernel(cell: PeriodicityCell, lam: float, scale: float = 1.0) -> SyntheticPowerKernel:
    return SyntheticPowerKernel(cell, lam, scale)


class FreeSpaceKernel:
    """Non-periodic fundamental solution, used to isolate the singular part of S_q."""

    def __init__(self, profile, n):
        self.profile = profile
        self.n = n

    def derivative(self, x, gamma):
        x, single = _as_points(x, self.n)
        r = np.linalg.norm(x, axis=1)
        idx = _radial.axes_of(gamma)
        out = _radial.radial_partial(x, r, self.profile.derivs(r, len(idx)), idx)
        return out[0] if single else out

    def evaluate(self, x):
        return self.derivative(x, (0,) * self.n)

    __call__ = evaluate


def free_laplace(n):
    return FreeSpaceKernel(_radial.LaplaceFree(n), n)


def free_yukawa(n, kappa):
    return FreeSpaceKernel(_radial.YukawaFree(n, kappa), n)


# ---------------------------------------------------------------- norm estimates

@dataclass(frozen=True)
class KernelNormEstimate:
    a0_norm: float
    a1_norm: float | None
    sample_count: int
    refinement_ratio: float
    a0_components: dict | None = None


def _angular_grid(n, m):
    """Nested angular grid: halving m yields a subset."""
    if n == 2:
        t = 2 * np.pi * np.arange(2 * m) / (2 * m)
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    th = np.pi * np.arange(m + 1) / m
    ph = 2 * np.pi * np.arange(2 * m) / (2 * m)
    T, P = np.meshgrid(th, ph, indexing="ij")
    pts = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1).reshape(-1, 3)
    return np.unique(np.round(pts, 15), axis=0)


def norm_sample_points(cell, samples_per_axis, shell_refinement):
    """Tensor grid on the centered cell (origin removed) plus dyadic shells around 0."""
    n = cell.dimension
    q = cell.q
    N = int(samples_per_axis)
    axes = [-q[j] / 2 + q[j] * np.arange(N) / N for j in range(n)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    grid = grid[np.linalg.norm(grid, axis=1) > 0]
    ang = _angular_grid(n, max(4, N // 2))
    r0 = float(np.min(q)) / 2
    shells = [r0 * 2.0 ** (-k) * ang for k in range(1, int(shell_refinement) + 1)]
    return np.concatenate([grid] + shells, axis=0)


def weighted_sup(h, points, exponent, gamma=None):
    """sup |partial^gamma h(x)| |x|^exponent over the sample points."""
    n = points.shape[1]
    gamma = (0,) * n if gamma is None else gamma
    vals = np.abs(h.derivative(points, gamma)) * np.linalg.norm(points, axis=1) ** exponent
    return float(np.max(vals))


def _norms_at(h, samples_per_axis, shell_refinement):
    pts = norm_sample_points(h.cell, samples_per_axis, shell_refinement)
    n = h.dimension
    a0 = weighted_sup(h, pts, h.lam)
    comps = None
    a1 = None
    if h.differentiable:
        comps = {j: weighted_sup(h, pts, h.lam + 1, tuple(int(i == j) for i in range(n))) for j in range(n)}
        a1 = a0 + sum(comps.values())
    return a0, a1, comps, pts.shape[0]


def estimate_norms(h: PeriodicKernel, samples_per_axis: int = 32, shell_refinement: int = 12) -> KernelNormEstimate:
    """Sampled A^0 (and A^1) norms with a nested half-resolution comparison."""
    if samples_per_axis < 16:
        raise ValueError("samples_per_axis must be at least 16")
    a0, a1, comps, count = _norms_at(h, samples_per_axis, shell_refinement)
    a0_half, *_ = _norms_at(h, samples_per_axis // 2, shell_refinement - 1)
    ratio = a0 / a0_half if a0_half > 0 else 1.0
    return KernelNormEstimate(a0, a1, count, ratio, comps)


def shell_sup(h, radius, exponent, gamma=None, m=32):
    """sup over the sphere of given radius of |partial^gamma h| |x|^exponent."""
    pts = radius * _angular_grid(h.dimension, m)
    return weighted_sup(h, pts, exponent, gamma)
