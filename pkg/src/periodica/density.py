"""Densities phi with analytic derivatives up to order 3."""

from __future__ import annotations

import math

import numpy as np

from .cell import PeriodicityCell, fold_to_box
from .kernels import MAX_ORDER, _as_points, _check_gamma


class Density:
    """Base class.  support_kind is 'interior' (defined on cl Omega) or 'periodic'."""

    name = "density"
    smoothness = MAX_ORDER

    def __init__(self, dimension, support_kind="interior", cell: PeriodicityCell | None = None):
        if support_kind not in ("interior", "periodic"):
            raise ValueError("support_kind must be 'interior' or 'periodic'")
        if support_kind == "periodic" and cell is None:
            raise ValueError("periodic densities need a cell")
        self.dimension = dimension
        self.support_kind = support_kind
        self.cell = cell

    @property
    def is_periodic(self):
        return self.support_kind == "periodic"

    def _derivative(self, y, beta):
        raise NotImplementedError

    def derivative(self, y, beta):
        beta = _check_gamma(beta, self.dimension)
        y, single = _as_points(y, self.dimension)
        if self.is_periodic:
            y = fold_to_box(self.cell, y)
        out = np.broadcast_to(np.asarray(self._derivative(y, beta), dtype=float), (y.shape[0],)).copy()
        return out[0] if single else out

    def evaluate(self, y):
        return self.derivative(y, (0,) * self.dimension)

    __call__ = evaluate

    def partial(self, j):
        return DerivativeDensity(self, tuple(int(i == j) for i in range(self.dimension)))

    def __mul__(self, a):
        return CombinedDensity([self], [float(a)])

    __rmul__ = __mul__

    def __add__(self, other):
        return CombinedDensity([self, other], [1.0, 1.0])

    def metadata(self):
        return {"kind": self.name, "support": self.support_kind}


class ConstantDensity(Density):
    name = "constant"

    def __init__(self, dimension, c=1.0, cell=None):
        super().__init__(dimension, "periodic" if cell is not None else "interior", cell)
        self.c = float(c)

    def _derivative(self, y, beta):
        return self.c if sum(beta) == 0 else 0.0


class TrigDensity(Density):
    """amplitude * cos(2 pi m . q^{-1} y + phase); q-periodic for integer m."""

    name = "trig"

    def __init__(self, cell: PeriodicityCell, m, amplitude=1.0, phase=0.0):
        m = np.asarray(m, dtype=float)
        if m.shape != (cell.dimension,) or np.any(m != np.round(m)):
            raise ValueError("trig density needs an integer m-vector of the cell dimension")
        super().__init__(cell.dimension, "periodic", cell)
        self.m = m
        self.k = 2 * np.pi * m / cell.q
        self.amplitude = float(amplitude)
        self.phase = float(phase)

    def _derivative(self, y, beta):
        order = sum(beta)
        arg = y @ self.k + self.phase + order * np.pi / 2
        return self.amplitude * np.prod(self.k ** np.asarray(beta)) * np.cos(arg)


class BumpDensity(Density):
    """amplitude * exp(-|y - c|^2 / w^2), a smooth interior density."""

    name = "bump"

    def __init__(self, center, width, amplitude=1.0):
        center = np.asarray(center, dtype=float)
        super().__init__(center.shape[0], "interior")
        if not width > 0:
            raise ValueError("bump width must be positive")
        self.center = center
        self.width = float(width)
        self.amplitude = float(amplitude)

    def _derivative(self, y, beta):
        # separable: product over axes of d^b/dt^b exp(-t^2/w^2) = (-1/w)^b H_b(t/w) exp(-t^2/w^2)
        out = np.full(y.shape[0], self.amplitude)
        for j, b in enumerate(beta):
            t = (y[:, j] - self.center[j]) / self.width
            herm = np.polynomial.hermite.hermval(t, [0] * b + [1])
            out = out * (-1.0 / self.width) ** b * herm * np.exp(-t * t)
        return out


class PolyDensity(Density):
    """sum_alpha c_alpha y^alpha (interior, or non-periodic data on Q minus cl Omega)."""

    name = "poly"

    def __init__(self, coeffs: dict, dimension=None):
        items = {tuple(int(a) for a in k): float(v) for k, v in coeffs.items()}
        n = dimension if dimension is not None else len(next(iter(items)))
        if any(len(a) != n for a in items):
            raise ValueError("mixed multi-index lengths")
        super().__init__(n, "interior")
        self.coeffs = items

    def _derivative(self, y, beta):
        out = np.zeros(y.shape[0])
        for alpha, c in self.coeffs.items():
            if any(a < b for a, b in zip(alpha, beta)):
                continue
            term = np.full(y.shape[0], c)
            for j, (a, b) in enumerate(zip(alpha, beta)):
                term = term * (math.factorial(a) // math.factorial(a - b)) * y[:, j] ** (a - b)
            out += term
        return out


class CombinedDensity(Density):
    name = "combination"

    def __init__(self, parts, weights):
        n = parts[0].dimension
        periodic = all(p.is_periodic for p in parts)
        super().__init__(n, "periodic" if periodic else "interior", parts[0].cell if periodic else None)
        self.parts = list(parts)
        self.weights = list(weights)

    def _derivative(self, y, beta):
        return sum(w * np.asarray(p._derivative(y, beta)) for p, w in zip(self.parts, self.weights))


class DerivativeDensity(Density):
    name = "derivative"

    def __init__(self, base: Density, shift):
        super().__init__(base.dimension, base.support_kind, base.cell)
        self.base = base
        self.shift = tuple(shift)

    def _derivative(self, y, beta):
        total = tuple(a + b for a, b in zip(beta, self.shift))
        if sum(total) > MAX_ORDER:
            raise ValueError(f"derivatives above order {MAX_ORDER} are not supported")
        return self.base._derivative(y, total)


def make_density(spec: dict, dimension: int, cell: PeriodicityCell | None = None) -> Density:
    """Builtin densities from a config dict:
    {"kind": "constant", "c"}, {"kind": "trig", "m", "amplitude", "phase"},
    {"kind": "bump", "center", "width", "amplitude"}, {"kind": "poly", "coeffs": [{"alpha", "c"}]}."""
    kind = spec.get("kind")
    if kind == "constant":
        return ConstantDensity(dimension, spec.get("c", 1.0), cell if spec.get("periodic", True) else None)
    if kind == "trig":
        if cell is None:
            raise ValueError("trig density needs a cell")
        return TrigDensity(cell, spec["m"], spec.get("amplitude", 1.0), spec.get("phase", 0.0))
    if kind == "bump":
        return BumpDensity(spec["center"], spec["width"], spec.get("amplitude", 1.0))
    if kind == "poly":
        return PolyDensity({tuple(t["alpha"]): t["c"] for t in spec["coeffs"]}, dimension)
    raise ValueError(f"unknown density kind {kind!r}")
