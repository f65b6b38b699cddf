"""Periodicity cells, folding onto the centered cell and lattice enumeration."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

SUPPORTED_DIMENSIONS = (2, 3)


class UnsupportedDimensionError(ValueError):
    pass


@dataclass(frozen=True)
class PeriodicityCell:
    """Box ]0,q_11[ x ... x ]0,q_nn[ with diagonal period matrix q."""

    periods: tuple
    volume: float = field(init=False)

    def __post_init__(self):
        q = tuple(float(p) for p in self.periods)
        if len(q) not in SUPPORTED_DIMENSIONS:
            raise UnsupportedDimensionError(f"dimension {len(q)} not in {SUPPORTED_DIMENSIONS}")
        for p in q:
            if not np.isfinite(p) or p <= 0.0:
                raise ValueError(f"periods must be positive and finite, got {q}")
        object.__setattr__(self, "periods", q)
        object.__setattr__(self, "volume", float(np.prod(q)))

    @property
    def dimension(self) -> int:
        return len(self.periods)

    @property
    def q(self) -> np.ndarray:
        return np.asarray(self.periods)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.q))

    def boundary_measure(self) -> float:
        """(n-1)-dimensional measure of the cell boundary."""
        q = self.q
        return float(sum(2.0 * self.volume / qj for qj in q))


def make_cell(periods) -> PeriodicityCell:
    return PeriodicityCell(tuple(np.atleast_1d(np.asarray(periods, dtype=float))))


@dataclass(frozen=True)
class FoldedPoint:
    representative: np.ndarray
    lattice_index: np.ndarray
    dist_to_lattice: np.ndarray


def fold_to_cell(cell: PeriodicityCell, x) -> FoldedPoint:
    """Fold points onto the half-open centered cell [-q/2, q/2).

    Accepts a single point of shape (n,) or a batch (m, n); the result
    fields carry the same leading shape.
    """
    x = np.asarray(x, dtype=float)
    q = cell.q
    if x.shape[-1] != cell.dimension:
        raise ValueError(f"expected points of dimension {cell.dimension}, got shape {x.shape}")
    z = np.floor(x / q + 0.5)
    rep = x - z * q
    # guard the upper edge against rounding in x - z*q
    over = rep >= 0.5 * q
    if np.any(over):
        z = np.where(over, z + 1.0, z)
        rep = np.where(over, x - z * q, rep)
    under = rep < -0.5 * q
    if np.any(under):
        z = np.where(under, z - 1.0, z)
        rep = np.where(under, x - z * q, rep)
    dist = np.linalg.norm(rep, axis=-1)
    return FoldedPoint(rep, z.astype(np.int64), dist)


def fold(cell: PeriodicityCell, x) -> np.ndarray:
    return fold_to_cell(cell, x).representative


def dist_to_lattice(cell: PeriodicityCell, x) -> np.ndarray:
    return fold_to_cell(cell, x).dist_to_lattice


def fold_to_box(cell: PeriodicityCell, x) -> np.ndarray:
    """Representative in the closed-open box [0, q)."""
    x = np.asarray(x, dtype=float)
    q = cell.q
    r = x - np.floor(x / q) * q
    return np.where(r >= q, r - q, r)


def lattice_window(cell: PeriodicityCell, nmax: int) -> np.ndarray:
    """All z with ||z||_inf <= nmax, ordered by increasing ||z||_inf."""
    if nmax < 0:
        raise ValueError("nmax must be nonnegative")
    n = cell.dimension
    rng = np.arange(-nmax, nmax + 1)
    grid = np.array(list(itertools.product(rng, repeat=n)), dtype=np.int64).reshape(-1, n)
    shell = np.abs(grid).max(axis=1)
    order = np.argsort(shell, kind="stable")
    return grid[order]


def corner_set(cell: PeriodicityCell) -> np.ndarray:
    """The 2**n integer vectors z with qz a vertex of cl Q."""
    return np.array(list(itertools.product((0, 1), repeat=cell.dimension)), dtype=np.int64)


def unit_sphere_measure(n: int) -> float:
    """Surface measure s_n of the unit sphere in R^n."""
    from scipy.special import gamma

    return float(2.0 * np.pi ** (n / 2.0) / gamma(n / 2.0))


def unit_ball_volume(n: int) -> float:
    return unit_sphere_measure(n) / n
