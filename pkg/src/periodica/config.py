"""Run configuration: JSON schema checks and construction of the numerical objects."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cell import PeriodicityCell, make_cell
from .density import Density, TrigDensity, make_density
from .kernels import (
    PeriodicKernel,
    fourier_oracle,
    laplace_periodic_ewald,
    synthetic_power_kernel,
    yukawa_periodic,
)
from .quadrature import Ball, Box, check_inside_cell
from .symbol import EllipticOperator, check_strong_ellipticity, laplace, modified_helmholtz


class ConfigError(ValueError):
    pass


TOP_KEYS = {"cell", "operator", "kernel", "domain", "density", "quadrature", "evaluation", "seed",
            "potential", "verify", "norms", "convergence", "greens", "output"}


@dataclass
class RunConfig:
    raw: dict
    cell: PeriodicityCell
    operator: EllipticOperator
    kernel_spec: dict
    shape: object
    density_spec: dict
    resolution: int
    boundary_resolution: int
    patch_depth: int
    region: str
    margin: float
    seed: int
    base_dir: Path

    @property
    def dimension(self):
        return self.cell.dimension

    def section(self, name):
        return dict(self.raw.get(name) or {})

    def kernel(self, **override) -> PeriodicKernel:
        spec = dict(self.kernel_spec, **override)
        return make_kernel(spec, self.cell, self.operator)

    def density(self) -> Density:
        return make_density(self.density_spec, self.dimension, self.cell)

    def periodic_density(self) -> Density:
        phi = self.density()
        if phi.is_periodic:
            return phi
        # varies along every axis, so no d_j P- vanishes identically when Omega is empty
        return TrigDensity(self.cell, [1] * self.dimension, 1.0, 0.3)

    def points(self, key="evaluation"):
        """Evaluation points from a CSV file, an inline list or a grid."""
        ev = self.section(key)
        n = self.dimension
        if "points" in ev:
            pts = ev["points"]
            if isinstance(pts, str):
                return read_points(self.base_dir / pts, n)
            pts = np.asarray(pts, dtype=float)
            if pts.ndim != 2 or pts.shape[1] != n:
                raise ConfigError(f"evaluation points must be a list of {n}-vectors")
            return pts
        per_axis = int(ev.get("grid", {}).get("per_axis", 4))
        if per_axis < 1:
            raise ConfigError("grid.per_axis must be positive")
        q = self.cell.q
        axes = [(np.arange(per_axis) + 0.5) / per_axis * q[j] for j in range(n)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)


def read_points(path, n):
    rows = []
    with open(path, newline="") as f:
        for row in csv.reader(f):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in row[:n]])
            except ValueError:
                continue  # header
    pts = np.asarray(rows, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != n or pts.shape[0] == 0:
        raise ConfigError(f"{path}: expected rows of {n} coordinates")
    return pts


def make_operator(spec: dict, n: int) -> EllipticOperator:
    if "coeffs" in spec:
        coeffs = {}
        for t in spec["coeffs"]:
            alpha = tuple(int(a) for a in t["alpha"])
            if len(alpha) != n or sum(alpha) > 2:
                raise ConfigError(f"bad multi-index {alpha} for a second-order operator in dimension {n}")
            coeffs[alpha] = complex(t.get("re", 0.0), t.get("im", 0.0))
        op = EllipticOperator.from_dict(coeffs)
    else:
        kind = spec.get("kind", "laplace")
        if kind == "laplace":
            op = laplace(n)
        elif kind == "modified_helmholtz":
            if "kappa" not in spec:
                raise ConfigError("modified_helmholtz needs kappa")
            op = modified_helmholtz(n, float(spec["kappa"]))
        else:
            raise ConfigError(f"unknown operator kind {kind!r}")
    ok, m = check_strong_ellipticity(op)
    if not ok:
        raise ConfigError(f"operator is not strongly elliptic (sampled min |Re principal symbol| = {m:.3g})")
    return op


def _is_laplace(op):
    return op.coeff_dict == laplace(op.dimension).coeff_dict


def _yukawa_kappa(op):
    n = op.dimension
    rest = {a: c for a, c in op.coeff_dict.items() if sum(a) == 2}
    a0 = op.coeff((0,) * n)
    if rest == laplace(n).coeff_dict and len(op.coeff_dict) == n + 1 and a0.imag == 0 and a0.real < 0:
        return float(np.sqrt(-a0.real))
    return None


KERNEL_ALIASES = {"synthetic_power": "synthetic", "laplace_ewald": "ewald", "fourier_oracle": "fourier"}


def make_kernel(spec: dict, cell: PeriodicityCell, op: EllipticOperator) -> PeriodicKernel:
    kind = KERNEL_ALIASES.get(spec.get("kind", "fundamental"), spec.get("kind", "fundamental"))
    n = cell.dimension
    if kind == "synthetic":
        lam = float(spec.get("lambda", 1.0))
        if not 0 < lam < n:
            raise ConfigError(f"kernel lambda must lie in ]0, {n}[")
        return synthetic_power_kernel(cell, lam, float(spec.get("scale", 1.0)))
    if kind == "fundamental":
        if _is_laplace(op):
            kind = "ewald"
        elif _yukawa_kappa(op) is not None:
            kind = "yukawa"
        else:
            kind = "fourier"
    if kind == "ewald":
        if not _is_laplace(op):
            raise ConfigError("the Ewald kernel is the Laplace fundamental solution")
        return laplace_periodic_ewald(cell, spec.get("eta"), spec.get("nreal"), spec.get("nrecip"))
    if kind == "yukawa":
        kappa = spec.get("kappa", _yukawa_kappa(op))
        if kappa is None:
            raise ConfigError("yukawa kernel needs kappa or a modified_helmholtz operator")
        return yukawa_periodic(cell, float(kappa), spec.get("nmax"))
    if kind == "fourier":
        return fourier_oracle(op, cell, int(spec.get("zmax", 32)), spec.get("sigma"), int(spec.get("levels", 3)))
    raise ConfigError(f"unknown kernel kind {kind!r}")


def make_shape(spec: dict | None, cell: PeriodicityCell):
    if spec is None or spec.get("kind", "ball") == "empty":
        return None
    kind = spec.get("kind", "ball")
    if kind == "ball":
        shape = Ball(np.asarray(spec["center"], float), float(spec["radius"]))
    elif kind == "box":
        shape = Box(np.asarray(spec["lo"], float), np.asarray(spec["hi"], float))
    else:
        raise ConfigError(f"unknown domain kind {kind!r}")
    check_inside_cell(cell, shape)
    return shape


DEFAULT = {
    "cell": {"periods": [1.0, 1.0, 1.0]},
    "operator": {"kind": "laplace"},
    "kernel": {"kind": "fundamental"},
    "domain": {"kind": "ball", "center": [0.5, 0.5, 0.5], "radius": 0.2},
    "density": {"kind": "constant", "c": 1.0, "periodic": False},
    "quadrature": {"resolution": 32, "boundary_resolution": 64, "patch_depth": 6},
    "evaluation": {"region": "inner", "margin": 0.05},
    "seed": 0,
}


def load_config(source, base_dir=None) -> RunConfig:
    """Parse a config dict or JSON path; every error is a ConfigError (or ValueError) with a diagnostic."""
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            raw = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        base_dir = path.parent if base_dir is None else base_dir
    else:
        raw = dict(source)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        periods = raw["cell"]["periods"]
    except (KeyError, TypeError) as e:
        raise ConfigError("config needs cell.periods") from e
    cell = make_cell(periods)
    n = cell.dimension
    op = make_operator(raw.get("operator", {"kind": "laplace"}), n)
    shape = make_shape(raw.get("domain"), cell)
    quad = raw.get("quadrature", {})
    ev = raw.get("evaluation", {})
    margin = float(ev.get("margin", 0.05))
    if not margin > 0:
        raise ConfigError("evaluation.margin must be positive")
    region = ev.get("region", "inner")
    if region not in ("inner", "outer"):
        raise ConfigError("evaluation.region must be 'inner' or 'outer'")
    cfg = RunConfig(
        raw=raw,
        cell=cell,
        operator=op,
        kernel_spec=dict(raw.get("kernel", {"kind": "fundamental"})),
        shape=shape,
        density_spec=dict(raw.get("density", {"kind": "constant", "c": 1.0})),
        resolution=int(quad.get("resolution", 32)),
        boundary_resolution=int(quad.get("boundary_resolution", 64)),
        patch_depth=int(quad.get("patch_depth", 6)),
        region=region,
        margin=margin,
        seed=int(raw.get("seed", 0)),
        base_dir=Path(base_dir or "."),
    )
    if cfg.resolution < 8 or cfg.boundary_resolution < 16:
        raise ConfigError("quadrature.resolution must be >= 8 and boundary_resolution >= 16")
    # build once so inconsistent kernel or density settings fail at load time
    cfg.kernel()
    cfg.density()
    return cfg
