"""periodica greens|potential|verify|norms|convergence --config path.json [--out dir]

Exit codes: 0 success (all checks pass), 1 a check failed, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, _yukawa_kappa, load_config, read_points
from .kernels import estimate_norms, fourier_oracle, yukawa_periodic
from .potentials import (
    MarginError,
    PotentialSetup,
    derivative_identity_minus,
    derivative_identity_plus,
    higher_derivative_plus,
)
from .quadrature import QuadratureError
from .roumieu import kernel_class_norm
from .verify import SUITES, TRACEABILITY, Verifier

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def fmt(v):
    """17 significant digits: full round-trip precision."""
    v = float(v)
    return format(v, ".17g") if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))


def write_csv(path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, int, np.floating, np.integer)) else v for v in row])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def _header(n):
    return [f"x{j + 1}" for j in range(n)]


# ------------------------------------------------------------------ commands

def cmd_greens(cfg: RunConfig, args, out: Path):
    h = cfg.kernel()
    pts = cfg.points()
    n = cfg.dimension
    vals = h.evaluate(pts)
    grad = h.gradient(pts)
    rows = [list(p) + [v] + list(g) + [h.truncation_error] for p, v, g in zip(pts, vals, grad)]
    write_csv(out / "greens.csv", _header(n) + ["value"] + [f"grad{j + 1}" for j in range(n)] + ["trunc_err"], rows)
    return EXIT_OK


def _parse_deriv(text, n):
    if text is None:
        return None
    parts = [int(p) for p in str(text).replace(" ", "").split(",") if p != ""]
    if len(parts) == 1:
        j = parts[0]
        if not 0 <= j < n:
            raise ConfigError(f"--deriv axis must lie in 0..{n - 1}")
        return tuple(int(i == j) for i in range(n))
    if len(parts) != n or min(parts) < 0 or sum(parts) > 3:
        raise ConfigError(f"--deriv multi-index must have {n} entries with order <= 3")
    return tuple(parts)


def cmd_potential(cfg: RunConfig, args, out: Path):
    opts = cfg.section("potential")
    side = args.side or opts.get("side", "plus")
    if side not in ("plus", "minus"):
        raise ConfigError("side must be plus or minus")
    if side == "plus" and cfg.shape is None:
        raise ConfigError("P+ needs a nonempty domain")
    n = cfg.dimension
    beta = _parse_deriv(args.deriv if args.deriv is not None else opts.get("deriv"), n)
    pts = cfg.points() if args.points is None else read_points(Path(args.points), n)
    h = cfg.kernel()
    phi = cfg.density() if side == "plus" else cfg.periodic_density()
    setup = PotentialSetup(cfg.cell, cfg.shape, cfg.resolution, cfg.boundary_resolution, cfg.patch_depth)
    rows = []
    if beta is None or sum(beta) == 0:
        header = _header(n) + ["value"]
        for x in pts:
            rows.append(list(x) + [setup.potential(h, phi, side, x)])
    elif sum(beta) == 1:
        j = beta.index(1)
        header = _header(n) + ["value", "density_route", "fd", "residual_AB", "residual_AC"]
        ident = derivative_identity_plus if side == "plus" else derivative_identity_minus
        for x in pts:
            try:
                r = ident(h, phi, setup, x, j, cfg.margin)
                rows.append(list(x) + [r.A, r.B, r.C, r.residual_AB, r.residual_AC])
            except MarginError:
                a = setup.potential_derivative(h, phi, side, x, beta)
                rows.append(list(x) + [a, float("nan"), float("nan"), float("nan"), float("nan")])
    else:
        if side != "plus":
            raise ConfigError("higher derivatives are available for P+ only")
        header = _header(n) + ["value", "fd", "residual"]
        for x in pts:
            val, fd = higher_derivative_plus(h, phi, setup, x, beta, cfg.margin)
            rows.append(list(x) + [val, fd, abs(val - fd) / max(abs(val), abs(fd), 1.0)])
    write_csv(out / "potential.csv", header, rows)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args, out: Path):
    suite = args.suite or cfg.section("verify").get("suite", "default")
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}")
    checks = Verifier(cfg).run(suite)
    report = {
        "config_echo": cfg.raw,
        "suite": suite,
        "traceability": {k: TRACEABILITY[k] for k in checks},
        "checks": checks,
        "timing": None,
        "version": __version__,
    }
    write_json(out / "report.json", report)
    failed = [k for k, v in checks.items() if not v["pass"]]
    if failed:
        print("check failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_norms(cfg: RunConfig, args, out: Path):
    opts = cfg.section("norms")
    rho = float(opts.get("rho", 0.05))
    order = int(opts.get("order", 3))
    margin = float(opts.get("window_margin", 0.25))
    h = cfg.kernel()
    est = estimate_norms(h, int(opts.get("samples_per_axis", 32)))
    report = {"config_echo": cfg.raw, "a0": est.a0_norm, "a1": est.a1_norm,
              "refinement_ratio": est.refinement_ratio, "lambda": h.lam, "kernel": h.metadata()}
    if h.differentiable:
        total, a1, rest = kernel_class_norm(h, None, rho, margin, order, int(opts.get("samples_per_axis", 32)),
                                            details=True)
        report["roumieu"] = rest.to_dict()
        report["roumieu"]["window_margin"] = margin
        report["kernel_class_norm"] = total
    write_json(out / "norms.json", report)
    return EXIT_OK


def parse_sweep(tokens):
    """['resolution', '16..256'] -> ('resolution', [16, 32, 64, 128, 256]); also comma lists."""
    if not tokens:
        raise ConfigError("--sweep needs a parameter name and values")
    name = tokens[0]
    spec = ",".join(tokens[1:]) if len(tokens) > 1 else None
    if spec is None:
        return name, None
    if ".." in spec:
        a, b = (int(t) for t in spec.split(".."))
        vals = []
        v = a
        while v <= b:
            vals.append(v)
            v *= 2
    else:
        vals = [int(t) for t in spec.split(",") if t]
    if not vals:
        raise ConfigError("empty sweep")
    return name, vals


def cmd_convergence(cfg: RunConfig, args, out: Path):
    opts = cfg.section("convergence")
    if args.sweep:
        name, vals = parse_sweep(args.sweep)
    else:
        name, vals = opts.get("sweep", "resolution"), None
    vals = vals or opts.get("values")
    pts = cfg.points()
    n = cfg.dimension
    rows = []
    if name == "resolution":
        vals = vals or [16, 32, 64, 128, 256]
        ref_res = int(opts.get("reference", 2 * max(vals)))
        side = opts.get("side", "plus" if cfg.shape is not None else "minus")
        x = np.asarray(opts.get("point", pts[0]), dtype=float)
        h = cfg.kernel()
        phi = cfg.density() if side == "plus" else cfg.periodic_density()

        def value(res):
            s = PotentialSetup(cfg.cell, cfg.shape, res, cfg.boundary_resolution, cfg.patch_depth)
            return s.potential(h, phi, side, x)

        ref = value(ref_res)
        for v in vals:
            val = value(v)
            rows.append([v, val, abs(val - ref)])
        rows.append([ref_res, ref, 0.0])
    elif name in ("nmax", "zmax"):
        if name == "nmax":
            kappa = cfg.kernel_spec.get("kappa")
            if kappa is None:
                kappa = _yukawa_kappa(cfg.operator)
            if kappa is None:
                raise ConfigError("nmax sweeps need a Yukawa kernel")
            vals = vals or [1, 2, 3, 4]
            ref_k = yukawa_periodic(cfg.cell, float(kappa), int(opts.get("reference", max(vals) + 4)), tol=np.inf)
            make = lambda v: yukawa_periodic(cfg.cell, float(kappa), v, tol=np.inf)
        else:
            vals = vals or [8, 16, 32]
            ref_k = cfg.kernel(kind="fundamental")
            make = lambda v: fourier_oracle(cfg.operator, cfg.cell, v, levels=int(opts.get("levels", 3)))
        ref = ref_k.evaluate(pts)
        for v in vals:
            val = make(v).evaluate(pts)
            rows.append([v, float(val[0]), float(np.max(np.abs(val - ref)) / np.max(np.abs(ref)))])
    else:
        raise ConfigError(f"unknown sweep parameter {name!r} (resolution, nmax, zmax)")
    write_csv(out / "convergence.csv", [name, "value", "error"], rows)
    return EXIT_OK


COMMANDS = {"greens": cmd_greens, "potential": cmd_potential, "verify": cmd_verify, "norms": cmd_norms,
            "convergence": cmd_convergence}


def build_parser():
    p = argparse.ArgumentParser(prog="periodica", description="Periodic volume potentials and their checks.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--side", choices=["plus", "minus"])
    p.add_argument("--points", help="CSV file of evaluation points")
    p.add_argument("--deriv", help="axis j or multi-index b1,..,bn")
    p.add_argument("--suite", choices=sorted(SUITES))
    p.add_argument("--sweep", nargs="+", help="parameter and values, e.g. resolution 16..256")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except (ValueError, KeyError, TypeError) as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg, args, Path(args.out))
    except (ConfigError, QuadratureError, MarginError) as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
