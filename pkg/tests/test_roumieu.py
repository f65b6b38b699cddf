import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from periodica.cell import make_cell, unit_sphere_measure
from periodica.density import ConstantDensity, TrigDensity
from periodica.kernels import synthetic_power_kernel
from periodica.roumieu import (
    ProbeInstance,
    acper_modulus,
    continuity_probe,
    kernel_class_norm,
    multi_indices,
    power_ball_integral,
    random_instances,
    roumieu_seminorm,
)
from periodica.quadrature import Ball


def grid(n, m=24):
    axes = [np.arange(m) / m] * n
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, n)


def sin1(cell):
    return TrigDensity(cell, [1] + [0] * (cell.dimension - 1), 1.0, -np.pi / 2)


def test_multi_indices():
    assert len(multi_indices(2, 3)) == 10
    assert len(multi_indices(3, 3)) == 20
    assert multi_indices(2, 1)[0] == (0, 0)


def test_constant_seminorm():
    est = roumieu_seminorm(ConstantDensity(2, -2.5), grid(2), 0.3)
    assert est.value == 2.5 and est.attaining_beta == (0, 0) and est.truncated


def test_sine_small_rho(cell2):
    est = roumieu_seminorm(sin1(cell2), grid(2), 0.1)
    assert est.value == pytest.approx(1.0, rel=1e-12) and est.attaining_beta == (0, 0)


def test_sine_rho_one(cell2):
    est = roumieu_seminorm(sin1(cell2), grid(2), 1.0)
    assert sum(est.attaining_beta) == 3
    assert est.value == pytest.approx((2 * np.pi) ** 3 / 6, rel=1e-3)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 2.0), st.floats(0.01, 2.0), st.integers(0, 3), st.integers(0, 3))
def test_monotone_in_rho_and_order(r1, r2, k1, k2):
    cell = make_cell([1.0, 1.0])
    u = TrigDensity(cell, [1, 2], 0.7, 0.3)
    pts = grid(2, 12)
    (ra, rb), (ka, kb) = sorted((r1, r2)), sorted((k1, k2))
    assert roumieu_seminorm(u, pts, ra, ka).value <= roumieu_seminorm(u, pts, rb, ka).value
    assert roumieu_seminorm(u, pts, ra, ka).value <= roumieu_seminorm(u, pts, ra, kb).value


def test_kernel_class_norm_zero_and_scaling(cell2):
    assert kernel_class_norm(synthetic_power_kernel(cell2, 0.5, 0.0), samples_per_axis=16) == 0.0
    a = kernel_class_norm(synthetic_power_kernel(cell2, 0.5, 1.0), samples_per_axis=16)
    b = kernel_class_norm(synthetic_power_kernel(cell2, 0.5, -3.0), samples_per_axis=16)
    assert b == pytest.approx(3 * a, rel=1e-12)


def test_kernel_class_norm_triangle(cell2, rng):
    for _ in range(5):
        h1 = synthetic_power_kernel(cell2, 0.5, rng.uniform(0.2, 2))
        h2 = synthetic_power_kernel(cell2, rng.uniform(0.2, 0.9), rng.uniform(-2, 2))
        lam = max(h1.lam, h2.lam)
        s = kernel_class_norm(h1 + h2, lam, samples_per_axis=16)
        assert s <= kernel_class_norm(h1, lam, samples_per_axis=16) + kernel_class_norm(h2, lam, samples_per_axis=16)


def test_laplace_class_norm_stable(ewald3):
    coarse = kernel_class_norm(ewald3, None, 0.05, 0.25, 3, 16)
    fine = kernel_class_norm(ewald3, None, 0.05, 0.25, 3, 32)
    assert np.isfinite(fine) and abs(fine - coarse) <= 0.01 * fine


def test_probe_zero_density_skipped(cell2):
    inst = ProbeInstance(synthetic_power_kernel(cell2, 0.5), ConstantDensity(2, 0.0), Ball([0.5, 0.5], 0.25), 0.08)
    res = continuity_probe([inst], 0.1, n_points=2, kernel_samples=16)
    assert res.C == 0.0 and len(res.skipped) == 1 and not res.bound_checks


def test_probe_scale_invariant(cell2):
    h = synthetic_power_kernel(cell2, 0.5)
    phi = TrigDensity(cell2, [1, 0], 1.0, 0.2)
    shape = Ball([0.5, 0.5], 0.25)
    pts = np.array([[0.5, 0.5], [0.55, 0.45]])
    a = continuity_probe([ProbeInstance(h, phi, shape, 0.08, points=pts)], 0.1, kernel_samples=16)
    b = continuity_probe([ProbeInstance(2 * h, 3 * phi, shape, 0.08, lam=0.5, points=pts)], 0.1, kernel_samples=16)
    assert b.C == pytest.approx(a.C, rel=1e-10)


def test_probe_bounds_random_2d():
    res = continuity_probe(random_instances(2, 10, seed=3), 0.1, n_points=3, kernel_samples=16)
    assert res.bound_checks and res.all_pass and res.C > 0


def test_acper_monotone_and_closed_form(cell3):
    h = synthetic_power_kernel(cell3, 1.0)
    deltas = [1e-2, 1e-4, 1e-8, 1e-10]
    out = acper_modulus(h, deltas, n_random=6, resolution=32)
    vals = [v for _, v in out]
    assert all(b <= a for a, b in zip(vals, vals[1:]))
    for d, v in out:
        r = (d / (4 * np.pi / 3)) ** (1 / 3)
        if d <= 1e-8:
            assert v == pytest.approx(power_ball_integral(3, 1.0, r), rel=1e-6)
        else:
            # r_p < |x| away from 0, so the synthetic kernel exceeds |x|^-lam
            assert v >= power_ball_integral(3, 1.0, r)


def test_acper_small_ball_closed_form_2d(cell2):
    h = synthetic_power_kernel(cell2, 0.7)
    (d, v), = acper_modulus(h, [1e-9], n_random=4, resolution=32)
    r = math.sqrt(d / np.pi)
    assert v == pytest.approx(unit_sphere_measure(2) * r ** 1.3 / 1.3, rel=1e-6)


def test_acper_literal_example(cell3):
    """Literal example: for delta = 1e-4 (n = 3, lambda = 1) the modulus is <= 1e-3.  Expected to fail:
    a ball of measure 1e-4 at the singularity already gives 2 pi r^2 = 5.2e-3."""
    (d, v), = acper_modulus(synthetic_power_kernel(cell3, 1.0), [1e-4], n_random=4, resolution=32)
    assert v <= 1e-3
