import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from periodica.cell import dist_to_lattice, make_cell
from periodica.kernels import (
    TruncationError,
    estimate_norms,
    fourier_oracle,
    free_yukawa,
    laplace_periodic_ewald,
    synthetic_power_kernel,
    yukawa_periodic,
)
from periodica.symbol import laplace, modified_helmholtz


def away(rng, cell, count, dmin):
    x = rng.uniform(-0.5, 0.5, (20 * count, cell.dimension)) * cell.q
    return x[dist_to_lattice(cell, x) >= dmin][:count]


def fd_laplacian(h, x, step=1e-3):
    n = x.shape[1]
    out = np.zeros(x.shape[0])
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        g = tuple(int(i == j) for i in range(n))
        out += (-h.derivative(x + 2 * e, g) + 8 * h.derivative(x + e, g)
                - 8 * h.derivative(x - e, g) + h.derivative(x - 2 * e, g)) / (12 * step)
    return out


def dyadic(rng, count, n, lo=-3, hi=3):
    # multiples of 2^-10: shifting by a period and folding are exact
    return rng.integers(lo * 1024, hi * 1024, (count, n)) / 1024.0


def test_synthetic_periodic(cell3, rng):
    h = synthetic_power_kernel(cell3, 1.3, 2.0)
    x = dyadic(rng, 1000, 3)
    x = x[dist_to_lattice(cell3, x) > 0]
    assert np.array_equal(h(x), h(x + np.array([1.0, 0, 0])))


def test_synthetic_a0_limit_contribution(cell3):
    # near 0 the weighted ratio r_p^-lam |x|^lam -> scale
    from periodica.kernels import shell_sup

    h = synthetic_power_kernel(cell3, 1.0, 3.0)
    est = estimate_norms(h)
    assert est.a0_norm >= 3.0
    assert shell_sup(h, 1e-4, 1.0) == pytest.approx(3.0, rel=1e-6)
    assert estimate_norms(synthetic_power_kernel(cell3, 1.0, 0.0)).a0_norm == 0.0


def test_synthetic_a0_closed_form(cell3):
    # sin t <= t makes r_p <= |x|; the ratio peaks at the cell corner x = q/2 where it is (pi/2)^lam
    for lam in (0.5, 1.0, 2.0):
        h = synthetic_power_kernel(cell3, lam, 3.0)
        assert estimate_norms(h).a0_norm == pytest.approx(3.0 * (np.pi / 2) ** lam, rel=1e-12)


def test_synthetic_a0_tends_to_scale(cell3):
    """Literal claim: a0_norm -> 3 (1 + o(1)) under shell refinement.  Expected to fail: the sup sits at
    the cell corner, not at 0 (see test_synthetic_a0_closed_form)."""
    coarse = estimate_norms(synthetic_power_kernel(cell3, 1.0, 3.0), 16, 6).a0_norm
    fine = estimate_norms(synthetic_power_kernel(cell3, 1.0, 3.0), 64, 16).a0_norm
    assert abs(fine - 3.0) <= abs(coarse - 3.0)
    assert fine == pytest.approx(3.0, rel=1e-3)


def test_synthetic_taylor(cell2):
    # r_p(x) = |x| (1 + O(|x|^2))
    h = synthetic_power_kernel(cell2, 1.0)
    for r in (1e-2, 1e-3, 1e-4):
        x = np.array([[r * 0.6, r * 0.8]])
        assert abs(h.r_p(x)[0] / r - 1) <= 2 * r * r


def test_derivatives_match_fd(cell3, ewald3, rng):
    x = away(rng, cell3, 40, 0.2)
    h = 1e-4
    for K in (ewald3, synthetic_power_kernel(cell3, 1.3, 2.0)):
        for gam in [(1, 1, 0), (2, 0, 1), (1, 1, 1), (3, 0, 0)]:
            j = next(i for i in range(3) if gam[i])
            lower = list(gam)
            lower[j] -= 1
            e = np.eye(3)[j] * h
            fd = (K.derivative(x + e, lower) - K.derivative(x - e, lower)) / (2 * h)
            an = K.derivative(x, gam)
            assert np.max(np.abs(fd - an)) / np.max(np.abs(an)) < 1e-6


def test_ewald_laplacian(cell3, ewald3, rng):
    x = away(rng, cell3, 50, 0.2)
    assert np.max(np.abs(fd_laplacian(ewald3, x) + 1.0)) <= 1e-5


def test_ewald_eta_invariance(cell3, ewald3, rng):
    other = laplace_periodic_ewald(cell3, 1.5 * ewald3.eta)
    x = away(rng, cell3, 50, 0.05)
    assert np.max(np.abs(ewald3(x) - other(x))) <= 1e-10


def test_ewald_truncation_diagnostic(cell3):
    with pytest.raises(TruncationError, match="suggested radii"):
        laplace_periodic_ewald(cell3, nrecip=2)


def test_ewald_2d_laplacian(cell2, rng):
    S = laplace_periodic_ewald(cell2)
    x = away(rng, cell2, 30, 0.2)
    assert np.max(np.abs(fd_laplacian(S, x) + 1.0)) <= 1e-5


def test_yukawa_helmholtz_residual(cell3, yukawa3, rng):
    x = away(rng, cell3, 30, 0.2)
    res = fd_laplacian(yukawa3, x) - 4.0 * yukawa3(x)
    assert np.max(np.abs(res)) / np.max(np.abs(yukawa3(x))) <= 1e-5


def test_yukawa_large_kappa_free_space(cell3, rng):
    Y = yukawa_periodic(cell3, 20.0)
    free = free_yukawa(3, 20.0)
    v = rng.normal(size=(50, 3))
    x = v / np.linalg.norm(v, axis=1)[:, None] * rng.uniform(0.01, 0.2, (50, 1))
    assert np.max(np.abs(Y(x) - free(x)) / np.abs(free(x))) <= 1e-6


@pytest.mark.parametrize("gamma", [(0, 0, 0), (1, 0, 0), (0, 2, 0), (1, 1, 1)])
def test_yukawa_far_field_matches_direct_sum(cell3, yukawa3, rng, gamma):
    # every image in the window summed term by term
    from periodica import _radial
    from periodica.cell import lattice_window

    x = rng.random((40, 3)) - 0.5
    idx = _radial.axes_of(gamma)
    ref = np.zeros(len(x))
    for shift in lattice_window(cell3, yukawa3.nmax) * cell3.q:
        y = x + shift
        r = np.linalg.norm(y, axis=1)
        ref += _radial.radial_partial(y, r, yukawa3.profile.derivs(r, len(idx)), idx)
    assert yukawa3.nmax > 1 and yukawa3.truncation_error <= 1e-12
    assert np.max(np.abs(yukawa3.derivative(x, gamma) - ref)) <= 1e-11 * np.max(np.abs(ref))


def test_yukawa_truncation_error(cell3):
    with pytest.raises(TruncationError, match="minimal sufficient nmax"):
        yukawa_periodic(cell3, 2.0, nmax=2)


def test_oracle_real_and_periodic(cell2, rng):
    F = fourier_oracle(modified_helmholtz(2, 1.0), cell2, 32, levels=2)
    x = dyadic(rng, 50, 2, 0, 1)
    assert np.max(F.imag_residue(x)) <= 1e-13
    assert np.array_equal(F(x), F(x + np.array([1.0, 0.0])))


def test_oracle_matches_ewald_2d(cell2, rng):
    S = laplace_periodic_ewald(cell2)
    F = fourier_oracle(laplace(2), cell2, 64, levels=3)
    x = away(rng, cell2, 30, 0.25)
    assert np.max(np.abs(S(x) - F(x))) / np.max(np.abs(S(x))) <= 1e-5


def test_laplace_decay_ratio(ewald3):
    est = estimate_norms(ewald3)
    assert np.isfinite(est.a0_norm) and 1.0 <= est.refinement_ratio <= 1.05


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 1.9), st.floats(0.1, 5.0))
def test_synthetic_homogeneity(lam, scale):
    cell = make_cell([1.0, 1.0])
    x = np.array([[0.1, 0.2], [0.3, -0.4], [0.45, 0.05]])
    a = synthetic_power_kernel(cell, lam, scale)
    b = synthetic_power_kernel(cell, lam, 1.0)
    assert np.allclose(a(x), scale * b(x), rtol=1e-14)
    assert a.singular_power() == lam
    assert a.partial(0).singular_power() == lam + 1


def test_singular_power_registration(cell2, cell3, ewald3):
    assert ewald3.singular_power() == 1.0
    assert ewald3.singular_power((1, 0, 0)) == 2.0
    S2 = laplace_periodic_ewald(cell2)
    assert S2.singular_power() is None  # logarithmic
    assert S2.singular_power((0, 1)) == 1.0
