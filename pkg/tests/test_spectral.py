import cmath
import math

import numpy as np
import pytest
from scipy.integrate import quad

from dynhomog.errors import NearPole
from dynhomog.spectral import (
    SpectralBasis,
    assemble,
    g_alpha,
    geometry_matrix,
    hermitian_defect,
    kernel_A,
    kernel_B,
    reference_poles,
)
from dynhomog.unit_cell import ReferenceMedium, Subregion, build_cell, discretize

UNIT = ReferenceMedium(1.0, 1.0)  # nu = omega


def _sub(center, length):
    return Subregion(center, length, length, 1.0, 1.0, 0)


def _quad_average(center, length, xi):
    lo, hi = center - length / 2, center + length / 2
    re = quad(lambda x: math.cos(xi * x), lo, hi, epsabs=1e-14)[0]
    im = quad(lambda x: math.sin(xi * x), lo, hi, epsabs=1e-14)[0]
    return complex(re, im) / length


def test_basis_is_symmetric_and_interleaved():
    xi = SpectralBasis(3, 2.0).xi
    np.testing.assert_allclose(xi, [np.pi, -np.pi, 2 * np.pi, -2 * np.pi, 3 * np.pi, -3 * np.pi])
    assert len(xi) == 6 and 0.0 not in xi
    with pytest.raises(ValueError):
        SpectralBasis(0, 1.0)


def test_g_alpha_examples():
    assert g_alpha(_sub(0.0, 0.5), 2 * np.pi) == pytest.approx(2 / np.pi, rel=1e-14)
    assert g_alpha(_sub(0.3, 0.2), 0.0) == 1.0
    assert abs(g_alpha(_sub(0.0, 1.0), 2 * np.pi)) < 1e-16


@pytest.mark.parametrize("center,length,xi", [(0.1, 0.3, 2 * np.pi), (-0.37, 0.05, -14 * np.pi), (0.25, 0.5, 6 * np.pi)])
def test_g_alpha_matches_quadrature(center, length, xi):
    assert g_alpha(_sub(center, length), xi) == pytest.approx(_quad_average(center, length, xi), abs=1e-12)


def test_kernel_examples():
    A = kernel_A(2 * np.pi, 1.0, 0.0, UNIT)
    assert A.real == pytest.approx(1 / (1 - 4 * np.pi**2), rel=1e-14)
    assert A.real == pytest.approx(-0.0259886, abs=5e-8)
    B = kernel_B(2 * np.pi, 1.0, 0.0, UNIT)
    assert B.real == pytest.approx(2 * np.pi * A.real, rel=1e-15)
    assert B.real == pytest.approx(-0.163291, abs=5e-7)
    # xi + q = 0
    assert kernel_A(-0.7, 1.3, 0.7, UNIT) == 1.0
    assert kernel_B(-0.7, 1.3, 0.7, UNIT) == 0.0


def test_kernel_pole_raises():
    with pytest.raises(NearPole):
        kernel_A(2 * np.pi, 2 * np.pi + 0.1, 0.1, UNIT)
    assert np.isfinite(kernel_A(2 * np.pi, 2 * np.pi + 0.1 + 1e-3, 0.1, UNIT))


def _brute_force_AD(dcell, n_max, omega, q):
    """Term-by-term double sum over the definition, no shared helpers."""
    a = dcell.cell.period
    rho0, D0 = dcell.ref.density, dcell.ref.compliance
    nu2 = omega * omega * rho0 * D0
    subs = [s for s, act in zip(dcell.subregions, dcell.active_sigma) if act]
    n = len(subs)
    M = np.zeros((n, n), dtype=complex)
    for i, sa in enumerate(subs):
        for j, sb in enumerate(subs):
            total = 0j
            for k in range(1, n_max + 1):
                for xi in (2 * math.pi * k / a, -2 * math.pi * k / a):
                    A = nu2 / (nu2 - (xi + q) ** 2)
                    ga = cmath.exp(1j * xi * sa.center) * math.sin(xi * sa.length / 2) / (xi * sa.length / 2)
                    gb = cmath.exp(-1j * xi * sb.center) * math.sin(-xi * sb.length / 2) / (-xi * sb.length / 2)
                    total += sa.fraction * ga * sb.fraction * gb * A
            M[i, j] = total
            if i == j:
                M[i, j] += sa.fraction * D0 / (sa.compliance - D0)
    return M


def test_assembly_matches_brute_force_double_sum():
    cell = build_cell([(1, 1, 0.5), (4, 1 / 16, 0.5)])
    d = discretize(cell, [2, 2])
    sys = assemble(d, SpectralBasis(4, 1.0), 0.1, 0.1)
    np.testing.assert_allclose(sys.A_D, _brute_force_AD(d, 4, 0.1, 0.1), rtol=1e-12, atol=1e-15)


def test_assembled_matrices_are_hermitian():
    cell = build_cell([(1, 1, 0.3), (4, 0.2, 0.45), (2, 0.6, 0.25)])
    d = discretize(cell, [3, 4, 2])
    sys = assemble(d, SpectralBasis(8, 1.0), 2.3, 1.1)
    for M in (sys.A_D, sys.A_rho, sys.B_bar, sys.A_bar):
        assert hermitian_defect(M) < 1e-12
    assert hermitian_defect(sys.block_matrix()) > 1e-3  # the coupled matrix itself is not


def test_geometry_is_material_independent():
    c1 = build_cell([(1, 1, 0.5), (4, 1 / 16, 0.5)])
    c2 = build_cell([(3, 0.2, 0.5), (1, 2.0, 0.5)])
    basis = SpectralBasis(6, 1.0)
    d1, d2 = discretize(c1, [3, 3]), discretize(c2, [3, 3], ReferenceMedium(2.5, 0.53125))
    np.testing.assert_array_equal(geometry_matrix(d1, basis), geometry_matrix(d2, basis))
    s1 = assemble(d1, basis, 0.7, 0.4)
    s2 = assemble(d2, basis, 0.7, 0.4)
    np.testing.assert_allclose(s1.A_bar, s2.A_bar, rtol=1e-15)
    np.testing.assert_allclose(s1.B_bar, s2.B_bar, rtol=1e-15)


def test_truncation_differences_shrink():
    cell = build_cell([(1, 1, 0.5), (4, 1 / 16, 0.5)])
    d = discretize(cell, [3, 3])
    mats = {n: assemble(d, SpectralBasis(n, 1.0), 1.3, 0.6).A_D for n in (4, 8, 16, 32, 64)}
    diffs = [np.abs(mats[n] - mats[2 * n]).max() for n in (4, 8, 16, 32)]
    assert all(b < a for a, b in zip(diffs, diffs[1:]))


def test_trivial_system_flag():
    d = discretize(build_cell([(2, 0.5, 1)]), [3])
    sys = assemble(d, SpectralBasis(4, 1.0), 1.0, 0.5)
    assert sys.trivial and sys.A_D.shape == (0, 0)


def test_reference_poles():
    ref = ReferenceMedium(4.0, 1.0)  # c0 = 0.5
    poles = reference_poles(ref, SpectralBasis(2, 1.0), 1.0)
    np.testing.assert_allclose(poles, 0.5 * np.sort(np.abs(np.array([2, -2, 4, -4]) * np.pi + 1.0)))


def test_assemble_rejects_non_positive_frequency():
    d = discretize(build_cell([(1, 1, 0.5), (2, 2, 0.5)]), [1, 1])
    with pytest.raises(ValueError):
        assemble(d, SpectralBasis(2, 1.0), 0.0, 0.5)
