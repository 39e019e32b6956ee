import math

import numpy as np
import pytest

from dynhomog.fields import (
    consistency_residual,
    local_residuals,
    reconstruct,
    rms_mismatch,
    subregion_averages,
    subregion_grid,
    uniform_grid,
)
from dynhomog.homogenizer import solve_eigenfields
from dynhomog.oracle import exact_dispersion, mode_shape
from dynhomog.spectral import SpectralBasis, assemble
from dynhomog.unit_cell import ReferenceMedium, build_cell, discretize

BILAYER = build_cell([(1, 1, 0.5), (4, 1 / 16, 0.5)])


def _solve(cell, counts, n_max, omega, q, ref=None):
    d = discretize(cell, counts, ref)
    basis = SpectralBasis(n_max, cell.period)
    return d, basis, solve_eigenfields(assemble(d, basis, omega, q))


def test_grids():
    d = discretize(BILAYER, [2, 3])
    x, w = subregion_grid(d, 4)
    assert x.size == 20 and w.sum() == pytest.approx(1.0)
    assert np.all(np.diff(x) > 0)
    x, w = uniform_grid(1.0, 8)
    assert x[0] == -0.5 and w.sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        subregion_grid(d, 0)
    with pytest.raises(ValueError):
        uniform_grid(1.0, 0)


def test_homogeneous_cell_gives_flat_exact_fields():
    cell = build_cell([(2.0, 0.5, 1.0)])
    q = 0.9
    omega = q  # c = 1
    d, basis, sol = _solve(cell, [4], 8, omega, q, ReferenceMedium(1.0, 1.0))
    sig = 1.0
    vel = -q * sig / (omega * 2.0)
    prof = reconstruct(sol, d, basis, sig, vel)
    np.testing.assert_allclose(prof.sigma, sig, atol=1e-12)
    np.testing.assert_allclose(prof.velocity, vel, atol=1e-12)
    rm, rk = local_residuals(prof)
    assert rm < 1e-10 and rk < 1e-10
    assert max(consistency_residual(prof, d)) < 1e-10


def test_uniform_grid_mean_is_prescribed_average():
    d, basis, sol = _solve(BILAYER, [6, 6], 10, 2.3, 1.2)
    x, w = uniform_grid(1.0, 4 * basis.n_max + 1)
    prof = reconstruct(sol, d, basis, 0.7 - 0.2j, 1.1j, grid=(x, w))
    assert abs(prof.average(prof.sigma) - (0.7 - 0.2j)) < 1e-13
    assert abs(prof.average(prof.velocity) - 1.1j) < 1e-13


def test_subregion_averages_match_fine_reconstruction():
    d, basis, sol = _solve(BILAYER, [3, 3], 8, 1.7, 0.6)
    sig_avg, vel_avg = 1.0, 0.3 + 0.1j
    sig_sub, vel_sub = subregion_averages(sol, sig_avg, vel_avg)
    # each Fourier term integrates exactly, so many midpoints converge fast
    prof = reconstruct(sol, d, basis, sig_avg, vel_avg, grid=subregion_grid(d, 400))
    s = prof.sigma.reshape(d.n_subregions, -1).mean(axis=1)
    v = prof.velocity.reshape(d.n_subregions, -1).mean(axis=1)
    np.testing.assert_allclose(s, sig_sub, atol=2e-4 * np.abs(sig_sub).max())
    np.testing.assert_allclose(v, vel_sub, atol=2e-4 * np.abs(vel_sub).max())


def _oracle_mismatch(counts, n_max, qa, branch=0):
    w = exact_dispersion(BILAYER, qa, branch + 1)[branch]
    mode = mode_shape(BILAYER, qa, w)
    d, basis, sol = _solve(BILAYER, counts, n_max, w, qa)
    prof = reconstruct(sol, d, basis, mode.sigma_avg, mode.velocity_avg)
    _, sig_ex, vel_ex, _, _ = mode.evaluate(prof.x)
    return max(rms_mismatch(prof.sigma, sig_ex, prof.weights), rms_mismatch(prof.velocity, vel_ex, prof.weights))


@pytest.mark.parametrize("qa", [0.5, 1.5, math.pi])
def test_first_branch_fields_match_exact_mode(qa):
    assert _oracle_mismatch([15, 15], 15, qa) < 0.03


def test_field_error_decreases_with_refinement():
    coarse = _oracle_mismatch([3, 3], 6, 1.2)
    fine = _oracle_mismatch([12, 12], 12, 1.2)
    assert fine < coarse


def test_residuals_decrease_with_refinement():
    vals = []
    for n in (3, 12):
        d, basis, sol = _solve(BILAYER, [n, n], max(10, n), 2.0, 1.0)
        prof = reconstruct(sol, d, basis, 1.0, 0.4)
        vals.append(max(consistency_residual(prof, d)))
    assert vals[1] < vals[0]


def test_rms_mismatch():
    w = np.full(4, 0.25)
    assert rms_mismatch([1, 1, 1, 1], [1, 1, 1, 1], w) == 0.0
    assert rms_mismatch([2, 2, 2, 2], [1, 1, 1, 1], w) == pytest.approx(1.0)
