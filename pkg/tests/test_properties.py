import math

import numpy as np
from hypothesis import assume, given
from hypothesis import strategies as st

from dynhomog.dispersion import find_branches
from dynhomog.errors import NearPole, SingularSystem
from dynhomog.fields import reconstruct, uniform_grid
from dynhomog.homogenizer import apply_constitutive, effective_params, solve_eigenfields
from dynhomog.oracle import layer_propagator
from dynhomog.spectral import SpectralBasis, assemble, g_alpha, hermitian_defect, kernel_A, kernel_B
from dynhomog.unit_cell import ReferenceMedium, build_cell, discretize

positive = st.floats(0.2, 5.0)
layer = st.tuples(positive, positive, st.floats(0.1, 1.0))


@st.composite
def cells(draw, max_layers=3):
    layers = draw(st.lists(layer, min_size=2, max_size=max_layers))
    counts = draw(st.lists(st.integers(1, 4), min_size=len(layers), max_size=len(layers)))
    return discretize(build_cell(layers), counts)


@st.composite
def solved(draw):
    d = draw(cells())
    a = d.cell.period
    q = draw(st.floats(0.05, 1.0)) * math.pi / a
    omega = draw(st.floats(0.05, 3.0)) * d.ref.wave_speed * 2 * math.pi / a
    try:
        sys = assemble(d, SpectralBasis(8, a), omega, q)
        sol = solve_eigenfields(sys)
    except (NearPole, SingularSystem):
        assume(False)
    return d, sys, sol


@given(solved())
def test_assembled_blocks_hermitian(case):
    _, sys, _ = case
    assert hermitian_defect(sys.A_D) < 1e-12
    assert hermitian_defect(sys.A_rho) < 1e-12
    assert hermitian_defect(sys.B_bar) < 1e-12


@given(solved())
def test_parameters_real_and_coupling_conjugate(case):
    _, _, sol = case
    p = effective_params(sol)
    scale = max(abs(p.S1), math.sqrt(abs(p.D_bar * p.rho_bar)))
    assert abs(p.D_bar.imag) <= 1e-9 * abs(p.D_bar)
    assert abs(p.rho_bar.imag) <= 1e-9 * abs(p.rho_bar)
    assert abs(p.S1 - p.S2.conjugate()) <= 1e-9 * scale


@given(solved(), st.complex_numbers(max_magnitude=10), st.complex_numbers(max_magnitude=10))
def test_energy_is_real(case, sig, vel):
    _, _, sol = case
    p = effective_params(sol)
    e = apply_constitutive(p, sig, vel).energy
    bound = (abs(sig) ** 2 * abs(p.D_bar) + abs(vel) ** 2 * abs(p.rho_bar)
             + 2 * abs(sig) * abs(vel) * abs(p.S1))
    assert abs(e.imag) <= 1e-9 * max(bound, 1e-300)


@given(solved(), st.complex_numbers(max_magnitude=5), st.complex_numbers(max_magnitude=5))
def test_reconstruction_mean_equals_average(case, sig, vel):
    d, sys, sol = case
    basis = SpectralBasis(8, d.cell.period)
    prof = reconstruct(sol, d, basis, sig, vel, grid=uniform_grid(d.cell.period, 4 * basis.n_max + 1))
    assert abs(prof.average(prof.sigma) - sig) <= 1e-12 * max(1.0, np.abs(prof.sigma).max())
    assert abs(prof.average(prof.velocity) - vel) <= 1e-12 * max(1.0, np.abs(prof.velocity).max())


@given(cells())
def test_subregions_partition_the_cell(d):
    assert math.isclose(d.fractions.sum(), 1.0, rel_tol=1e-12)
    np.testing.assert_allclose(np.diff(d.edges), d.lengths, rtol=1e-12)
    assert math.isclose(d.edges[-1] - d.edges[0], d.cell.period, rel_tol=1e-12)


@given(st.floats(-3, 3), st.floats(1e-3, 2.0), st.floats(-200, 200))
def test_geometric_factor_bounded(center, length, xi):
    from dynhomog.unit_cell import Subregion

    assert abs(g_alpha(Subregion(center, length, length, 1.0, 1.0, 0), xi)) <= 1.0 + 1e-15


@given(st.integers(-20, 20).filter(bool), st.floats(0.01, 30.0), st.floats(0.0, math.pi), positive, positive)
def test_kernel_b_is_shifted_a(n, omega, q, rho0, D0):
    ref = ReferenceMedium(rho0, D0)
    xi = 2 * math.pi * n
    try:
        A = kernel_A(xi, omega, q, ref)
    except NearPole:
        assume(False)
    assert abs(kernel_B(xi, omega, q, ref) - (xi + q) * A) <= 1e-12 * abs((xi + q) * A)


@given(positive, positive, st.floats(0.01, 2.0), st.floats(0.0, 50.0))
def test_propagator_unimodular(rho, D, h, omega):
    assert abs(np.linalg.det(layer_propagator(rho, D, h, omega)) - 1.0) < 1e-9


@given(cells(max_layers=2), st.floats(0.1, 1.0))
def test_product_identity_on_branch(d, qfrac):
    q = qfrac * math.pi / d.cell.period
    try:
        (pt,) = find_branches(d, SpectralBasis.for_cell(d), q, 1)
    except (NearPole, SingularSystem):
        assume(False)
    assert abs(pt.D_eff * pt.rho_eff * pt.v_p ** 2 - 1.0) < 1e-8
