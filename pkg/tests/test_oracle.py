"""Brute-force reference implementations are themselves checked against
closed-form facts: orthonormal orbitals, antisymmetry, particle-number sums.
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ggr.errors import CapExceeded
from ggr.expansion import TrialStateSpec
from ggr.fermi_polyhedron import FermiPolyhedron, build_polyhedron, lattice_points
from ggr.oracle import (
    brute_normalization,
    brute_reduced_density,
    orbital_matrix,
    slater,
)
from ggr.scattering import Potential, solve
from ggr.torus import Torus


@pytest.fixture(scope="module")
def torus6():
    return Torus(2.0, 6)


@pytest.fixture(scope="module")
def sol(torus6):
    return solve(Potential.hard_core(0.1), 0.5, torus6)


@pytest.fixture(scope="module")
def pf2():
    return FermiPolyhedron.from_points(
        np.array([[0, 0, 0], [1, 0, 0]]), 2.0, symmetric=False
    )


def test_orbital_matrix_entries(pf2):
    # rows are orbitals, columns positions; an asymmetric set keeps the
    # plane-wave gauge
    pos = np.array([[0.3, 0.1, 0.7], [1.1, 0.2, 0.4]])
    mat = orbital_matrix(pf2, pos)
    k = pf2.momenta()
    for j in range(2):
        for i in range(2):
            want = np.exp(1j * k[j] @ pos[i]) / 2.0**1.5
            assert_allclose(mat[j, i], want, rtol=1e-14)


def test_slater_single_orbital():
    pf = FermiPolyhedron.from_points(np.array([[0, 0, 0]]), 2.0)
    val = slater(pf, np.array([[0.4, 0.6, 0.8]]))
    assert_allclose(val, 2.0**-1.5, rtol=1e-14)


def test_slater_antisymmetry(pf2):
    pos = np.array([[0.3, 0.1, 0.7], [1.1, 0.2, 0.4]])
    swapped = pos[::-1].copy()
    assert_allclose(slater(pf2, swapped), -slater(pf2, pos), rtol=1e-14)
    same = np.array([[0.3, 0.1, 0.7], [0.3, 0.1, 0.7]])
    assert abs(slater(pf2, same)) < 1e-14


def test_slater_is_plain_determinant(pf2):
    # explicit 2x2 Leibniz expansion; squared integral is N!, so no 1/sqrt(N!)
    pos = np.array([[0.3, 0.1, 0.7], [1.1, 0.2, 0.4]])
    m = orbital_matrix(pf2, pos)
    want = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    assert_allclose(slater(pf2, pos), want, rtol=1e-13)


def test_free_normalization_is_factorial_product(pf2, torus6):
    free = solve(Potential.square_well(0.0, 0.1), 0.5, torus6)
    spec = TrialStateSpec(pf2, pf2, free, torus6)
    assert_allclose(brute_normalization(spec), 4.0, rtol=1e-12)


def test_single_spin_normalization(pf2, torus6, sol):
    # no opposite spin: only the same-spin pair factor depresses the norm
    empty = FermiPolyhedron.from_points(np.zeros((0, 3), dtype=int), 2.0)
    free = solve(Potential.square_well(0.0, 0.1), 0.5, torus6)
    assert_allclose(
        brute_normalization(TrialStateSpec(pf2, empty, free, torus6)), 2.0, rtol=1e-12
    )
    with_core = brute_normalization(TrialStateSpec(pf2, empty, sol, torus6))
    assert 0.0 < with_core < 2.0


def test_density_integrates_to_particle_number(torus6, sol):
    pf1 = FermiPolyhedron.from_points(np.array([[0, 0, 0]]), 2.0)
    spec = TrialStateSpec(pf1, pf1, sol, torus6)
    norm = brute_normalization(spec)
    total = sum(
        brute_reduced_density(spec, 1, 0, [x], normalization=norm) * torus6.weight
        for x in torus6.grid()
    )
    assert_allclose(total, 1.0, rtol=1e-12)


def test_density_on_grid_is_uniform(torus6, sol):
    pf1 = FermiPolyhedron.from_points(np.array([[0, 0, 0]]), 2.0)
    spec = TrialStateSpec(pf1, pf1, sol, torus6)
    rho = 1.0 / torus6.volume
    for x in (torus6.grid()[0], torus6.grid()[37], torus6.grid()[215]):
        got = brute_reduced_density(spec, 1, 0, [x])
        assert_allclose(got, rho, rtol=1e-10)


def test_normalization_reuse_matches(torus6, sol):
    pf1 = FermiPolyhedron.from_points(np.array([[0, 0, 0]]), 2.0)
    spec = TrialStateSpec(pf1, pf1, sol, torus6)
    x = [np.array([0.5, 0.5, 0.5])]
    norm = brute_normalization(spec)
    assert brute_reduced_density(spec, 1, 0, x, normalization=norm) == pytest.approx(
        brute_reduced_density(spec, 1, 0, x), rel=1e-14
    )


def test_dimension_cap(torus6, sol):
    pf = lattice_points(build_polyhedron(8), 1, 2.0)
    spec = TrialStateSpec(pf, pf, sol, torus6)
    with pytest.raises(CapExceeded):
        brute_normalization(spec)
