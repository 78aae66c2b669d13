import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose

from ggr.torus import GridFunction, Torus, periodic_delta, periodic_distance, plane_wave, quadrature


def brute_min_image(dx, L):
    # exhaustive image search over a generous shell
    best = None
    for n in itertools.product(range(-2, 3), repeat=3):
        cand = np.asarray(dx, dtype=float) + L * np.asarray(n, dtype=float)
        if best is None or np.dot(cand, cand) < np.dot(best, best):
            best = cand
    return best


def test_min_image_matches_exhaustive_search():
    x = np.array([0.1, 0.2, 0.3])
    y = np.array([0.9, 0.9, 0.9])
    got = periodic_delta(x - y, 1.0)
    want = brute_min_image(x - y, 1.0)
    assert_allclose(got, want, atol=1e-14)
    assert_allclose(periodic_distance(x, y, Torus(1.0, 4)), np.linalg.norm(want))


def test_min_image_randomized():
    rng = np.random.default_rng(7)
    for _ in range(200):
        L = float(rng.uniform(0.5, 3.0))
        dx = rng.uniform(-2 * L, 2 * L, size=3)
        got = periodic_delta(dx, L)
        want = brute_min_image(dx, L)
        assert_allclose(np.dot(got, got), np.dot(want, want), rtol=1e-12)
        assert np.all(np.abs(got) <= L / 2 + 1e-12)


def test_grid_shape_and_weight():
    t = Torus(2.0, 6)
    g = t.grid()
    assert g.shape == (216, 3)
    assert t.n_points == 216
    assert_allclose(t.weight * t.n_points, t.volume)
    # first axis varies slowest, matching the flat index convention
    assert_allclose(g[0], [0.0, 0.0, 0.0])
    assert_allclose(g[1], [0.0, 0.0, 2.0 / 6])


@pytest.mark.parametrize("M", [4, 5, 8])
def test_plane_wave_orthonormality(M):
    t = Torus(1.5, M)
    g = t.grid()
    for n in ([0, 0, 0], [1, 0, 0], [1, 2, -1]):
        k = t.momentum(n)
        vals = plane_wave(k, g, t.L)
        # normalised: integral of |pw|^2 over the box is 1
        assert_allclose(np.sum(vals * np.conj(vals)).real * t.weight, 1.0, rtol=1e-12)
        if any(v % M for v in n):
            assert abs(np.sum(vals) * t.weight) < 1e-10


def test_plane_wave_rejects_off_lattice():
    with pytest.raises(ValueError):
        plane_wave([0.1, 0.0, 0.0], np.zeros(3), 2.0)


def test_quadrature_constant_and_mode():
    t = Torus(2.0, 8)
    f = GridFunction(t, np.ones(t.n_points))
    assert_allclose(quadrature(f), t.volume, rtol=1e-13)
    k = t.momentum([2, 1, 0])
    f2 = GridFunction(t, plane_wave(k, t.grid(), t.L))
    assert abs(quadrature(f2)) < 1e-10


def test_momentum_lattice_index_roundtrip():
    t = Torus(2.0, 5)
    for n in ([0, 0, 0], [3, -2, 1], [7, 0, -4]):
        assert np.array_equal(t.lattice_index(t.momentum(n)), n)
    with pytest.raises(ValueError):
        t.lattice_index([0.1, 0.0, 0.0])


def test_bad_construction():
    with pytest.raises(ValueError):
        Torus(-1.0, 8)
    with pytest.raises(ValueError):
        Torus(1.0, 1)
