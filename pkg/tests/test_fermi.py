import itertools
from fractions import Fraction

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.spatial import ConvexHull

from ggr.fermi_polyhedron import (
    FermiPolyhedron,
    PolyhedronError,
    build_polyhedron,
    dirichlet_l1,
    free_kinetic_reference,
    from_text,
    kinetic_energy,
    lattice_points,
    octant_directions,
    to_text,
)
from ggr.torus import Torus


def corner_coordinates(unit):
    return unit.numerators / np.asarray(unit.primes, dtype=float) * unit.zeta


@pytest.mark.parametrize("s", [8, 16, 64])
def test_unit_volume_normalized(s):
    unit = build_polyhedron(s)
    hull = ConvexHull(corner_coordinates(unit))
    assert_allclose(hull.volume, 4.0 * np.pi / 3.0, rtol=1e-9)


def exhaustive_count(unit, ratio, L):
    """Independent fill: test every integer triple in the bounding box against
    the face inequalities evaluated in float with a tight margin."""
    corners = corner_coordinates(unit) * float(ratio)
    hi = int(np.floor(np.max(np.abs(corners)))) + 1
    pts = []
    t = float(ratio) * unit.zeta
    for n in itertools.product(range(-hi, hi + 1), repeat=3):
        ok = True
        for h, c in unit.faces:
            lhs = h[0] * n[0] + h[1] * n[1] + h[2] * n[2]
            if lhs > float(c) * t * (1 + 1e-12) + 1e-9:
                ok = False
                break
        if ok:
            pts.append(n)
    return len(pts)


@pytest.mark.parametrize("s,ratio", [(8, Fraction(2)), (8, Fraction(3)),
                                     (16, Fraction(2)), (64, Fraction(39, 10))])
def test_lattice_count_matches_exhaustive_scan(s, ratio):
    unit = build_polyhedron(s)
    pf = lattice_points(unit, ratio, 2.0)
    assert pf.N == exhaustive_count(unit, ratio, 2.0)


def test_default_box_count_frozen():
    # sentinel: the 8-corner hull at ratio 2 holds 35 modes
    pf = lattice_points(build_polyhedron(8), Fraction(2), 2.0)
    assert pf.N == 35
    assert pf.rho == 35 / 8.0


def test_points_inversion_symmetric():
    pf = lattice_points(build_polyhedron(16), Fraction(3), 2.0)
    have = {tuple(p) for p in pf.points}
    assert pf.symmetric
    for p in have:
        assert (-p[0], -p[1], -p[2]) in have
    assert len(have) == pf.N  # no duplicates


def test_count_grows_with_ratio():
    unit = build_polyhedron(8)
    counts = [lattice_points(unit, Fraction(r), 2.0).N for r in (1, 2, 3, 4)]
    assert counts == sorted(counts)
    assert counts[0] >= 1 and counts[-1] > counts[0]


def test_kinetic_reference_at_scale():
    # one mid-size box: the filled hull tracks the continuum Fermi sea
    pf = lattice_points(build_polyhedron(64), Fraction(6), 2.0)
    ratio = kinetic_energy(pf) / free_kinetic_reference(pf)
    assert pf.N == 933
    assert abs(ratio - 1.0) < 0.01


def test_kinetic_energy_is_plain_sum():
    pf = FermiPolyhedron.from_points([[0, 0, 0], [1, 0, 0], [-1, 0, 0]], 2.0)
    k2 = (2 * np.pi / 2.0) ** 2
    assert_allclose(kinetic_energy(pf), 2 * k2)


def test_text_roundtrip():
    pf = lattice_points(build_polyhedron(8), Fraction(5, 2), 2.0)
    pf2 = from_text(to_text(pf))
    assert np.array_equal(pf.points, pf2.points)
    assert pf2.L == pf.L and pf2.kf_ratio == pf.kf_ratio
    assert to_text(pf2) == to_text(pf)


def test_dirichlet_report():
    pf = lattice_points(build_polyhedron(8), Fraction(2), 2.0)
    rep = dirichlet_l1(pf, Torus(2.0, 14))
    assert 0 < rep.value < rep.reference


def test_octant_directions_unit_norm():
    od = octant_directions(7)
    assert od.shape == (7, 3)
    assert_allclose(np.linalg.norm(od, axis=1), 1.0, rtol=1e-12)
    assert np.all(od > 0)


def test_from_points_symmetry_detection():
    sym = FermiPolyhedron.from_points([[0, 0, 0], [1, 0, 0], [-1, 0, 0]], 2.0)
    assert sym.symmetric
    asym = FermiPolyhedron.from_points([[0, 0, 0], [1, 0, 0]], 2.0)
    assert not asym.symmetric
    empty = FermiPolyhedron.from_points(np.zeros((0, 3)), 2.0)
    assert empty.N == 0


def test_build_errors():
    with pytest.raises(ValueError):
        build_polyhedron(12)  # not a multiple of 8
    with pytest.raises(ValueError):
        build_polyhedron(0)
    with pytest.raises(PolyhedronError):
        # inversion-asymmetric set flagged at construction when claimed symmetric
        FermiPolyhedron(L=2.0, points=np.array([[0, 0, 0], [1, 0, 0]]), symmetric=True)
