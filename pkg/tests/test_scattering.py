import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.integrate import simpson

from ggr.scattering import (
    Potential,
    ScatteringError,
    energy_integral,
    g_integrals,
    solve,
    solve_scattering,
)
from ggr.torus import Torus

TORUS = Torus(2.0, 8)

# (v0, R0) pairs spanning shallow to deep wells
WELLS = [(25.0, 0.12), (400.0, 0.08), (9.0, 0.3), (64.0, 0.2), (2.0, 0.45)]


def well_length(v0, R0):
    # transcendental closed form for the repulsive square well, kappa^2 = v0/2
    kap = np.sqrt(v0 / 2.0)
    return R0 * (1.0 - np.tanh(kap * R0) / (kap * R0))


@pytest.mark.parametrize("radius", [0.05, 0.1, 0.2])
def test_hard_core_length_is_radius(radius):
    ch = solve_scattering(Potential.hard_core(radius), "s")
    assert_allclose(ch.length, radius, rtol=1e-12)
    chp = solve_scattering(Potential.hard_core(radius), "p")
    assert_allclose(chp.length, radius, rtol=1e-12)


@pytest.mark.parametrize("v0,R0", WELLS)
def test_square_well_closed_form(v0, R0):
    ch = solve_scattering(Potential.square_well(v0, R0), "s")
    assert_allclose(ch.length, well_length(v0, R0), rtol=1e-10)


@pytest.mark.parametrize("v0,R0", WELLS)
def test_energy_integral_identity(v0, R0):
    sol = solve(Potential.square_well(v0, R0), 0.5, TORUS)
    got = energy_integral(sol, "s", "1") * (1.0 - sol.a / sol.b) ** 2 / (4.0 * np.pi)
    assert_allclose(got, sol.a, rtol=1e-8)


def test_energy_integral_hard_core_exact():
    sol = solve(Potential.hard_core(0.1), 0.5, TORUS)
    assert_allclose(energy_integral(sol, "s", "1"),
                    4.0 * np.pi * 0.1 / (1.0 - 0.1 / 0.5) ** 2, rtol=1e-13)


def test_energy_integral_p_channel():
    for pot in (Potential.hard_core(0.1), Potential.square_well(64.0, 0.2)):
        sol = solve(pot, 0.5, TORUS)
        want = 12.0 * np.pi * sol.a_p**3 * sol.cp**2
        assert_allclose(energy_integral(sol, "p", "x2"), want, rtol=1e-10)
    with pytest.raises(ValueError):
        energy_integral(sol, "s", "x2")


@pytest.mark.parametrize("pot", [Potential.hard_core(0.1),
                                 Potential.square_well(25.0, 0.12),
                                 Potential.square_well(400.0, 0.08)])
def test_profile_sandwich(pot):
    # uncut s-profile sits between the hard-sphere solution and 1
    ch = solve_scattering(pot, "s")
    r = np.linspace(1e-6, 3 * pot.R0, 2000)
    f0 = ch.f0(r)
    lower = np.maximum(0.0, 1.0 - ch.length / r)
    assert np.all(f0 <= 1.0 + 1e-12)
    assert np.all(f0 >= lower - 1e-10)
    assert np.all(np.diff(f0) >= -1e-12)


def test_cutoff_profile_shape():
    sol = solve(Potential.hard_core(0.1), 0.5, TORUS)
    r = np.linspace(1e-4, 1.0, 1500)
    f = sol.f("s", r)
    g = sol.g("s", r)
    assert_allclose(sol.cs, 1.0 / (1.0 - sol.a / sol.b), rtol=1e-14)
    assert np.all(f[r >= sol.b] == 1.0)
    assert np.all(g[r >= sol.b] == 0.0)
    assert np.all(g >= -1.0 - 1e-12)
    assert np.all(g <= 1e-12)
    assert np.all(f[r < 0.1] == 0.0)
    # continuity at the cutoff from below
    assert abs(sol.f("s", sol.b - 1e-9) - 1.0) < 1e-6


def test_f_prime_is_scaled_derivative():
    sol = solve(Potential.square_well(25.0, 0.12), 0.5, TORUS)
    h = 1e-6
    for r in (0.05, 0.09, 0.2, 0.4):
        fd = (sol.f("s", r + h) - sol.f("s", r - h)) / (2 * h)
        assert_allclose(sol.f_prime("s", r), fd, rtol=2e-5, atol=1e-9)


def test_zero_potential_trivial():
    sol = solve(Potential.zero(), 0.5, TORUS)
    r = np.linspace(0.0, 1.0, 100)
    assert sol.a == 0.0 and sol.a_p == 0.0
    assert_allclose(sol.f("s", r), 1.0)
    assert_allclose(sol.g("p", r), 0.0)
    assert energy_integral(sol, "s", "1") == 0.0


def test_tabulated_matches_square_well():
    v0, R0 = 25.0, 0.12
    r = np.linspace(0.0, R0, 4001)
    tab = Potential.tabulated(r, np.full_like(r, v0))
    a_tab = solve_scattering(tab, "s").length
    assert_allclose(a_tab, well_length(v0, R0), rtol=1e-6)


def test_g_integrals_magnitudes():
    sol = solve(Potential.hard_core(0.1), 0.5, TORUS)
    vals = g_integrals(sol)
    assert set(vals) == {"I_gs", "I_gp", "I_fs_grad", "I_fp_grad"}
    # independent quadrature of |g_s| over the support
    r = np.linspace(0.0, sol.b, 20001)
    want = 4.0 * np.pi * simpson(np.abs(sol.g("s", r)) * r**2, x=r)
    assert_allclose(vals["I_gs"], want, rtol=1e-6)
    assert all(v > 0 for v in vals.values())


def test_construction_errors():
    with pytest.raises(ValueError):
        Potential.square_well(-1.0, 0.1)
    with pytest.raises(ValueError):
        Potential.hard_core(0.0)
    with pytest.raises(ValueError):
        solve(Potential.hard_core(0.1), 0.05, TORUS)  # b inside the core
    with pytest.raises(ValueError):
        solve(Potential.hard_core(0.1), 1.5, TORUS)  # b beyond half the box
