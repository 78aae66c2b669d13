"""Shared fixtures: one small torus, one hard-core solution, one momentum set.

Everything here is session-scoped; tests that need other parameters build
their own objects locally.
"""
from fractions import Fraction

import pytest

from ggr.evaluation import KernelSet
from ggr.expansion import TrialStateSpec
from ggr.fermi_polyhedron import build_polyhedron, lattice_points
from ggr.scattering import Potential, solve
from ggr.torus import Torus


@pytest.fixture(scope="session")
def torus8():
    return Torus(2.0, 8)


@pytest.fixture(scope="session")
def hc_sol(torus8):
    return solve(Potential.hard_core(0.1), 0.5, torus8)


@pytest.fixture(scope="session")
def unit8():
    return build_polyhedron(8)


@pytest.fixture(scope="session")
def pf35(unit8):
    # 35 momenta per spin on the L=2 box
    return lattice_points(unit8, Fraction(2), 2.0)


@pytest.fixture(scope="session")
def kernels35(pf35, hc_sol, torus8):
    return KernelSet.build(pf35, pf35, hc_sol, torus8)


@pytest.fixture(scope="session")
def spec35(pf35, hc_sol, torus8):
    return TrialStateSpec(pf35, pf35, hc_sol, torus8)
