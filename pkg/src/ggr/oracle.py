"""Brute-force reference values at tiny particle number.

Everything here integrates the squared trial state by direct grid sums, no
diagrams anywhere, so the expansion can be tested against an independent
route.  The cost is exponential in the particle count; the hard cap keeps
callers honest.
"""
from __future__ import annotations

import math
from functools import reduce
from itertools import permutations

import numpy as np

from .diagrams import permutation_sign
from .errors import CapExceeded
from .evaluation import _diff_index_matrix
from .expansion import TrialStateSpec
from .fermi_polyhedron import FermiPolyhedron
from .torus import TWO_PI, periodic_delta

_MAX_DIMS = 12
_MAX_TENSOR = 2.0e8


def orbital_matrix(pf: FermiPolyhedron, positions) -> np.ndarray:
    """Rows are single-particle orbitals at the given positions.

    A sign-symmetric momentum set admits a real gauge (cosine for the
    lexicographically positive member of each pair, sine for its partner),
    which keeps every downstream tensor real.  Otherwise plane waves.
    """
    pos = np.asarray(positions, dtype=float).reshape(-1, 3)
    norm = pf.L ** -1.5
    if not pf.symmetric:
        return (norm * np.exp(1j * pos @ pf.momenta().T)).T
    rows = np.empty((pf.N, len(pos)))
    scale = TWO_PI / pf.L
    for i, nvec in enumerate(pf.points):
        key = tuple(int(x) for x in nvec)
        if key == (0, 0, 0):
            rows[i] = norm
            continue
        phase = pos @ (scale * nvec.astype(float))
        if key > tuple(-x for x in key):
            rows[i] = math.sqrt(2.0) * norm * np.cos(phase)
        else:
            rows[i] = math.sqrt(2.0) * norm * np.sin(phase)
    return rows


def slater(pf: FermiPolyhedron, positions):
    """Determinant wavefunction, normalized so its squared integral is N!."""
    A = orbital_matrix(pf, positions)
    if A.shape[1] != pf.N:
        raise ValueError(f"need {pf.N} positions, got {A.shape[1]}")
    return np.linalg.det(A)


def _det2_tensor(A_fixed: np.ndarray, A_grid: np.ndarray):
    """|det|^2 with the first columns pinned and the rest running over the
    grid; returns a real array with one axis per free particle."""
    n_orb = A_fixed.shape[0]
    n_fixed = A_fixed.shape[1]
    p_free = n_orb - n_fixed
    if p_free == 0:
        d = np.linalg.det(A_fixed)
        return float((d * np.conj(d)).real)
    if A_grid.shape[1] ** p_free > _MAX_TENSOR:
        raise CapExceeded("determinant tensor too large; shrink the grid")
    total = None
    for pi in permutations(range(n_orb)):
        scalar = permutation_sign(pi)
        for j in range(n_fixed):
            scalar = scalar * A_fixed[pi[j], j]
        vecs = [A_grid[pi[n_fixed + t]] for t in range(p_free)]
        term = scalar * reduce(np.multiply.outer, vecs)
        total = term if total is None else total + term
    return (total * np.conj(total)).real


def _pair_ops(spec: TrialStateSpec, fixed_up, fixed_dn):
    """Einsum operands for prod f^2 over all particle pairs.

    Free particles live on grid axes: letters a.. for spin-up, continuing
    for spin-down.  Fixed-fixed pairs fold into the returned prefactor.
    """
    torus = spec.torus
    sol = spec.scattering
    grid = torus.grid()
    n_up, n_dn = spec.pf_up.N, spec.pf_dn.N
    kf_up, kf_dn = len(fixed_up), len(fixed_dn)
    p_free, q_free = n_up - kf_up, n_dn - kf_dn

    letters = "abcdefghijkl"
    up_ax = letters[:p_free]
    dn_ax = letters[p_free:p_free + q_free]

    # distances between grid points come from one difference-index lookup
    delta = periodic_delta(grid, torus.L)
    f_same = sol.f_p(np.sqrt(np.sum(delta * delta, axis=-1))) ** 2
    f_cross = sol.f_s(np.sqrt(np.sum(delta * delta, axis=-1))) ** 2
    diff = _diff_index_matrix(torus.M)

    coords = []  # (is_up, fixed coordinate or None, axis letter or "")
    for i in range(n_up):
        coords.append((True, fixed_up[i] if i < kf_up else None,
                       up_ax[i - kf_up] if i >= kf_up else ""))
    for j in range(n_dn):
        coords.append((False, fixed_dn[j] if j < kf_dn else None,
                       dn_ax[j - kf_dn] if j >= kf_dn else ""))

    prefactor = 1.0
    specs, ops = [], []
    for i in range(len(coords)):
        for j in range(i + 1, len(coords)):
            up_i, xi, ax_i = coords[i]
            up_j, xj, ax_j = coords[j]
            same = up_i == up_j
            if xi is not None and xj is not None:
                prefactor *= float(sol.pair_factor(same, np.asarray(xi) - np.asarray(xj)) ** 2)
            elif xi is None and xj is None:
                specs.append(ax_i + ax_j)
                ops.append((f_same if same else f_cross)[diff])
            else:
                x = np.asarray(xi if xi is not None else xj, dtype=float)
                ax = ax_j if xi is not None else ax_i
                specs.append(ax)
                ops.append(sol.pair_factor(same, x[None, :] - grid) ** 2)
    return grid, up_ax, dn_ax, prefactor, specs, ops


def _check_caps(spec: TrialStateSpec):
    n_total = spec.pf_up.N + spec.pf_dn.N
    if 3 * n_total > _MAX_DIMS:
        raise CapExceeded(
            f"brute-force integral is {3 * n_total}-dimensional, cap is {_MAX_DIMS}"
        )


def _grid_sum(spec: TrialStateSpec, fixed_up, fixed_dn) -> float:
    grid, up_ax, dn_ax, prefactor, specs, ops = _pair_ops(spec, fixed_up, fixed_dn)
    A_up_g = orbital_matrix(spec.pf_up, grid)
    A_dn_g = orbital_matrix(spec.pf_dn, grid)
    A_up_f = orbital_matrix(spec.pf_up, np.asarray(fixed_up, dtype=float).reshape(-1, 3))
    A_dn_f = orbital_matrix(spec.pf_dn, np.asarray(fixed_dn, dtype=float).reshape(-1, 3))

    d2_up = _det2_tensor(A_up_f, A_up_g)
    d2_dn = _det2_tensor(A_dn_f, A_dn_g)

    if up_ax:
        specs.append(up_ax)
        ops.append(d2_up)
    else:
        prefactor *= d2_up
    if dn_ax:
        specs.append(dn_ax)
        ops.append(d2_dn)
    else:
        prefactor *= d2_dn

    n_free = len(up_ax) + len(dn_ax)
    if not ops:
        return prefactor
    value = np.einsum(",".join(specs) + "->", *ops, optimize="greedy")
    return prefactor * float(value) * spec.torus.weight**n_free


def brute_normalization(spec: TrialStateSpec) -> float:
    """Grid integral of the squared trial state over every particle."""
    _check_caps(spec)
    return _grid_sum(spec, np.zeros((0, 3)), np.zeros((0, 3)))


def brute_reduced_density(
    spec: TrialStateSpec, n: int, m: int, externals, normalization: float | None = None
) -> float:
    """Reduced density by pinning the first n + m particles and integrating
    the rest on the grid; normalized so the (1, 0) density integrates to the
    spin-up particle count."""
    _check_caps(spec)
    if n < 0 or m < 0 or n + m < 1:
        raise ValueError("need at least one external particle")
    if n > spec.pf_up.N or m > spec.pf_dn.N:
        return 0.0
    ext = np.asarray(externals, dtype=float).reshape(n + m, 3)
    C = brute_normalization(spec) if normalization is None else normalization
    raw = _grid_sum(spec, ext[:n], ext[n:])
    factor = 1.0
    for t in range(n):
        factor *= spec.pf_up.N - t
    for t in range(m):
        factor *= spec.pf_dn.N - t
    return factor * raw / C
