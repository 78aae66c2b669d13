"""Numerical diagram values.

Two routes to the same numbers:

* position space — internal coordinates live on the discrete torus grid and
  the integral is a weighted tensor contraction over grid axes; exact for
  band-limited factors, quadrature-limited otherwise;
* momentum space — for pair-ladder diagrams the coordinate integrals close
  into constrained sums over occupied momenta, with the pair-correlation
  Fourier transform as the only continuous input.  This is the production
  route for the energy series; the grid route is its cross-check.

Kernels are translation invariant, so the grid route only ever needs one
value per grid difference; the (M^3, M^3) difference-index table is shared
by every kernel on the same grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np
from scipy.integrate import simpson

from .diagrams import (
    Diagram,
    _DSU,
    _connected_shapes,
    classify_11_diagram,
    enumerate_anchored_trees,
    enumerate_trees,
    check_vertex_cap,
)
from .errors import CapExceeded, GGRError
from .fermi_polyhedron import FermiPolyhedron
from .scattering import ScatteringSolution
from .torus import Torus, periodic_delta

DEFAULT_BUDGET = 3e14


class EvaluationError(GGRError):
    pass


@lru_cache(maxsize=2)
def _diff_index_matrix(M: int) -> np.ndarray:
    """Flat grid index of (x_i - x_j) mod L for every ordered grid pair."""
    r = np.arange(M, dtype=np.int32)
    axes = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    out = np.empty((M**3, M**3), dtype=np.int32)
    step = max(1, 2**24 // M**3)
    for lo in range(0, M**3, step):
        d = (axes[lo : lo + step, None, :] - axes[None, :, :]) % M
        out[lo : lo + step] = (d[..., 0] * M + d[..., 1]) * M + d[..., 2]
    out.setflags(write=False)
    return out


class Kernel:
    """Translation-invariant pair factor K(x, y) = profile(x - y).

    grid_vals tabulates the profile on grid differences (flat order);
    evaluate handles arbitrary difference vectors, which is what external
    coordinates need.  Density-matrix kernels carry their momentum set for
    the Fourier route.
    """

    def __init__(self, torus, flavor, grid_vals, evaluate_fn, fourier=None, constant=False):
        self.torus = torus
        self.flavor = flavor
        self.grid_vals = grid_vals
        self._evaluate = evaluate_fn
        self.fourier = fourier
        self.constant = bool(constant)
        self._matrix = None

    def evaluate(self, dx):
        return self._evaluate(np.asarray(dx, dtype=float))

    @property
    def zero(self):
        return self.grid_vals[0]

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = self.grid_vals[_diff_index_matrix(self.torus.M)]
        return self._matrix

    def release(self) -> None:
        self._matrix = None


def gamma1(pf: FermiPolyhedron, torus: Torus, flavor: str = "gamma_up") -> Kernel:
    """One-particle density matrix of the filled momentum set.

    The grid table is assembled by aliasing the occupied lattice points onto
    the M^3 grid, which reproduces the plane-wave sum exactly at every grid
    difference.  Closed momentum sets give a real kernel.
    """
    if abs(pf.L - torus.L) > 1e-12 * torus.L:
        raise ValueError("momentum set and torus disagree on the box size")
    M = torus.M
    spread = np.zeros((M, M, M), dtype=complex)
    idx = np.mod(pf.points, M)
    np.add.at(spread, (idx[:, 0], idx[:, 1], idx[:, 2]), 1.0)
    vals = (np.fft.ifftn(spread) * (M**3 / pf.L**3)).reshape(-1)
    if pf.symmetric:
        vals = np.ascontiguousarray(vals.real)
    ks = pf.momenta()

    def ev(dx):
        ph = np.exp(1j * (dx @ ks.T)).sum(axis=-1) / pf.L**3
        return ph.real if pf.symmetric else ph

    constant = pf.N == 1 and not pf.points.any()
    return Kernel(torus, flavor, vals, ev, fourier=pf, constant=constant)


def g_kernel(sol: ScatteringSolution, channel: str, torus: Torus) -> Kernel:
    """Pair-correlation factor f^2 - 1 for one channel, radial and compactly
    supported inside half the box."""
    pts = torus.grid()
    r = np.linalg.norm(periodic_delta(pts, torus.L), axis=-1)
    vals = sol.g(channel, r)

    def ev(dx):
        rr = np.linalg.norm(periodic_delta(dx, torus.L), axis=-1)
        return sol.g(channel, rr)

    constant = sol.potential.kind == "zero"
    flavor = "g_s" if channel == "s" else "g_p"
    return Kernel(torus, flavor, vals, ev, constant=constant)


class KernelSet:
    """The four pair kernels of a trial state on one grid."""

    def __init__(self, torus, gamma_up, gamma_dn, g_s, g_p):
        self.torus = torus
        self.gamma_up = gamma_up
        self.gamma_dn = gamma_dn
        self.g_s = g_s
        self.g_p = g_p

    @classmethod
    def build(cls, pf_up, pf_dn, sol: ScatteringSolution, torus: Torus) -> "KernelSet":
        return cls(
            torus,
            gamma1(pf_up, torus, "gamma_up"),
            gamma1(pf_dn, torus, "gamma_dn"),
            g_kernel(sol, "s", torus),
            g_kernel(sol, "p", torus),
        )

    def for_edge(self, same_color: bool) -> Kernel:
        return self.g_p if same_color else self.g_s


def _fsum_complex(values) -> complex:
    return complex(math.fsum(v.real for v in values), math.fsum(v.imag for v in values))


# ---------------------------------------------------------------------------
# position-space diagram values


def diagram_value(d: Diagram, externals, kernels: KernelSet, budget: float = DEFAULT_BUDGET) -> complex:
    """Signed grid quadrature of the edge-factor product over all internal
    coordinates.

    The contraction factorizes over the diagram's linked components; constant
    kernels and permutation fixed points fold into scalar prefactors, which
    is what makes single-particle density matrices cheap.  Components whose
    naive contraction size exceeds the budget are refused with a pointer to
    the momentum route or a coarser grid.
    """
    vs = d.graph.vertices
    torus = kernels.torus
    ext = np.asarray(externals, dtype=float).reshape(-1, 3) if vs.n + vs.m else np.zeros((0, 3))
    if len(ext) != vs.n + vs.m:
        raise ValueError(f"expected {vs.n + vs.m} external coordinates, got {len(ext)}")
    ext_coord = {i: ext[i] for i in range(vs.n)}
    for j in range(vs.m):
        ext_coord[vs.n_black + j] = ext[vs.n + j]

    factors = [(kernels.for_edge(vs.same_color(a, b)), a, b) for a, b in d.graph.edges]
    factors += [(kernels.gamma_up, i, d.pi[i]) for i in range(vs.n_black)]
    off = vs.n_black
    factors += [(kernels.gamma_dn, off + i, off + d.tau[i]) for i in range(vs.n_white)]

    internals = vs.internals()
    axis_of = {v: i for i, v in enumerate(internals)}
    grid = torus.grid()

    scalar = complex(d.sign)
    operands = []  # (array, axis tuple)
    for kernel, u, v in factors:
        u_int, v_int = u in axis_of, v in axis_of
        if kernel.constant:
            scalar *= complex(kernel.zero)
        elif not u_int and not v_int:
            scalar *= complex(kernel.evaluate(ext_coord[u] - ext_coord[v]))
        elif u_int and not v_int:
            operands.append((kernel.evaluate(grid - ext_coord[v]), (axis_of[u],)))
        elif v_int and not u_int:
            operands.append((kernel.evaluate(ext_coord[u] - grid), (axis_of[v],)))
        elif u == v:
            scalar *= complex(kernel.zero)
        else:
            operands.append((kernel.matrix(), (axis_of[u], axis_of[v])))

    n_axes = len(internals)
    dsu = _DSU(max(n_axes, 1))
    for _, axes in operands:
        for x in axes[1:]:
            dsu.union(axes[0], x)

    groups = {}
    for op in operands:
        groups.setdefault(dsu.find(op[1][0]), []).append(op)
    covered = {a for op in operands for a in op[1]}
    value = scalar * torus.volume ** (n_axes - len(covered))  # untouched axes integrate to L^3

    letters = "abcdefghijklmnop"
    for ops in groups.values():
        axes = sorted({a for op in ops for a in op[1]})
        if float(torus.n_points) ** len(axes) > budget:
            raise CapExceeded(
                f"contraction over {len(axes)} grid axes at M={torus.M} exceeds the "
                "evaluation budget; use the momentum route or a smaller grid"
            )
        sub = {a: letters[i] for i, a in enumerate(axes)}
        spec = ",".join("".join(sub[a] for a in op[1]) for op in ops) + "->"
        value *= np.einsum(spec, *(op[0] for op in ops), optimize="greedy")
    return complex(value * torus.weight ** len(covered))


# ---------------------------------------------------------------------------
# pair-correlation Fourier tables


@dataclass(frozen=True)
class GridGFourier:
    """Discrete Fourier coefficients of the grid-sampled pair factor.

    Exactly inverts to the grid samples, which makes the momentum route agree
    with grid quadrature to rounding when conservation cannot alias.
    """

    torus: Torus
    vals: np.ndarray  # flat M^3, coefficient of exp(i k_n . x)

    @classmethod
    def build(cls, kernel: Kernel) -> "GridGFourier":
        t = kernel.torus
        cube = kernel.grid_vals.reshape(t.M, t.M, t.M)
        vals = (np.fft.fftn(cube) / t.M**3).reshape(-1)
        if np.max(np.abs(vals.imag)) < 1e-12 * max(np.max(np.abs(vals.real)), 1e-300):
            vals = np.ascontiguousarray(vals.real)
        return cls(t, vals)

    def lookup(self, delta) -> np.ndarray:
        d = np.mod(np.asarray(delta, dtype=np.int64), self.torus.M)
        return self.vals[(d[..., 0] * self.torus.M + d[..., 1]) * self.torus.M + d[..., 2]]


@dataclass(frozen=True)
class RadialGFourier:
    """Continuum Fourier transform of the radial pair factor on the lattice.

    Entries are indexed by the squared integer norm of the lattice triple;
    the transform is radial so nothing else matters.
    """

    L: float
    by_r2: np.ndarray

    @classmethod
    def build(cls, sol: ScatteringSolution, channel: str, L: float, max_index: int, n_nodes: int = 4001) -> "RadialGFourier":
        max_r2 = 3 * (2 * max_index) ** 2
        r = np.linspace(0.0, sol.b, n_nodes)
        g = sol.g(channel, r)
        k_mag = (2.0 * np.pi / L) * np.sqrt(np.arange(1, max_r2 + 1, dtype=float))
        # sin(kr)/k columns for every lattice magnitude at once
        kr = np.outer(k_mag, r)
        integ = simpson(g * r * np.sin(kr), x=r, axis=-1) / k_mag
        table = np.empty(max_r2 + 1)
        table[0] = simpson(g * r * r, x=r)
        table[1:] = integ
        return cls(L, table * 4.0 * np.pi / L**3)

    def lookup(self, delta) -> np.ndarray:
        d = np.asarray(delta, dtype=np.int64)
        return self.by_r2[np.sum(d * d, axis=-1)]


# ---------------------------------------------------------------------------
# momentum-space pair-ladder values


def _linear_solve_order(k: int, pi, tau, average: bool):
    """Plan the constrained momentum sum for a pair-ladder diagram.

    Unknowns are the k+1 momenta per spin, one per permutation arc.  Each
    internal vertex yields one linear relation among four of them; averaging
    over externals pins the two external arcs.  Greedy elimination leaves a
    set of free unknowns to sum over and turns the rest into integer
    combinations; relations with nothing left to solve become filters.
    Returns (free, exprs, filters) with exprs mapping var -> {free_var: coeff}.
    """
    inv_pi = [0] * (k + 1)
    inv_tau = [0] * (k + 1)
    for i, j in enumerate(pi):
        inv_pi[j] = i
    for i, j in enumerate(tau):
        inv_tau[j] = i

    variables = [("u", i) for i in range(k + 1)] + [("d", i) for i in range(k + 1)]
    relations = []  # each: list of (var, sign) summing to zero
    if average:
        if inv_pi[0] != 0:
            relations.append([(("u", 0), 1), (("u", inv_pi[0]), -1)])
        if inv_tau[0] != 0:
            relations.append([(("d", 0), 1), (("d", inv_tau[0]), -1)])
    for j in range(1, k + 1):
        # momentum balance at internal pair j
        rel = []
        for var, sign in ((("u", inv_pi[j]), 1), (("u", j), -1), (("d", j), -1), (("d", inv_tau[j]), 1)):
            rel.append((var, sign))
        relations.append(rel)

    exprs = {}
    free = []
    pending = list(relations)
    filters = []

    def combine(rel, skip=None):
        acc = {}
        for var, sign in rel:
            if var == skip:
                continue
            for fv, c in exprs[var].items():
                acc[fv] = acc.get(fv, 0) + sign * c
        return {fv: c for fv, c in acc.items() if c}

    while pending or any(v not in exprs for v in variables):
        progress = False
        still = []
        for rel in pending:
            unknown = [var for var, _ in rel if var not in exprs]
            if not unknown:
                filt = combine(rel)
                if filt:
                    filters.append(filt)
                progress = True
            elif len(unknown) == 1:
                var = unknown[0]
                sign = next(s for v, s in rel if v == var)
                residue = combine(rel, skip=var)
                exprs[var] = {fv: -sign * c for fv, c in residue.items()}
                progress = True
            else:
                still.append(rel)
        pending = still
        if not progress:
            nxt = next(v for v in variables if v not in exprs)
            exprs[nxt] = {nxt: 1}
            free.append(nxt)
    return free, exprs, filters


def _encode(points: np.ndarray, bound: int) -> np.ndarray:
    size = 2 * bound + 1
    p = points + bound
    return (p[..., 0] * size + p[..., 1]) * size + p[..., 2]


def b2_value_fourier(
    k: int,
    pi,
    tau,
    pf_up: FermiPolyhedron,
    pf_dn: FermiPolyhedron,
    g_table,
    externals=None,
    average: bool = False,
) -> complex:
    """Closed momentum-space value of one pair-ladder diagram.

    One momentum per permutation arc, one conservation relation per internal
    pair; solved relations reduce the sum to the free unknowns, membership in
    the occupied sets and leftover relations are enforced by masking.  With
    average=True the external phases are integrated out, which pins the two
    external arcs; otherwise externals = (x1, y1) supplies the phase point.
    """
    pi = tuple(pi)
    tau = tuple(tau)
    if sorted(pi) != list(range(k + 1)) or sorted(tau) != list(range(k + 1)):
        raise ValueError("pi and tau must permute 0..k")
    if not average:
        if externals is None:
            raise ValueError("need externals (x1, y1) unless averaging")
        x1 = np.asarray(externals[0], dtype=float)
        y1 = np.asarray(externals[1], dtype=float)

    from .diagrams import permutation_sign

    sign = permutation_sign(pi) * permutation_sign(tau)
    free, exprs, filters = _linear_solve_order(k, pi, tau, average)

    # 2(k+1) density-matrix arcs at 1/L^3 each against 2k position integrals
    # at L^3 each leaves 1/L^6, in the averaged mode as well
    prefactor = pf_up.L ** -6.0

    pts = {"u": pf_up.points, "d": pf_dn.points}
    sets = {
        "u": np.sort(_encode(pf_up.points, pf_up.max_index())),
        "d": np.sort(_encode(pf_dn.points, pf_dn.max_index())),
    }
    bounds = {"u": pf_up.max_index(), "d": pf_dn.max_index()}
    L = pf_up.L

    inv_pi = [0] * (k + 1)
    inv_tau = [0] * (k + 1)
    for i, j in enumerate(pi):
        inv_pi[j] = i
    for i, j in enumerate(tau):
        inv_tau[j] = i

    # integer-combination helpers: an expression evaluates to a lattice triple
    def expr_terms(e):
        return sorted(e.items())

    # g-factor arguments and phase arguments as expressions
    g_args = []
    for j in range(1, k + 1):
        diff = {}
        for var, s in ((("d", j), 1), (("d", inv_tau[j]), -1)):
            for fv, c in exprs[var].items():
                diff[fv] = diff.get(fv, 0) + s * c
        g_args.append({fv: c for fv, c in diff.items() if c})

    def phase_expr(color, inv_first):
        diff = {}
        for var, s in (((color, 0), 1), ((color, inv_first), -1)):
            for fv, c in exprs[var].items():
                diff[fv] = diff.get(fv, 0) + s * c
        return {fv: c for fv, c in diff.items() if c}

    up_phase = None if average else phase_expr("u", inv_pi[0])
    dn_phase = None if average else phase_expr("d", inv_tau[0])

    n_free = len(free)
    if n_free == 0:
        # fully pinned: single assignment check
        assign = {}
        value = _eval_block(
            assign, free, exprs, filters, g_args, up_phase, dn_phase,
            pts, sets, bounds, g_table, L,
            None if average else (x1, y1),
        )
        return prefactor * sign * complex(value)

    # iterate over the leading free variables, vectorize the last one
    lead, last = free[:-1], free[-1]
    total = 0.0 + 0.0j
    counts = [len(pts[c]) for c, _ in lead]

    def rec(idx, assign):
        nonlocal total
        if idx == len(lead):
            total += _eval_block(
                assign, [last], exprs, filters, g_args, up_phase, dn_phase,
                pts, sets, bounds, g_table, L,
                None if average else (x1, y1),
            )
            return
        color = lead[idx][0]
        for row in pts[color]:
            assign[lead[idx]] = row
            rec(idx + 1, assign)
        del assign[lead[idx]]

    rec(0, {})
    return prefactor * sign * complex(total)


def _eval_block(assign, vec_free, exprs, filters, g_args, up_phase, dn_phase,
                pts, sets, bounds, g_table, L, ext):
    """Sum the ladder integrand over the vectorized tail variable (or evaluate
    a single fully-pinned assignment when vec_free is empty)."""
    if vec_free:
        vcolor = vec_free[0][0]
        tail = pts[vcolor]  # (Nv, 3)
        nv = len(tail)
    else:
        nv = 1

    def expr_value(e):
        # -> (nv, 3) int64
        out = np.zeros((nv, 3), dtype=np.int64)
        for fv, c in sorted(e.items()):
            if vec_free and fv == vec_free[0]:
                out += c * tail
            else:
                out += c * assign[fv]
        return out

    mask = np.ones(nv, dtype=bool)
    # membership of every derived (non-free) variable in its occupied set
    for var, e in exprs.items():
        if len(e) == 1 and e.get(var) == 1:
            continue  # free variable, membership by construction
        val = expr_value(e)
        color = var[0]
        b = bounds[color]
        inside = np.all(np.abs(val) <= b, axis=-1)
        enc = _encode(np.where(inside[:, None], val, 0), b)
        pos = np.searchsorted(sets[color], enc)
        pos = np.minimum(pos, len(sets[color]) - 1)
        mask &= inside & (sets[color][pos] == enc)
        if not mask.any():
            return 0.0 + 0.0j
    for filt in filters:
        val = expr_value(filt)
        mask &= np.all(val == 0, axis=-1)
        if not mask.any():
            return 0.0 + 0.0j

    vals = np.ones(nv, dtype=complex)
    for e in g_args:
        vals = vals * g_table.lookup(expr_value(e))
    if ext is not None:
        x1, y1 = ext
        two_pi_L = 2.0 * np.pi / L
        vals = vals * np.exp(1j * two_pi_L * (expr_value(up_phase) @ x1))
        vals = vals * np.exp(1j * two_pi_L * (expr_value(dn_phase) @ y1))
    return complex(np.sum(np.where(mask, vals, 0.0)))


def b2_value_check(d: Diagram, pf_up, pf_dn, g_table, externals=None, average=False) -> complex:
    """b2_value_fourier with the diagram's admissibility checked first."""
    if classify_11_diagram(d) != "B2":
        raise EvaluationError("momentum route only applies to pair-ladder diagrams")
    k = d.graph.vertices.p
    return b2_value_fourier(k, d.pi, d.tau, pf_up, pf_dn, g_table, externals, average)


# ---------------------------------------------------------------------------
# truncated correlations


def truncated_correlation(clusters, kernels: KernelSet, graphs=None, cap: int = 10) -> complex:
    """Double permutation sum over cluster coordinates restricted to linked
    terms.

    clusters is a sequence of (black_coords, white_coords); the linked
    indicator only sees which cluster each vertex belongs to, so the value is
    independent of the connecting graphs - passing explicit per-cluster
    graphs (local labels, blacks then whites) exercises that equivalence.
    """
    xs, ys, bcl, wcl = [], [], [], []
    for ci, (bs, ws) in enumerate(clusters):
        bs = np.asarray(bs, dtype=float).reshape(-1, 3)
        ws = np.asarray(ws, dtype=float).reshape(-1, 3)
        if len(bs) + len(ws) == 0:
            raise ValueError(f"cluster {ci} is empty")
        for row in bs:
            xs.append(row)
            bcl.append(ci)
        for row in ws:
            ys.append(row)
            wcl.append(ci)
    nb, nw = len(xs), len(ys)
    check_vertex_cap(nb + nw, cap)
    k = len(clusters)

    if graphs is not None:
        # vertex-level connectivity with the supplied connecting graphs
        offsets = []
        pos = 0
        for bs, ws in clusters:
            offsets.append(pos)
            pos += len(np.asarray(bs).reshape(-1, 3)) + len(np.asarray(ws).reshape(-1, 3))
        # map (cluster, local) -> global multigraph label: blacks then whites per cluster
        base_edges = []
        for ci, ((bs, ws), edges) in enumerate(zip(clusters, graphs)):
            nbs = len(np.asarray(bs).reshape(-1, 3))
            nws = len(np.asarray(ws).reshape(-1, 3))
            dsu = _DSU(nbs + nws)
            for a, b in edges:
                dsu.union(a, b)
            if dsu.n_roots() != 1:
                raise ValueError(f"connecting graph of cluster {ci} is not connected")
            base_edges.extend((offsets[ci] + a, offsets[ci] + b) for a, b in edges)
        # global labels for permutation arcs
        black_label, white_label = [], []
        for ci, (bs, ws) in enumerate(clusters):
            nbs = len(np.asarray(bs).reshape(-1, 3))
            nws = len(np.asarray(ws).reshape(-1, 3))
            black_label.extend(offsets[ci] + i for i in range(nbs))
            white_label.extend(offsets[ci] + nbs + i for i in range(nws))
        total_v = nb + nw

    xs = np.asarray(xs) if xs else np.zeros((0, 3))
    ys = np.asarray(ys) if ys else np.zeros((0, 3))
    gb = kernels.gamma_up.evaluate(xs[:, None, :] - xs[None, :, :]) if nb else np.zeros((0, 0))
    gw = kernels.gamma_dn.evaluate(ys[:, None, :] - ys[None, :, :]) if nw else np.zeros((0, 0))

    from .diagrams import permutation_sign

    terms = []
    for pi in permutations(range(nb)):
        wb = permutation_sign(pi) * np.prod([gb[i, pi[i]] for i in range(nb)] or [1.0])
        for tau in permutations(range(nw)):
            if graphs is None:
                dsu = _DSU(k)
                for i in range(nb):
                    dsu.union(bcl[i], bcl[pi[i]])
                for i in range(nw):
                    dsu.union(wcl[i], wcl[tau[i]])
            else:
                dsu = _DSU(total_v)
                for a, b in base_edges:
                    dsu.union(a, b)
                for i in range(nb):
                    dsu.union(black_label[i], black_label[pi[i]])
                for i in range(nw):
                    dsu.union(white_label[i], white_label[tau[i]])
            if dsu.n_roots() != 1:
                continue
            ww = permutation_sign(tau) * np.prod([gw[i, tau[i]] for i in range(nw)] or [1.0])
            terms.append(complex(wb * ww))
    return _fsum_complex(terms)


# ---------------------------------------------------------------------------
# bound verifications


@dataclass(frozen=True)
class BoundReport:
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + 1e-12) + 1e-300


def verify_tree_graph(p: int, q: int, positions, kernels: KernelSet) -> BoundReport:
    """Connected-graph sum against the tree sum of absolute edge factors.

    The stability constant is 1 here because every pair factor satisfies
    0 <= f <= 1, so the bound is a plain comparison.
    """
    total = p + q
    if total > 6:
        raise CapExceeded("tree-graph check caps at 6 vertices")
    pos = np.asarray(positions, dtype=float).reshape(total, 3)

    def edge_val(a, b):
        same = (a < p) == (b < p)
        return kernels.for_edge(same).evaluate(pos[a] - pos[b])

    cache = {}
    for a in range(total):
        for b in range(a + 1, total):
            cache[(a, b)] = float(edge_val(a, b))

    lhs_terms = []
    for shape in _connected_shapes(total):
        if total == 1:
            lhs_terms.append(1.0)
            continue
        prod = 1.0
        for e in shape:
            prod *= cache[e]
        lhs_terms.append(prod)
    if total == 1:
        return BoundReport(abs(math.fsum(lhs_terms)), 1.0)

    rhs_terms = []
    for tree in enumerate_trees(p, q, 0, 0, cap=max(total, 8)):
        prod = 1.0
        for e in tree:
            prod *= abs(cache[e])
        rhs_terms.append(prod)
    return BoundReport(abs(math.fsum(lhs_terms)), math.fsum(rhs_terms))


def verify_rhot_bound(clusters, kernels: KernelSet, cap: int = 8) -> BoundReport:
    """Anchored-tree bound on the truncated correlation.

    The prefactor is the largest single-spin density raised to the number of
    vertices not consumed by the tree's inter-cluster hops; cross-color hops
    carry a vanishing density-matrix factor and drop out on their own.
    """
    rho_up = float(np.real(kernels.gamma_up.zero))
    rho_dn = float(np.real(kernels.gamma_dn.zero))
    gamma_inf = max(rho_up, rho_dn)

    coords = []  # per vertex: (coordinate, is_black)
    sizes = []
    for bs, ws in clusters:
        bs = np.asarray(bs, dtype=float).reshape(-1, 3)
        ws = np.asarray(ws, dtype=float).reshape(-1, 3)
        sizes.append(len(bs) + len(ws))
        coords.extend((row, True) for row in bs)
        coords.extend((row, False) for row in ws)
    total = sum(sizes)
    check_vertex_cap(total, cap)

    lhs = abs(truncated_correlation(clusters, kernels))
    k = len(sizes)
    tree_sum = []
    for at in enumerate_anchored_trees(sizes, cap=cap):
        prod = 1.0
        for u, v in at.edges:
            (xu, bu), (xv, bv) = coords[u], coords[v]
            if bu != bv:
                prod = 0.0
                break
            ker = kernels.gamma_up if bu else kernels.gamma_dn
            prod *= abs(complex(ker.evaluate(xu - xv)))
        tree_sum.append(prod)
    rhs = gamma_inf ** (total - (k - 1)) * math.fsum(tree_sum)
    return BoundReport(lhs, rhs)


@dataclass(frozen=True)
class ConvergenceInputs:
    """Dimensionless ingredients of the series-convergence products."""

    gamma_inf: float
    I_g: float
    I_gamma: float
    C_TG: float = 1.0

    def __post_init__(self):
        if min(self.gamma_inf, self.I_g, self.I_gamma) < 0 or self.C_TG <= 0:
            raise ValueError("convergence inputs must be nonnegative, C_TG positive")
