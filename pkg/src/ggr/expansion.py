"""Series assembly for normalization constants and reduced densities.

The squared trial state expands into diagrams: pair-correlation edges from
multiplying out prod(1 + g) and two permutations from the squared Slater
determinants.  The normalization constant is the no-external sum; reduced
densities keep n + m external vertices and resum into products of linked
sums over blocks of a partition of the externals.  Truncation policy lives
here and is graded by the cluster statistics (k, n_g + n_g_star): those two
numbers control both the enumeration size and the tail estimate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from itertools import permutations

import numpy as np

from .diagrams import (
    Diagram,
    GGraph,
    decompose,
    enumerate_ggraphs,
    enumerate_ggraphs_graded,
    enumerate_partitions,
    is_linked,
)
from .errors import CapExceeded, GGRError
from .evaluation import ConvergenceInputs, KernelSet, _fsum_complex, diagram_value
from .fermi_polyhedron import FermiPolyhedron, dirichlet_l1
from .scattering import ScatteringSolution, g_integrals
from .torus import Torus


@dataclass(frozen=True)
class Caps:
    """Truncation knobs: per-sum internal vertex total, cluster-count cap,
    added-vertex cap, the hard vertex cap passed to enumerators, the
    contraction budget, and a guard on enumeration size."""

    max_internal: int = 6
    k_max: int = 2
    ng_max: int = 2
    vertex_cap: int = 8
    budget: float = 3e14
    max_graphs: int = 2_000_000

    def __post_init__(self):
        if self.max_internal < 0 or self.k_max < 0 or self.ng_max < 0:
            raise ValueError("caps must be nonnegative")
        if self.vertex_cap < 1:
            raise ValueError("vertex cap must be positive")


@dataclass
class TrialStateSpec:
    """Everything a trial state needs: one momentum set per spin, the pair
    correlation solution, and the evaluation grid."""

    pf_up: FermiPolyhedron
    pf_dn: FermiPolyhedron
    scattering: ScatteringSolution
    torus: Torus

    def __post_init__(self):
        L = self.torus.L
        for pf in (self.pf_up, self.pf_dn):
            if abs(pf.L - L) > 1e-12 * L:
                raise ValueError("momentum sets and torus disagree on the box size")
        if self.scattering.b > L / 2 + 1e-12 * L:
            raise ValueError("correlation range exceeds half the box")
        self._kernels = None

    def kernels(self) -> KernelSet:
        if self._kernels is None:
            self._kernels = KernelSet.build(self.pf_up, self.pf_dn, self.scattering, self.torus)
        return self._kernels

    @property
    def rho_up(self) -> float:
        return self.pf_up.rho

    @property
    def rho_dn(self) -> float:
        return self.pf_dn.rho

    @property
    def rho(self) -> float:
        return self.rho_up + self.rho_dn

    @property
    def n_total(self) -> int:
        return self.pf_up.N + self.pf_dn.N


# ---------------------------------------------------------------------------
# graded cells


@dataclass(frozen=True)
class SeriesCell:
    p: int
    q: int
    klass: str
    k: int
    ng_total: int
    value: complex
    bound: float = math.nan


@dataclass(frozen=True)
class ExpansionSeries:
    target: str
    cells: tuple
    caps: Caps
    fitted_C: float
    tail_bound: float

    def total(self) -> complex:
        return _fsum_complex([c.value for c in self.cells])


def _shape_class(g: GGraph) -> str:
    """Cell label from the graph alone; for one external per color this is
    the A / B1 / B2 split, degenerating to the linked classification."""
    vs = g.vertices
    if (vs.n, vs.m) != (1, 1):
        return "all"
    stats = decompose(g)
    if stats.n_g + stats.n_g_star >= 1:
        return "A"
    if any(vs.same_color(a, b) for a, b in g.edges):
        return "B1"
    return "B2"


def _geom_partial(x: float, n: int) -> float:
    # sum_{i=0..n} x^i
    if x == 1.0:
        return float(n + 1)
    return (1.0 - x ** (n + 1)) / (1.0 - x)


def tail_estimate(prefactor: float, x: float, y: float, ng_max: int, k_max: int) -> float:
    """Geometric estimate of everything beyond the (ng, k) caps.

    x weighs one added vertex, y one extra internal-only cluster.  Divergent
    geometries (x or y >= 1) report inf: the series is then outside the
    regime where the truncation is controlled, which callers surface rather
    than hide.
    """
    if x < 0 or y < 0:
        raise ValueError("weights must be nonnegative")
    if x >= 1.0 or y >= 1.0:
        return math.inf
    full = 1.0 / ((1.0 - x) * (1.0 - y))
    kept = _geom_partial(x, ng_max) * _geom_partial(y, k_max)
    return prefactor * max(full - kept, 0.0)


def _fit_cell_constant(cells, rho: float, x_unit: float, y_unit: float, nm: int) -> float:
    """Smallest constant >= 1 that makes every measured cell obey the graded
    bound shape rho^(n+m) (C x)^(ng+k) (C y)^k."""
    fitted = 1.0
    for c in cells:
        power = c.ng_total + 2 * c.k
        if power == 0:
            continue
        shape = rho**nm * x_unit ** (c.ng_total + c.k) * y_unit**c.k
        if shape <= 0.0:
            continue
        ratio = (abs(c.value) / shape) ** (1.0 / power)
        fitted = max(fitted, ratio)
    return fitted


def _schedule_numbers(spec: TrialStateSpec):
    sol = spec.scattering
    s_corners = 0
    for pf in (spec.pf_up, spec.pf_dn):
        if pf.unit is not None:
            s_corners = max(s_corners, pf.unit.s)
    s_corners = max(s_corners, 8)
    n = spec.n_total
    log_n = math.log(n) if n > 2 else 1.0
    return sol.a, sol.b, spec.rho, s_corners, log_n


def _series_finalize(target, cells, caps, spec, nm) -> ExpansionSeries:
    a, b, rho, s, log_n = _schedule_numbers(spec)
    # |a|: the ODE solve can land a hair below zero for a vanishing potential
    x_unit = abs(a) * b * b * rho
    y_unit = s * log_n**3
    fitted = _fit_cell_constant(cells, rho, x_unit, y_unit, nm)
    x = fitted * x_unit
    y = fitted * x_unit * fitted * y_unit
    tail = tail_estimate(rho**nm, x, y, caps.ng_max, caps.k_max)
    bounded = [
        replace(
            c,
            bound=rho**nm
            * (fitted * x_unit) ** (c.ng_total + c.k)
            * (fitted * y_unit) ** c.k,
        )
        for c in cells
    ]
    order = sorted(range(len(bounded)), key=lambda i: (
        bounded[i].p, bounded[i].q, bounded[i].klass, bounded[i].k, bounded[i].ng_total))
    return ExpansionSeries(target, tuple(bounded[i] for i in order), caps, fitted, tail)


# ---------------------------------------------------------------------------
# diagram walks


def _factorial(n: int) -> int:
    return math.factorial(n)


def _walk_cells(spec, kernels, n, m, externals, caps, linked_only, rank_filter, graded):
    """Accumulate 1/(p! q!)-weighted diagram values into (p, q, class, k, ng)
    cells.  graded=True restricts graphs to the (k, ng) caps; rank_filter
    skips whole (p, q) blocks that vanish identically for the finite sum."""
    n_up, n_dn = spec.pf_up.N, spec.pf_dn.N
    cells = {}
    count = 0
    for p in range(caps.max_internal + 1):
        for q in range(caps.max_internal + 1 - p):
            if n + m == 0 and p + q < 2:
                continue
            if rank_filter and (n + p > n_up or m + q > n_dn):
                continue
            if p + q + n + m > caps.vertex_cap:
                continue
            if graded:
                graphs = enumerate_ggraphs_graded(
                    p, q, n, m, caps.k_max, caps.ng_max, cap=caps.vertex_cap
                )
            else:
                graphs = enumerate_ggraphs(p, q, n, m, cap=caps.vertex_cap)
            coef = 1.0 / (_factorial(p) * _factorial(q))
            n_perm = _factorial(n + p) * _factorial(m + q)
            count += len(graphs) * n_perm
            if count > caps.max_graphs:
                raise CapExceeded(
                    f"diagram enumeration passed {caps.max_graphs} objects; lower the caps"
                )
            for g in graphs:
                stats = decompose(g)
                key = (p, q, _shape_class(g), stats.k, stats.n_g + stats.n_g_star)
                bucket = cells.setdefault(key, [])
                for pi in permutations(range(g.vertices.n_black)):
                    for tau in permutations(range(g.vertices.n_white)):
                        d = Diagram(g, pi, tau)
                        if linked_only and not is_linked(d):
                            continue
                        bucket.append(coef * diagram_value(d, externals, kernels, caps.budget))
    out = []
    for (p, q, klass, k, ng), vals in cells.items():
        if vals:
            out.append(SeriesCell(p, q, klass, k, ng, _fsum_complex(vals)))
    return out


# ---------------------------------------------------------------------------
# normalization constant


@dataclass(frozen=True)
class NormalizationResult:
    finite_sum: float
    linked_exp: float
    linked_sum: float
    tail: float
    finite_series: ExpansionSeries
    linked_series: ExpansionSeries

    @property
    def gap(self) -> float:
        return abs(self.finite_sum - self.linked_exp)


def normalization_constant(spec: TrialStateSpec, caps: Caps = Caps()) -> NormalizationResult:
    """Both forms of the normalization constant.

    The finite form sums every diagram with at most one internal vertex per
    particle (larger blocks vanish through the rank of the density matrix);
    the linked form exponentiates the linked sum under the truncation caps.
    Their gap is a built-in self-check of the resummation.
    """
    kernels = spec.kernels()
    n_up, n_dn = spec.pf_up.N, spec.pf_dn.N

    finite_caps = replace(
        caps,
        max_internal=min(caps.max_internal, n_up + n_dn),
        vertex_cap=max(caps.vertex_cap, min(caps.max_internal, n_up + n_dn)),
    )
    finite_cells = _walk_cells(
        spec, kernels, 0, 0, [], finite_caps,
        linked_only=False, rank_filter=True, graded=False,
    )
    finite_series = _series_finalize("normalization_finite", finite_cells, finite_caps, spec, 0)

    linked_cells = _walk_cells(
        spec, kernels, 0, 0, [], caps,
        linked_only=True, rank_filter=False, graded=True,
    )
    linked_series = _series_finalize("normalization_linked", linked_cells, caps, spec, 0)

    fact_int = _factorial(n_up) * _factorial(n_dn)
    fact = float(fact_int) if fact_int.bit_length() < 1024 else math.inf
    finite_total = finite_series.total()
    linked_total = linked_series.total()
    _require_real(finite_total, "normalization finite sum")
    _require_real(linked_total, "normalization linked sum")
    finite = fact * (1.0 + finite_total.real)
    # the exponential form can overflow float range long before the sums do
    log_linked = math.lgamma(n_up + 1) + math.lgamma(n_dn + 1) + linked_total.real
    if log_linked > 709.0:
        linked_exp = math.inf
    elif math.isfinite(fact):
        linked_exp = fact * math.exp(linked_total.real)
    else:
        linked_exp = math.exp(log_linked)
    return NormalizationResult(
        finite_sum=finite,
        linked_exp=linked_exp,
        linked_sum=linked_total.real,
        tail=linked_series.tail_bound,
        finite_series=finite_series,
        linked_series=linked_series,
    )


def _require_real(value: complex, what: str, tol: float = 1e-8) -> float:
    scale = max(abs(value), 1e-300)
    if abs(value.imag) > tol * scale:
        raise GGRError(f"{what} has a non-negligible imaginary part: {value!r}")
    return value.real


# ---------------------------------------------------------------------------
# reduced densities


def _pair_prefactor(spec: TrialStateSpec, n: int, m: int, externals) -> float:
    sol = spec.scattering
    ext = np.asarray(externals, dtype=float).reshape(n + m, 3)
    pref = 1.0
    for i in range(n + m):
        for j in range(i + 1, n + m):
            same = (i < n) == (j < n)
            f = sol.pair_factor(same, ext[i] - ext[j])
            pref *= float(f) ** 2
    return pref


def reduced_density(spec: TrialStateSpec, n: int, m: int, externals, caps: Caps = Caps()) -> float:
    """Reduced density at the given external coordinates (blacks first).

    Product of squared pair factors over external pairs times the partition
    resummation: for each ordered split of the externals into blocks, each
    block contributes its linked diagram sum, and the block count is
    compensated by 1/kappa!.
    """
    if n < 0 or m < 0 or n + m < 1:
        raise ValueError("need at least one external vertex")
    if n > spec.pf_up.N or m > spec.pf_dn.N:
        return 0.0
    kernels = spec.kernels()
    ext = np.asarray(externals, dtype=float).reshape(n + m, 3)

    memo = {}

    def block_sum(b_idx, w_idx) -> complex:
        key = (b_idx, w_idx)
        if key in memo:
            return memo[key]
        b_coords = ext[list(b_idx)] if b_idx else np.zeros((0, 3))
        w_coords = ext[[n + j for j in w_idx]] if w_idx else np.zeros((0, 3))
        coords = np.vstack([b_coords, w_coords])
        cells = _walk_cells(
            spec, kernels, len(b_idx), len(w_idx), coords, caps,
            linked_only=True, rank_filter=False, graded=True,
        )
        val = _fsum_complex([c.value for c in cells])
        memo[key] = val
        return val

    total_terms = []
    for kappa in range(1, n + m + 1):
        coef = 1.0 / _factorial(kappa)
        for blocks_b, blocks_w in enumerate_partitions(n, m, kappa):
            prod = complex(coef)
            for lam in range(kappa):
                prod *= block_sum(blocks_b[lam], blocks_w[lam])
            total_terms.append(prod)
    total = _fsum_complex(total_terms)
    value = _pair_prefactor(spec, n, m, ext) * _require_real(total, f"reduced density ({n},{m})")
    return value


def graded_partial_sums(
    spec: TrialStateSpec,
    n: int,
    m: int,
    externals,
    caps: Caps = Caps(),
    linked_only: bool = False,
) -> ExpansionSeries:
    """Diagram sums resolved by (p, q, class, k, ng) cells.

    The default walks the full diagram set, where whole cells with more
    internal blacks than particles vanish through the density-matrix rank;
    linked_only grades the linked sums that enter the resummation instead.
    """
    kernels = spec.kernels()
    ext = np.asarray(externals, dtype=float).reshape(n + m, 3) if n + m else []
    cells = _walk_cells(
        spec, kernels, n, m, ext, caps,
        linked_only=linked_only, rank_filter=False, graded=True,
    )
    # target lands in an unquoted csv column, so no commas in the name
    target = f"density_{n}_{m}" + ("_linked" if linked_only else "")
    return _series_finalize(target, cells, caps, spec, n + m)


# ---------------------------------------------------------------------------
# convergence monitor


@dataclass(frozen=True)
class MonitorReport:
    gamma_inf: float
    I_g: float
    I_gamma: float
    kernel_product: float
    schedule_product: float
    threshold: float

    @property
    def ok(self) -> bool:
        return self.kernel_product < self.threshold and self.schedule_product < self.threshold


def convergence_monitor(
    inputs: ConvergenceInputs,
    s: float,
    log_n: float,
    a: float,
    b: float,
    rho: float,
    threshold: float = 1.0,
) -> MonitorReport:
    """Advisory check of the two dimensionless products controlling the
    series; nothing is gated on it because the sharp constants are unknown."""
    kernel_product = inputs.gamma_inf * inputs.I_g * inputs.I_gamma * inputs.C_TG
    schedule_product = s * a * b * b * rho * log_n**3
    return MonitorReport(
        gamma_inf=inputs.gamma_inf,
        I_g=inputs.I_g,
        I_gamma=inputs.I_gamma,
        kernel_product=kernel_product,
        schedule_product=schedule_product,
        threshold=threshold,
    )


def monitor_inputs(spec: TrialStateSpec) -> ConvergenceInputs:
    """Measured convergence ingredients of a trial state."""
    ints = g_integrals(spec.scattering)
    I_g = max(ints["I_gs"], ints["I_gp"])
    gamma_inf = max(spec.rho_up, spec.rho_dn)
    I_gamma = 0.0
    L = spec.torus.L
    for pf in (spec.pf_up, spec.pf_dn):
        if pf.unit is None:
            continue
        M = max(4 * pf.max_index() + 2, 8)
        value = dirichlet_l1(pf, Torus(L, M), ()).value
        I_gamma = max(I_gamma, value / L**3)
    return ConvergenceInputs(gamma_inf=gamma_inf, I_g=I_g, I_gamma=I_gamma)


def monitor_from_spec(spec: TrialStateSpec, threshold: float = 1.0) -> MonitorReport:
    a, b, rho, s, log_n = _schedule_numbers(spec)
    return convergence_monitor(monitor_inputs(spec), s, log_n, a, b, rho, threshold)


# ---------------------------------------------------------------------------
# CSV export

_CSV_HEADER = "target,p,q,class,k,n_g_total,partial_sum_re,partial_sum_im,cell_bound"


def series_csv(series_list) -> str:
    """Deterministic CSV for one or more graded series tables."""
    lines = ["# ggr-series v1", _CSV_HEADER]
    for series in series_list:
        for c in series.cells:
            lines.append(
                f"{series.target},{c.p},{c.q},{c.klass},{c.k},{c.ng_total},"
                f"{c.value.real!r},{c.value.imag!r},{c.bound!r}"
            )
    return "\n".join(lines) + "\n"
