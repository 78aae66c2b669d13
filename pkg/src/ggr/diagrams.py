"""Combinatorics of the cluster expansion: correlation graphs, diagrams,
clusters, external-label partitions, trees, anchored trees.

Vertex bookkeeping: spin-up particles are black, spin-down white.  External
vertices carry the fixed arguments of a reduced density; internal vertices
get integrated out.  Blacks occupy labels 0..n+p-1 with the n externals
first; whites follow at offset n+p, again externals first.

Everything enumerates labeled objects in a canonical order (edge sets
lexicographic, permutations in one-line lexicographic order) so downstream
concurrent evaluation can reduce in a reproducible order.  Caps are hard
errors; truncation policy belongs to the series assembly, not here.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, permutations, product

from .errors import CapExceeded

DEFAULT_VERTEX_CAP = 8


def check_vertex_cap(total: int, cap: int = DEFAULT_VERTEX_CAP) -> None:
    if total > cap:
        raise CapExceeded(f"{total} vertices exceed the vertex cap {cap}")


def permutation_sign(perm) -> int:
    seen = [False] * len(perm)
    sign = 1
    for i in range(len(perm)):
        if seen[i]:
            continue
        j = i
        length = 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


class _DSU:
    __slots__ = ("parent",)

    def __init__(self, size: int):
        self.parent = list(range(size))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        self.parent[self.find(a)] = self.find(b)

    def n_roots(self) -> int:
        return sum(1 for x in range(len(self.parent)) if self.find(x) == x)


@dataclass(frozen=True)
class VertexSet:
    """Counts and label layout: p, q internal blacks/whites, n, m externals."""

    p: int
    q: int
    n: int = 0
    m: int = 0

    def __post_init__(self):
        if min(self.p, self.q, self.n, self.m) < 0:
            raise ValueError("vertex counts must be nonnegative")

    @property
    def n_black(self) -> int:
        return self.n + self.p

    @property
    def n_white(self) -> int:
        return self.m + self.q

    @property
    def total(self) -> int:
        return self.n + self.p + self.m + self.q

    def is_black(self, v: int) -> bool:
        return v < self.n_black

    def is_external(self, v: int) -> bool:
        return v < self.n or self.n_black <= v < self.n_black + self.m

    def same_color(self, u: int, v: int) -> bool:
        return self.is_black(u) == self.is_black(v)

    def white_local(self, v: int) -> int:
        return v - self.n_black

    def internals(self) -> tuple:
        return tuple(v for v in range(self.total) if not self.is_external(v))

    def externals(self) -> tuple:
        return tuple(v for v in range(self.total) if self.is_external(v))


@dataclass(frozen=True)
class GGraph:
    """Simple graph of pair-correlation edges on a vertex set.

    Admissibility: no edge joins two externals, every internal vertex is
    covered.  Edges between same-color vertices carry the triplet-channel
    factor, cross-color edges the singlet one.
    """

    vertices: VertexSet
    edges: tuple

    def __post_init__(self):
        vs = self.vertices
        prev = None
        deg = [0] * vs.total
        for e in self.edges:
            a, b = e
            if not (0 <= a < b < vs.total):
                raise ValueError(f"bad edge {e}")
            if vs.is_external(a) and vs.is_external(b):
                raise ValueError(f"edge {e} joins two external vertices")
            if prev is not None and e <= prev:
                raise ValueError("edges must be strictly increasing")
            prev = e
            deg[a] += 1
            deg[b] += 1
        for v in vs.internals():
            if deg[v] == 0:
                raise ValueError(f"internal vertex {v} is isolated")

    def channel(self, edge) -> str:
        return "p" if self.vertices.same_color(*edge) else "s"


@dataclass(frozen=True)
class Diagram:
    """A correlation graph plus one permutation per color."""

    graph: GGraph
    pi: tuple
    tau: tuple

    def __post_init__(self):
        vs = self.graph.vertices
        if sorted(self.pi) != list(range(vs.n_black)):
            raise ValueError("pi must permute the black labels")
        if sorted(self.tau) != list(range(vs.n_white)):
            raise ValueError("tau must permute the white labels")

    @property
    def sign(self) -> int:
        return permutation_sign(self.pi) * permutation_sign(self.tau)


def is_linked(d: Diagram) -> bool:
    """Connectivity of g-edges plus permutation arcs; fixed points are
    self-loops and never merge components."""
    vs = d.graph.vertices
    if vs.total <= 1:
        return True
    dsu = _DSU(vs.total)
    for a, b in d.graph.edges:
        dsu.union(a, b)
    for i, j in enumerate(d.pi):
        dsu.union(i, j)
    off = vs.n_black
    for i, j in enumerate(d.tau):
        dsu.union(off + i, off + j)
    return dsu.n_roots() == 1


def diagram_components(d: Diagram) -> tuple:
    """Linked components (g-edges plus permutation arcs), sorted by minimum."""
    vs = d.graph.vertices
    dsu = _DSU(vs.total)
    for a, b in d.graph.edges:
        dsu.union(a, b)
    for i, j in enumerate(d.pi):
        dsu.union(i, j)
    off = vs.n_black
    for i, j in enumerate(d.tau):
        dsu.union(off + i, off + j)
    groups = {}
    for v in range(vs.total):
        groups.setdefault(dsu.find(v), []).append(v)
    return tuple(sorted((frozenset(c) for c in groups.values()), key=min))


# ---------------------------------------------------------------------------
# cluster statistics


@dataclass(frozen=True)
class ClusterDecomposition:
    """Components of the correlation graph alone, with the size bookkeeping.

    k counts internal-only clusters, kappa the external-containing ones
    (isolated externals are singleton clusters); n_g is the surplus of the
    internal-only clusters over perfect pairs, n_g_star the internal count
    inside external clusters.  Always n_g + n_g_star + 2k = p + q.
    """

    clusters: tuple
    k: int
    kappa: int
    n_g: int
    n_g_star: int


def graph_clusters(g: GGraph) -> tuple:
    vs = g.vertices
    dsu = _DSU(vs.total)
    for a, b in g.edges:
        dsu.union(a, b)
    groups = {}
    for v in range(vs.total):
        groups.setdefault(dsu.find(v), []).append(v)
    return tuple(sorted((frozenset(c) for c in groups.values()), key=min))


def decompose(obj) -> ClusterDecomposition:
    g = obj.graph if isinstance(obj, Diagram) else obj
    vs = g.vertices
    clusters = graph_clusters(g)
    k = kappa = n_g = n_g_star = 0
    for c in clusters:
        ext = sum(1 for v in c if vs.is_external(v))
        if ext:
            kappa += 1
            n_g_star += len(c) - ext
        else:
            k += 1
            n_g += len(c) - 2
    if n_g + n_g_star + 2 * k != vs.p + vs.q:
        raise AssertionError("cluster bookkeeping out of balance")
    return ClusterDecomposition(clusters, k, kappa, n_g, n_g_star)


# ---------------------------------------------------------------------------
# enumeration


def enumerate_ggraphs(p, q, n=0, m=0, cap=DEFAULT_VERTEX_CAP) -> list:
    """Every admissible graph exactly once, lexicographic in the edge set."""
    vs = VertexSet(p, q, n, m)
    check_vertex_cap(vs.total, cap)
    allowed = [
        e
        for e in combinations(range(vs.total), 2)
        if not (vs.is_external(e[0]) and vs.is_external(e[1]))
    ]
    suffix = [frozenset()] * (len(allowed) + 1)
    for i in range(len(allowed) - 1, -1, -1):
        suffix[i] = suffix[i + 1] | frozenset(allowed[i])

    out = []
    chosen = []

    def grow(start, uncovered):
        if not uncovered:
            out.append(GGraph(vs, tuple(chosen)))
        for i in range(start, len(allowed)):
            if not uncovered <= suffix[i]:
                break  # suffixes only shrink; later starts cannot help
            chosen.append(allowed[i])
            grow(i + 1, uncovered - frozenset(allowed[i]))
            chosen.pop()

    grow(0, frozenset(vs.internals()))
    return out


def enumerate_diagrams(p, q, n=0, m=0, linked_only=False, cap=DEFAULT_VERTEX_CAP) -> list:
    """Graphs crossed with the two color permutations, canonical order."""
    out = []
    for g in enumerate_ggraphs(p, q, n, m, cap):
        for pi in permutations(range(g.vertices.n_black)):
            for tau in permutations(range(g.vertices.n_white)):
                d = Diagram(g, pi, tau)
                if not linked_only or is_linked(d):
                    out.append(d)
    return out


@lru_cache(maxsize=None)
def _connected_shapes(size: int) -> tuple:
    """All connected graphs on range(size), as sorted edge tuples."""
    if size == 1:
        return ((),)
    pairs = list(combinations(range(size), 2))
    shapes = []
    for bits in range(2 ** len(pairs)):
        edges = tuple(pairs[i] for i in range(len(pairs)) if bits >> i & 1)
        dsu = _DSU(size)
        for a, b in edges:
            dsu.union(a, b)
        if dsu.n_roots() == 1:
            shapes.append(edges)
    return tuple(shapes)


def _graphs_on(labels) -> list:
    labels = sorted(labels)
    return [
        tuple((labels[a], labels[b]) for a, b in shape)
        for shape in _connected_shapes(len(labels))
    ]


def _cluster_partitions(items, k_max, surplus_budget):
    """Unordered partitions of items into <= k_max blocks of size >= 2 whose
    total surplus over pair size stays within budget."""
    items = list(items)
    if not items:
        yield ()
        return
    if k_max <= 0 or len(items) < 2:
        return
    first, rest = items[0], items[1:]
    for extra in range(1, len(rest) + 1):
        if extra - 1 > surplus_budget:
            break
        for others in combinations(rest, extra):
            taken = set(others)
            remaining = [x for x in rest if x not in taken]
            for tail in _cluster_partitions(remaining, k_max - 1, surplus_budget - (extra - 1)):
                yield ((first, *others), *tail)


def _external_side_graphs(ext_labels, int_labels) -> list:
    """Graphs on the external region: internals covered, no all-internal
    component, no external-external edges."""
    ext_set = set(ext_labels)
    verts = sorted(list(ext_labels) + list(int_labels))
    allowed = [
        e for e in combinations(verts, 2) if not (e[0] in ext_set and e[1] in ext_set)
    ]
    index = {v: i for i, v in enumerate(verts)}
    out = []
    for bits in range(2 ** len(allowed)):
        edges = tuple(allowed[i] for i in range(len(allowed)) if bits >> i & 1)
        deg = dict.fromkeys(int_labels, 0)
        for a, b in edges:
            if a in deg:
                deg[a] += 1
            if b in deg:
                deg[b] += 1
        if any(d == 0 for d in deg.values()):
            continue
        dsu = _DSU(len(verts))
        for a, b in edges:
            dsu.union(index[a], index[b])
        roots_with_ext = {dsu.find(index[v]) for v in ext_labels}
        if any(dsu.find(index[v]) not in roots_with_ext for v in int_labels):
            continue
        out.append(edges)
    return out


def enumerate_ggraphs_graded(p, q, n=0, m=0, k_max=2, ng_max=2, cap=DEFAULT_VERTEX_CAP) -> list:
    """Admissible graphs whose cluster statistics satisfy k <= k_max and
    n_g + n_g_star <= ng_max.

    Agrees with filtering enumerate_ggraphs through decompose, but is built
    from the cluster structure directly, so large vertex counts under tight
    caps stay cheap (the brute subset walk is exponential in pair count).
    """
    vs = VertexSet(p, q, n, m)
    check_vertex_cap(vs.total, cap)
    internals = vs.internals()
    externals = vs.externals()
    out = []
    for attached in range(min(len(internals), ng_max) + 1):
        if attached > 0 and not externals:
            break
        for s_ext in combinations(internals, attached):
            taken = set(s_ext)
            rest = [v for v in internals if v not in taken]
            ext_choices = _external_side_graphs(externals, list(s_ext))
            if not ext_choices:
                continue
            for parts in _cluster_partitions(rest, k_max, ng_max - attached):
                for combo in product(*(_graphs_on(part) for part in parts)):
                    inner = tuple(e for shape in combo for e in shape)
                    for ext_edges in ext_choices:
                        out.append(GGraph(vs, tuple(sorted(inner + ext_edges))))
    out.sort(key=lambda g: g.edges)
    return out


# ---------------------------------------------------------------------------
# external-label partitions


def enumerate_partitions(n: int, m: int, kappa: int) -> list:
    """Ordered pairs of ordered kappa-block partitions of the external labels
    0..n-1 and 0..m-1; one-sided empty blocks allowed, doubly empty blocks
    not.  Empty for kappa > n + m by pigeonhole."""
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    out = []
    for ab in product(range(kappa), repeat=n):
        for aw in product(range(kappa), repeat=m):
            blocks_b = tuple(
                tuple(i for i in range(n) if ab[i] == blk) for blk in range(kappa)
            )
            blocks_w = tuple(
                tuple(j for j in range(m) if aw[j] == blk) for blk in range(kappa)
            )
            if any(not blocks_b[c] and not blocks_w[c] for c in range(kappa)):
                continue
            out.append((blocks_b, blocks_w))
    return out


# ---------------------------------------------------------------------------
# trees


def _prufer_decode(seq, total: int) -> tuple:
    degree = [1] * total
    for x in seq:
        degree[x] += 1
    edges = []
    for x in seq:
        leaf = min(v for v in range(total) if degree[v] == 1)
        edges.append((min(leaf, x), max(leaf, x)))
        degree[leaf] -= 1
        degree[x] -= 1
    u, v = (w for w in range(total) if degree[w] == 1)
    edges.append((u, v))
    return tuple(sorted(edges))


def enumerate_trees(p, q, n=0, m=0, cap=DEFAULT_VERTEX_CAP) -> list:
    """Spanning trees on all vertices avoiding external-external edges."""
    vs = VertexSet(p, q, n, m)
    check_vertex_cap(vs.total, cap)
    total = vs.total
    if total <= 1:
        return [()]
    out = []
    for seq in product(range(total), repeat=total - 2):
        edges = _prufer_decode(seq, total)
        if all(not (vs.is_external(a) and vs.is_external(b)) for a, b in edges):
            out.append(edges)
    return sorted(out)


@dataclass(frozen=True)
class AnchoredTree:
    """Directed inter-cluster edges whose contraction is a tree on clusters,
    with at most one incoming and one outgoing edge per vertex."""

    edges: tuple


def enumerate_anchored_trees(cluster_sizes, cap: int = DEFAULT_VERTEX_CAP) -> list:
    """All anchored trees for consecutive-labeled clusters of the given sizes."""
    sizes = [int(s) for s in cluster_sizes]
    if not sizes or min(sizes) < 1:
        raise ValueError("need at least one nonempty cluster")
    total = sum(sizes)
    check_vertex_cap(total, cap)
    k = len(sizes)
    starts = [0]
    for s in sizes:
        starts.append(starts[-1] + s)
    members = [tuple(range(starts[i], starts[i + 1])) for i in range(k)]
    if k == 1:
        return [AnchoredTree(())]

    out = []
    for seq in product(range(k), repeat=k - 2):
        tree = _prufer_decode(seq, k)
        per_edge = []
        for a, b in tree:
            opts = []
            for u in members[a]:
                for v in members[b]:
                    opts.append((u, v))
                    opts.append((v, u))
            per_edge.append(opts)
        for combo in product(*per_edge):
            indeg = {}
            outdeg = {}
            ok = True
            for u, v in combo:
                outdeg[u] = outdeg.get(u, 0) + 1
                indeg[v] = indeg.get(v, 0) + 1
                if outdeg[u] > 1 or indeg[v] > 1:
                    ok = False
                    break
            if ok:
                out.append(AnchoredTree(tuple(sorted(combo))))
    out.sort(key=lambda t: t.edges)
    return out


# ---------------------------------------------------------------------------
# one-up-one-down external diagrams


def classify_11_diagram(d: Diagram) -> str:
    """Sort a linked diagram with one external per color into A / B1 / B2:
    A has added vertices, B1 a same-color edge, B2 is the pure pair ladder."""
    vs = d.graph.vertices
    if (vs.n, vs.m) != (1, 1):
        raise ValueError("classification needs one external vertex of each color")
    stats = decompose(d)
    if stats.n_g + stats.n_g_star >= 1:
        return "A"
    if any(vs.same_color(a, b) for a, b in d.graph.edges):
        return "B1"
    return "B2"


def b2_matching_graph(k: int) -> GGraph:
    """Canonical ladder graph: internal black i paired with internal white i."""
    vs = VertexSet(k, k, 1, 1)
    off = vs.n_black
    return GGraph(vs, tuple((1 + i, off + 1 + i) for i in range(k)))


def b2_diagrams(k: int, cap: int = 10) -> list:
    """Linked pair-ladder diagrams on the canonical matching.

    Relabeling internals maps these onto the other k! - 1 matchings without
    changing values, so sums over all matchings fold into a factor k!.
    """
    if k < 1:
        raise ValueError("cluster count must be >= 1")
    g = b2_matching_graph(k)
    check_vertex_cap(g.vertices.total, cap)
    out = []
    for pi in permutations(range(k + 1)):
        for tau in permutations(range(k + 1)):
            d = Diagram(g, pi, tau)
            if is_linked(d):
                out.append(d)
    return out


# ---------------------------------------------------------------------------
# dump format: "p q n m | edges | pi | tau", one diagram per line


def dump_diagram(d: Diagram) -> str:
    vs = d.graph.vertices
    edges = " ".join(f"{a}-{b}" for a, b in d.graph.edges)
    pi = " ".join(map(str, d.pi))
    tau = " ".join(map(str, d.tau))
    return f"{vs.p} {vs.q} {vs.n} {vs.m} | {edges} | {pi} | {tau}"


def parse_diagram(line: str) -> Diagram:
    parts = [s.strip() for s in line.split("|")]
    if len(parts) != 4:
        raise ValueError(f"expected 4 |-separated fields, got {len(parts)}")
    p, q, n, m = map(int, parts[0].split())
    vs = VertexSet(p, q, n, m)
    edges = []
    for tok in parts[1].split():
        a, _, b = tok.partition("-")
        edges.append((int(a), int(b)))
    pi = tuple(map(int, parts[2].split()))
    tau = tuple(map(int, parts[3].split()))
    return Diagram(GGraph(vs, tuple(edges)), pi, tau)
