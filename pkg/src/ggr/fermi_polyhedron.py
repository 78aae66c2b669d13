"""Sign-symmetric rational Fermi polyhedra and their lattice fillings.

The occupied momentum set is P_F = k_F * P intersected with the reciprocal
lattice (2 pi / L) Z^3, where P is the convex hull of s rational corners
close to the unit sphere, closed under the sign group {+-1}^3 and rescaled
by a single factor zeta so that Vol(P) = 4 pi / 3.  Rational corner
coordinates with large prime denominators keep lattice points away from the
hull boundary, which makes the filling robust: membership decisions are made
with a float prefilter and settled exactly in rational arithmetic inside a
narrow margin band.

Closure under the sign group means -k is occupied whenever k is, so Slater
determinants built from P_F admit a real orbital basis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import GGRError
from .torus import TWO_PI, Torus

_GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0
_DEFAULT_PRIMES = (101, 103, 107)
_FLOAT_BAND = 1e-9  # relative margin width escalated to exact arithmetic
_DEGENERACY_TOL = 1e-12


class PolyhedronError(GGRError):
    pass


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


def octant_directions(count: int) -> np.ndarray:
    """count well-spread unit directions strictly inside the positive octant.

    Golden-angle spiral in (cos theta, phi) coordinates, with phi kept away
    from the octant walls so every component stays positive.
    """
    i = np.arange(count)
    z = (i + 0.5) / count
    phi = (0.08 + 0.84 * ((i * (_GOLDEN - 1.0)) % 1.0)) * (np.pi / 2.0)
    st = np.sqrt(1.0 - z * z)
    return np.stack([st * np.cos(phi), st * np.sin(phi), z], axis=-1)


def _sign_orbit(row):
    out = set()
    for sx in (1, -1):
        for sy in (1, -1):
            for sz in (1, -1):
                out.add((sx * row[0], sy * row[1], sz * row[2]))
    return out


@dataclass(frozen=True)
class UnitPolyhedron:
    """Rational-corner polyhedron with its volume-normalising scale zeta.

    The geometric corners are zeta * numerators / primes (componentwise).
    faces holds integer outward half-space data (h, c) with h . x <= c for
    every unscaled rational corner x and c > 0 (origin strictly inside).
    """

    numerators: np.ndarray
    primes: tuple
    zeta: float
    faces: tuple = field(repr=False)

    @property
    def s(self) -> int:
        return self.numerators.shape[0]

    def corners(self) -> np.ndarray:
        """Scaled corner coordinates, shape (s, 3)."""
        return self.zeta * self.numerators / np.asarray(self.primes, dtype=float)

    def corner_radii(self) -> np.ndarray:
        c = self.corners()
        return np.sqrt(np.sum(c * c, axis=-1))

    def contains(self, pts, scale: float = 1.0) -> np.ndarray:
        """Float membership test of points in scale * (scaled polyhedron)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        t = scale * self.zeta
        ok = np.ones(len(pts), dtype=bool)
        for h, c in self.faces:
            ok &= pts @ np.asarray(h, dtype=float) <= c * t + 1e-12 * abs(c) * t
        return ok


def _exact_faces(numerators, primes):
    """Outward integer half-spaces of the hull, recomputed in exact arithmetic."""
    qs = primes
    corners_f = numerators / np.asarray(qs, dtype=float)
    try:
        hull = ConvexHull(corners_f)
    except QhullError as exc:
        raise PolyhedronError(f"degenerate hull (coplanar corners?): {exc}") from exc
    if len(hull.vertices) != len(numerators):
        raise PolyhedronError(
            f"{len(numerators) - len(hull.vertices)} corners are not extreme points"
        )

    frac_rows = [
        tuple(Fraction(int(p), int(q)) for p, q in zip(row, qs)) for row in numerators
    ]
    faces = {}
    for simplex in hull.simplices:
        v1, v2, v3 = (frac_rows[i] for i in simplex)
        e1 = tuple(v2[k] - v1[k] for k in range(3))
        e2 = tuple(v3[k] - v1[k] for k in range(3))
        h = (
            e1[1] * e2[2] - e1[2] * e2[1],
            e1[2] * e2[0] - e1[0] * e2[2],
            e1[0] * e2[1] - e1[1] * e2[0],
        )
        c = sum(h[k] * v1[k] for k in range(3))
        if c == 0:
            raise PolyhedronError("hull facet passes through the origin")
        if c < 0:
            h, c = tuple(-x for x in h), -c
        # clear denominators, divide by the common factor
        denom = np.lcm.reduce([x.denominator for x in (*h, c)])
        ints = [int(x * denom) for x in (*h, c)]
        g = gcd(gcd(gcd(abs(ints[0]), abs(ints[1])), abs(ints[2])), ints[3])
        ints = [x // g for x in ints]
        faces[(ints[0], ints[1], ints[2])] = ints[3]

    face_list = tuple(sorted((h, c) for h, c in faces.items()))
    # exact sanity pass: every corner inside every face
    for h, c in face_list:
        for row in frac_rows:
            if h[0] * row[0] + h[1] * row[1] + h[2] * row[2] > c:
                raise PolyhedronError("inconsistent hull facet (corner outside)")
    return face_list


def build_polyhedron(s: int, primes=_DEFAULT_PRIMES, seed_directions=None) -> UnitPolyhedron:
    """Construct the volume-normalised rational polyhedron with s corners.

    Directions are drawn from an octant spiral (or given explicitly), rounded
    onto the prime-denominator grid, and closed under the sign group; hence s
    must be a multiple of 8.  A single scale zeta enforces Vol = 4 pi / 3.
    """
    if s < 8:
        raise ValueError(f"need at least 8 corners, got s={s}")
    if s % 8 != 0:
        raise ValueError(f"sign-group closure requires s divisible by 8, got {s}")
    primes = tuple(int(q) for q in primes)
    if len(primes) != 3 or len(set(primes)) != 3:
        raise ValueError(f"need three distinct primes, got {primes}")
    for q in primes:
        if q < 101 or not _is_prime(q):
            raise ValueError(f"denominators must be primes >= 101, got {q}")

    n_orbits = s // 8
    if seed_directions is not None:
        dirs = np.atleast_2d(np.asarray(seed_directions, dtype=float))
        if len(dirs) != n_orbits:
            raise ValueError(f"expected {n_orbits} seed directions for s={s}, got {len(dirs)}")
        if np.any(dirs <= 0):
            raise ValueError("seed directions must lie in the open positive octant")
        dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    else:
        dirs = octant_directions(n_orbits)

    count = n_orbits
    while True:
        rows = []
        seen = set()
        for d in dirs:
            row = tuple(max(1, int(round(q * x))) for q, x in zip(primes, d))
            if row not in seen:
                seen.add(row)
                rows.append(row)
        if len(rows) >= n_orbits or seed_directions is not None:
            rows = rows[:n_orbits]
            break
        count += 1  # rounding collision: redraw from a denser spiral
        dirs = octant_directions(count)
    if len(rows) < n_orbits:
        raise PolyhedronError("could not find enough distinct rounded corners")

    numerators = []
    for row in rows:
        numerators.extend(sorted(_sign_orbit(row)))
    numerators = np.array(sorted(numerators), dtype=np.int64)
    if len(numerators) != s:
        raise PolyhedronError(
            f"sign orbits collided: got {len(numerators)} corners, wanted {s}"
        )

    faces = _exact_faces(numerators, primes)
    vol0 = ConvexHull(numerators / np.asarray(primes, dtype=float)).volume
    zeta = float(((4.0 * np.pi / 3.0) / vol0) ** (1.0 / 3.0))
    return UnitPolyhedron(numerators=numerators, primes=primes, zeta=zeta, faces=faces)


# ---------------------------------------------------------------------------
# lattice filling


@dataclass(frozen=True)
class FermiPolyhedron:
    """Occupied momentum set: integer lattice triples inside k_F * P.

    points are the integer coordinates n with k = (2 pi / L) n, sorted
    lexicographically.  kf_ratio is the exact rational k_F L / (2 pi).
    Custom (not hull-built) sets are supported through from_points for
    small cross-check configurations; those may lack sign symmetry.
    """

    L: float
    points: np.ndarray
    kf_ratio: Fraction | None = None
    unit: UnitPolyhedron | None = None
    symmetric: bool = True
    boundary_report: tuple = ()

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.int64).reshape(-1, 3)
        order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))
        pts = pts[order]
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ValueError("duplicate momentum points")
        # empty sets are allowed: a fully polarized state has no partner spin
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.symmetric:
            have = {tuple(p) for p in pts}
            for p in have:
                if (-p[0], -p[1], -p[2]) not in have:
                    raise PolyhedronError(f"momentum set not closed under k -> -k at {p}")

    @classmethod
    def from_points(cls, points, L: float, symmetric: bool | None = None) -> "FermiPolyhedron":
        pts = np.asarray(points, dtype=np.int64).reshape(-1, 3)
        if symmetric is None:
            have = {tuple(p) for p in pts}
            symmetric = all((-p[0], -p[1], -p[2]) in have for p in have)
        return cls(L=float(L), points=pts, symmetric=bool(symmetric))

    @property
    def N(self) -> int:
        return len(self.points)

    @property
    def k_F(self) -> float:
        if self.kf_ratio is None:
            raise ValueError("k_F is only defined for hull-built momentum sets")
        return float(self.kf_ratio) * TWO_PI / self.L

    @property
    def rho(self) -> float:
        return self.N / self.L**3

    def momenta(self) -> np.ndarray:
        return (TWO_PI / self.L) * self.points.astype(float)

    def max_index(self) -> int:
        if self.N == 0:
            return 0
        return int(np.abs(self.points).max())


def lattice_points(poly: UnitPolyhedron, kf_ratio, L: float) -> FermiPolyhedron:
    """Fill k_F * P with reciprocal-lattice points, deciding the boundary exactly.

    kf_ratio is the rational k_F L / (2 pi) (a Fraction or a string like
    '39/5').  Bulk decisions use vectorised float margins; candidates within
    a relative band of any face are settled with Fraction arithmetic against
    the exact binary value of the float scale, so reruns are bit-stable.
    Near-degenerate boundary points are recorded in boundary_report.
    """
    ratio = Fraction(kf_ratio)
    if ratio <= 0:
        raise ValueError(f"k_F ratio must be positive, got {ratio}")
    t = float(ratio) * poly.zeta  # polyhedron scale in lattice units

    nmax = int(np.floor(float(ratio) * float(np.max(np.abs(poly.corners()))))) + 1
    r = np.arange(-nmax, nmax + 1)
    cand = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)

    normals = np.array([h for h, _ in poly.faces], dtype=float)
    offsets = np.array([c for _, c in poly.faces], dtype=float)
    margins = (cand @ normals.T) / offsets - t  # <= 0 means inside this face
    worst = margins.max(axis=1)
    inside = worst <= -_FLOAT_BAND * t
    unsure = np.flatnonzero(np.abs(worst) < _FLOAT_BAND * t)

    report = []
    if len(unsure):
        t_exact = ratio * Fraction(poly.zeta)  # float zeta taken at its exact binary value
        for ci in unsure:
            n = cand[ci]
            ok = True
            for h, c in poly.faces:
                lhs = int(h[0]) * int(n[0]) + int(h[1]) * int(n[1]) + int(h[2]) * int(n[2])
                rel = Fraction(lhs) / (c * t_exact) - 1
                if abs(rel) < _DEGENERACY_TOL:
                    report.append((tuple(int(x) for x in n), float(rel)))
                if lhs > c * t_exact:
                    ok = False
                    break
            inside[ci] = ok

    pts = cand[inside]
    if len(pts) == 0:
        raise PolyhedronError(f"no lattice points inside k_F P (ratio {ratio})")
    return FermiPolyhedron(
        L=float(L),
        points=pts,
        kf_ratio=ratio,
        unit=poly,
        symmetric=True,
        boundary_report=tuple(report),
    )


# ---------------------------------------------------------------------------
# diagnostics


def kinetic_energy(pf: FermiPolyhedron) -> float:
    """Sum of |k|^2 over the occupied set; the integer part is summed exactly."""
    n2 = int(np.sum(pf.points.astype(object) ** 2))  # exact integer arithmetic
    return (TWO_PI / pf.L) ** 2 * float(n2)


def free_kinetic_reference(pf: FermiPolyhedron) -> float:
    """(3/5) (6 pi^2)^{2/3} rho^{5/3} L^3, the isotropic-sea kinetic density scale."""
    return 0.6 * (6.0 * np.pi**2) ** (2.0 / 3.0) * pf.rho ** (5.0 / 3.0) * pf.L**3


@dataclass(frozen=True)
class DirichletReport:
    value: float
    reference: float
    degree: int

    @property
    def ratio(self) -> float:
        return self.value / self.reference


def dirichlet_l1(pf: FermiPolyhedron, torus: Torus, monomial: tuple = ()) -> DirichletReport:
    """L^1 norm of the momentum-sum kernel sum_k m(k) exp(i k.x) over the torus.

    monomial selects m(k): () for 1, (j,) for k_j, (j, j') for k_j k_j'.
    Compared against s * rho^(deg/3) * (log N)^3 (one extra log for degree 2),
    where s is the corner count of the generating polyhedron.
    """
    if len(monomial) > 2:
        raise ValueError("monomial degree at most 2")
    nmax = pf.max_index()
    if torus.M < 4 * nmax:
        raise ValueError(
            f"under-resolved grid: M={torus.M} < 4*max_index={4 * nmax}"
        )

    k = pf.momenta()
    coeff = np.ones(pf.N)
    for j in monomial:
        coeff = coeff * k[:, j]

    spread = np.zeros((torus.M,) * 3, dtype=complex)
    idx = np.mod(pf.points, torus.M)
    np.add.at(spread, (idx[:, 0], idx[:, 1], idx[:, 2]), coeff)
    kernel = np.fft.ifftn(spread) * torus.M**3  # sum_n c_n exp(2 pi i n.m / M)
    value = float(torus.weight * np.abs(kernel).sum())

    deg = len(monomial)
    if pf.unit is None:
        raise ValueError("reference scale needs a hull-built momentum set")
    logN = np.log(pf.N) if pf.N > 2 else 1.0
    reference = pf.unit.s * pf.rho ** (deg / 3.0) * logN ** (4 if deg == 2 else 3)
    return DirichletReport(value=value, reference=float(reference), degree=deg)


# ---------------------------------------------------------------------------
# serialization

_HEADER = "ggr-fermi-polyhedron v1"


def to_text(pf: FermiPolyhedron) -> str:
    """Deterministic text form: header scalars, corner numerators, lattice triples."""
    if pf.unit is None or pf.kf_ratio is None:
        raise ValueError("only hull-built momentum sets serialise")
    u = pf.unit
    lines = [
        _HEADER,
        f"s {u.s}",
        f"zeta {u.zeta!r}",
        f"primes {u.primes[0]} {u.primes[1]} {u.primes[2]}",
        f"kf_ratio {pf.kf_ratio.numerator}/{pf.kf_ratio.denominator}",
        f"L {pf.L!r}",
        f"corners {u.s}",
    ]
    lines += [f"{r[0]} {r[1]} {r[2]}" for r in u.numerators]
    lines.append(f"points {pf.N}")
    lines += [f"{r[0]} {r[1]} {r[2]}" for r in pf.points]
    return "\n".join(lines) + "\n"


def from_text(text: str) -> FermiPolyhedron:
    lines = text.strip().split("\n")
    if lines[0] != _HEADER:
        raise ValueError(f"unrecognised header {lines[0]!r}")
    kv = {}
    i = 1
    for key in ("s", "zeta", "primes", "kf_ratio", "L"):
        name, _, rest = lines[i].partition(" ")
        if name != key:
            raise ValueError(f"expected key {key!r}, found {name!r}")
        kv[key] = rest
        i += 1
    s = int(kv["s"])
    zeta = float(kv["zeta"])
    primes = tuple(int(x) for x in kv["primes"].split())
    ratio = Fraction(kv["kf_ratio"])
    L = float(kv["L"])

    tag, _, count = lines[i].partition(" ")
    if tag != "corners" or int(count) != s:
        raise ValueError("corner block mismatch")
    i += 1
    numerators = np.array(
        [[int(x) for x in lines[i + j].split()] for j in range(s)], dtype=np.int64
    )
    i += s
    tag, _, count = lines[i].partition(" ")
    if tag != "points":
        raise ValueError("point block mismatch")
    n_pts = int(count)
    i += 1
    pts = np.array(
        [[int(x) for x in lines[i + j].split()] for j in range(n_pts)], dtype=np.int64
    )

    faces = _exact_faces(numerators, primes)
    unit = UnitPolyhedron(numerators=numerators, primes=primes, zeta=zeta, faces=faces)
    return FermiPolyhedron(
        L=L, points=pts, kf_ratio=ratio, unit=unit, symmetric=True
    )
