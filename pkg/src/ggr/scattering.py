"""Zero-energy two-body scattering on the half-line and the cutoff pair factors.

Units: hbar = 1 and particle mass 1/2, so the pair Hamiltonian is -Delta + v
acting on the relative coordinate and the radial zero-energy equations carry
the coupling v/2.  The s-channel substitution u = r f gives

    u'' = (v/2) u,

and the p-channel substitution u = r^2 f gives

    u'' = (v/2 + 2/r^2) u.

Outside the range of v the solutions are exactly 1 - a/r and 1 - ap^3/r^3;
the lengths a and ap are read off by matching the logarithmic derivative at
the range.  Both problems are linear, so a single outward integration fixes
everything: no iteration.

The variational characterisations

    4 pi a     = inf  int |grad f|^2 + (v/2) f^2 dx
    12 pi ap^3 = inf  int (|grad f|^2 + (v/2) f^2) |x|^2 dx

hold for the matched profiles; energy_integral() recomputes the functionals
by radial quadrature so tests can close that loop independently.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson, solve_ivp

from .errors import GGRError
from .torus import Torus, periodic_delta

_CHANNELS = ("s", "p")
_WEIGHTS = ("1", "x2")
_PROFILE_NODES = 1537


class ScatteringError(GGRError):
    """Radial solve failed to produce a usable matched solution."""


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class Potential:
    """Radial pair potential, non-negative, of finite range R0.

    kind is one of 'zero', 'hard_core', 'square_well', 'tabulated'.  A hard
    core is not evaluated pointwise; it enters the solves as the boundary
    condition f(core) = 0.
    """

    kind: str
    R0: float
    core: float = 0.0
    v0: float = 0.0
    r_table: tuple = field(default=(), repr=False)
    v_table: tuple = field(default=(), repr=False)

    @classmethod
    def zero(cls) -> "Potential":
        return cls(kind="zero", R0=0.0)

    @classmethod
    def hard_core(cls, radius: float) -> "Potential":
        if not radius > 0:
            raise ValueError(f"hard-core radius must be positive, got {radius}")
        return cls(kind="hard_core", R0=radius, core=radius)

    @classmethod
    def square_well(cls, v0: float, R0: float) -> "Potential":
        if v0 < 0:
            raise ValueError(f"potential must be non-negative, got v0={v0}")
        if not R0 > 0:
            raise ValueError(f"range must be positive, got R0={R0}")
        return cls(kind="square_well", R0=R0, v0=v0)

    @classmethod
    def tabulated(cls, r, v) -> "Potential":
        r = np.asarray(r, dtype=float)
        v = np.asarray(v, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 2:
            raise ValueError("tabulated potential needs matching 1d r and v arrays")
        if not np.all(np.diff(r) > 0) or r[0] < 0:
            raise ValueError("tabulated radii must be strictly increasing and >= 0")
        if np.any(v < 0):
            raise ValueError("potential must be non-negative everywhere")
        return cls(kind="tabulated", R0=float(r[-1]), r_table=tuple(r), v_table=tuple(v))

    @classmethod
    def from_file(cls, path) -> "Potential":
        data = np.loadtxt(path)
        if data.ndim != 2 or data.shape[1] != 2:
            raise ValueError(f"expected two columns (r, v) in {path}")
        return cls.tabulated(data[:, 0], data[:, 1])

    def soft(self, r) -> np.ndarray:
        """The finite part of v at radius r (0 for zero/hard_core kinds)."""
        r = np.asarray(r, dtype=float)
        if self.kind == "square_well":
            # closed ball: quadrature nodes landing exactly on R0 must see v0
            return np.where(r <= self.R0, self.v0, 0.0)
        if self.kind == "tabulated":
            return np.interp(r, np.asarray(self.r_table), np.asarray(self.v_table), right=0.0)
        return np.zeros_like(r)


# ---------------------------------------------------------------------------
# single-channel radial profiles


@dataclass(frozen=True)
class RadialChannel:
    """Matched zero-energy profile for one angular channel.

    length is the scattering length a for channel 's' and ap (not ap^3) for
    channel 'p'.  The stored nodes cover [r_start, R0]; beyond R0 the exact
    exterior form is used, so profile queries lose no accuracy in the tail.
    """

    channel: str
    length: float
    r_core: float
    R0: float
    r_nodes: np.ndarray
    f_nodes: np.ndarray
    fp_nodes: np.ndarray

    @property
    def length3(self) -> float:
        return self.length**3

    def _exterior(self, r):
        # r = 0 reaches this branch only when R0 = 0, where the profile is 1
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.channel == "s":
                out = 1.0 - self.length / r
            else:
                out = 1.0 - self.length3 / r**3
        return np.where(r > 0, out, 1.0) if self.length == 0.0 else out

    def _exterior_prime(self, r):
        if self.channel == "s":
            return self.length / r**2
        return 3.0 * self.length3 / r**4

    def f0(self, r) -> np.ndarray:
        """Uncut profile (tends to 1 at infinity), vectorised in r."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        ext = r >= self.R0
        out[ext] = self._exterior(r[ext])
        inner = (~ext) & (r >= self.r_core)
        if inner.any():
            if self.r_nodes.size:
                out[inner] = np.interp(r[inner], self.r_nodes, self.f_nodes)
            else:
                out[inner] = self._exterior(np.maximum(r[inner], self.R0))
        return out

    def f0_prime(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        ext = r >= self.R0
        out[ext] = self._exterior_prime(r[ext])
        inner = (~ext) & (r >= self.r_core)
        if inner.any() and self.r_nodes.size:
            out[inner] = np.interp(r[inner], self.r_nodes, self.fp_nodes)
        return out


def _integrate_channel(v: Potential, channel: str):
    """One outward pass of the radial equation; returns nodes and endpoint data."""
    R0 = v.R0
    if channel == "s":
        centrifugal = 0.0
    else:
        centrifugal = 2.0

    if v.kind == "hard_core":
        # exterior solution everywhere outside the core; nothing to integrate
        return None

    if v.kind == "zero" or R0 == 0.0:
        return None

    if v.core > 0:
        r_start, y0 = v.core, (0.0, 1.0)
    elif channel == "s":
        r_start, y0 = R0 * 1e-8, (R0 * 1e-8, 1.0)
    else:
        # regular p solution behaves like r^2 near the origin
        r_start = R0 * 1e-4
        y0 = (r_start**2, 2.0 * r_start)

    def rhs(r, y):
        return (y[1], (0.5 * float(v.soft(r)) + centrifugal / r**2) * y[0])

    max_step = np.inf
    if v.kind == "tabulated":
        max_step = float(np.min(np.diff(np.asarray(v.r_table)))) / 2.0
    sol = solve_ivp(
        rhs,
        (r_start, R0),
        y0,
        method="DOP853",
        rtol=1e-12,
        atol=1e-20 * max(R0, 1.0) ** 2,
        max_step=max_step,
        dense_output=True,
    )
    if not sol.success:
        raise ScatteringError(f"radial solve failed for {v.kind} ({channel}): {sol.message}")
    return r_start, sol


def solve_scattering(v: Potential, channel: str, r_max: float | None = None) -> RadialChannel:
    """Solve one angular channel of the zero-energy problem for v.

    Returns the matched profile and its length.  r_max only controls how far
    the stored node set could extend; the exterior is analytic regardless, so
    the default (nodes up to R0) loses nothing.
    """
    if channel not in _CHANNELS:
        raise ValueError(f"channel must be one of {_CHANNELS}, got {channel!r}")

    if v.kind == "zero":
        return RadialChannel(channel, 0.0, 0.0, 0.0, np.empty(0), np.empty(0), np.empty(0))

    if v.kind == "hard_core":
        # u = r - a (s) and u = r^2 - a^3/r (p) with a = core radius, exactly
        return RadialChannel(
            channel, v.R0, v.R0, v.R0, np.empty(0), np.empty(0), np.empty(0)
        )

    r_start, ivp = _integrate_channel(v, channel)
    R0 = v.R0
    u_end, up_end = ivp.sol(R0)
    if not np.isfinite(u_end) or not np.isfinite(up_end) or up_end <= 0:
        raise ScatteringError(
            f"unmatched shooting for {v.kind} ({channel}): "
            f"u(R0)={u_end!r}, u'(R0)={up_end!r}"
        )

    if channel == "s":
        a = R0 - u_end / up_end
        c = up_end
        length = a
    else:
        ap3 = R0**2 * (up_end * R0**2 - 2.0 * R0 * u_end) / (up_end * R0 + u_end)
        c = up_end / (2.0 * R0 + ap3 / R0**2)
        length = np.cbrt(ap3)

    rr = np.linspace(r_start, R0, _PROFILE_NODES)
    u, up = ivp.sol(rr)
    if channel == "s":
        f = u / (c * rr)
        fp = (up * rr - u) / (c * rr**2)
    else:
        f = u / (c * rr**2)
        fp = (up * rr**2 - 2.0 * rr * u) / (c * rr**4)

    return RadialChannel(channel, float(length), float(v.core), R0, rr, f, fp)


def solve_potential(v: Potential, r_max: float | None = None):
    """Both channels of the zero-energy problem; returns (s, p) profiles."""
    return solve_scattering(v, "s", r_max), solve_scattering(v, "p", r_max)


# ---------------------------------------------------------------------------
# cutoff solution on the torus


@dataclass(frozen=True)
class ScatteringSolution:
    """Complete pair-factor data: both channels, cutoff scale b, host torus.

    The cutoff factors are

        f_s(r) = f_s0(r) / (1 - a/b)        for r <= b, else 1
        f_p(r) = f_p0(r) / (1 - ap^3/b^3)   for r <= b, else 1

    continuous at b by construction, with g = f^2 - 1 supported in r <= b.
    """

    potential: Potential
    s: RadialChannel
    p: RadialChannel
    b: float
    torus: Torus

    def __post_init__(self):
        if self.b <= self.potential.R0:
            raise ValueError(
                f"cutoff b={self.b} must exceed the potential range R0={self.potential.R0}"
            )
        if self.b > self.torus.L / 2:
            raise ValueError(
                f"cutoff b={self.b} must fit in half the box, L/2={self.torus.L / 2}"
            )

    @property
    def a(self) -> float:
        return self.s.length

    @property
    def a_p(self) -> float:
        return self.p.length

    @property
    def cs(self) -> float:
        return 1.0 / (1.0 - self.a / self.b)

    @property
    def cp(self) -> float:
        return 1.0 / (1.0 - self.a_p**3 / self.b**3)

    def _scale(self, channel: str) -> float:
        return self.cs if channel == "s" else self.cp

    def _channel(self, channel: str) -> RadialChannel:
        return self.s if channel == "s" else self.p

    def f(self, channel: str, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        ch = self._channel(channel)
        return np.where(r < self.b, self._scale(channel) * ch.f0(r), 1.0)

    def f_prime(self, channel: str, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        ch = self._channel(channel)
        return np.where(r < self.b, self._scale(channel) * ch.f0_prime(r), 0.0)

    def g(self, channel: str, r) -> np.ndarray:
        fr = self.f(channel, r)
        return fr * fr - 1.0

    # vectorised displacement forms used by the kernel layer
    def f_s(self, r):
        return self.f("s", r)

    def f_p(self, r):
        return self.f("p", r)

    def g_s(self, r):
        return self.g("s", r)

    def g_p(self, r):
        return self.g("p", r)

    def pair_factor(self, same_spin: bool, dx) -> np.ndarray:
        """f evaluated on a displacement array, minimum-image metric."""
        d = periodic_delta(dx, self.torus.L)
        r = np.sqrt(np.sum(d * d, axis=-1))
        return self.f("p" if same_spin else "s", r)


def build_cutoff(channels, b: float, torus: Torus, potential: Potential) -> ScatteringSolution:
    """Assemble the cutoff solution from the two matched channel profiles."""
    s, p = channels
    if s.channel != "s" or p.channel != "p":
        raise ValueError("expected (s, p) channel profiles in that order")
    return ScatteringSolution(potential=potential, s=s, p=p, b=b, torus=torus)


def solve(v: Potential, b: float, torus: Torus) -> ScatteringSolution:
    """Convenience: solve both channels and attach the cutoff."""
    return build_cutoff(solve_potential(v), b, torus, v)


# ---------------------------------------------------------------------------
# radial integrals


def _segments(sol: ScatteringSolution, channel: str, upto: float):
    """Radial breakpoints of the (piecewise-smooth) cutoff profile up to `upto`."""
    ch = sol._channel(channel)
    pts = sorted({0.0, ch.r_core, min(ch.R0, upto), upto})
    return [(lo, hi) for lo, hi in zip(pts, pts[1:]) if hi > lo]


def energy_integral(sol: ScatteringSolution, channel: str, weight: str = "1") -> float:
    """The channel energy functional of the rescaled (uncut) profile over all space.

    Computes int (|f'|^2 + (v/2) f^2) w(r) * 4 pi r^2 dr for f = scale * f0
    extended by its exterior form beyond the potential range, with w = 1 or
    w = r^2.  The interior is Simpson quadrature on the stored nodes; the
    exterior tail is analytic.  A hard core contributes only through the
    exterior (f vanishes inside), which is the boundary-flux form of the
    core energy.
    """
    if channel not in _CHANNELS:
        raise ValueError(f"channel must be one of {_CHANNELS}, got {channel!r}")
    if weight not in _WEIGHTS:
        raise ValueError(f"weight must be one of {_WEIGHTS}, got {weight!r}")
    if channel == "s" and weight == "x2":
        raise ValueError("the s-channel integrand with |x|^2 weight has a divergent tail")

    ch = sol._channel(channel)
    scale = sol._scale(channel)
    a, R0 = ch.length, ch.R0

    interior = 0.0
    if ch.r_nodes.size:
        rr, f, fp = ch.r_nodes, ch.f_nodes, ch.fp_nodes
        w = rr**2 if weight == "x2" else 1.0
        integrand = (fp**2 + 0.5 * sol.potential.soft(rr) * f**2) * w * rr**2
        interior = float(simpson(integrand, x=rr))

    if channel == "s":
        tail = 0.0 if a == 0.0 else a**2 / R0
    else:
        ap3 = ch.length3
        if ap3 == 0.0:
            tail = 0.0
        elif weight == "1":
            tail = 9.0 * ap3**2 / (5.0 * R0**5)
        else:
            tail = 3.0 * ap3**2 / R0**3

    return 4.0 * np.pi * scale**2 * (interior + tail)


def g_integrals(sol: ScatteringSolution, n_nodes: int = 4001) -> dict:
    """Radial integrals of the cutoff factors used by the convergence monitor.

    Returns I_gs = int |g_s|, I_gp = int |g_p| over the torus (the support
    fits inside one period) and the gradient integrals
    I_fs_grad = int f_s |grad f_s|, I_fp_grad = int f_p |grad f_p|.
    """
    out = {}
    for channel, tag in (("s", "gs"), ("p", "gp")):
        tot_g = 0.0
        tot_fg = 0.0
        for lo, hi in _segments(sol, channel, sol.b):
            rr = np.linspace(lo, hi, n_nodes)
            fr = sol.f(channel, rr)
            fpr = sol.f_prime(channel, rr)
            tot_g += float(simpson(np.abs(fr * fr - 1.0) * rr**2, x=rr))
            tot_fg += float(simpson(fr * np.abs(fpr) * rr**2, x=rr))
        out[f"I_{tag}"] = 4.0 * np.pi * tot_g
        out["I_fs_grad" if channel == "s" else "I_fp_grad"] = 4.0 * np.pi * tot_fg
    return out
