"""Periodic-box geometry: uniform grid, quadrature, plane waves, minimum-image metric.

Everything downstream integrates over the cubic torus [0, L)^3 with the
uniform M^3 product grid.  That quadrature is exact for trigonometric
polynomials of per-axis degree below M, which is the property the
momentum-space cross-checks lean on.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Torus:
    """Cubic torus of side L carrying a uniform M^3 grid.

    Grid nodes sit at (L/M) * (j1, j2, j3) with 0 <= ji < M.  Complex values
    are carried throughout; realness of final quantities is asserted by the
    callers that expect it.
    """

    L: float
    M: int

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"torus side must be positive, got L={self.L}")
        if int(self.M) != self.M or self.M < 2:
            raise ValueError(f"grid order must be an integer >= 2, got M={self.M}")

    @property
    def cell(self) -> float:
        return self.L / self.M

    @property
    def weight(self) -> float:
        """Quadrature weight per grid node, (L/M)^3."""
        return (self.L / self.M) ** 3

    @property
    def volume(self) -> float:
        return self.L**3

    @property
    def n_points(self) -> int:
        return self.M**3

    def axis(self) -> np.ndarray:
        return np.arange(self.M) * self.cell

    def grid(self) -> np.ndarray:
        """All grid nodes, shape (M^3, 3), in lexicographic node order."""
        return _grid_points(self.L, self.M)

    def integer_grid(self) -> np.ndarray:
        """Integer node coordinates, shape (M^3, 3), same order as grid()."""
        return _integer_grid(self.M)

    def momentum(self, n) -> np.ndarray:
        """Momentum (2*pi/L) * n for an integer triple (or array of them)."""
        return (TWO_PI / self.L) * np.asarray(n, dtype=float)

    def lattice_index(self, k) -> np.ndarray:
        """Inverse of momentum(); raises if k is not on the reciprocal lattice."""
        n = np.asarray(k, dtype=float) * self.L / TWO_PI
        n_round = np.rint(n)
        if not np.allclose(n, n_round, atol=1e-9):
            raise ValueError(f"momentum {k} is not on the 2*pi/L lattice")
        return n_round.astype(int)


@lru_cache(maxsize=32)
def _integer_grid(M: int) -> np.ndarray:
    r = np.arange(M)
    out = np.stack(np.meshgrid(r, r, r, indexing="ij"), axis=-1).reshape(-1, 3)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=32)
def _grid_points(L: float, M: int) -> np.ndarray:
    out = _integer_grid(M) * (L / M)
    out.setflags(write=False)
    return out


def periodic_delta(dx, L: float) -> np.ndarray:
    """Reduce coordinate differences to the nearest periodic image, per axis.

    Equivalent to the 27-image search for a cubic torus: the squared distance
    decomposes over axes, so each axis can be minimised independently.
    """
    dx = np.asarray(dx, dtype=float)
    return dx - L * np.rint(dx / L)


def periodic_distance(x, y, torus: Torus) -> np.ndarray:
    """Minimum-image Euclidean distance between x and y on the torus."""
    d = periodic_delta(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), torus.L)
    return np.sqrt(np.sum(d * d, axis=-1))


def plane_wave(k, x, L: float) -> np.ndarray:
    """Normalised plane wave L^{-3/2} exp(i k.x); k must lie on the 2*pi/L lattice."""
    k = np.asarray(k, dtype=float)
    n = k * L / TWO_PI
    if not np.allclose(n, np.rint(n), atol=1e-9):
        raise ValueError(f"momentum {k} is not on the 2*pi/L lattice for L={L}")
    x = np.asarray(x, dtype=float)
    phase = x @ k if x.ndim > 1 else float(np.dot(x, k))
    return L ** (-1.5) * np.exp(1j * phase)


@dataclass(frozen=True)
class GridFunction:
    """Values of a function sampled on the torus grid (flat length-M^3 array)."""

    torus: Torus
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.torus.n_points,):
            raise ValueError(
                f"expected {self.torus.n_points} samples, got shape {v.shape}"
            )
        object.__setattr__(self, "values", v)

    @classmethod
    def from_callable(cls, torus: Torus, fn) -> "GridFunction":
        return cls(torus, np.asarray(fn(torus.grid())))


def quadrature(f: GridFunction):
    """Torus integral of a grid function: weight * sum of samples.

    Exact for trigonometric polynomials of per-axis degree < M.
    """
    return f.torus.weight * f.values.sum()
