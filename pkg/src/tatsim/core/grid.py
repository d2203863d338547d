"""Uniform square grids and scalar fields sampled on them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray


@dataclass(frozen=True)
class Grid:
    """Uniform rectilinear 2D grid.

    Node ``(i, j)`` sits at ``origin + (i*h, j*h)``. Arrays on the grid are
    indexed ``[j, i]`` (row = y index), i.e. row-major with x fastest.
    """

    origin: tuple[float, float]
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3 nodes per side, got {self.nx}x{self.ny}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def xs(self) -> NDArray[np.float64]:
        return self.origin[0] + np.arange(self.nx) * self.h

    @property
    def ys(self) -> NDArray[np.float64]:
        return self.origin[1] + np.arange(self.ny) * self.h

    def node(self, i: int, j: int) -> tuple[float, float]:
        return (self.origin[0] + i * self.h, self.origin[1] + j * self.h)

    def mesh(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Coordinate arrays ``(X, Y)`` of shape ``(ny, nx)``."""
        return np.meshgrid(self.xs, self.ys, indexing="xy")

    def radius(self) -> NDArray[np.float64]:
        X, Y = self.mesh()
        return np.hypot(X, Y)

    def compatible(self, other: Grid, rtol: float = 1e-9) -> bool:
        """True when both grids have the same nodes (up to roundoff)."""
        tol = rtol * self.h
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and abs(self.h - other.h) <= tol
            and abs(self.origin[0] - other.origin[0]) <= tol
            and abs(self.origin[1] - other.origin[1]) <= tol
        )

    def offset_of(self, sub: Grid) -> tuple[int, int]:
        """Index offset ``(i0, j0)`` of ``sub`` inside this grid.

        Raises ValueError unless ``sub`` is an aligned sub-block with the
        same spacing.
        """
        if abs(sub.h - self.h) > 1e-9 * self.h:
            raise ValueError("sub-grid spacing differs")
        fi = (sub.origin[0] - self.origin[0]) / self.h
        fj = (sub.origin[1] - self.origin[1]) / self.h
        i0, j0 = int(round(fi)), int(round(fj))
        if abs(fi - i0) > 1e-6 or abs(fj - j0) > 1e-6:
            raise ValueError("sub-grid nodes are not aligned with this grid")
        if i0 < 0 or j0 < 0 or i0 + sub.nx > self.nx or j0 + sub.ny > self.ny:
            raise ValueError("sub-grid does not fit inside this grid")
        return i0, j0


def make_grid(xmin: float, xmax: float, h: float) -> Grid:
    """Square grid covering ``[xmin, xmax]^2`` with spacing ``h``."""
    if not h > 0:
        raise ValueError(f"grid spacing must be positive, got {h}")
    if not xmax > xmin:
        raise ValueError(f"empty interval [{xmin}, {xmax}]")
    n = int(round((xmax - xmin) / h)) + 1
    if n < 3:
        raise ValueError(f"[{xmin}, {xmax}] with h={h} gives {n} nodes per side; need >= 3")
    return Grid(origin=(float(xmin), float(xmin)), h=float(h), nx=n, ny=n)


@dataclass(frozen=True)
class ScalarField:
    """64-bit samples of a function on a :class:`Grid`, shape ``(ny, nx)``."""

    grid: Grid
    values: NDArray[np.float64]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: Grid) -> ScalarField:
        return cls(grid, np.zeros(grid.shape))

    def is_valid(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def restrict(self, sub: Grid) -> ScalarField:
        i0, j0 = self.grid.offset_of(sub)
        return ScalarField(sub, self.values[j0:j0 + sub.ny, i0:i0 + sub.nx].copy())

    def __add__(self, other: ScalarField) -> ScalarField:
        _check_same_grid(self, other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: ScalarField) -> ScalarField:
        _check_same_grid(self, other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, k: float) -> ScalarField:
        return ScalarField(self.grid, self.values * k)

    __rmul__ = __mul__


def _check_same_grid(a: ScalarField, b: ScalarField) -> None:
    if not a.grid.compatible(b.grid):
        raise ValueError("fields live on different grids")
