"""Discrete observation circle built from grid nodes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .grid import Grid


@dataclass(frozen=True)
class SensorRing:
    """Grid nodes standing in for the circle ``|x| = radius``, ordered by polar angle."""

    grid: Grid
    radius: float
    i: NDArray[np.intp]
    j: NDArray[np.intp]

    def __len__(self) -> int:
        return int(self.i.size)

    @property
    def coords(self) -> NDArray[np.float64]:
        return np.column_stack(
            [self.grid.origin[0] + self.i * self.grid.h, self.grid.origin[1] + self.j * self.grid.h]
        )

    def mask(self) -> NDArray[np.bool_]:
        m = np.zeros(self.grid.shape, dtype=bool)
        m[self.j, self.i] = True
        return m

    def inside(self) -> NDArray[np.bool_]:
        """Nodes in the closed disc (ring included)."""
        return inside_disc(self.grid, self.radius)

    def interior(self) -> NDArray[np.bool_]:
        """Nodes enclosed by the ring, ring excluded."""
        return self.inside() & ~self.mask()

    def values(self, arr: NDArray[np.float64]) -> NDArray[np.float64]:
        return arr[self.j, self.i]


def inside_disc(grid: Grid, radius: float) -> NDArray[np.bool_]:
    # slack absorbs roundoff of origin + i*h so aligned grids agree on boundary nodes
    return grid.radius() <= radius + 1e-9 * grid.h


def build_sensor_ring(grid: Grid, radius: float = 1.0) -> SensorRing:
    """Inside endpoints of every grid edge that crosses the circle.

    Any 5-point-stencil path from outside the disc to inside must traverse
    such an edge, so the selected nodes form a closed barrier by construction.
    """
    xs, ys = grid.xs, grid.ys
    span = min(-xs[0], xs[-1], -ys[0], ys[-1])
    if not radius < span:
        raise ValueError(f"circle of radius {radius} does not fit inside the grid (half-width {span})")
    inside = inside_disc(grid, radius)
    pad = np.pad(inside, 1, constant_values=False)
    has_outside_nbr = ~(pad[1:-1, 2:] & pad[1:-1, :-2] & pad[2:, 1:-1] & pad[:-2, 1:-1])
    ring = inside & has_outside_nbr
    j, i = np.nonzero(ring)
    if i.size < 8:
        raise ValueError(f"grid too coarse: only {i.size} ring nodes for radius {radius}")
    x = grid.origin[0] + i * grid.h
    y = grid.origin[1] + j * grid.h
    ang = np.mod(np.arctan2(y, x), 2 * np.pi)
    order = np.lexsort((np.hypot(x, y), ang))
    return SensorRing(grid, float(radius), i[order], j[order])
