"""Backward-in-time reconstruction from boundary data.

The leapfrog scheme is symmetric in time, so marching backward reuses the
forward kernel with the step index running from ``T`` down to 0. After every
step the ring nodes are overwritten with the (cut-off) measured data; since
the ring is a closed barrier for the 5-point stencil, nodes inside it never
see the region between the ring and the square edge.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from scipy.spatial import cKDTree

from .core.cutoff import cutoff
from .core.grid import Grid, ScalarField
from .core.sensors import SensorRing
from .core.speed import SpeedProfile
from .errors import CFLError
from .wave_fwd import BoundaryTrace, Snapshot, _coef, _leapfrog_kernel, _taylor_kernel, stable_dt

FIELD_MAGIC = b"TATFIELD1"


@dataclass(frozen=True)
class ReversalParams:
    grid: Grid
    T: float
    eps: float
    dt: float
    n_steps: int
    cfl: float
    snapshot: Snapshot | None = None

    @property
    def mode(self) -> str:
        return "exact" if self.snapshot is not None else "approximate"

    @classmethod
    def create(
        cls,
        grid: Grid,
        T: float,
        speed: SpeedProfile,
        eps: float = 1.0,
        cfl: float = 0.5,
        snapshot: Snapshot | None = None,
    ) -> ReversalParams:
        """Snap ``T`` to a whole number of steps and validate the setup."""
        dt = stable_dt(grid.h, speed.c_max, cfl)
        n = int(round(T / dt))
        if n < 1:
            raise ValueError(f"T={T} is shorter than one time step")
        T_snapped = n * dt
        if not eps > 0:
            raise ValueError("eps must be positive")
        if not T_snapped - eps > 0:
            raise ValueError(f"need T - eps > 0, got T={T_snapped:.6g}, eps={eps}")
        if snapshot is not None:
            if not snapshot.p.grid.compatible(grid):
                raise ValueError("exact-mode snapshot lives on an incompatible grid")
            if abs(snapshot.time - T_snapped) > 0.5 * dt:
                raise ValueError(f"snapshot time {snapshot.time} does not match T={T_snapped}")
        return cls(grid, T_snapped, float(eps), dt, n, cfl, snapshot)


@dataclass
class Reconstruction:
    field: ScalarField
    provenance: dict = field(default_factory=dict)


def nearest_steps(times: NDArray[np.float64], dt_src: float) -> NDArray[np.intp]:
    """Index of the closest sample ``k * dt_src``; exact ties go to the earlier one."""
    x = np.asarray(times, dtype=np.float64) / dt_src
    return np.ceil(x - 0.5 - 1e-9).astype(np.intp).clip(min=0)


def nearest_sensors(trace: BoundaryTrace, ring: SensorRing) -> NDArray[np.intp]:
    if len(ring) == 0 or trace.n_sensors == 0:
        raise ValueError("empty sensor set")
    _, idx = cKDTree(trace.coords).query(ring.coords)
    return np.asarray(idx, dtype=np.intp)


def resample_trace(trace: BoundaryTrace, ring: SensorRing, dt_new: float, n_steps: int) -> NDArray[np.float64]:
    """Boundary values for ``ring`` at times ``k * dt_new``, ``k = 0..n_steps``.

    Nearest recorded sensor in space and nearest recorded step in time.
    Returns an array of shape ``(n_steps + 1, len(ring))``.
    """
    rows = nearest_steps(np.arange(n_steps + 1) * dt_new, trace.dt)
    if rows[-1] >= trace.n_samples:
        raise ValueError(
            f"trace covers t <= {trace.duration:.6g}, reconstruction needs t = {n_steps * dt_new:.6g}"
        )
    cols = nearest_sensors(trace, ring)
    return trace.data[np.ix_(rows, cols)]


def terminal_velocity_start(v_T: ScalarField, vt_T: ScalarField, c2: ScalarField, dt: float) -> ScalarField:
    """``v(T - dt) = v_T - dt*vt_T + dt^2/2 c^2 Lap v_T``."""
    for f in (vt_T, c2):
        if not v_T.grid.compatible(f.grid):
            raise ValueError("fields live on different grids")
    out = np.empty(v_T.grid.shape)
    _taylor_kernel(v_T.values, -vt_T.values, dt, _coef(c2, dt), out)
    return ScalarField(v_T.grid, out)


def reverse(
    params: ReversalParams,
    trace: BoundaryTrace,
    speed: SpeedProfile,
    ring: SensorRing,
) -> Reconstruction:
    """Solve the wave equation from ``t = T`` back to 0 inside the ring.

    Approximate mode starts from zero terminal data and injects
    ``g * cutoff``; exact mode starts from the snapshot and injects raw ``g``.
    The result is zeroed outside the closed disc bounded by the ring.
    """
    grid = params.grid
    if not grid.compatible(ring.grid):
        raise ValueError("sensor ring was built on a different grid than the reconstruction")
    if params.dt > stable_dt(grid.h, speed.c_max, 1.0) * (1 + 1e-12):
        raise CFLError("reconstruction time step violates the CFL bound")
    n, dt = params.n_steps, params.dt
    g = resample_trace(trace, ring, dt, n)
    exact = params.snapshot is not None
    if not exact:
        g = g * cutoff(np.minimum(np.arange(n + 1) * dt, params.T), params.T, params.eps)[:, None]

    X, Y = grid.mesh()
    c2 = ScalarField(grid, speed.c2(X, Y))
    coef = _coef(c2, dt)
    ri, rj = ring.i, ring.j

    if exact:
        v_next = params.snapshot.p.values.copy()
        vt = params.snapshot.pt.values
    else:
        v_next = np.zeros(grid.shape)
        vt = np.zeros(grid.shape)
    v_next[rj, ri] = g[n]
    v_curr = np.empty(grid.shape)
    _taylor_kernel(v_next, -vt, dt, coef, v_curr)
    v_curr[rj, ri] = g[n - 1]
    buf = np.empty(grid.shape)
    for k in range(n - 2, -1, -1):
        _leapfrog_kernel(v_next, v_curr, coef, buf)
        buf[rj, ri] = g[k]
        v_next, v_curr, buf = v_curr, buf, v_next

    out = np.where(ring.inside(), v_curr, 0.0)
    prov = {
        "T": params.T,
        "eps": params.eps,
        "dt": dt,
        "n_steps": n,
        "mode": params.mode,
        "speed": speed.tag,
        "phantom": trace.phantom_tag,
        "grid": {"origin": list(grid.origin), "h": grid.h, "nx": grid.nx, "ny": grid.ny},
        "forward_h": trace.h,
        "forward_dt": trace.dt,
    }
    return Reconstruction(ScalarField(grid, out), prov)


# --------------------------------------------------------------------------
# field export


def write_field(field: ScalarField, path) -> None:
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC)
        fh.write(struct.pack("<IIddd", g.nx, g.ny, g.h, g.origin[0], g.origin[1]))
        fh.write(field.values.astype("<f8").tobytes())


def read_field(path) -> ScalarField:
    raw = Path(path).read_bytes()
    if raw[: len(FIELD_MAGIC)] != FIELD_MAGIC:
        raise ValueError(f"{path}: not a TATFIELD1 file")
    off = len(FIELD_MAGIC)
    nx, ny, h, ox, oy = struct.unpack_from("<IIddd", raw, off)
    off += struct.calcsize("<IIddd")
    if len(raw) != off + 8 * nx * ny:
        raise ValueError(f"{path}: truncated field data")
    vals = np.frombuffer(raw, "<f8", nx * ny, off).reshape(ny, nx).astype(np.float64)
    return ScalarField(Grid((ox, oy), h, nx, ny), vals)


def field_to_csv(field: ScalarField, path) -> None:
    """One row per node: ``x, y, value``."""
    X, Y = field.grid.mesh()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "value"])
        for x, y, v in zip(X.ravel(), Y.ravel(), field.values.ravel()):
            w.writerow([f"{x:.10g}", f"{y:.10g}", repr(float(v))])


def field_to_pgm(field: ScalarField, path) -> None:
    """8-bit binary PGM, linearly rescaled to [0, 255], top row = largest y."""
    v = field.values
    lo, hi = float(v.min()), float(v.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    img = np.clip(np.rint((v - lo) * scale), 0, 255).astype(np.uint8)[::-1]
    with open(path, "wb") as fh:
        fh.write(f"P5\n{field.grid.nx} {field.grid.ny}\n255\n".encode())
        fh.write(img.tobytes())


def read_pgm(path) -> NDArray[np.uint8]:
    raw = Path(path).read_bytes()
    magic, dims, _, data = raw.split(b"\n", 3)
    if magic != b"P5":
        raise ValueError("not a binary PGM")
    nx, ny = (int(v) for v in dims.split())
    return np.frombuffer(data, np.uint8, nx * ny).reshape(ny, nx)


def restrict_snapshot(snap: Snapshot, grid: Grid) -> Snapshot:
    if snap.p.grid.compatible(grid):
        return snap
    return Snapshot(snap.step, snap.time, snap.p.restrict(grid), snap.pt.restrict(grid))
