"""Forward FDTD solve of ``p_tt = c^2 Laplace p`` with zero Dirichlet edges.

The scheme is the classic three-level leapfrog with the 5-point Laplacian.
Pressure is recorded at the sensor ring after every step.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np
from numpy.typing import NDArray

from .core.grid import Grid, ScalarField, make_grid
from .core.phantom import PhantomSpec
from .core.sensors import SensorRing
from .core.speed import SpeedProfile
from .errors import CFLError, InstabilityError

TRACE_MAGIC = b"TATTRACE1"
GUARD_FACTOR = 10.0


# --------------------------------------------------------------------------
# kernels: arrays are indexed [j, i]; coef = c^2 dt^2 / h^2


@numba.njit(cache=True, nogil=True)
def _leapfrog_kernel(p_prev, p_curr, coef, out):
    ny, nx = p_curr.shape
    peak = 0.0
    for j in range(1, ny - 1):
        for i in range(1, nx - 1):
            lap = p_curr[j, i + 1] + p_curr[j, i - 1] + p_curr[j + 1, i] + p_curr[j - 1, i] - 4.0 * p_curr[j, i]
            v = 2.0 * p_curr[j, i] - p_prev[j, i] + coef[j, i] * lap
            out[j, i] = v
            a = abs(v)
            # NaN compares false everywhere; make it win the max
            if not a <= peak:
                peak = a
    out[0, :] = 0.0
    out[ny - 1, :] = 0.0
    out[:, 0] = 0.0
    out[:, nx - 1] = 0.0
    return peak


@numba.njit(cache=True, nogil=True)
def _taylor_kernel(p, v, dt, coef, out):
    """out = p + dt*v + (coef/2) * lap(p); edges zero."""
    ny, nx = p.shape
    for j in range(1, ny - 1):
        for i in range(1, nx - 1):
            lap = p[j, i + 1] + p[j, i - 1] + p[j + 1, i] + p[j - 1, i] - 4.0 * p[j, i]
            out[j, i] = p[j, i] + dt * v[j, i] + 0.5 * coef[j, i] * lap
    out[0, :] = 0.0
    out[ny - 1, :] = 0.0
    out[:, 0] = 0.0
    out[:, nx - 1] = 0.0


def stable_dt(h: float, c_max: float, cfl: float) -> float:
    """``cfl * h / (c_max * sqrt(2))``; rejects ``cfl`` outside (0, 1]."""
    if not 0 < cfl <= 1:
        raise CFLError(f"cfl must lie in (0, 1], got {cfl}")
    return cfl * h / (c_max * math.sqrt(2.0))


def _coef(c2: ScalarField, dt: float) -> NDArray[np.float64]:
    return np.ascontiguousarray(c2.values * (dt / c2.grid.h) ** 2)


def _check_grids(*fields: ScalarField) -> None:
    g = fields[0].grid
    for f in fields[1:]:
        if not g.compatible(f.grid):
            raise ValueError("fields live on different grids")


def leapfrog_step(p_prev: ScalarField, p_curr: ScalarField, c2: ScalarField, dt: float) -> ScalarField:
    """One leapfrog update; the returned field has zero edges."""
    _check_grids(p_prev, p_curr, c2)
    out = np.empty(p_curr.grid.shape)
    _leapfrog_kernel(p_prev.values, p_curr.values, _coef(c2, dt), out)
    return ScalarField(p_curr.grid, out)


def first_step(p0: ScalarField, c2: ScalarField, dt: float) -> ScalarField:
    """Second-order start for zero initial velocity: ``p0 + dt^2/2 c^2 Lap p0``."""
    _check_grids(p0, c2)
    out = np.empty(p0.grid.shape)
    _taylor_kernel(p0.values, np.zeros(p0.grid.shape), dt, _coef(c2, dt), out)
    return ScalarField(p0.grid, out)


def discrete_energy(p_prev: ScalarField, p_curr: ScalarField, c2: ScalarField, dt: float) -> float:
    """Half-step energy ``h^2/2 * sum(|grad p^{n+1/2}|^2 + c^-2 p_t^2)``.

    The gradient is the forward difference of the time-averaged field over
    every adjacent node pair; the velocity is ``(p_curr - p_prev) / dt``.
    """
    _check_grids(p_prev, p_curr, c2)
    h = p_curr.grid.h
    avg = 0.5 * (p_prev.values + p_curr.values)
    gx = np.diff(avg, axis=1) / h
    gy = np.diff(avg, axis=0) / h
    vel = (p_curr.values - p_prev.values) / dt
    total = np.sum(gx**2) + np.sum(gy**2) + np.sum(vel**2 / c2.values)
    return 0.5 * h * h * float(total)


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SimParams:
    """Forward run on ``D = [-a, a]^2``.

    Use :meth:`auto` to size the domain so no edge reflection reaches the
    unit circle during the run.
    """

    grid: Grid
    dt: float
    n_steps: int
    cfl: float
    c_max: float
    record_snapshot_at: tuple[int, ...] = ()
    snapshot_grid: Grid | None = None

    def __post_init__(self):
        expected = stable_dt(self.grid.h, self.c_max, self.cfl)
        if abs(self.dt - expected) > 1e-12 * expected:
            raise CFLError(f"dt={self.dt} does not match cfl={self.cfl} (expected {expected})")
        if self.n_steps < 1:
            raise ValueError("need at least one time step")
        a = min(-self.grid.origin[0], -self.grid.origin[1],
                self.grid.origin[0] + (self.grid.nx - 1) * self.grid.h,
                self.grid.origin[1] + (self.grid.ny - 1) * self.grid.h)
        need = min_halfwidth(self.c_max, self.n_steps * self.dt)
        if a < need - 1e-9:
            raise ValueError(f"domain half-width {a:.4g} lets edge reflections reach S; need >= {need:.4g}")
        object.__setattr__(self, "record_snapshot_at", tuple(sorted(set(int(k) for k in self.record_snapshot_at))))
        if any(k < 0 or k > self.n_steps for k in self.record_snapshot_at):
            raise ValueError("snapshot steps must lie in [0, n_steps]")
        if self.snapshot_grid is not None:
            self.grid.offset_of(self.snapshot_grid)

    @property
    def t_final(self) -> float:
        return self.n_steps * self.dt

    @classmethod
    def auto(
        cls,
        h: float,
        t_final: float,
        speed: SpeedProfile,
        cfl: float = 0.5,
        snapshot_times=(),
        snapshot_grid: Grid | None = None,
    ) -> SimParams:
        dt = stable_dt(h, speed.c_max, cfl)
        n_steps = int(math.ceil(t_final / dt - 1e-9))
        half = h * math.ceil(min_halfwidth(speed.c_max, n_steps * dt) / h - 1e-9)
        grid = make_grid(-half, half, h)
        snaps = tuple(int(round(t / dt)) for t in snapshot_times)
        return cls(grid, dt, n_steps, cfl, speed.c_max, snaps, snapshot_grid)


def min_halfwidth(c_max: float, t_final: float) -> float:
    return 1.0 + (c_max * t_final + 1.0) / 2.0


@dataclass
class BoundaryTrace:
    """Pressure at each sensor, one row per recorded time ``k * dt`` (row 0 is t = 0)."""

    h: float
    dt: float
    coords: NDArray[np.float64]
    data: NDArray[np.float64]
    speed_tag: str = ""
    phantom_tag: str = ""

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64).reshape(-1, 2)
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[1] != self.coords.shape[0]:
            raise ValueError(f"trace data {self.data.shape} does not match {len(self.coords)} sensors")

    @property
    def n_samples(self) -> int:
        return self.data.shape[0]

    @property
    def n_sensors(self) -> int:
        return self.data.shape[1]

    @property
    def duration(self) -> float:
        return (self.n_samples - 1) * self.dt

    @property
    def times(self) -> NDArray[np.float64]:
        return np.arange(self.n_samples) * self.dt

    def with_data(self, data) -> BoundaryTrace:
        return BoundaryTrace(self.h, self.dt, self.coords.copy(), data, self.speed_tag, self.phantom_tag)

    def write(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(TRACE_MAGIC)
            fh.write(struct.pack("<IIdd", self.n_samples, self.n_sensors, self.h, self.dt))
            fh.write(self.coords.astype("<f8").tobytes())
            fh.write(self.data.astype("<f8").tobytes())

    @classmethod
    def read(cls, path) -> BoundaryTrace:
        raw = Path(path).read_bytes()
        if raw[: len(TRACE_MAGIC)] != TRACE_MAGIC:
            raise ValueError(f"{path}: not a TATTRACE1 file")
        off = len(TRACE_MAGIC)
        n_samples, n_sensors, h, dt = struct.unpack_from("<IIdd", raw, off)
        off += struct.calcsize("<IIdd")
        expected = off + 8 * (2 * n_sensors + n_samples * n_sensors)
        if len(raw) != expected:
            raise ValueError(f"{path}: size {len(raw)} bytes, header implies {expected}")
        coords = np.frombuffer(raw, "<f8", 2 * n_sensors, off).reshape(n_sensors, 2)
        off += 16 * n_sensors
        data = np.frombuffer(raw, "<f8", n_samples * n_sensors, off).reshape(n_samples, n_sensors)
        return cls(h, dt, coords.astype(np.float64), data.astype(np.float64))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"s{k}" for k in range(self.n_sensors)])
            for t, row in zip(self.times, self.data):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])


@dataclass
class Snapshot:
    step: int
    time: float
    p: ScalarField
    pt: ScalarField

    def save(self, path) -> None:
        g = self.p.grid
        np.savez(
            path,
            step=self.step,
            time=self.time,
            origin=np.array(g.origin),
            h=g.h,
            shape=np.array([g.nx, g.ny]),
            p=self.p.values,
            pt=self.pt.values,
        )

    @classmethod
    def load(cls, path) -> Snapshot:
        with np.load(path) as z:
            nx, ny = (int(v) for v in z["shape"])
            g = Grid((float(z["origin"][0]), float(z["origin"][1])), float(z["h"]), nx, ny)
            return cls(int(z["step"]), float(z["time"]), ScalarField(g, z["p"]), ScalarField(g, z["pt"]))


def simulate_forward(
    params: SimParams,
    speed: SpeedProfile,
    phantom: PhantomSpec,
    ring: SensorRing,
) -> tuple[BoundaryTrace, list[Snapshot]]:
    grid = params.grid
    if not grid.compatible(ring.grid):
        raise ValueError("sensor ring was built on a different grid")
    X, Y = grid.mesh()
    c2 = ScalarField(grid, speed.c2(X, Y))
    coef = _coef(c2, params.dt)
    p0 = phantom.evaluate(X, Y)
    p0[0, :] = p0[-1, :] = p0[:, 0] = p0[:, -1] = 0.0
    f_max = float(np.max(np.abs(p0))) if p0.size else 0.0
    guard = GUARD_FACTOR * f_max

    snap_at = set(params.record_snapshot_at)
    last = max(params.n_steps, max(snap_at, default=0) + 1)
    rec = np.empty((params.n_steps + 1, len(ring)))
    rec[0] = ring.values(p0)
    snaps: list[Snapshot] = []

    def take(k, p_km1, p_k, p_kp1):
        pt = (p_kp1 - p_km1) / (2 * params.dt)
        p_f, pt_f = ScalarField(grid, p_k.copy()), ScalarField(grid, pt)
        if params.snapshot_grid is not None:
            p_f, pt_f = p_f.restrict(params.snapshot_grid), pt_f.restrict(params.snapshot_grid)
        snaps.append(Snapshot(k, k * params.dt, p_f, pt_f))

    prev = p0
    curr = np.empty(grid.shape)
    _taylor_kernel(p0, np.zeros(grid.shape), params.dt, coef, curr)
    if 0 in snap_at:
        # zero initial velocity: the centred difference about t=0 vanishes
        take(0, curr, p0, curr)
    rec[1] = ring.values(curr)
    nxt = np.empty(grid.shape)
    for k in range(1, last):
        peak = _leapfrog_kernel(prev, curr, coef, nxt)
        if not peak <= guard:
            raise InstabilityError(k + 1, f"field peak {peak:.3g} exceeds guard {guard:.3g}")
        if k in snap_at:
            take(k, prev, curr, nxt)
        if k + 1 <= params.n_steps:
            rec[k + 1] = ring.values(nxt)
        prev, curr, nxt = curr, nxt, prev

    trace = BoundaryTrace(grid.h, params.dt, ring.coords, rec, speed.tag, phantom.tag)
    return trace, snaps
