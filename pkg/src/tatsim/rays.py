"""Bicharacteristics of ``H = c^2(x) |xi|^2 / 2`` and a trapping check.

A seed counts as escaped once its ray leaves ``|x| > r_escape`` before
``t_max``; that is a finite proxy for "tends to infinity" and the report
says so.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np
from numpy.typing import NDArray

from .core.speed import SpeedProfile, eval_speed

H_DRIFT_TOL = 1e-4


@dataclass(frozen=True)
class RaySeed:
    x0: tuple[float, float]
    xi0: tuple[float, float]

    def __post_init__(self):
        if math.hypot(*self.xi0) == 0:
            raise ValueError("ray seed needs a nonzero covector")


@numba.njit(cache=True, nogil=True)
def _rhs(kind, params, x, y, kx, ky):
    c, dcx, dcy = eval_speed(kind, params, x, y)
    c2 = c * c
    k2 = kx * kx + ky * ky
    # grad(c^2) = 2 c grad c
    return c2 * kx, c2 * ky, -c * dcx * k2, -c * dcy * k2


@numba.njit(cache=True, nogil=True)
def _hamiltonian(kind, params, x, y, kx, ky):
    c, _, _ = eval_speed(kind, params, x, y)
    return 0.5 * c * c * (kx * kx + ky * ky)


@numba.njit(cache=True, nogil=True)
def _integrate(kind, params, state0, t_max, dt, r_escape, stride):
    n = int(round(t_max / dt))
    out = np.empty((n // stride + 2, 6))
    x, y, kx, ky = state0[0], state0[1], state0[2], state0[3]
    h0 = _hamiltonian(kind, params, x, y, kx, ky)
    out[0, 0] = 0.0
    out[0, 1] = x
    out[0, 2] = y
    out[0, 3] = kx
    out[0, 4] = ky
    out[0, 5] = h0
    m = 1
    t_escape = -1.0
    r_max = math.sqrt(x * x + y * y)
    drift = 0.0
    half = 0.5 * dt
    for step in range(1, n + 1):
        a1, b1, c1, d1 = _rhs(kind, params, x, y, kx, ky)
        a2, b2, c2, d2 = _rhs(kind, params, x + half * a1, y + half * b1, kx + half * c1, ky + half * d1)
        a3, b3, c3, d3 = _rhs(kind, params, x + half * a2, y + half * b2, kx + half * c2, ky + half * d2)
        a4, b4, c4, d4 = _rhs(kind, params, x + dt * a3, y + dt * b3, kx + dt * c3, ky + dt * d3)
        x += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        y += dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        kx += dt / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        ky += dt / 6.0 * (d1 + 2.0 * d2 + 2.0 * d3 + d4)
        hk = _hamiltonian(kind, params, x, y, kx, ky)
        d = abs(hk - h0) / h0
        if d > drift:
            drift = d
        r = math.sqrt(x * x + y * y)
        if r > r_max:
            r_max = r
        escaped = r > r_escape
        if step % stride == 0 or escaped or step == n:
            out[m, 0] = step * dt
            out[m, 1] = x
            out[m, 2] = y
            out[m, 3] = kx
            out[m, 4] = ky
            out[m, 5] = hk
            m += 1
        if escaped:
            t_escape = step * dt
            break
    return out[:m], t_escape, r_max, drift


def hamiltonian_rhs(x, xi, speed: SpeedProfile):
    """``(dx/dt, dxi/dt) = (c^2 xi, -grad(c^2) |xi|^2 / 2)``."""
    a, b, c, d = _rhs(speed.kind, speed.params, float(x[0]), float(x[1]), float(xi[0]), float(xi[1]))
    return np.array([a, b]), np.array([c, d])


@dataclass
class RayPath:
    samples: NDArray[np.float64]  # columns t, x, y, xi_x, xi_y, H
    h0: float
    t_escape: float | None
    max_radius: float
    h_drift: float

    @property
    def reliable(self) -> bool:
        return self.h_drift <= H_DRIFT_TOL

    @property
    def t(self):
        return self.samples[:, 0]

    @property
    def x(self):
        return self.samples[:, 1:3]

    @property
    def xi(self):
        return self.samples[:, 3:5]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y", "xi_x", "xi_y", "H"])
            for row in self.samples:
                w.writerow([repr(float(v)) for v in row])


def trace_ray(
    seed: RaySeed,
    speed: SpeedProfile,
    t_max: float = 100.0,
    dt: float = 1e-3,
    r_escape: float = 2.0,
    stride: int = 1,
) -> RayPath:
    """Classical RK4 with fixed ``dt``; stops at ``t_max`` or on leaving ``r_escape``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not r_escape > 1:
        raise ValueError("r_escape must exceed 1")
    state = np.array([*seed.x0, *seed.xi0], dtype=np.float64)
    samples, t_esc, r_max, drift = _integrate(speed.kind, speed.params, state, t_max, dt, r_escape, max(1, stride))
    return RayPath(samples, float(samples[0, 5]), None if t_esc < 0 else float(t_esc), float(r_max), float(drift))


@dataclass(frozen=True)
class Verdict:
    seed: RaySeed
    escaped: bool
    t_escape: float | None
    t_max: float
    max_radius: float
    h_drift: float

    @property
    def reliable(self) -> bool:
        return self.h_drift <= H_DRIFT_TOL


@dataclass
class TrappingReport:
    speed_tag: str
    verdicts: list[Verdict]
    t_max: float
    r_escape: float

    @property
    def fraction_escaped(self) -> float:
        return sum(v.escaped for v in self.verdicts) / len(self.verdicts)

    @property
    def n_trapped(self) -> int:
        return sum(not v.escaped for v in self.verdicts)

    @property
    def n_unreliable(self) -> int:
        return sum(not v.reliable for v in self.verdicts)

    def by_position(self) -> dict[tuple[float, float], tuple[int, int]]:
        """``position -> (n_trapped, n_total)``, positions in first-seen order."""
        out: dict[tuple[float, float], list[int]] = {}
        for v in self.verdicts:
            slot = out.setdefault(v.seed.x0, [0, 0])
            slot[0] += not v.escaped
            slot[1] += 1
        return {k: (a, b) for k, (a, b) in out.items()}

    def table(self) -> str:
        lines = [
            f"speed profile: {self.speed_tag}",
            f"escape criterion: |x| > {self.r_escape:g} before t = {self.t_max:g} "
            f"(finite proxy; a seed lattice samples the ray set, it does not prove non-trapping)",
            f"seeds: {len(self.verdicts)}  escaped: {100 * self.fraction_escaped:.1f}%  "
            f"trapped: {self.n_trapped}  unreliable (H drift > {H_DRIFT_TOL:g}): {self.n_unreliable}",
            "",
            f"{'x0':>8} {'y0':>8} {'trapped':>8} {'total':>6}",
        ]
        for (x, y), (a, b) in self.by_position().items():
            lines.append(f"{x:8.3f} {y:8.3f} {a:8d} {b:6d}")
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x0", "y0", "xi_x", "xi_y", "escaped", "t_escape", "max_radius", "h_drift", "reliable"])
            for v in self.verdicts:
                w.writerow([
                    v.seed.x0[0], v.seed.x0[1], v.seed.xi0[0], v.seed.xi0[1], int(v.escaped),
                    "" if v.t_escape is None else repr(v.t_escape), repr(v.max_radius),
                    repr(v.h_drift), int(v.reliable),
                ])


def default_seeds(spacing: float = 0.25, n_angles: int = 16, radius: float = 1.0) -> list[RaySeed]:
    """Lattice of positions strictly inside the disc times ``n_angles`` unit directions."""
    m = int(math.floor(radius / spacing))
    seeds = []
    for j in range(-m, m + 1):
        for i in range(-m, m + 1):
            x, y = i * spacing, j * spacing
            if math.hypot(x, y) >= radius:
                continue
            for k in range(n_angles):
                a = 2 * math.pi * k / n_angles
                seeds.append(RaySeed((x, y), (math.cos(a), math.sin(a))))
    return seeds


def tangential_seeds(radii, n_positions: int = 8) -> list[RaySeed]:
    """Seeds with ``x0`` on circles and ``xi0`` perpendicular to ``x0``."""
    seeds = []
    for r in radii:
        for k in range(n_positions):
            a = 2 * math.pi * k / n_positions
            seeds.append(RaySeed((r * math.cos(a), r * math.sin(a)), (-math.sin(a), math.cos(a))))
    return seeds


def classify_trapping(
    speed: SpeedProfile,
    seeds: list[RaySeed] | None = None,
    t_max: float = 100.0,
    dt: float = 1e-3,
    r_escape: float = 2.0,
    jobs: int = 1,
) -> TrappingReport:
    seeds = default_seeds() if seeds is None else list(seeds)
    if not seeds:
        raise ValueError("empty seed set")

    def one(seed):
        path = trace_ray(seed, speed, t_max, dt, r_escape, stride=max(1, int(round(t_max / dt))))
        return Verdict(seed, path.t_escape is not None, path.t_escape, t_max, path.max_radius, path.h_drift)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            verdicts = list(ex.map(one, seeds))
    else:
        verdicts = [one(s) for s in seeds]
    return TrappingReport(speed.tag, verdicts, t_max, r_escape)
