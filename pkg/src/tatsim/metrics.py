"""Discrete norms over the unit disc and error-vs-cutoff-time experiments."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .core.grid import Grid, ScalarField
from .core.phantom import PhantomSpec
from .core.sensors import SensorRing
from .core.speed import SpeedProfile
from .errors import InsufficientDataError
from .time_reversal import ReversalParams, reverse
from .wave_fwd import BoundaryTrace

PLATEAU_DROP = 0.02


@dataclass(frozen=True)
class DiscMask:
    grid: Grid
    values: NDArray[np.bool_]

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError("mask shape does not match grid")

    @classmethod
    def full(cls, grid: Grid) -> DiscMask:
        return cls(grid, np.ones(grid.shape, dtype=bool))


def disc_mask(grid: Grid, radius: float = 1.0, ring: SensorRing | None = None) -> DiscMask:
    """Nodes strictly inside ``|x| < radius``, minus the ring nodes if given."""
    m = grid.radius() < radius - 1e-9 * grid.h
    if ring is not None:
        if not ring.grid.compatible(grid):
            raise ValueError("ring and mask grids differ")
        m &= ~ring.mask()
    return DiscMask(grid, m)


def _check(field: ScalarField, mask: DiscMask) -> None:
    if not field.grid.compatible(mask.grid):
        raise ValueError("field and mask live on different grids")


def l2_norm(field: ScalarField, mask: DiscMask) -> float:
    _check(field, mask)
    v = field.values[mask.values]
    return math.sqrt(field.grid.h**2 * float(np.dot(v, v)))


def h1_norm(field: ScalarField, mask: DiscMask) -> float:
    """``sqrt(L2^2 + h^2 sum |grad_h v|^2)``, forward differences over masked pairs."""
    _check(field, mask)
    v, m = field.values, mask.values
    dx = np.diff(v, axis=1)[m[:, 1:] & m[:, :-1]]
    dy = np.diff(v, axis=0)[m[1:, :] & m[:-1, :]]
    # h^2 * (d/h)^2 = d^2
    grad2 = float(np.dot(dx, dx) + np.dot(dy, dy))
    return math.sqrt(l2_norm(field, mask) ** 2 + grad2)


NORMS = {"l2": l2_norm, "h1": h1_norm}


def loglog_slope(points) -> tuple[float, float]:
    """Least-squares line through ``(ln T, ln err)``; returns ``(slope, intercept)``."""
    pts = np.asarray(list(points), dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise InsufficientDataError(f"need at least 3 points, got {len(pts)}")
    if np.any(pts <= 0):
        raise ValueError("log-log regression needs strictly positive values")
    slope, intercept = np.polyfit(np.log(pts[:, 0]), np.log(pts[:, 1]), 1)
    return float(slope), float(intercept)


def plateau_cut(errors) -> int:
    """Number of leading points kept before the error levels off.

    Stops at the first zero error, or at the first of two consecutive
    points that each fail to drop by at least 2%.
    """
    e = list(errors)
    n = len(e)
    for k, v in enumerate(e):
        if not v > 0:
            n = k
            break
    for k in range(1, n - 1):
        if e[k] > (1 - PLATEAU_DROP) * e[k - 1] and e[k + 1] > (1 - PLATEAU_DROP) * e[k]:
            return k
    return n


def crossing_time(speed: SpeedProfile, n_dirs: int = 8, n_pts: int = 4001) -> float:
    """Longest travel time ``int ds / c`` along a diameter of the unit disc."""
    s = np.linspace(-1.0, 1.0, n_pts)
    best = 0.0
    for k in range(n_dirs):
        a = math.pi * k / n_dirs
        c = speed.c(s * math.cos(a), s * math.sin(a))
        best = max(best, float(np.trapezoid(1.0 / c, s)))
    return best


@dataclass
class SweepResult:
    points: list[tuple[float, float]]
    norm: str
    n_usable: int
    slope: float
    intercept: float
    r2: float
    meta: dict = field(default_factory=dict)

    @property
    def usable(self) -> list[tuple[float, float]]:
        return self.points[: self.n_usable]

    @property
    def T_range(self) -> tuple[float, float]:
        u = self.usable
        return (u[0][0], u[-1][0])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["T", "error", "lnT", "lnError", "used"])
            for k, (T, e) in enumerate(self.points):
                le = math.log(e) if e > 0 else float("-inf")
                w.writerow([repr(T), repr(e), repr(math.log(T)), repr(le), int(k < self.n_usable)])

    def summary(self) -> str:
        lo, hi = self.T_range
        return (
            f"norm: {self.norm}\n"
            f"slope: {self.slope:.6f}\n"
            f"intercept: {self.intercept:.6f}\n"
            f"r2: {self.r2:.6f}\n"
            f"usable_points: {self.n_usable} of {len(self.points)}\n"
            f"usable_T_range: {lo:.6g} {hi:.6g}\n"
        )

    def to_svg(self, path) -> None:
        write_loglog_svg(path, self.points, self.n_usable, self.slope, self.intercept, self.norm)


def _r2(xs, ys, slope, intercept) -> float:
    xs, ys = np.asarray(xs), np.asarray(ys)
    resid = ys - (slope * xs + intercept)
    tot = np.sum((ys - ys.mean()) ** 2)
    return float(1 - np.sum(resid**2) / tot) if tot > 0 else 1.0


def reconstruction_error(
    trace: BoundaryTrace,
    speed: SpeedProfile,
    phantom_field: ScalarField,
    ring: SensorRing,
    T: float,
    eps: float,
    norm: str,
    cfl: float = 0.5,
) -> float:
    params = ReversalParams.create(ring.grid, T, speed, eps=eps, cfl=cfl)
    rec = reverse(params, trace, speed, ring)
    mask = disc_mask(ring.grid, ring.radius, ring)
    return NORMS[norm](rec.field - phantom_field, mask)


def error_sweep(
    forward: BoundaryTrace,
    speed: SpeedProfile,
    phantom: PhantomSpec,
    ring: SensorRing,
    T_list,
    eps: float = 1.0,
    norm: str = "h1",
    cfl: float = 0.5,
    jobs: int = 1,
) -> SweepResult:
    """Reconstruct at each cutoff time and regress ln(error) on ln(T).

    ``ring`` is built on the reconstruction grid. Trailing points past the
    error plateau are excluded from the fit.
    """
    if norm not in NORMS:
        raise ValueError(f"norm must be one of {sorted(NORMS)}")
    Ts = [float(t) for t in T_list]
    if len(Ts) < 3:
        raise InsufficientDataError(f"need at least 3 cutoff times, got {len(Ts)}")
    if any(b <= a for a, b in zip(Ts, Ts[1:])):
        raise ValueError("cutoff times must be strictly increasing")
    if Ts[-1] > forward.duration + 1e-9:
        raise ValueError(f"T={Ts[-1]} exceeds trace duration {forward.duration:.6g}")
    t_cross = crossing_time(speed)
    if Ts[0] < t_cross - 1e-9:
        raise ValueError(f"smallest T={Ts[0]} is below the disc-crossing time {t_cross:.4g}")

    X, Y = ring.grid.mesh()
    f = ScalarField(ring.grid, phantom.evaluate(X, Y))

    def one(T):
        return reconstruction_error(forward, speed, f, ring, T, eps, norm, cfl)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            errs = list(ex.map(one, Ts))
    else:
        errs = [one(T) for T in Ts]

    n_use = plateau_cut(errs)
    if n_use < 3:
        raise InsufficientDataError(f"only {n_use} usable points before the error levels off")
    pts = list(zip(Ts, errs))
    slope, intercept = loglog_slope(pts[:n_use])
    r2 = _r2(np.log(Ts[:n_use]), np.log(errs[:n_use]), slope, intercept)
    meta = {"eps": eps, "crossing_time": t_cross, "speed": speed.tag, "phantom": phantom.tag}
    return SweepResult(pts, norm, n_use, slope, intercept, r2, meta)


def noise_experiment(
    forward: BoundaryTrace,
    noise_amplitudes,
    rng_seed: int,
    T: float,
    speed: SpeedProfile,
    phantom: PhantomSpec,
    ring: SensorRing,
    eps: float = 1.0,
    norm: str = "l2",
    cfl: float = 0.5,
) -> list[tuple[float, float]]:
    """Reconstruction error against the phantom when Gaussian noise is added to the data.

    One standard-normal draw (from ``rng_seed``) is scaled by each amplitude,
    so amplitude 0 reproduces the noiseless error exactly.
    """
    amps = [float(a) for a in noise_amplitudes]
    if any(a < 0 for a in amps):
        raise ValueError("noise amplitudes must be non-negative")
    rng = np.random.default_rng(rng_seed)
    base = rng.standard_normal(forward.data.shape)
    X, Y = ring.grid.mesh()
    f = ScalarField(ring.grid, phantom.evaluate(X, Y))
    out = []
    for a in amps:
        noisy = forward.with_data(forward.data + a * base) if a > 0 else forward
        out.append((a, reconstruction_error(noisy, speed, f, ring, T, eps, norm, cfl)))
    return out


# --------------------------------------------------------------------------
# SVG plot, written by hand to stay dependency-free


def write_loglog_svg(path, points, n_usable, slope, intercept, label="error", width=480, height=360) -> None:
    pts = [(math.log(T), math.log(e)) for T, e in points if e > 0]
    if not pts:
        raise ValueError("nothing to plot")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    fit_y = [slope * x + intercept for x in (min(xs), max(xs))]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys + fit_y), max(ys + fit_y)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    ml, mr, mt, mb = 60, 20, 20, 45
    pw, ph = width - ml - mr, height - mt - mb

    def sx(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return mt + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{sx(xv):.1f}" y="{height - mb + 15}" font-size="10" '
                   f'text-anchor="middle">{xv:.2f}</text>')
        out.append(f'<text x="{ml - 5}" y="{sy(yv) + 3:.1f}" font-size="10" text-anchor="end">{yv:.2f}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 8}" font-size="12" text-anchor="middle">ln T</text>')
    out.append(f'<text x="14" y="{mt + ph / 2}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 14 {mt + ph / 2})">ln {label} error</text>')
    line = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
    out.append(f'<polyline points="{line}" fill="none" stroke="steelblue"/>')
    for k, (x, y) in enumerate(pts):
        fill = "steelblue" if k < n_usable else "white"
        out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{fill}" stroke="steelblue"/>')
    out.append(
        f'<line x1="{sx(x0):.2f}" y1="{sy(fit_y[0]):.2f}" x2="{sx(x1):.2f}" y2="{sy(fit_y[1]):.2f}" '
        f'stroke="firebrick" stroke-dasharray="4 3"/>'
    )
    out.append(f'<text x="{ml + pw - 5}" y="{mt + 15}" font-size="12" text-anchor="end">'
               f'slope {slope:.3f}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
