"""Analytic sound-speed profiles.

Every profile is evaluated by one compiled scalar routine, :func:`eval_speed`,
which returns ``c`` and ``grad c`` at a point. Grid sampling and the ray
integrator both go through it, so the two can never disagree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from numpy.typing import ArrayLike, NDArray

CONSTANT, RADIAL, BUMP, CRATER, PARABOLOID = range(5)

# taper: 1 on [0, _TAPER_IN], 0 for r >= _TAPER_OUT
_TAPER_IN = 0.8
_TAPER_OUT = 1.0


@numba.njit(cache=True, nogil=True)
def _q(r):
    return math.exp(-1.0 / r) if r > 0.0 else 0.0


@numba.njit(cache=True, nogil=True)
def _dq(r):
    return math.exp(-1.0 / r) / (r * r) if r > 0.0 else 0.0


@numba.njit(cache=True, nogil=True)
def _taper(r):
    """C-infinity radial taper and its derivative d/dr."""
    if r <= _TAPER_IN:
        return 1.0, 0.0
    if r >= _TAPER_OUT:
        return 0.0, 0.0
    width = _TAPER_OUT - _TAPER_IN
    s = (r - _TAPER_IN) / width
    a, b = _q(s), _q(1.0 - s)
    den = a + b
    step = a / den
    dstep = (_dq(s) * b + a * _dq(1.0 - s)) / (den * den)
    return 1.0 - step, -dstep / width


@numba.njit(cache=True, nogil=True)
def eval_speed(kind, params, x, y):
    """Return ``(c, dc/dx, dc/dy)`` at ``(x, y)``.

    On the crater's kink circles the gradient is one-sided: the closed
    inner disc and the closed exterior both report a zero gradient.
    """
    r = math.sqrt(x * x + y * y)
    if kind == CONSTANT:
        return params[0], 0.0, 0.0
    if kind == RADIAL:
        amp, m = params[0], params[1]
        w, dw = _taper(r)
        arg = m * math.pi * r
        c = 1.0 + amp * math.cos(arg) * w
        if r == 0.0:
            return c, 0.0, 0.0
        dcdr = amp * (-m * math.pi * math.sin(arg) * w + math.cos(arg) * dw)
        return c, dcdr * x / r, dcdr * y / r
    if kind == BUMP:
        nb = int(params[0])
        s = 0.0
        sx = 0.0
        sy = 0.0
        for k in range(nb):
            cx = params[1 + 4 * k]
            cy = params[2 + 4 * k]
            wk = params[3 + 4 * k]
            ak = params[4 + 4 * k]
            dx = x - cx
            dy = y - cy
            e = ak * math.exp(-(dx * dx + dy * dy) / (wk * wk))
            s += e
            sx += -2.0 * dx / (wk * wk) * e
            sy += -2.0 * dy / (wk * wk) * e
        w, dw = _taper(r)
        c = 1.0 + s * w
        gx = w * sx
        gy = w * sy
        if r > 0.0:
            gx += s * dw * x / r
            gy += s * dw * y / r
        return c, gx, gy
    if kind == CRATER:
        if r <= 0.5:
            return 0.5, 0.0, 0.0
        if r < 1.0:
            return r, x / r, y / r
        return 1.0, 0.0, 0.0
    # PARABOLOID
    if r < 1.0:
        return r * r + 0.1, 2.0 * x, 2.0 * y
    return 1.1, 0.0, 0.0


@numba.njit(cache=True, nogil=True)
def _eval_many(kind, params, xs, ys, c, c2, gx, gy):
    for n in range(xs.size):
        cv, dx, dy = eval_speed(kind, params, xs[n], ys[n])
        c[n] = cv
        c2[n] = cv * cv
        gx[n] = 2.0 * cv * dx
        gy[n] = 2.0 * cv * dy


@dataclass(frozen=True)
class SpeedProfile:
    """Base class; subclasses fix ``kind`` and pack their parameters."""

    kind: int = field(init=False, repr=False)

    @property
    def params(self) -> NDArray[np.float64]:
        raise NotImplementedError

    @property
    def tag(self) -> str:
        raise NotImplementedError

    @property
    def c_min(self) -> float:
        raise NotImplementedError

    @property
    def c_max(self) -> float:
        raise NotImplementedError

    @property
    def exterior(self) -> float:
        """Constant value of c for |x| >= 1."""
        return 1.0

    def evaluate(self, x: ArrayLike, y: ArrayLike):
        """Vectorised ``(c, c2, d(c2)/dx, d(c2)/dy)``, each shaped like ``x``."""
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        x, y = np.broadcast_arrays(x, y)
        shape = x.shape
        xs = np.ascontiguousarray(x).ravel()
        ys = np.ascontiguousarray(y).ravel()
        out = [np.empty(xs.size) for _ in range(4)]
        _eval_many(self.kind, self.params, xs, ys, *out)
        return tuple(o.reshape(shape) for o in out)

    def c(self, x, y):
        return self.evaluate(x, y)[0]

    def c2(self, x, y):
        return self.evaluate(x, y)[1]

    def grad_c2(self, x, y):
        _, _, gx, gy = self.evaluate(x, y)
        return gx, gy


@dataclass(frozen=True)
class Constant(SpeedProfile):
    c0: float = 1.0

    def __post_init__(self):
        if not self.c0 > 0:
            raise ValueError("constant speed must be positive")
        object.__setattr__(self, "kind", CONSTANT)

    @property
    def params(self):
        return np.array([self.c0])

    @property
    def tag(self):
        return f"constant({self.c0:g})"

    @property
    def c_min(self):
        return self.c0

    @property
    def c_max(self):
        return self.c0

    @property
    def exterior(self):
        return self.c0


@dataclass(frozen=True)
class RadialNonTrapping(SpeedProfile):
    """``c(r) = 1 + A cos(m pi r) w(r)`` with a smooth taper ``w`` on [0.8, 1]."""

    amplitude: float = 0.15
    oscillations: float = 3.0

    def __post_init__(self):
        if not 0 <= self.amplitude < 1:
            raise ValueError("amplitude must lie in [0, 1) to keep c positive")
        object.__setattr__(self, "kind", RADIAL)

    @property
    def params(self):
        return np.array([self.amplitude, self.oscillations])

    @property
    def tag(self):
        return f"radial(A={self.amplitude:g},m={self.oscillations:g})"

    @property
    def c_min(self):
        return 1.0 - self.amplitude

    @property
    def c_max(self):
        return 1.0 + self.amplitude


DEFAULT_BUMPS = ((0.35, 0.25, 0.3, 0.25), (-0.3, -0.3, 0.3, -0.25))


@dataclass(frozen=True)
class BumpNonTrapping(SpeedProfile):
    """``1 + sum_k a_k exp(-|x - x_k|^2 / w_k^2)``, tapered to 1 at ``|x| = 1``.

    ``bumps`` holds ``(cx, cy, width, amplitude)`` tuples.
    """

    bumps: tuple[tuple[float, float, float, float], ...] = DEFAULT_BUMPS

    def __post_init__(self):
        bumps = tuple(tuple(float(v) for v in b) for b in self.bumps)
        if not bumps:
            raise ValueError("need at least one bump")
        for b in bumps:
            if len(b) != 4 or not b[2] > 0:
                raise ValueError(f"bad bump {b}: expected (cx, cy, width>0, amplitude)")
        object.__setattr__(self, "bumps", bumps)
        object.__setattr__(self, "kind", BUMP)
        if not self.c_min > 0:
            raise ValueError("negative bumps drive the speed to zero")

    @property
    def params(self):
        return np.array([len(self.bumps)] + [v for b in self.bumps for v in b])

    @property
    def tag(self):
        return f"bump(n={len(self.bumps)})"

    @property
    def c_min(self):
        return 1.0 + min(0.0, sum(b[3] for b in self.bumps if b[3] < 0))

    @property
    def c_max(self):
        return 1.0 + max(0.0, sum(b[3] for b in self.bumps if b[3] > 0))


@dataclass(frozen=True)
class TrappingCrater(SpeedProfile):
    """0.5 inside ``|x| <= 0.5``, ``|x|`` on the annulus, 1 outside."""

    def __post_init__(self):
        object.__setattr__(self, "kind", CRATER)

    @property
    def params(self):
        return np.zeros(1)

    @property
    def tag(self):
        return "crater"

    @property
    def c_min(self):
        return 0.5

    @property
    def c_max(self):
        return 1.0


@dataclass(frozen=True)
class Paraboloid(SpeedProfile):
    """``|x|^2 + 0.1`` inside the unit circle, 1.1 outside."""

    def __post_init__(self):
        object.__setattr__(self, "kind", PARABOLOID)

    @property
    def params(self):
        return np.zeros(1)

    @property
    def tag(self):
        return "paraboloid"

    @property
    def c_min(self):
        return 0.1

    @property
    def c_max(self):
        return 1.1

    @property
    def exterior(self):
        return 1.1


def speed_from_dict(d: dict) -> SpeedProfile:
    """Build a profile from ``{"kind": ..., <params>}``."""
    d = dict(d)
    kind = d.pop("kind")
    if kind == "constant":
        return Constant(**d)
    if kind == "radial":
        return RadialNonTrapping(**d)
    if kind == "bump":
        if "bumps" in d:
            d["bumps"] = tuple(tuple(b) for b in d["bumps"])
        return BumpNonTrapping(**d)
    if kind == "crater":
        return TrappingCrater(**d)
    if kind == "paraboloid":
        return Paraboloid(**d)
    raise ValueError(f"unknown speed kind {kind!r}")


def speed_to_dict(s: SpeedProfile) -> dict:
    if isinstance(s, Constant):
        return {"kind": "constant", "c0": s.c0}
    if isinstance(s, RadialNonTrapping):
        return {"kind": "radial", "amplitude": s.amplitude, "oscillations": s.oscillations}
    if isinstance(s, BumpNonTrapping):
        return {"kind": "bump", "bumps": [list(b) for b in s.bumps]}
    if isinstance(s, TrappingCrater):
        return {"kind": "crater"}
    if isinstance(s, Paraboloid):
        return {"kind": "paraboloid"}
    raise TypeError(type(s))
