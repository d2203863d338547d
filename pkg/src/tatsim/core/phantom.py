"""Ellipse phantoms for the initial pressure, with optional mollified edges."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cutoff import smooth_step
from .grid import Grid, ScalarField

SUPPORT_RADIUS = 0.9


@dataclass(frozen=True)
class Ellipse:
    center: tuple[float, float]
    axes: tuple[float, float]
    angle: float = 0.0
    intensity: float = 1.0

    def __post_init__(self):
        if not (self.axes[0] > 0 and self.axes[1] > 0):
            raise ValueError(f"ellipse semi-axes must be positive, got {self.axes}")

    def level(self, X, Y):
        """Scaled signed distance: negative inside, ~true distance near the edge."""
        ca, sa = math.cos(self.angle), math.sin(self.angle)
        dx, dy = X - self.center[0], Y - self.center[1]
        u = (ca * dx + sa * dy) / self.axes[0]
        v = (-sa * dx + ca * dy) / self.axes[1]
        return min(self.axes) * (np.hypot(u, v) - 1.0)

    def extent(self, sigma: float) -> float:
        """Upper bound on ``|x|`` over the (mollified) support."""
        a, b = self.axes
        grow = 1.0 + 0.5 * sigma / min(a, b)
        return math.hypot(*self.center) + max(a, b) * grow


@dataclass(frozen=True)
class PhantomSpec:
    """Sum of ellipse components; ``sigma > 0`` smooths each edge over width sigma."""

    ellipses: tuple[Ellipse, ...]
    sigma: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "ellipses", tuple(self.ellipses))
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        for e in self.ellipses:
            if e.extent(self.sigma) >= SUPPORT_RADIUS:
                raise ValueError(
                    f"ellipse at {e.center} reaches |x| = {e.extent(self.sigma):.3f}; "
                    f"phantom support must stay inside radius {SUPPORT_RADIUS}"
                )

    @property
    def tag(self) -> str:
        return f"{self.name}(sigma={self.sigma:g})"

    def support_radius(self) -> float:
        return max((e.extent(self.sigma) for e in self.ellipses), default=0.0)

    def evaluate(self, X, Y):
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        out = np.zeros(np.broadcast(X, Y).shape)
        for e in self.ellipses:
            d = e.level(X, Y)
            if self.sigma > 0:
                out += e.intensity * (1.0 - smooth_step(d / self.sigma + 0.5))
            else:
                out += e.intensity * (d <= 0)
        return out

    def with_sigma(self, sigma: float) -> PhantomSpec:
        return PhantomSpec(self.ellipses, sigma, self.name)


def sample_field(spec, grid: Grid) -> ScalarField:
    """Evaluate a speed profile (as c) or a phantom at every grid node."""
    X, Y = grid.mesh()
    if isinstance(spec, PhantomSpec):
        return ScalarField(grid, spec.evaluate(X, Y))
    return ScalarField(grid, spec.c(X, Y))


def zero_phantom() -> PhantomSpec:
    return PhantomSpec((), 0.0, "zero")


def disc(radius: float = 0.3, center=(0.0, 0.0), sigma: float = 0.0, intensity: float = 1.0) -> PhantomSpec:
    return PhantomSpec((Ellipse(tuple(center), (radius, radius), 0.0, intensity),), sigma, "disc")


def two_disc(sigma: float = 0.02) -> PhantomSpec:
    return PhantomSpec(
        (
            Ellipse((-0.35, 0.15), (0.22, 0.22), 0.0, 1.0),
            Ellipse((0.3, -0.2), (0.28, 0.28), 0.0, 0.6),
        ),
        sigma,
        "two_disc",
    )


def comb(sigma: float = 0.02) -> PhantomSpec:
    """A bar with five teeth."""
    parts = [Ellipse((0.0, 0.3), (0.45, 0.07), 0.0, 1.0)]
    for k in range(5):
        parts.append(Ellipse((-0.36 + 0.18 * k, -0.05), (0.045, 0.3), 0.0, 1.0))
    return PhantomSpec(tuple(parts), sigma, "comb")


def face(sigma: float = 0.02) -> PhantomSpec:
    return PhantomSpec(
        (
            Ellipse((0.0, 0.0), (0.55, 0.7), 0.0, 0.5),
            Ellipse((-0.2, 0.22), (0.1, 0.07), 0.0, 0.5),
            Ellipse((0.2, 0.22), (0.1, 0.07), 0.0, 0.5),
            Ellipse((0.0, -0.05), (0.05, 0.14), 0.0, -0.2),
            Ellipse((0.0, -0.35), (0.22, 0.06), 0.0, 0.4),
        ),
        sigma,
        "face",
    )


PRESETS = {"two_disc": two_disc, "comb": comb, "face": face}


def phantom_from_dict(d: dict) -> PhantomSpec:
    """Build from ``{"preset": name, "sigma": s}`` or ``{"ellipses": [...], "sigma": s}``."""
    sigma = float(d.get("sigma", 0.0))
    if d.get("preset"):
        name = d["preset"]
        if name == "zero":
            return zero_phantom()
        if name not in PRESETS:
            raise ValueError(f"unknown phantom preset {name!r}; choose from {sorted(PRESETS)} or 'zero'")
        return PRESETS[name](sigma)
    ellipses = []
    for e in d.get("ellipses", []):
        ellipses.append(
            Ellipse(
                tuple(e["center"]),
                tuple(e["axes"]),
                float(e.get("angle", 0.0)),
                float(e.get("intensity", 1.0)),
            )
        )
    return PhantomSpec(tuple(ellipses), sigma, d.get("name", "custom"))


def phantom_to_dict(p: PhantomSpec) -> dict:
    return {
        "name": p.name,
        "sigma": p.sigma,
        "ellipses": [
            {"center": list(e.center), "axes": list(e.axes), "angle": e.angle, "intensity": e.intensity}
            for e in p.ellipses
        ],
    }
