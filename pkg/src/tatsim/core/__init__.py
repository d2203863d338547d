from .cutoff import cutoff, cutoff_derivative, cutoff_width, phi, smooth_step
from .grid import Grid, ScalarField, make_grid
from .phantom import Ellipse, PhantomSpec, comb, disc, face, sample_field, two_disc, zero_phantom
from .sensors import SensorRing, build_sensor_ring, inside_disc
from .speed import (
    BumpNonTrapping,
    Constant,
    Paraboloid,
    RadialNonTrapping,
    SpeedProfile,
    TrappingCrater,
    speed_from_dict,
    speed_to_dict,
)

__all__ = [
    "BumpNonTrapping",
    "Constant",
    "Ellipse",
    "Grid",
    "Paraboloid",
    "PhantomSpec",
    "RadialNonTrapping",
    "ScalarField",
    "SensorRing",
    "SpeedProfile",
    "TrappingCrater",
    "build_sensor_ring",
    "comb",
    "cutoff",
    "cutoff_derivative",
    "cutoff_width",
    "disc",
    "face",
    "inside_disc",
    "make_grid",
    "phi",
    "sample_field",
    "smooth_step",
    "speed_from_dict",
    "speed_to_dict",
    "two_disc",
    "zero_phantom",
]
