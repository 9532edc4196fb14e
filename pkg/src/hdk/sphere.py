"""Spherical/Cartesian conversions for equirectangular panoramas.

Conventions used throughout the toolkit:

* The camera sits at the origin.  The y-axis points toward the floor,
  so floor geometry has y > 0 and ceiling geometry has y < 0.
* Longitude ``theta`` is measured in the horizontal (x, z) plane from
  the +z axis toward the +x axis, in [-pi, pi].  The +pi and -pi
  directions coincide; -pi is the canonical stored value.
* Latitude ``phi`` is in [-pi/2, pi/2], positive toward the floor.
* A unit direction is ``(cos(phi)*sin(theta), sin(phi), cos(phi)*cos(theta))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FormatError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SphericalPoint:
    """A direction on the unit sphere, stored as (longitude, latitude)."""

    theta: float
    phi: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise DomainError(f"non-finite spherical point ({self.theta}, {self.phi})")
        if not -math.pi <= self.theta <= math.pi:
            raise DomainError(f"longitude {self.theta} outside [-pi, pi]")
        if not -math.pi / 2 <= self.phi <= math.pi / 2:
            raise DomainError(f"latitude {self.phi} outside [-pi/2, pi/2]")
        # +pi and -pi are the same direction; keep the canonical seam value.
        if self.theta == math.pi:
            object.__setattr__(self, "theta", -math.pi)


@dataclass(frozen=True)
class RayFan:
    """An equiangular fan of zero-latitude (horizon) rays.

    Ray j (0-based) points along longitude ``-pi + j * 2*pi / count``,
    covering [-pi, pi) exactly once.
    """

    count: int
    thetas: np.ndarray
    directions: np.ndarray

    def __post_init__(self):
        self.thetas.setflags(write=False)
        self.directions.setflags(write=False)


def spherical_to_cartesian(q: SphericalPoint) -> np.ndarray:
    """Unit 3-vector for a spherical direction."""
    cp = math.cos(q.phi)
    return np.array([cp * math.sin(q.theta), math.sin(q.phi), cp * math.cos(q.theta)])


def cartesian_to_spherical(p: np.ndarray) -> SphericalPoint:
    """Spherical direction of a (not necessarily unit) 3-vector.

    At the poles (x = z = 0) the longitude is undefined; 0 is returned.
    """
    x, y, z = (float(v) for v in p)
    norm = math.sqrt(x * x + y * y + z * z)
    if norm == 0.0 or not math.isfinite(norm):
        raise DomainError("cannot take the direction of a zero or non-finite vector")
    theta = math.atan2(x, z)
    if theta == math.pi:
        theta = -math.pi
    phi = math.asin(min(1.0, max(-1.0, y / norm)))
    return SphericalPoint(theta, phi)


def pixel_to_spherical(x: float, y: float, width: int, height: int) -> SphericalPoint:
    """Spherical direction of an equirectangular pixel.

    Pixel centers follow the half-pixel convention: pixel (0, 0) maps to
    the center of the top-left cell, not the image corner.  Continuous
    coordinates cover the cells themselves, so the valid range runs from
    -0.5 (the left/top image edge) to size - 0.5 (the right/bottom edge);
    x = width - 0.5 is excluded because it is the same seam as x = -0.5.

    Args:
        x, y: pixel coordinates, -0.5 <= x < width - 0.5 and
            -0.5 <= y <= height - 0.5.
        width, height: image size; must have a 2:1 aspect ratio.
    """
    if width != 2 * height:
        raise FormatError(f"equirectangular image must be 2:1, got {width}x{height}")
    if not (-0.5 <= x < width - 0.5 and -0.5 <= y <= height - 0.5):
        raise DomainError(f"pixel ({x}, {y}) outside {width}x{height} image")
    theta = (2.0 * (x + 0.5) / width - 1.0) * math.pi
    phi = (0.5 - (y + 0.5) / height) * math.pi
    return SphericalPoint(theta, phi)


def make_ray_fan(count: int) -> RayFan:
    """Equiangular horizon-ray fan with ``count`` rays covering [-pi, pi)."""
    if count < 4:
        raise DomainError(f"a ray fan needs at least 4 rays, got {count}")
    thetas = -math.pi + TWO_PI * np.arange(count) / count
    directions = np.column_stack(
        [np.sin(thetas), np.zeros(count), np.cos(thetas)]
    )
    return RayFan(count=count, thetas=thetas, directions=directions)


def unit_vectors(thetas: np.ndarray, phis: np.ndarray) -> np.ndarray:
    """Vectorized spherical-to-Cartesian: (N,) angles to (N, 3) unit rows."""
    cp = np.cos(phis)
    return np.column_stack([cp * np.sin(thetas), np.sin(phis), cp * np.cos(thetas)])
