"""
Geometry of the flat torus (R/Z)^2: canonical coordinates, nearest-image displacements, balls
"""

from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike

from models.errors import InvalidArgumentError


class TorusPoint(NamedTuple):
    """Point of the unit torus with both coordinates in [0, 1)"""

    x1: float
    x2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2], dtype=float)


class Displacement(NamedTuple):
    """Geodesic representative of a difference of torus points, components in [-1/2, 1/2)"""

    v1: float
    v2: float

    def as_array(self) -> np.ndarray:
        return np.array([self.v1, self.v2], dtype=float)

    def norm_sq(self) -> float:
        return self.v1 * self.v1 + self.v2 * self.v2


def wrap_array(points: ArrayLike) -> np.ndarray:
    """Reduce coordinates mod 1 into [0, 1), elementwise"""
    arr = np.asarray(points, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("torus coordinates must be finite")
    out = arr - np.floor(arr)
    # x - floor(x) rounds up to 1.0 for tiny negative x
    return np.where(out >= 1.0, 0.0, out) + 0.0


def nearest_image_array(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    """Nearest-image representative of a - b, components in [-1/2, 1/2), ties toward -1/2"""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    v = d - np.floor(d + 0.5)
    v = np.where(v >= 0.5, v - 1.0, v)
    v = np.where(v < -0.5, v + 1.0, v)
    return v + 0.0


def dist_sq_array(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    """Squared geodesic distance along the last axis"""
    v = nearest_image_array(a, b)
    return np.sum(v * v, axis=-1)


def _coords(p: TorusPoint | ArrayLike) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.shape != (2,):
        raise InvalidArgumentError(f"expected a 2-vector, got shape {arr.shape}")
    return arr


def wrap(p: ArrayLike) -> TorusPoint:
    """Map a raw 2-vector onto the torus"""
    x1, x2 = wrap_array(_coords(p))
    return TorusPoint(float(x1), float(x2))


def nearest_image(a: TorusPoint, b: TorusPoint) -> Displacement:
    """Minimal-norm representative of a - b modulo Z^2"""
    v1, v2 = nearest_image_array(_coords(a), _coords(b))
    return Displacement(float(v1), float(v2))


def dist_sq(a: TorusPoint, b: TorusPoint) -> float:
    """Squared geodesic distance between two torus points"""
    return nearest_image(a, b).norm_sq()


def in_ball(p: TorusPoint, center: TorusPoint, r: float) -> bool:
    """Membership in the open geodesic ball B_r(center)

    Args:
        p: Point to test
        center: Ball center
        r: Radius, 0 < r <= 1/2

    Returns:
        True iff dist_sq(p, center) < r^2
    """
    if not (0.0 < r <= 0.5):
        raise InvalidArgumentError(f"ball radius must lie in (0, 1/2], got {r}")
    return dist_sq(p, center) < r * r


def pixel_centers(m: int) -> np.ndarray:
    """Centers of the m x m pixel grid, row-major in (i1, i2), shape (m*m, 2)"""
    c = (np.arange(m, dtype=float) + 0.5) / m
    g1, g2 = np.meshgrid(c, c, indexing="ij")
    return np.column_stack([g1.ravel(), g2.ravel()])


def grid_nodes(m: int) -> np.ndarray:
    """Nodes j/m of the m x m grid including the origin, row-major, shape (m*m, 2)"""
    c = np.arange(m, dtype=float) / m
    g1, g2 = np.meshgrid(c, c, indexing="ij")
    return np.column_stack([g1.ravel(), g2.ravel()])
