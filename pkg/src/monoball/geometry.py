"""Pinhole camera math.

World frame: right-handed, pitch plane is z = 0 with the pitch centre at
(0, 0), z points up.  A calibration (K, R, T) maps a world point x to the
camera frame via R @ x + T and onto the image via the intrinsics K.  No
lens distortion is modelled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InvalidCalibration(ValueError):
    """K/R/T do not form a valid pinhole calibration."""


class NonPositiveDepth(ValueError):
    """Point is on or behind the camera plane."""


class DegenerateDirection(ValueError):
    """Back-projected direction has near-zero norm (ill-conditioned K)."""


class NoGroundIntersection(ValueError):
    """Viewing ray never meets the pitch plane z = 0."""


def _as_matrix(m, shape):
    a = np.asarray(m, dtype=np.float64)
    if a.shape != shape:
        raise InvalidCalibration(f"expected shape {shape}, got {a.shape}")
    return a


@dataclass(frozen=True)
class CameraCalibration:
    """Pinhole calibration: intrinsics K (pixels), rotation R, translation T (meters)."""

    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        k = _as_matrix(self.intrinsics, (3, 3))
        r = _as_matrix(self.rotation, (3, 3))
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6):
            raise InvalidCalibration("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-6:
            raise InvalidCalibration("rotation determinant is not +1")
        if abs(k[2, 2] - 1.0) > 1e-12 or np.any(np.abs(k[[1, 2, 2], [0, 0, 1]]) > 1e-12):
            raise InvalidCalibration("intrinsics must be upper-triangular with K[2][2] = 1")
        if k[0, 0] <= 0 or k[1, 1] <= 0:
            raise InvalidCalibration("focal entries must be positive")
        for a in (k, r, t):
            a.setflags(write=False)
        object.__setattr__(self, "intrinsics", k)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)


@dataclass(frozen=True)
class Ray:
    """Half-line from the camera centre; direction is unit norm.

    For ray discretization the origin must sit above the pitch plane
    (origin.z > 0); that is checked where it matters, in discretize_ray.
    """

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        n = math.sqrt(float(d @ d))
        if abs(n - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit norm")
        o.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


@dataclass(frozen=True)
class PitchGeometry:
    """Pitch rectangle on the z = 0 plane, centred at the origin."""

    length: float = 105.0
    width: float = 68.0

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise ValueError("pitch dimensions must be positive")

    def contains(self, x: float, y: float) -> bool:
        return abs(x) <= self.length / 2 and abs(y) <= self.width / 2


def project(x, calib: CameraCalibration) -> np.ndarray:
    """Project a world point to pixel coordinates (exact pinhole, no distortion)."""
    xc = calib.rotation @ np.asarray(x, dtype=np.float64).reshape(3) + calib.translation
    if xc[2] <= 1e-9:
        raise NonPositiveDepth(f"camera-frame depth {xc[2]:.3g} <= 1e-9")
    h = calib.intrinsics @ xc
    return h[:2] / h[2]


def project_many(pts: np.ndarray, calib: CameraCalibration) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection. Returns (pixels (n,2), valid mask); invalid rows are NaN."""
    xc = pts @ calib.rotation.T + calib.translation
    ok = xc[:, 2] > 1e-9
    h = xc @ calib.intrinsics.T
    px = np.full((len(pts), 2), np.nan)
    px[ok] = h[ok, :2] / h[ok, 2:3]
    return px, ok


def camera_center(calib: CameraCalibration) -> np.ndarray:
    """World position of the camera centre, C = -R^T T."""
    return -(calib.rotation.T @ calib.translation)


def backproject_ray(u, calib: CameraCalibration) -> Ray:
    """Viewing ray of a pixel: origin at the camera centre, unit direction R^T K^-1 (u, 1)."""
    u = np.asarray(u, dtype=np.float64).reshape(2)
    d_cam = np.linalg.solve(calib.intrinsics, np.array([u[0], u[1], 1.0]))
    d = calib.rotation.T @ d_cam
    n = math.sqrt(float(d @ d))
    if n < 1e-12:
        raise DegenerateDirection("back-projected direction has near-zero norm")
    return Ray(origin=camera_center(calib), direction=d / n)


def ray_ground_hit(ray: Ray) -> tuple[np.ndarray, float]:
    """Intersection of the ray with z = 0 and the distance to it from the origin."""
    dz = float(ray.direction[2])
    if dz >= -1e-9:
        raise NoGroundIntersection("ray does not point down toward the pitch plane")
    s = -float(ray.origin[2]) / dz
    if s <= 1e-12:
        raise NoGroundIntersection("camera origin is not above the pitch plane")
    return ray.origin + s * ray.direction, s

def discretize_ray(ray: Ray, step: float) -> np.ndarray:
    """Sample candidate positions along the ray at a fixed metric step.

    Marches from the ground intersection up toward the camera:
    p_i = ground_hit - i*step*direction for i = 0..floor(dist/step), so the
    first point is on the turf and the last is at (or just below) camera
    height.  Returns an (n, 3) array ordered ground-first.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    hit, dist = ray_ground_hit(ray)
    n = int(math.floor(dist / step + 1e-9))
    i = np.arange(n + 1, dtype=np.float64)
    return hit[None, :] - (i * step)[:, None] * ray.direction[None, :]


def look_at_calibration(
    position,
    target,
    focal: float,
    image_size: tuple[float, float],
) -> CameraCalibration:
    """Build a calibration for a camera at `position` looking at `target`.

    The camera x-axis stays horizontal (image rows parallel to the ground)
    and the principal point sits at the image centre.
    """
    c = np.asarray(position, dtype=np.float64).reshape(3)
    fwd = np.asarray(target, dtype=np.float64).reshape(3) - c
    fn = np.linalg.norm(fwd)
    if fn < 1e-9:
        raise InvalidCalibration("camera position and target coincide")
    fwd = fwd / fn
    world_up = np.array([0.0, 0.0, 1.0])
    right = np.cross(fwd, world_up)
    rn = np.linalg.norm(right)
    if rn < 1e-9:
        raise InvalidCalibration("camera looking straight down/up has no horizontal axis")
    right = right / rn
    down = np.cross(fwd, right)
    r = np.stack([right, down, fwd])  # rows: camera x, y, z axes in world coords
    t = -(r @ c)
    w, h = image_size
    k = np.array([[focal, 0.0, w / 2.0], [0.0, focal, h / 2.0], [0.0, 0.0, 1.0]])
    return CameraCalibration(intrinsics=k, rotation=r, translation=t)
