"""Camera model, rotations, 3D box corners and perspective projection.

COORDINATE CONVENTIONS
======================
Camera frame (computer-vision standard, matches KITTI's rectified camera):
  - x: right, y: down, z: forward (optical axis). Units: meters.

Object frame (origin at the 3D box center):
  - x: forward along the object's length  (extent dx)
  - y: down along the object's height     (extent dy)
  - z: right along the object's width     (extent dz)
  KITTI's (l, h, w) label order maps to (dx, dy, dz).

Image frame: u right, v down, origin at the top-left. Units: pixels.

ANGLES
======
All angles are radians, wrapped to (-pi, pi]. The rotation from object to
camera frame is composed as

    R = R_yaw(yaw) @ R_pitch(pitch) @ R_roll(roll)

with yaw about the camera y axis (the vertical, pointing down), pitch about
the object's width axis (z) and roll about the object's length axis (x).
The yaw matrix equals the KITTI devkit's rotation for ``rotation_y``, so a
KITTI label's rotation_y can be used as ``yaw`` directly.

VERTEX ORDER
============
``box_vertices`` returns the 8 corners ordered by sign pattern, x sign
alternating fastest, then y, then z (0 = +, 1 = -):

    index:  0      1      2      3      4      5      6      7
    signs: +++    -++    +-+    --+    ++-    -+-    +--    ---

With y pointing down, indices {0, 1, 4, 5} are the bottom corners and
{2, 3, 6, 7} the top corners.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveDepthError

__all__ = [
    "CameraIntrinsics",
    "Dimensions",
    "Box2D",
    "Box3D",
    "wrap_angle",
    "angular_distance",
    "rotation_from_angles",
    "yaw_from_rotation",
    "is_rotation",
    "box_vertices",
    "project",
    "project_box",
]

BOTTOM_CORNERS = (0, 1, 4, 5)
TOP_CORNERS = (2, 3, 6, 7)


def wrap_angle(theta):
    """Wrap an angle (scalar or array) to the interval (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(theta), 2.0 * np.pi)


def angular_distance(a, b):
    """Absolute angular separation of two angles, in [0, pi]."""
    return np.abs(wrap_angle(np.asarray(a) - np.asarray(b)))


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics: focal lengths, principal point and skew, in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    skew: float = 0.0

    def __post_init__(self):
        for name in ("fx", "fy", "cx", "cy", "skew"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")

    @property
    def matrix(self):
        """The 3x3 intrinsics matrix."""
        return np.array(
            [
                [self.fx, self.skew, self.cx],
                [0.0, self.fy, self.cy],
                [0.0, 0.0, 1.0],
            ]
        )


@dataclass(frozen=True)
class Dimensions:
    """Object extents in meters: dx (length), dy (height), dz (width)."""

    dx: float
    dy: float
    dz: float

    def __post_init__(self):
        arr = (self.dx, self.dy, self.dz)
        if not all(np.isfinite(d) and d > 0 for d in arr):
            raise ValueError(f"dimensions must be positive and finite, got {arr}")

    @property
    def as_array(self):
        return np.array([self.dx, self.dy, self.dz])

    @property
    def volume(self):
        return self.dx * self.dy * self.dz


@dataclass(frozen=True)
class Box2D:
    """Axis-aligned image rectangle, in pixels."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not all(
            np.isfinite(v) for v in (self.x_min, self.y_min, self.x_max, self.y_max)
        ):
            raise ValueError("rectangle sides must be finite")
        if self.x_min >= self.x_max:
            raise ValueError(f"x_min must be < x_max, got [{self.x_min}, {self.x_max}]")
        if self.y_min >= self.y_max:
            raise ValueError(f"y_min must be < y_max, got [{self.y_min}, {self.y_max}]")

    @property
    def width(self):
        return self.x_max - self.x_min

    @property
    def height(self):
        return self.y_max - self.y_min

    @property
    def center(self):
        return np.array(
            [0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max)]
        )

    @property
    def as_array(self):
        """Sides in (x_min, y_min, x_max, y_max) order (KITTI bbox order)."""
        return np.array([self.x_min, self.y_min, self.x_max, self.y_max])


@dataclass(frozen=True)
class Box3D:
    """Oriented 3D box: center (camera frame, meters), extents and angles."""

    center: np.ndarray
    dims: Dimensions
    yaw: float
    pitch: float = 0.0
    roll: float = 0.0

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        if center.shape != (3,) or not np.all(np.isfinite(center)):
            raise ValueError("center must be a finite 3-vector")
        object.__setattr__(self, "center", center)
        for name in ("yaw", "pitch", "roll"):
            object.__setattr__(self, name, float(wrap_angle(getattr(self, name))))

    @property
    def rotation(self):
        return rotation_from_angles(self.yaw, self.pitch, self.roll)

    def corners(self):
        """The 8 corners in the camera frame, (8, 3), in vertex order."""
        return box_vertices(self.dims) @ self.rotation.T + self.center


def rotation_from_angles(yaw, pitch=0.0, roll=0.0):
    """Object-to-camera rotation R = R_yaw @ R_pitch @ R_roll.

    Axes per the module conventions: yaw about camera y (down), pitch about
    the object width axis (z), roll about the object length axis (x).
    """
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    r_yaw = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    r_pitch = np.array([[cp, -sp, 0.0], [sp, cp, 0.0], [0.0, 0.0, 1.0]])
    r_roll = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    return r_yaw @ r_pitch @ r_roll


def yaw_from_rotation(rotation):
    """Recover yaw from a yaw-only rotation matrix (pitch = roll = 0)."""
    rotation = np.asarray(rotation)
    return float(np.arctan2(rotation[0, 2], rotation[0, 0]))


def is_rotation(matrix, tol=1e-9):
    """True if ``matrix`` is orthonormal with determinant +1 within ``tol``."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (3, 3):
        return False
    if not np.allclose(matrix.T @ matrix, np.eye(3), atol=tol):
        return False
    return bool(abs(np.linalg.det(matrix) - 1.0) <= tol)


def box_vertices(dims):
    """The 8 object-frame corners of a box with the given extents, (8, 3).

    Ordered by sign pattern with the x sign alternating fastest (see the
    module docstring); vertex 0 is (+dx/2, +dy/2, +dz/2).
    """
    half = 0.5 * dims.as_array
    idx = np.arange(8)
    signs = 1.0 - 2.0 * np.stack([idx % 2, (idx // 2) % 2, (idx // 4) % 2], axis=1)
    return signs * half


def project(intrinsics, rotation, translation, points):
    """Project object-frame points into the image.

    Args:
        intrinsics: CameraIntrinsics.
        rotation: 3x3 object-to-camera rotation.
        translation: camera-frame position of the object origin, (3,).
        points: one point (3,) or many (N, 3) in the object frame.

    Returns:
        Pixel coordinates, (2,) for a single point or (N, 2).

    Raises:
        NonPositiveDepthError: if any point has camera depth <= 0.
    """
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    cam = np.atleast_2d(pts) @ np.asarray(rotation).T + np.asarray(translation)
    depths = cam[:, 2]
    if np.any(depths <= 0):
        raise NonPositiveDepthError(
            f"point at or behind camera: min depth {depths.min():.6g} m"
        )
    uv_h = cam @ intrinsics.matrix.T
    uv = uv_h[:, :2] / uv_h[:, 2:3]
    return uv[0] if single else uv


def project_box(intrinsics, box):
    """Tight axis-aligned rectangle around the projected corners of ``box``.

    Raises:
        NonPositiveDepthError: if any corner is at or behind the camera.
    """
    rotation = box.rotation
    uv = project(intrinsics, rotation, box.center, box_vertices(box.dims))
    return Box2D(
        x_min=float(uv[:, 0].min()),
        y_min=float(uv[:, 1].min()),
        x_max=float(uv[:, 0].max()),
        y_max=float(uv[:, 1].max()),
    )
