"""Recover translation from a 2D detection box, known rotation and extents.

Each side of a tight 2D detection rectangle is touched by the projection of
at least one 3D box corner. Assigning one corner to each side turns the
tight-fit requirement into four linear equations in the translation T:
for a side with pixel coordinate s and assigned corner X,

    (k_row - s * k3) . (R X + T) = 0

where k_row is the intrinsics row producing that coordinate (first row for
the vertical sides x_min/x_max, second for the horizontal sides
y_min/y_max) and k3 the third row. The 4x3 system is solved by SVD; the
coefficient matrix depends only on the intrinsics and the rectangle, so all
candidate corner assignments share one factorization.

CONSTRAINT MODES
================
The admissible corner assignments shrink as assumptions grow (vertex
indices per the ordering in :mod:`boxlift.geometry`; y points down, so
{2,3,6,7} are top corners, {0,1,4,5} bottom corners):

- GENERAL: any corner on any side, 8^4 = 4096 configurations.
- UPRIGHT: the top side can only be touched by a top corner and the bottom
  side by a bottom corner; 8 * 8 * 4 * 4 = 1024.
- UPRIGHT_ZERO_ROLL: additionally, each vertical side is touched by one of
  the four vertical box edges. Both corners of a vertical edge project to
  the same image column when pitch and roll vanish, so each edge is
  represented by its bottom corner; 4 * 4 * 4 * 4 = 256.
- KITTI_ZERO_PITCH_ROLL: pitch and roll are exactly zero and the object
  lies below the camera horizon (the road scenario). The top side is then
  touched by the deepest top corner and the bottom side by the shallowest
  bottom corner, which is its antipode (index 7 - top). Tying the bottom
  corner to the top choice leaves 4 * 4 * 4 = 64 configurations, and this
  family provably contains the true assignment for such scenes.

Each mode's family is a subset of the previous one, so relaxing the mode
never loses the optimum it would have found.
"""

import enum
import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InfeasibleConfigurationError, NoFeasibleConfigurationError
from .geometry import (
    BOTTOM_CORNERS,
    TOP_CORNERS,
    box_vertices,
    is_rotation,
)

__all__ = [
    "ConstraintMode",
    "Configuration",
    "LiftResult",
    "enumerate_configurations",
    "solve_translation",
    "lift",
]

RANK_TOLERANCE = 1e-10


class ConstraintMode(enum.Enum):
    GENERAL = "general"
    UPRIGHT = "upright"
    UPRIGHT_ZERO_ROLL = "zeroroll"
    KITTI_ZERO_PITCH_ROLL = "kitti"


class Configuration(NamedTuple):
    """Corner index assigned to each 2D side."""

    left: int
    right: int
    top: int
    bottom: int


@dataclass(frozen=True)
class LiftResult:
    """Outcome of a lift: translation plus the diagnostics used to rank it.

    ``residual`` is the least-squares objective of the four side equations
    (pixels^2); ``reprojection_error`` the summed squared mismatch between
    the tight rectangle of the re-projected box and the input rectangle.
    """

    translation: np.ndarray
    configuration: Configuration
    residual: float
    reprojection_error: float


def enumerate_configurations(mode):
    """All admissible corner-to-side assignments for ``mode``, in a fixed order."""
    if mode is ConstraintMode.GENERAL:
        return [Configuration(*c) for c in itertools.product(range(8), repeat=4)]
    if mode is ConstraintMode.UPRIGHT:
        return [
            Configuration(l, r, t, b)
            for l in range(8)
            for r in range(8)
            for t in TOP_CORNERS
            for b in BOTTOM_CORNERS
        ]
    if mode is ConstraintMode.UPRIGHT_ZERO_ROLL:
        return [
            Configuration(l, r, t, b)
            for l in BOTTOM_CORNERS
            for r in BOTTOM_CORNERS
            for t in TOP_CORNERS
            for b in BOTTOM_CORNERS
        ]
    if mode is ConstraintMode.KITTI_ZERO_PITCH_ROLL:
        return [
            Configuration(l, r, t, 7 - t)
            for l in BOTTOM_CORNERS
            for r in BOTTOM_CORNERS
            for t in TOP_CORNERS
        ]
    raise ValueError(f"unknown constraint mode: {mode!r}")


def _side_rows(intrinsics, box2d):
    """Coefficient row and pixel coordinate for each of the four sides."""
    k = intrinsics.matrix
    return np.array(
        [
            k[0] - box2d.x_min * k[2],
            k[0] - box2d.x_max * k[2],
            k[1] - box2d.y_min * k[2],
            k[1] - box2d.y_max * k[2],
        ]
    )


def _solve_batch(intrinsics, rotation, dims, box2d, configs):
    """Solve the side equations for every configuration at once.

    Returns (translations (n,3), residuals (n,), feasible (n,) bool,
    rotated_corners (8,3), rank_ok bool). The 4x3 coefficient matrix is
    configuration-independent, so a single SVD serves all candidates.
    """
    rotated = box_vertices(dims) @ np.asarray(rotation).T  # (8, 3)
    a = _side_rows(intrinsics, box2d)  # (4, 3)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    rank_ok = s[-1] > RANK_TOLERANCE

    cfg = np.asarray(configs, dtype=int)  # (n, 4)
    # b[i, side] = -a_side . (R X_assigned)
    b = -np.einsum("sj,nsj->ns", a, rotated[cfg])
    if not rank_ok:
        n = cfg.shape[0]
        return np.zeros((n, 3)), np.full(n, np.inf), np.zeros(n, bool), rotated, False

    pinv = (vt.T / s) @ u.T  # (3, 4)
    translations = b @ pinv.T  # (n, 3)
    residuals = np.sum((translations @ a.T - b) ** 2, axis=1)
    depths = rotated[:, 2][None, :] + translations[:, 2][:, None]  # (n, 8)
    feasible = np.all(depths > 0, axis=1)
    return translations, residuals, feasible, rotated, True


def solve_translation(intrinsics, rotation, dims, box2d, configuration):
    """Least-squares translation for one corner-to-side assignment.

    Returns:
        (translation (3,), residual): the minimizer of the four side
        equations and the squared objective value in pixels^2.

    Raises:
        InfeasibleConfigurationError: if the system is rank-deficient
            (smallest singular value <= 1e-10) or the recovered translation
            places any box corner at or behind the camera.
    """
    if not is_rotation(rotation):
        raise ValueError("rotation must be orthonormal with determinant +1")
    translations, residuals, feasible, _, rank_ok = _solve_batch(
        intrinsics, rotation, dims, box2d, [tuple(configuration)]
    )
    if not rank_ok:
        raise InfeasibleConfigurationError(
            "side equations are rank-deficient (degenerate rectangle)"
        )
    if not feasible[0]:
        raise InfeasibleConfigurationError(
            "recovered translation places the box at or behind the camera"
        )
    return translations[0], float(residuals[0])


def lift(intrinsics, rotation, dims, box2d, mode=ConstraintMode.KITTI_ZERO_PITCH_ROLL):
    """Recover the translation that best explains a tight detection rectangle.

    Solves every admissible configuration of ``mode``, discards infeasible
    ones, and returns the candidate whose re-projected tight rectangle best
    matches ``box2d``. Ties are broken by smaller least-squares residual,
    then by enumeration order, making the choice deterministic.

    Raises:
        NoFeasibleConfigurationError: if no configuration is feasible.
    """
    if not is_rotation(rotation):
        raise ValueError("rotation must be orthonormal with determinant +1")
    configs = enumerate_configurations(mode)
    translations, residuals, feasible, rotated, rank_ok = _solve_batch(
        intrinsics, rotation, dims, box2d, configs
    )
    if not rank_ok:
        raise NoFeasibleConfigurationError(
            "side equations are rank-deficient (degenerate rectangle)"
        )
    if not np.any(feasible):
        raise NoFeasibleConfigurationError(
            f"all {len(configs)} configurations infeasible"
        )

    # Tight rectangle of each candidate's re-projected corners.
    cam = rotated[None, :, :] + translations[:, None, :]  # (n, 8, 3)
    uv_h = cam @ intrinsics.matrix.T
    with np.errstate(divide="ignore", invalid="ignore"):
        uv = uv_h[:, :, :2] / uv_h[:, :, 2:3]
    rect = np.stack(
        [
            uv[:, :, 0].min(axis=1),
            uv[:, :, 1].min(axis=1),
            uv[:, :, 0].max(axis=1),
            uv[:, :, 1].max(axis=1),
        ],
        axis=1,
    )
    reprojection = np.sum((rect - box2d.as_array[None, :]) ** 2, axis=1)
    reprojection[~feasible] = np.inf
    residuals = np.where(feasible, residuals, np.inf)

    order = np.lexsort((np.arange(len(configs)), residuals, reprojection))
    best = int(order[0])
    return LiftResult(
        translation=translations[best],
        configuration=configs[best],
        residual=float(residuals[best]),
        reprojection_error=float(reprojection[best]),
    )
