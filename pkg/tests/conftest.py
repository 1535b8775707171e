"""Shared fixtures: a real calibration, real label lines and synthetic
KITTI-format corpora generated by forward projection."""

import numpy as np
import pytest

from boxlift.geometry import Box3D, Dimensions, project_box, wrap_angle
from boxlift.kitti import parse_calib_file
from boxlift.multibin import ray_angle

# Transcribed from a public KITTI calibration file (camera 2).
CALIB_TEXT = """\
P0: 7.215377000000e+02 0.000000000000e+00 6.095593000000e+02 0.000000000000e+00 0.000000000000e+00 7.215377000000e+02 1.728540000000e+02 0.000000000000e+00 0.000000000000e+00 0.000000000000e+00 1.000000000000e+00 0.000000000000e+00
P1: 7.215377000000e+02 0.000000000000e+00 6.095593000000e+02 -3.875744000000e+02 0.000000000000e+00 7.215377000000e+02 1.728540000000e+02 0.000000000000e+00 0.000000000000e+00 0.000000000000e+00 1.000000000000e+00 0.000000000000e+00
P2: 7.215377000000e+02 0.000000000000e+00 6.095593000000e+02 4.485728000000e+01 0.000000000000e+00 7.215377000000e+02 1.728540000000e+02 2.163791000000e-01 0.000000000000e+00 0.000000000000e+00 1.000000000000e+00 2.745884000000e-03
P3: 7.215377000000e+02 0.000000000000e+00 6.095593000000e+02 -3.395242000000e+02 0.000000000000e+00 7.215377000000e+02 1.728540000000e+02 2.199936000000e+00 0.000000000000e+00 0.000000000000e+00 1.000000000000e+00 2.729905000000e-03
R0_rect: 9.999239000000e-01 9.837760000000e-03 -7.445048000000e-03 -9.869795000000e-03 9.999421000000e-01 -4.278459000000e-03 7.402527000000e-03 4.351614000000e-03 9.999631000000e-01
Tr_velo_to_cam: 7.533745000000e-03 -9.999714000000e-01 -6.166020000000e-04 -4.069766000000e-03 1.480249000000e-02 7.280733000000e-04 -9.998902000000e-01 -7.631618000000e-02 9.998621000000e-01 7.523790000000e-03 1.480755000000e-02 -2.717806000000e-01
"""

# Transcribed real KITTI training label lines (pedestrian from frame
# 000000; the car line appears in several published parser examples).
REAL_LABEL_LINES = [
    "Pedestrian 0.00 0 -0.20 712.40 143.00 810.73 307.92 1.89 0.48 1.20 1.84 1.47 8.41 0.01",
    "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59",
]

DONT_CARE_LINE = (
    "DontCare -1 -1 -10 503.89 169.71 590.61 190.13 -1 -1 -1 -1000 -1000 -1000 -10"
)

CATEGORY_DIMS = {
    # (length, height, width) sampling bands, meters
    "Car": ((3.2, 4.6), (1.40, 1.62), (1.55, 1.85)),
    "Van": ((4.2, 5.0), (1.50, 1.62), (1.70, 1.95)),
    "Cyclist": ((1.6, 1.9), (1.45, 1.62), (0.50, 0.70)),
}

CAMERA_HEIGHT = 1.65  # meters above the road


@pytest.fixture(scope="session")
def calib():
    return parse_calib_file(CALIB_TEXT)


def sample_scene_box(rng, category="Car", depth_range=(8.0, 45.0)):
    """A road-plausible upright box in front of the camera.

    The box sits on the road plane, fully below the camera horizon, which
    is the regime the KITTI constraint mode assumes.
    """
    (l_lo, l_hi), (h_lo, h_hi), (w_lo, w_hi) = CATEGORY_DIMS[category]
    dims = Dimensions(
        dx=rng.uniform(l_lo, l_hi),
        dy=rng.uniform(h_lo, h_hi),
        dz=rng.uniform(w_lo, w_hi),
    )
    tz = rng.uniform(*depth_range)
    tx = rng.uniform(-0.22, 0.22) * tz
    ty = CAMERA_HEIGHT - 0.5 * dims.dy  # bottom face on the road plane
    yaw = rng.uniform(-np.pi, np.pi)
    return Box3D(center=np.array([tx, ty, tz]), dims=dims, yaw=yaw)


def record_line(category, box, calib_record, alpha=None, precision=2, score=None):
    """Format one KITTI label line for a ground-truth box.

    ``alpha`` defaults to the KITTI definition (global yaw minus the ray
    through the object center); alpha='ray' uses the ray through the
    projected 2D box center instead, which makes the lift pipeline's yaw
    reconstruction exact.
    """
    intrinsics = calib_record.intrinsics
    offset = calib_record.translation_offset
    shifted = Box3D(box.center + offset, box.dims, box.yaw)
    rect = project_box(intrinsics, shifted)
    location = box.center + np.array([0.0, 0.5 * box.dims.dy, 0.0])
    if alpha is None:
        alpha_val = wrap_angle(box.yaw - np.arctan2(location[0], location[2]))
    elif alpha == "ray":
        alpha_val = wrap_angle(
            box.yaw - ray_angle(intrinsics, 0.5 * (rect.x_min + rect.x_max))
        )
    else:
        alpha_val = alpha
    fmt = f"{{:.{precision}f}}"
    fields = [
        category,
        fmt.format(0.0),
        "0",
        fmt.format(alpha_val),
        fmt.format(rect.x_min),
        fmt.format(rect.y_min),
        fmt.format(rect.x_max),
        fmt.format(rect.y_max),
        fmt.format(box.dims.dy),
        fmt.format(box.dims.dz),
        fmt.format(box.dims.dx),
        fmt.format(location[0]),
        fmt.format(location[1]),
        fmt.format(location[2]),
        fmt.format(box.yaw),
    ]
    if score is not None:
        fields.append(fmt.format(score))
    return " ".join(fields)


def synth_corpus(calib_record, n_files=4, per_file=6, seed=7, precision=2, alpha=None):
    """Self-consistent KITTI-format label files keyed by file stem."""
    rng = np.random.default_rng(seed)
    corpus = {}
    categories = list(CATEGORY_DIMS)
    for i in range(n_files):
        lines = []
        for _ in range(per_file):
            category = categories[rng.integers(len(categories))]
            box = sample_scene_box(rng, category)
            lines.append(
                record_line(category, box, calib_record, alpha=alpha, precision=precision)
            )
        corpus[f"{i:06d}"] = "\n".join(lines) + "\n"
    return corpus


@pytest.fixture(scope="session")
def label_corpus(calib):
    """KITTI-style labels: real transcribed lines plus synthetic files."""
    corpus = synth_corpus(calib, n_files=4, per_file=6, seed=7)
    corpus["real"] = "\n".join(REAL_LABEL_LINES + [DONT_CARE_LINE]) + "\n"
    return corpus
