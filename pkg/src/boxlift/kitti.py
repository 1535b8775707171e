"""Parsers and writers for KITTI label files, calibration files and the
JSON-lines results format.

KITTI label columns (whitespace separated, one object per line):

    type truncated occluded alpha  x_min y_min x_max y_max  h w l  x y z
    rotation_y [score]

``location`` (x, y, z) is the BOTTOM-center of the 3D box in the rectified
camera frame (y down), so the box center sits half a height above it.
``alpha`` is the crop-local orientation, ``rotation_y`` the global yaw.
DontCare lines carry -1/-1000 placeholders and are kept, flagged, so
callers can exclude the regions from matching.

Calibration files are "KEY: v0 ... v11" lines; only P2 (the 3x4 projection
matrix of the left color camera) is required here. Its left 3x3 block is
the intrinsics matrix K and its fourth column encodes the camera's offset
from the reference camera; that offset is exposed as an additive
camera-frame translation so projection keeps the x = K (R X + T) form.
"""

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import MalformedLineError, MissingKeyError, NoSamplesError
from .geometry import Box2D, Box3D, CameraIntrinsics, Dimensions

__all__ = [
    "DetectionRecord",
    "CalibRecord",
    "parse_label_file",
    "parse_calib_file",
    "write_results",
    "location_to_center",
    "center_to_location",
    "compute_mean_dims",
    "write_results_jsonl",
    "read_results_jsonl",
]

DONT_CARE = "DontCare"
_ANGLE_SLACK = 1e-6  # tolerate formatting jitter at +-pi


@dataclass(frozen=True)
class DetectionRecord:
    """One parsed KITTI label or result line."""

    category: str
    truncated: float
    occluded: int
    alpha: float
    box2d: Box2D
    height: float
    width: float
    length: float
    location: np.ndarray
    rotation_y: float
    score: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(
            self, "location", np.asarray(self.location, dtype=float)
        )

    @property
    def is_dont_care(self):
        return self.category == DONT_CARE

    @property
    def has_dimensions(self):
        return self.height > 0 and self.width > 0 and self.length > 0

    @property
    def dims(self):
        """Extents as Dimensions, mapping KITTI (l, h, w) to (dx, dy, dz)."""
        return Dimensions(dx=self.length, dy=self.height, dz=self.width)


@dataclass(frozen=True)
class CalibRecord:
    """Projection matrix P2 with derived intrinsics and camera offset."""

    p2: np.ndarray

    def __post_init__(self):
        p2 = np.asarray(self.p2, dtype=float)
        if p2.shape != (3, 4):
            raise ValueError("P2 must be 3x4")
        if abs(p2[2, 2] - 1.0) > 1e-6:
            raise ValueError("P2[2][2] must be 1")
        if p2[0, 0] <= 0 or p2[1, 1] <= 0:
            raise ValueError("focal lengths in P2 must be positive")
        object.__setattr__(self, "p2", p2)

    @property
    def intrinsics(self):
        return CameraIntrinsics(
            fx=self.p2[0, 0],
            fy=self.p2[1, 1],
            cx=self.p2[0, 2],
            cy=self.p2[1, 2],
            skew=self.p2[0, 1],
        )

    @property
    def translation_offset(self):
        """Additive camera-frame translation t0 with P2 X = K (X + t0)."""
        return np.linalg.solve(self.p2[:, :3], self.p2[:, 3])


def _parse_float(token, line_no):
    try:
        return float(token)
    except ValueError:
        raise MalformedLineError(line_no, token) from None


def _parse_label_line(line, line_no):
    tokens = line.split()
    if len(tokens) not in (15, 16):
        raise MalformedLineError(
            line_no, tokens[-1] if tokens else "",
            f"line {line_no}: expected 15 or 16 columns, got {len(tokens)}",
        )
    category = tokens[0]
    values = [_parse_float(t, line_no) for t in tokens[1:]]
    try:
        box2d = Box2D(values[3], values[4], values[5], values[6])
    except ValueError:
        raise MalformedLineError(
            line_no, " ".join(tokens[4:8]), f"line {line_no}: degenerate 2D box"
        ) from None
    record = DetectionRecord(
        category=category,
        truncated=values[0],
        occluded=int(values[1]),
        alpha=values[2],
        box2d=box2d,
        height=values[7],
        width=values[8],
        length=values[9],
        location=np.array(values[10:13]),
        rotation_y=values[13],
        score=values[14] if len(values) == 15 else None,
    )
    if not record.is_dont_care:
        for name, angle in (("alpha", record.alpha), ("rotation_y", record.rotation_y)):
            if abs(angle) > np.pi + _ANGLE_SLACK:
                raise MalformedLineError(
                    line_no, f"{name}={angle}", f"line {line_no}: {name} out of [-pi, pi]"
                )
    return record


def parse_label_file(text):
    """Parse KITTI label text into DetectionRecords, one per non-blank line.

    Unknown categories are preserved verbatim; DontCare records are kept
    and flagged via ``is_dont_care``.

    Raises:
        MalformedLineError: wrong column count or an unparseable token,
            reported with its 1-based line number.
    """
    records = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        records.append(_parse_label_line(line, line_no))
    return records


def parse_calib_file(text):
    """Extract the P2 projection matrix from KITTI calibration text.

    Raises:
        MissingKeyError: if no P2 line is present.
        MalformedLineError: if the P2 line does not hold 12 numbers.
    """
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.startswith("P2:"):
            continue
        tokens = line.split()[1:]
        if len(tokens) != 12:
            raise MalformedLineError(
                line_no, line.strip(), f"line {line_no}: P2 needs 12 values"
            )
        values = [_parse_float(t, line_no) for t in tokens]
        return CalibRecord(p2=np.array(values).reshape(3, 4))
    raise MissingKeyError("P2")


def location_to_center(record):
    """Box3D for a record: center half a height above the bottom-center.

    Raises:
        ValueError: if the record has no valid dimensions.
    """
    if not record.has_dimensions:
        raise ValueError(f"record has no dimensions: {record.category}")
    center = record.location - np.array([0.0, 0.5 * record.height, 0.0])
    return Box3D(center=center, dims=record.dims, yaw=record.rotation_y)


def center_to_location(box):
    """Bottom-center location and (h, w, l) extents for a Box3D."""
    location = box.center + np.array([0.0, 0.5 * box.dims.dy, 0.0])
    return location, (box.dims.dy, box.dims.dz, box.dims.dx)


def write_results(records):
    """Serialize records back to KITTI text, 2-decimal fixed point.

    The score column, when present, is appended last. Records are written
    in the order given.
    """
    lines = []
    for r in records:
        fields = [
            r.category,
            f"{r.truncated:.2f}",
            f"{r.occluded:d}",
            f"{r.alpha:.2f}",
            f"{r.box2d.x_min:.2f}",
            f"{r.box2d.y_min:.2f}",
            f"{r.box2d.x_max:.2f}",
            f"{r.box2d.y_max:.2f}",
            f"{r.height:.2f}",
            f"{r.width:.2f}",
            f"{r.length:.2f}",
            f"{r.location[0]:.2f}",
            f"{r.location[1]:.2f}",
            f"{r.location[2]:.2f}",
            f"{r.rotation_y:.2f}",
        ]
        if r.score is not None:
            fields.append(f"{r.score:.2f}")
        lines.append(" ".join(fields))
    return "\n".join(lines) + ("\n" if lines else "")


def compute_mean_dims(records, category):
    """Per-axis mean extents over non-DontCare records of ``category``.

    Raises:
        NoSamplesError: if no such record exists.
    """
    samples = [
        r.dims.as_array
        for r in records
        if r.category == category and not r.is_dont_care and r.has_dimensions
    ]
    if not samples:
        raise NoSamplesError(category)
    mean = np.mean(samples, axis=0)
    return Dimensions(dx=mean[0], dy=mean[1], dz=mean[2])


def result_to_json_dict(record, file_id=None, line_no=None, diagnostics=None):
    """JSON-ready dict for one result record plus solver diagnostics."""
    out = {
        "category": record.category,
        "truncated": record.truncated,
        "occluded": record.occluded,
        "alpha": record.alpha,
        "box2d": [float(v) for v in record.box2d.as_array],
        "dims_hwl": [record.height, record.width, record.length],
        "location": [float(v) for v in record.location],
        "rotation_y": record.rotation_y,
        "score": record.score,
    }
    if file_id is not None:
        out["file"] = file_id
    if line_no is not None:
        out["line"] = line_no
    if diagnostics:
        out.update(diagnostics)
    return out


def record_from_json_dict(data):
    """Rebuild a DetectionRecord from a JSON-lines entry."""
    box = data["box2d"]
    h, w, l = data["dims_hwl"]
    return DetectionRecord(
        category=data["category"],
        truncated=data.get("truncated", 0.0),
        occluded=int(data.get("occluded", 0)),
        alpha=data["alpha"],
        box2d=Box2D(box[0], box[1], box[2], box[3]),
        height=h,
        width=w,
        length=l,
        location=np.array(data["location"]),
        rotation_y=data["rotation_y"],
        score=data.get("score"),
    )


def write_results_jsonl(entries, stream):
    """Write result dicts (see ``result_to_json_dict``) one per line."""
    for entry in entries:
        stream.write(json.dumps(entry) + "\n")


def read_results_jsonl(stream):
    """Parse a JSON-lines results stream into a list of dicts."""
    return [json.loads(line) for line in stream if line.strip()]
