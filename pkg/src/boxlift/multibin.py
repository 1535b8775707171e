"""Discrete-continuous angle regression: bins, losses and their gradients.

An angle is represented by n overlapping bins. Each bin carries a
confidence (is the angle in this bin?) and a residual rotation relative to
the bin center, stored as a (cos, sin) pair. Decoding picks the
highest-confidence bin and applies its residual via atan2, which avoids the
wrap-around discontinuity that plain scalar regression suffers at +-pi.

Also here: the conversion between local orientation (relative to the
viewing ray through a crop) and global orientation. A detector crop only
shows appearance, which is a function of the local angle; the global yaw is
local + ray angle.

Loss functions return ``(value, gradient)`` pairs; the gradients are exact
and are verified against central finite differences in the test suite.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ZeroVectorError
from .geometry import Dimensions, angular_distance, wrap_angle

__all__ = [
    "BinLayout",
    "MultiBinEncoding",
    "DimensionStats",
    "bins_covering",
    "encode",
    "decode",
    "loss_conf",
    "loss_loc",
    "loss_total_orientation",
    "loss_dims",
    "local_to_global",
    "global_to_local",
    "ray_angle",
]


@dataclass(frozen=True)
class BinLayout:
    """n bins with centers 2*pi*i/n - pi and a common coverage half-width.

    A bin covers every angle within ``coverage_half_width`` of its center.
    The default half-width 1.1 * pi/n makes adjacent bins overlap by 10% of
    their exact-tiling width, so every angle is covered by one or two bins.
    """

    n_bins: int
    coverage_half_width: float = None

    def __post_init__(self):
        if self.n_bins < 1 or int(self.n_bins) != self.n_bins:
            raise ValueError("n_bins must be a positive integer")
        if self.coverage_half_width is None:
            object.__setattr__(
                self, "coverage_half_width", 1.1 * np.pi / self.n_bins
            )
        hw = self.coverage_half_width
        if hw < np.pi / self.n_bins:
            raise ValueError("coverage_half_width leaves gaps between bins")
        if self.n_bins >= 2 and hw >= 2.0 * np.pi / self.n_bins:
            raise ValueError("coverage_half_width lets a bin cover everything")

    @property
    def centers(self):
        return 2.0 * np.pi * np.arange(self.n_bins) / self.n_bins - np.pi


@dataclass(frozen=True)
class MultiBinEncoding:
    """Per-bin (confidence, cos residual, sin residual) triplets."""

    confidences: np.ndarray
    residual_cos: np.ndarray
    residual_sin: np.ndarray

    def __post_init__(self):
        for name in ("confidences", "residual_cos", "residual_sin"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (
            self.confidences.shape == self.residual_cos.shape == self.residual_sin.shape
        ):
            raise ValueError("encoding arrays must have identical shapes")


@dataclass(frozen=True)
class DimensionStats:
    """Category mean extents plus a per-axis residual correction."""

    mean_dims: Dimensions
    residual: np.ndarray

    def __post_init__(self):
        residual = np.asarray(self.residual, dtype=float)
        if residual.shape != (3,):
            raise ValueError("residual must be a 3-vector")
        object.__setattr__(self, "residual", residual)

    @property
    def corrected(self):
        """Mean plus residual as a Dimensions value."""
        d = self.mean_dims.as_array + self.residual
        return Dimensions(*d)


def bins_covering(layout, theta):
    """Indices of the bins whose coverage interval contains ``theta``."""
    dist = angular_distance(theta, layout.centers)
    return np.flatnonzero(dist <= layout.coverage_half_width)


def encode(layout, theta):
    """Training target for angle(s) ``theta``.

    Confidence is one-hot on the nearest bin center (ties to the lower
    index). Every bin stores the residual wrap(theta - center) as a unit
    (cos, sin) pair; only covering bins receive localization supervision,
    but the stored residual is well defined for all of them.

    ``theta`` may be a scalar or an array; array input produces arrays with
    a trailing bin axis.
    """
    theta = wrap_angle(theta)
    residual = wrap_angle(np.expand_dims(theta, -1) - layout.centers)
    dist = np.abs(residual)
    nearest = np.argmin(dist, axis=-1)
    conf = np.zeros(dist.shape)
    np.put_along_axis(conf, np.expand_dims(nearest, -1), 1.0, axis=-1)
    return MultiBinEncoding(
        confidences=conf,
        residual_cos=np.cos(residual),
        residual_sin=np.sin(residual),
    )


def decode(layout, encoding):
    """Angle(s) from an encoding: argmax-confidence bin center + residual.

    Confidence ties resolve to the lower bin index.
    """
    best = np.argmax(encoding.confidences, axis=-1)
    centers = layout.centers[best]
    cos = np.take_along_axis(
        encoding.residual_cos, np.expand_dims(best, -1), axis=-1
    ).squeeze(-1)
    sin = np.take_along_axis(
        encoding.residual_sin, np.expand_dims(best, -1), axis=-1
    ).squeeze(-1)
    out = wrap_angle(centers + np.arctan2(sin, cos))
    return float(out) if np.ndim(out) == 0 else out


def loss_conf(logits, target_bin):
    """Softmax cross-entropy of bin confidences against a one-hot target.

    Returns:
        (loss, gradient w.r.t. logits), gradient = softmax - one_hot.
    """
    logits = np.asarray(logits, dtype=float)
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    if not 0 <= target_bin < logits.size:
        raise ValueError(f"target bin {target_bin} out of range")
    shifted = logits - logits.max()
    log_norm = np.log(np.sum(np.exp(shifted)))
    loss = log_norm - shifted[target_bin]
    grad = np.exp(shifted - log_norm)
    grad[target_bin] -= 1.0
    return float(loss), grad


def loss_loc(layout, raw_pairs, theta):
    """Residual-angle loss over the bins covering ``theta``.

    ``raw_pairs`` is an (n_bins, 2) array of unnormalized (cos, sin)
    outputs. Each pair is L2-normalized, then the loss is the negative mean
    cosine of the decode error over covering bins,

        -(1/n_cov) * sum_i cos(theta - center_i) * cos_i
                         + sin(theta - center_i) * sin_i,

    which equals -(1/n_cov) * sum cos(theta - center_i - residual_i)
    without evaluating atan2. Gradient flows through the normalization, so
    scaling a raw pair by any positive factor leaves the loss unchanged.

    Raises:
        ZeroVectorError: if any raw pair has norm below 1e-12.
    """
    raw = np.asarray(raw_pairs, dtype=float)
    if raw.shape != (layout.n_bins, 2):
        raise ValueError(f"raw_pairs must have shape ({layout.n_bins}, 2)")
    norms = np.linalg.norm(raw, axis=1)
    if np.any(norms < 1e-12):
        raise ZeroVectorError("raw (cos, sin) pair too small to normalize")

    covering = bins_covering(layout, theta)
    theta = float(wrap_angle(theta))
    unit = raw / norms[:, None]
    offsets = theta - layout.centers[covering]
    targets = np.stack([np.cos(offsets), np.sin(offsets)], axis=1)
    cosines = np.sum(targets * unit[covering], axis=1)
    n_cov = covering.size
    loss = -float(np.sum(cosines)) / n_cov

    grad = np.zeros_like(raw)
    # d/d raw of (k . raw/|raw|) = (k - (k.u) u) / |raw|
    grad[covering] = -(targets - cosines[:, None] * unit[covering]) / (
        n_cov * norms[covering, None]
    )
    return loss, grad


def loss_total_orientation(conf_part, loc_part, weight=1.0):
    """Combined orientation loss: confidence plus weighted localization."""
    if not weight > 0:
        raise ValueError("weight must be positive")
    return conf_part + weight * loc_part


def _dims_array(value):
    if isinstance(value, Dimensions):
        return value.as_array
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,):
        raise ValueError("dimensions must be a 3-vector")
    return arr


def loss_dims(true_dims, mean_dims, residual):
    """Mean squared error of the dimension residual over the three axes.

    Returns:
        (loss, gradient w.r.t. residual) with
        loss = mean((true - mean - residual)^2) and
        gradient = -(2/3) * (true - mean - residual).
    """
    diff = _dims_array(true_dims) - _dims_array(mean_dims) - np.asarray(
        residual, dtype=float
    )
    return float(np.mean(diff**2)), -(2.0 / 3.0) * diff


def local_to_global(theta_local, theta_ray):
    """Global yaw from crop-local orientation: wrap(theta_ray + theta_local)."""
    return wrap_angle(theta_ray + theta_local)


def global_to_local(theta, theta_ray):
    """Crop-local orientation from global yaw: wrap(theta - theta_ray)."""
    return wrap_angle(theta - theta_ray)


def ray_angle(intrinsics, u):
    """Yaw of the viewing ray through image column ``u``.

    Zero on the optical axis, atan2(u - cx, fx) in general (camera looks
    along +z, u grows to the right).
    """
    return np.arctan2(np.asarray(u, dtype=float) - intrinsics.cx, intrinsics.fx)
