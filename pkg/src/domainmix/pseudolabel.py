"""Pseudo labels from per-pixel class-probability maps.

The warm-up model that produces the probabilities is external; this
module only thresholds.  A pixel keeps its argmax class when the max
probability clears the class threshold, and becomes IGNORE otherwise;
the max probability is always kept as the pixel's confidence.

The exact thresholding rule is a stand-in (the upstream method is not
pinned down anywhere): either a single fixed threshold, or per-class
thresholds at a quantile of each class's max-probability distribution,
capped at 0.9.  Both are config-selectable so experiments stay explicit.

Probability maps on disk are either

* raw planes, ``probs/<id>.bin``: 16-byte header (magic ``DMXP``,
  uint32 version=1, uint32 K, uint32 height, uint32 width, all
  little-endian) followed by K planes of row-major float32, plane 0
  first, or
* K per-class 16-bit grayscale PNGs, probability = value / 65535.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .types import IGNORE, MAX_CLASSES
from .dataset import load_conf_png, save_conf_png

PROB_MAGIC = b"DMXP"
PROB_VERSION = 1
_HEADER = struct.Struct("<4sIIII")

SUM_TOLERANCE = 1e-4
THRESHOLD_CAP = 0.9


@dataclass(frozen=True)
class ThresholdPolicy:
    """Which thresholding rule to apply; exactly one mode is active."""

    mode: Literal["fixed", "per-class-quantile"] = "fixed"
    fixed_threshold: float = 0.9
    quantile: float = 0.5

    def __post_init__(self):
        if self.mode not in ("fixed", "per-class-quantile"):
            raise ConfigError(f"unknown threshold mode {self.mode!r}")
        if not 0.0 <= self.fixed_threshold <= 1.0:
            raise ConfigError(f"fixed_threshold must be in [0, 1], got {self.fixed_threshold}")
        if not 0.0 <= self.quantile <= 1.0:
            raise ConfigError(f"quantile must be in [0, 1], got {self.quantile}")


def validate_prob_map(prob: np.ndarray) -> None:
    """Reject maps with negative entries or per-pixel sums far from 1."""
    if prob.ndim != 3:
        raise DataError(f"probability map must be (K, H, W), got shape {prob.shape}")
    if prob.shape[0] < 1 or prob.shape[0] > MAX_CLASSES:
        raise DataError(f"probability map has {prob.shape[0]} planes, need 1..{MAX_CLASSES}")
    lowest = float(prob.min())
    if lowest < 0.0:
        raise DataError(f"probability map has negative entries (min {lowest})")
    sums = prob.sum(axis=0, dtype=np.float64)
    worst = float(np.abs(sums - 1.0).max())
    if worst > SUM_TOLERANCE:
        raise DataError(f"per-pixel probabilities must sum to 1 (worst deviation {worst:.2e})")


def pseudo_label(
    prob: np.ndarray,
    policy: ThresholdPolicy,
    class_thresholds: Sequence[float] | np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Threshold a (K, H, W) probability map into (label, confidence).

    Argmax ties break toward the lowest class id.  In quantile mode the
    per-class thresholds must be supplied (see fit_class_thresholds).
    """
    validate_prob_map(prob)
    num_classes = prob.shape[0]

    conf = prob.max(axis=0).astype(np.float32)
    label = prob.argmax(axis=0).astype(np.uint8)

    if policy.mode == "fixed":
        threshold = np.float32(policy.fixed_threshold)
        below = conf < threshold
    else:
        if class_thresholds is None:
            raise ConfigError("per-class-quantile mode needs class_thresholds")
        thresholds = np.asarray(class_thresholds, dtype=np.float32)
        if thresholds.shape != (num_classes,):
            raise ConfigError(
                f"class_thresholds has shape {thresholds.shape}, expected ({num_classes},)"
            )
        below = conf < thresholds[label]

    label[below] = IGNORE
    return label, conf


def fit_class_thresholds(prob_maps: Iterable[np.ndarray], quantile: float) -> np.ndarray:
    """Per-class thresholds: quantile of max-probabilities, capped at 0.9.

    For each class c the distribution is the max-probability of every
    pixel whose argmax is c, pooled over the whole dataset.  Classes
    never predicted fall back to the cap.
    """
    if not 0.0 <= quantile <= 1.0:
        raise ConfigError(f"quantile must be in [0, 1], got {quantile}")
    values: list[list[float]] = []
    num_classes = None
    for prob in prob_maps:
        validate_prob_map(prob)
        if num_classes is None:
            num_classes = prob.shape[0]
            values = [[] for _ in range(num_classes)]
        elif prob.shape[0] != num_classes:
            raise DataError(
                f"inconsistent class counts across maps: {prob.shape[0]} vs {num_classes}"
            )
        conf = prob.max(axis=0)
        label = prob.argmax(axis=0)
        for c in range(num_classes):
            picked = conf[label == c]
            if picked.size:
                values[c].extend(picked.tolist())
    if num_classes is None:
        raise DataError("fit_class_thresholds: empty dataset")

    thresholds = np.full(num_classes, THRESHOLD_CAP, dtype=np.float64)
    for c in range(num_classes):
        if values[c]:
            thresholds[c] = min(THRESHOLD_CAP, float(np.quantile(values[c], quantile)))
    return thresholds


def write_prob_map(path: Path, prob: np.ndarray) -> None:
    validate_prob_map(prob)
    num_classes, height, width = prob.shape
    data = np.ascontiguousarray(prob, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(PROB_MAGIC, PROB_VERSION, num_classes, height, width))
        fh.write(data.tobytes())


def read_prob_map(path: Path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise DataError(f"{path}: truncated header")
        magic, version, num_classes, height, width = _HEADER.unpack(header)
        if magic != PROB_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}")
        if version != PROB_VERSION:
            raise DataError(f"{path}: unsupported version {version}")
        payload = fh.read()
    expected = num_classes * height * width * 4
    if len(payload) != expected:
        raise DataError(f"{path}: expected {expected} payload bytes, got {len(payload)}")
    prob = np.frombuffer(payload, dtype="<f4").reshape(num_classes, height, width)
    validate_prob_map(prob)
    return prob


def read_prob_map_pngs(class_paths: Sequence[Path]) -> np.ndarray:
    """Assemble a probability map from K per-class 16-bit PNGs."""
    if not class_paths:
        raise DataError("read_prob_map_pngs: no planes given")
    planes = [load_conf_png(p) for p in class_paths]
    shapes = {p.shape for p in planes}
    if len(shapes) != 1:
        raise DataError(f"probability planes disagree on shape: {sorted(shapes)}")
    prob = np.stack(planes, axis=0)
    validate_prob_map(prob)
    return prob


def write_prob_map_pngs(directory: Path, prob: np.ndarray) -> list[Path]:
    """Write K per-class 16-bit PNGs for one probability map.

    Planes 0..K-2 are floored to the 1/65535 grid and the last plane is
    the exact complement, so quantized per-pixel sums stay at exactly
    65535 and re-reading passes the sum-to-1 check for any K.
    """
    from PIL import Image as PILImage

    validate_prob_map(prob)
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    quantized = np.floor(prob.astype(np.float64) * 65535.0).astype(np.int64)
    quantized[-1] = 65535 - quantized[:-1].sum(axis=0)
    paths = []
    for c in range(prob.shape[0]):
        path = directory / f"c{c:03d}.png"
        PILImage.fromarray(quantized[c].astype(np.uint16)).save(path, format="PNG")
        paths.append(path)
    return paths
