"""Dataset-level statistics that drive patch selection.

Three quantities, all computed from label/confidence planes:

* class pixel counts over the source ground truth, feeding the
  class-balance probabilities ``p_i = (-log share_i)^alpha`` normalized
  over the classes that are present;
* class difficulty, the dataset mean confidence per class, subtracted
  pixel-wise when scoring patches;
* class-wise spatial prior maps: per-class occurrence mass on a
  normalized raster, smoothed with an isotropic Gaussian.

Counts and difficulty both come from the source domain in the standard
pipeline and are reused for both mixing directions.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .types import IGNORE, MAX_CLASSES

log = logging.getLogger(__name__)

STATS_FORMAT = "domainmix-stats"
PRIOR_FORMAT = "domainmix-prior"
FORMAT_VERSION = 1

DEFAULT_BANDWIDTH = 0.1
DEFAULT_RESOLUTION = 64


@dataclass(frozen=True)
class ClassStats:
    num_classes: int
    pixel_counts: np.ndarray  # (K,) int64, non-IGNORE pixels per class
    difficulty: np.ndarray  # (K,) float64 mean confidence per class


def class_pixel_counts(labels: Iterable[np.ndarray], num_classes: int) -> np.ndarray:
    """Count non-IGNORE pixels per class over a sequence of label maps."""
    if not 1 <= num_classes <= MAX_CLASSES:
        raise ConfigError(f"num_classes must be in [1, {MAX_CLASSES}], got {num_classes}")
    counts = np.zeros(num_classes, dtype=np.int64)
    seen_any = False
    for label in labels:
        seen_any = True
        flat = label.reshape(-1)
        flat = flat[flat != IGNORE]
        if flat.size:
            counts += np.bincount(flat, minlength=num_classes)[:num_classes].astype(np.int64)
    if not seen_any or counts.sum() == 0:
        log.warning("class_pixel_counts: no labeled pixels seen")
    return counts


def class_balance_probs(counts: Sequence[int] | np.ndarray, alpha: float) -> np.ndarray:
    """Class-balance selection probabilities from pixel counts.

    weight_i = (-log(count_i / total))^alpha over classes with count > 0,
    then normalized to sum 1.  Zero-count classes get probability 0 (they
    have no patches to select).  A single present class would get weight
    -log(1) = 0, so it is special-cased to probability 1.
    """
    counts = np.asarray(counts, dtype=np.float64)
    if alpha < 0:
        raise ConfigError(f"alpha must be >= 0, got {alpha}")
    if counts.ndim != 1 or counts.size == 0:
        raise DataError(f"counts must be a non-empty vector, got shape {counts.shape}")
    if (counts < 0).any():
        raise DataError("counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise DataError("class_balance_probs: all class counts are zero")

    present = counts > 0
    probs = np.zeros_like(counts)
    if present.sum() == 1:
        probs[present] = 1.0
        return probs
    weights = (-np.log(counts[present] / total)) ** alpha
    probs[present] = weights / weights.sum()
    return probs


def class_difficulty(
    pairs: Iterable[tuple[np.ndarray, np.ndarray]], num_classes: int
) -> np.ndarray:
    """Mean confidence per class over labeled pixels.

    Classes absent from the dataset fall back to the global mean
    confidence.  A dataset with no labeled pixels at all yields zeros.
    """
    if not 1 <= num_classes <= MAX_CLASSES:
        raise ConfigError(f"num_classes must be in [1, {MAX_CLASSES}], got {num_classes}")
    conf_sum = np.zeros(num_classes, dtype=np.float64)
    count = np.zeros(num_classes, dtype=np.int64)
    for label, conf in pairs:
        if label.shape != conf.shape:
            raise DataError(f"plane mismatch: label {label.shape} vs confidence {conf.shape}")
        flat_label = label.reshape(-1)
        flat_conf = conf.reshape(-1).astype(np.float64)
        keep = flat_label != IGNORE
        flat_label = flat_label[keep]
        flat_conf = flat_conf[keep]
        if flat_label.size:
            conf_sum += np.bincount(flat_label, weights=flat_conf, minlength=num_classes)[
                :num_classes
            ]
            count += np.bincount(flat_label, minlength=num_classes)[:num_classes]

    total = count.sum()
    if total == 0:
        log.warning("class_difficulty: no labeled pixels, difficulty set to 0")
        return np.zeros(num_classes, dtype=np.float64)
    global_mean = conf_sum.sum() / total
    difficulty = np.full(num_classes, global_mean, dtype=np.float64)
    seen = count > 0
    difficulty[seen] = conf_sum[seen] / count[seen]
    return difficulty


@dataclass(frozen=True)
class SpatialPrior:
    """Per-class kernel maps over normalized image coordinates.

    ``maps`` is (K, resolution, resolution) float64, row-major over
    (y, x) raster bins with bin centers at ((i + 0.5) / resolution).
    Values are smoothed occurrence mass: non-negative, not normalized
    (downstream uses only argmax across classes and ratios across
    locations).
    """

    num_classes: int
    resolution: int
    bandwidth: float
    maps: np.ndarray

    def empty_classes(self) -> np.ndarray:
        """Boolean flags for classes whose map carries zero mass."""
        return self.maps.sum(axis=(1, 2)) == 0.0

    def values_at(self, class_id: int, coords: np.ndarray) -> np.ndarray:
        """Bilinear lookup of one class map at (N, 2) normalized (x, y)."""
        if not 0 <= class_id < self.num_classes:
            raise DataError(f"class id {class_id} out of range [0, {self.num_classes})")
        coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
        res = self.resolution
        # Bin centers sit at (i + 0.5) / res, so the raster coordinate of
        # a query point is x * res - 0.5, clamped to the center range.
        u = np.clip(coords[:, 0] * res - 0.5, 0.0, res - 1.0)
        v = np.clip(coords[:, 1] * res - 0.5, 0.0, res - 1.0)
        u0 = np.floor(u).astype(int)
        v0 = np.floor(v).astype(int)
        u1 = np.minimum(u0 + 1, res - 1)
        v1 = np.minimum(v0 + 1, res - 1)
        fu = u - u0
        fv = v - v0
        m = self.maps[class_id]
        return (
            m[v0, u0] * (1 - fu) * (1 - fv)
            + m[v0, u1] * fu * (1 - fv)
            + m[v1, u0] * (1 - fu) * fv
            + m[v1, u1] * fu * fv
        )

    def value_at(self, class_id: int, x: float, y: float) -> float:
        return float(self.values_at(class_id, np.array([[x, y]]))[0])

    def class_at(self, x: float, y: float) -> int:
        """Class whose prior is largest at (x, y); ties -> lowest id."""
        values = np.array(
            [self.values_at(c, np.array([[x, y]]))[0] for c in range(self.num_classes)]
        )
        return int(np.argmax(values))


def build_spatial_prior(
    labels: Sequence[np.ndarray],
    num_classes: int,
    bandwidth: float = DEFAULT_BANDWIDTH,
    resolution: int = DEFAULT_RESOLUTION,
) -> SpatialPrior:
    """Accumulate class occurrence on a normalized raster and smooth it.

    Every labeled pixel deposits one count into the raster bin holding
    its normalized center ((px + 0.5) / width, (py + 0.5) / height); each
    class map is then convolved with an isotropic Gaussian of standard
    deviation ``bandwidth`` (a fraction of the normalized image extent).
    The kernel spans the whole raster, so the result equals the explicit
    Gaussian sum over occurrence bins; accumulation is order-independent.
    """
    from scipy.ndimage import convolve1d  # deferred: keeps CLI startup light

    if not 1 <= num_classes <= MAX_CLASSES:
        raise ConfigError(f"num_classes must be in [1, {MAX_CLASSES}], got {num_classes}")
    if bandwidth <= 0:
        raise ConfigError(f"bandwidth must be > 0, got {bandwidth}")
    if resolution < 2:
        raise ConfigError(f"resolution must be >= 2, got {resolution}")
    labels = list(labels)
    if not labels:
        raise DataError("build_spatial_prior: empty label set")

    hist = np.zeros((num_classes, resolution, resolution), dtype=np.float64)
    for label in labels:
        height, width = label.shape
        ys, xs = np.nonzero(label != IGNORE)
        if ys.size == 0:
            continue
        classes = label[ys, xs].astype(np.int64)
        if (classes >= num_classes).any():
            bad = int(classes[classes >= num_classes][0])
            raise DataError(f"label value {bad} out of range [0, {num_classes})")
        bx = np.clip(((xs + 0.5) / width * resolution).astype(np.int64), 0, resolution - 1)
        by = np.clip(((ys + 0.5) / height * resolution).astype(np.int64), 0, resolution - 1)
        flat = (classes * resolution + by) * resolution + bx
        hist += np.bincount(flat, minlength=num_classes * resolution * resolution).reshape(
            num_classes, resolution, resolution
        )

    sigma = bandwidth * resolution  # raster units
    offsets = np.arange(-(resolution - 1), resolution, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    maps = convolve1d(hist, kernel, axis=1, mode="constant", cval=0.0)
    maps = convolve1d(maps, kernel, axis=2, mode="constant", cval=0.0)
    return SpatialPrior(
        num_classes=num_classes, resolution=resolution, bandwidth=float(bandwidth), maps=maps
    )


# --- serialization ---------------------------------------------------------


def save_stats(path: Path, stats: ClassStats) -> None:
    doc = {
        "format": STATS_FORMAT,
        "version": FORMAT_VERSION,
        "num_classes": stats.num_classes,
        "pixel_counts": [int(c) for c in stats.pixel_counts],
        "difficulty": [float(d) for d in stats.difficulty],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_stats(path: Path) -> ClassStats:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != STATS_FORMAT:
        raise DataError(f"{path}: not a stats file (format {doc.get('format')!r})")
    if doc.get("version") != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported stats version {doc.get('version')!r}")
    counts = np.asarray(doc["pixel_counts"], dtype=np.int64)
    difficulty = np.asarray(doc["difficulty"], dtype=np.float64)
    num_classes = int(doc["num_classes"])
    if counts.shape != (num_classes,) or difficulty.shape != (num_classes,):
        raise DataError(f"{path}: stats arrays do not match num_classes={num_classes}")
    return ClassStats(num_classes=num_classes, pixel_counts=counts, difficulty=difficulty)


def save_prior(path: Path, prior: SpatialPrior) -> None:
    """Write <path> (JSON header) and a sibling .bin raster blob.

    The blob is raw little-endian float64, K maps of resolution^2 values
    each, row-major (class, y, x).
    """
    path = Path(path)
    blob_path = path.with_suffix(".bin")
    blob = np.ascontiguousarray(prior.maps, dtype="<f8").tobytes()
    doc = {
        "format": PRIOR_FORMAT,
        "version": FORMAT_VERSION,
        "num_classes": prior.num_classes,
        "resolution": prior.resolution,
        "bandwidth": prior.bandwidth,
        "dtype": "<f8",
        "blob": blob_path.name,
        "sha256": hashlib.sha256(blob).hexdigest(),
    }
    blob_path.write_bytes(blob)
    path.write_text(json.dumps(doc, indent=2) + "\n")


def load_prior(path: Path) -> SpatialPrior:
    path = Path(path)
    doc = json.loads(path.read_text())
    if doc.get("format") != PRIOR_FORMAT:
        raise DataError(f"{path}: not a prior file (format {doc.get('format')!r})")
    if doc.get("version") != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported prior version {doc.get('version')!r}")
    blob_path = path.parent / doc["blob"]
    blob = blob_path.read_bytes()
    if hashlib.sha256(blob).hexdigest() != doc["sha256"]:
        raise DataError(f"{blob_path}: raster blob does not match recorded checksum")
    num_classes = int(doc["num_classes"])
    resolution = int(doc["resolution"])
    maps = np.frombuffer(blob, dtype="<f8").reshape(num_classes, resolution, resolution)
    return SpatialPrior(
        num_classes=num_classes,
        resolution=resolution,
        bandwidth=float(doc["bandwidth"]),
        maps=maps.astype(np.float64),
    )


def compute_stats(samples, num_classes: int) -> ClassStats:
    """ClassStats of a dataset: pixel counts + difficulty in one pass."""
    samples = list(samples)
    counts = class_pixel_counts((s.label for s in samples), num_classes)
    difficulty = class_difficulty(((s.label, s.confidence) for s in samples), num_classes)
    return ClassStats(num_classes=num_classes, pixel_counts=counts, difficulty=difficulty)
