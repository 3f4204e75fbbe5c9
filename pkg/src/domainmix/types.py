"""Core data types: samples, grids, and the mixing configuration.

Pixel planes are plain numpy arrays, row-major with the origin at the
top-left:

* image       -- (H, W, 3) uint8
* label map   -- (H, W) uint8, class ids in [0, K) plus the reserved
                 ``IGNORE`` value
* confidence  -- (H, W) float32, values in [0, 1]

Arrays are marked read-only when a :class:`Sample` is constructed, so
samples can be shared freely between worker threads.  Anything that
modifies pixels copies first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

# Reserved label value for pixels excluded from supervision.  It lives in
# 8-bit label planes, which caps the usable class count at 254.
IGNORE = 255
MAX_CLASSES = 254


@dataclass(frozen=True)
class Rect:
    """Pixel rectangle; (x, y) is the top-left corner."""

    x: int
    y: int
    w: int
    h: int

    @property
    def area(self) -> int:
        return self.w * self.h

    def slices(self) -> tuple[slice, slice]:
        """(row, col) slices for indexing numpy planes."""
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)


@dataclass(frozen=True)
class GridSpec:
    """A cols x rows partition of an image into equal-size cells.

    Cell size is floor(image size / cell count); remainder pixels on the
    right/bottom edge belong to no cell, so every cell has the same size
    and any stored patch fits any cut cell exactly.  Cells are indexed
    row-major: ``index = row * cols + col``.
    """

    cols: int
    rows: int
    cell_width: int
    cell_height: int

    def __post_init__(self):
        if self.cols < 1 or self.rows < 1:
            raise ConfigError(f"grid needs at least 1x1 cells, got {self.cols}x{self.rows}")
        if self.cell_width < 1 or self.cell_height < 1:
            raise DataError(
                f"image smaller than one cell: cell size {self.cell_width}x{self.cell_height}"
            )

    @classmethod
    def for_image(cls, width: int, height: int, cols: int, rows: int) -> "GridSpec":
        if cols < 1 or rows < 1:
            raise ConfigError(f"grid needs at least 1x1 cells, got {cols}x{rows}")
        return cls(cols=cols, rows=rows, cell_width=width // cols, cell_height=height // rows)

    @property
    def num_cells(self) -> int:
        return self.cols * self.rows

    @property
    def extent(self) -> tuple[int, int]:
        """(width, height) in pixels actually covered by cells."""
        return self.cols * self.cell_width, self.rows * self.cell_height

    def cell_rect(self, index: int) -> Rect:
        if not 0 <= index < self.num_cells:
            raise DataError(f"cell index {index} out of range [0, {self.num_cells})")
        row, col = divmod(index, self.cols)
        return Rect(col * self.cell_width, row * self.cell_height, self.cell_width, self.cell_height)

    def cell_center(self, index: int) -> tuple[float, float]:
        """Cell center in grid-normalized coordinates, (x, y) in [0, 1]^2."""
        row, col = divmod(index, self.cols)
        return (col + 0.5) / self.cols, (row + 0.5) / self.rows

    def cell_centers(self) -> np.ndarray:
        """(num_cells, 2) array of normalized (x, y) centers, row-major."""
        return np.array([self.cell_center(i) for i in range(self.num_cells)])


@dataclass(frozen=True)
class MixConfig:
    """Knobs of the cut-and-paste synthesis.

    ``gamma`` is the uncertain-ratio threshold above which a candidate
    cell is cut.  ``alpha`` sharpens the class-balance weights.
    ``group_probs`` are the selection probabilities of the ascending
    confidence groups (lowest first) and must sum to 1.
    """

    num_classes: int
    gamma: float = 0.2
    alpha: float = 2.0
    num_groups: int = 3
    group_probs: tuple[float, ...] = (0.1, 0.3, 0.6)
    num_cut_boxes: int = 4
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "group_probs", tuple(float(p) for p in self.group_probs))
        if not 1 <= self.num_classes <= MAX_CLASSES:
            raise ConfigError(f"num_classes must be in [1, {MAX_CLASSES}], got {self.num_classes}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must be in [0, 1], got {self.gamma}")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.num_groups < 1:
            raise ConfigError(f"num_groups must be >= 1, got {self.num_groups}")
        if len(self.group_probs) != self.num_groups:
            raise ConfigError(
                f"group_probs has {len(self.group_probs)} entries, expected {self.num_groups}"
            )
        if any(p < 0 for p in self.group_probs):
            raise ConfigError("group_probs must be non-negative")
        if not math.isclose(sum(self.group_probs), 1.0, abs_tol=1e-9):
            raise ConfigError(f"group_probs must sum to 1, got {sum(self.group_probs)!r}")
        if self.num_cut_boxes < 0:
            raise ConfigError(f"num_cut_boxes must be >= 0, got {self.num_cut_boxes}")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Sample:
    """One sample: image + label map + per-pixel confidence.

    ``confidence=None`` means ground-truth labels and becomes 1.0
    everywhere.  Construction does not validate plane consistency (use
    :func:`validate_sample`); loaders validate at the boundary.
    """

    id: str
    image: np.ndarray
    label: np.ndarray
    confidence: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "image", _freeze(self.image))
        object.__setattr__(self, "label", _freeze(self.label))
        if self.confidence is None:
            conf = np.ones(self.label.shape[:2], dtype=np.float32)
        else:
            conf = self.confidence
        object.__setattr__(self, "confidence", _freeze(conf))

    @property
    def width(self) -> int:
        return self.label.shape[1]

    @property
    def height(self) -> int:
        return self.label.shape[0]


def validate_sample(sample: Sample, num_classes: int) -> list[str]:
    """Check one sample against the plane contracts.

    Returns a list of human-readable violations; an empty list means the
    sample is valid.  Report-style: never raises for bad pixel data.
    """
    if not 1 <= num_classes <= MAX_CLASSES:
        raise ConfigError(f"num_classes must be in [1, {MAX_CLASSES}], got {num_classes}")
    problems: list[str] = []
    lbl, img, conf = sample.label, sample.image, sample.confidence

    if lbl.ndim != 2:
        problems.append(f"label plane must be 2-d, got shape {lbl.shape}")
        return problems
    if lbl.dtype != np.uint8:
        problems.append(f"label plane must be uint8, got {lbl.dtype}")
    if img.ndim != 3 or img.shape[2] != 3:
        problems.append(f"image must be (H, W, 3), got shape {img.shape}")
    elif img.dtype != np.uint8:
        problems.append(f"image must be uint8, got {img.dtype}")
    if img.ndim == 3 and img.shape[:2] != lbl.shape:
        problems.append(f"dimension mismatch: image {img.shape[:2]} vs label {lbl.shape}")
    if conf.shape != lbl.shape:
        problems.append(f"dimension mismatch: confidence {conf.shape} vs label {lbl.shape}")
    else:
        if conf.size and (float(conf.min()) < 0.0 or float(conf.max()) > 1.0):
            problems.append(
                f"confidence out of [0, 1]: range [{float(conf.min())}, {float(conf.max())}]"
            )

    bad = (lbl >= num_classes) & (lbl != IGNORE)
    if bad.any():
        values = sorted(int(v) for v in np.unique(lbl[bad]))
        problems.append(f"class id out of range [0, {num_classes}): {values}")
    return problems
