"""Region cutout: random masks and confidence-triggered cell drops.

Cutting zeroes the image, sets the label to IGNORE, and zeroes the
confidence.  The confidence-based variant examines randomly drawn grid
cells and cuts exactly those whose uncertain ratio (fraction of IGNORE
pixels) exceeds the threshold gamma.  Candidate regions are aligned to
the selection grid so that any bank patch fits a cut hole exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .types import IGNORE, GridSpec, Rect, Sample


@dataclass(frozen=True)
class CutPlan:
    """Which cells were examined and which were actually cut."""

    candidates: tuple[int, ...]  # cells examined, in draw order
    ratios: tuple[float, ...]  # uncertain ratio per candidate
    cut_cells: tuple[int, ...]  # ratios above gamma, ascending


def uncertain_ratio(label: np.ndarray, rect: Rect) -> float:
    """Fraction of IGNORE pixels inside ``rect`` of a label plane."""
    if rect.area <= 0:
        raise DataError(f"empty rectangle {rect}")
    height, width = label.shape
    if rect.x < 0 or rect.y < 0 or rect.x + rect.w > width or rect.y + rect.h > height:
        raise DataError(f"rectangle {rect} outside label plane {width}x{height}")
    rows, cols = rect.slices()
    return float(np.count_nonzero(label[rows, cols] == IGNORE)) / rect.area


def random_cutout(sample: Sample, mask: np.ndarray) -> Sample:
    """Drop every pixel where ``mask`` is 0; keep the rest bit-identical.

    The label is categorical, so "multiply by zero" means set to IGNORE
    rather than class 0.
    """
    mask = np.asarray(mask)
    if mask.shape != sample.label.shape:
        raise DataError(f"mask shape {mask.shape} does not match label {sample.label.shape}")
    drop = mask == 0
    if not drop.any():
        return sample
    image = np.array(sample.image)
    label = np.array(sample.label)
    conf = np.array(sample.confidence)
    image[drop] = 0
    label[drop] = IGNORE
    conf[drop] = 0.0
    return Sample(id=sample.id, image=image, label=label, confidence=conf)


def confidence_cutout(
    sample: Sample,
    grid: GridSpec,
    gamma: float,
    num_boxes: int,
    rng: np.random.Generator,
) -> tuple[Sample, CutPlan]:
    """Draw ``num_boxes`` distinct candidate cells, cut those above gamma.

    Candidates are drawn uniformly without replacement (cutting the same
    cell twice would be a no-op).  Cells at or below the threshold stay
    untouched.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ConfigError(f"gamma must be in [0, 1], got {gamma}")
    if num_boxes > grid.num_cells:
        raise ConfigError(
            f"num_boxes {num_boxes} exceeds the {grid.num_cells} grid cells"
        )
    candidates = [int(c) for c in rng.choice(grid.num_cells, size=num_boxes, replace=False)]
    ratios = [uncertain_ratio(sample.label, grid.cell_rect(c)) for c in candidates]
    cut_cells = sorted(c for c, r in zip(candidates, ratios) if r > gamma)

    plan = CutPlan(
        candidates=tuple(candidates), ratios=tuple(ratios), cut_cells=tuple(cut_cells)
    )
    if not cut_cells:
        return sample, plan

    mask = np.ones(sample.label.shape, dtype=np.uint8)
    for cell in cut_cells:
        rows, cols = grid.cell_rect(cell).slices()
        mask[rows, cols] = 0
    return random_cutout(sample, mask), plan
