"""Shared toy-data builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from domainmix import IGNORE, GridSpec, Sample


def make_sample(sample_id: str, label: np.ndarray, conf: np.ndarray | None = None,
                image: np.ndarray | None = None) -> Sample:
    label = np.asarray(label, dtype=np.uint8)
    if image is None:
        # distinctive, deterministic pixels per sample so pastes are traceable
        rng = np.random.default_rng(abs(hash(sample_id)) % (2**32))
        image = rng.integers(0, 256, size=label.shape + (3,), dtype=np.uint8)
    return Sample(id=sample_id, image=image, label=label, confidence=conf)


def random_label(rng: np.random.Generator, height: int, width: int, num_classes: int,
                 ignore_frac: float = 0.0) -> np.ndarray:
    label = rng.integers(0, num_classes, size=(height, width)).astype(np.uint8)
    if ignore_frac > 0:
        label[rng.random((height, width)) < ignore_frac] = IGNORE
    return label


def cellwise_sample(sample_id: str, grid: GridSpec, cell_classes, conf_value: float = 1.0,
                    rng: np.random.Generator | None = None) -> Sample:
    """A sample whose cells are each filled with a single class (or IGNORE)."""
    width, height = grid.extent
    label = np.empty((height, width), dtype=np.uint8)
    for cell, cls in enumerate(cell_classes):
        rows, cols = grid.cell_rect(cell).slices()
        label[rows, cols] = cls
    conf = np.full((height, width), conf_value, dtype=np.float32)
    if rng is None:
        rng = np.random.default_rng(abs(hash(sample_id)) % (2**32))
    image = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
    return Sample(id=sample_id, image=image, label=label, confidence=conf)


def write_toy_dataset(root, tag: str, grid: GridSpec, num_samples: int, num_classes: int,
                      class_probs, ignore_cells: int, seed: int) -> list[str]:
    """Write a cell-structured dataset to disk; returns the sample ids.

    Every grid cell is filled with one class drawn from ``class_probs``;
    ``ignore_cells`` random cells per sample are blanked to IGNORE so the
    confidence cutout has something to cut.
    """
    from domainmix.dataset import save_sample

    gen = np.random.default_rng(seed)
    ids = []
    for i in range(num_samples):
        cells = gen.choice(num_classes, size=grid.num_cells, p=class_probs)
        sample = cellwise_sample(f"{tag}{i:03d}", grid, cells, conf_value=0.75, rng=gen)
        label = np.array(sample.label)
        if ignore_cells:
            for cell in gen.choice(grid.num_cells, size=ignore_cells, replace=False):
                rows, cols = grid.cell_rect(int(cell)).slices()
                label[rows, cols] = IGNORE
        sample = Sample(id=sample.id, image=np.array(sample.image), label=label,
                        confidence=np.array(sample.confidence))
        save_sample(root, sample)
        ids.append(sample.id)
    return ids


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
