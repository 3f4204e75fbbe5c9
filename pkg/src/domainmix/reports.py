"""Diagnostics over a mix run: supervision histograms and composites.

The headline report counts pasted supervision pixels per class (labeled
pixels inside pasted cells of the mixed outputs) and, when a baseline
manifest from a uniform-selection run is supplied, puts the two side by
side.  Composite sheets show original / cut / mixed for the first few
samples, images on top and colorized labels below.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

from .dataset import label_palette, load_image_png, load_label_png, load_sample, save_image_png
from .errors import DataError
from .pipeline import read_manifest
from .stats import load_stats
from .types import IGNORE, GridSpec

log = logging.getLogger(__name__)


def _grid_from_header(header: dict) -> GridSpec:
    g = header["grid"]
    return GridSpec(
        cols=int(g["cols"]),
        rows=int(g["rows"]),
        cell_width=int(g["cell_width"]),
        cell_height=int(g["cell_height"]),
    )


def pasted_class_counts(manifest_path: Path, num_classes: int | None = None) -> np.ndarray:
    """Per-class labeled-pixel counts inside the pasted cells of a run."""
    manifest_path = Path(manifest_path)
    header, records = read_manifest(manifest_path)
    grid = _grid_from_header(header)
    if num_classes is None:
        num_classes = int(header["num_classes"])
    out_dir = manifest_path.parent
    counts = np.zeros(num_classes, dtype=np.int64)
    for record in records:
        if not record["patches"]:
            continue
        label = load_label_png(out_dir / record["label"])
        for patch in record["patches"]:
            rows, cols = grid.cell_rect(int(patch["cell"])).slices()
            crop = label[rows, cols].reshape(-1)
            crop = crop[crop != IGNORE]
            if crop.size:
                counts += np.bincount(crop, minlength=num_classes)[:num_classes]
    return counts


def _colorize(label: np.ndarray) -> np.ndarray:
    palette = np.frombuffer(label_palette(), dtype=np.uint8).reshape(256, 3)
    return palette[label]


def _composite_sheet(original, cut_label_cells, mixed_image, mixed_label, grid, orig_label):
    """2x3 sheet: image row (original, cut, mixed), label row below."""
    cut_image = np.array(original.image)
    cut_label = np.array(orig_label)
    for cell in cut_label_cells:
        rows, cols = grid.cell_rect(cell).slices()
        cut_image[rows, cols] = 0
        cut_label[rows, cols] = IGNORE
    top = np.concatenate([original.image, cut_image, mixed_image], axis=1)
    bottom = np.concatenate(
        [_colorize(orig_label), _colorize(cut_label), _colorize(mixed_label)], axis=1
    )
    return np.concatenate([top, bottom], axis=0)


def write_report(
    manifest_path: Path,
    stats_path: Path,
    out_dir: Path,
    baseline_path: Path | None = None,
    source_dir: Path | None = None,
    target_dir: Path | None = None,
    composites: int = 0,
) -> dict:
    """Write report.csv (+ histogram.png, composites/) under ``out_dir``.

    Returns a summary dict with the per-class count arrays.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stats = load_stats(stats_path)
    num_classes = stats.num_classes
    header, records = read_manifest(manifest_path)

    counts = pasted_class_counts(manifest_path, num_classes)
    baseline_counts = None
    if baseline_path is not None:
        baseline_counts = pasted_class_counts(baseline_path, num_classes)

    dataset_total = max(int(stats.pixel_counts.sum()), 1)
    total = max(int(counts.sum()), 1)
    rows = []
    for c in range(num_classes):
        row = {
            "class_id": c,
            "dataset_share": stats.pixel_counts[c] / dataset_total,
            "pasted_pixels": int(counts[c]),
            "pasted_share": counts[c] / total,
        }
        if baseline_counts is not None:
            baseline_total = max(int(baseline_counts.sum()), 1)
            row["baseline_pixels"] = int(baseline_counts[c])
            row["baseline_share"] = baseline_counts[c] / baseline_total
        rows.append(row)

    csv_path = out_dir / "report.csv"
    fieldnames = list(rows[0].keys()) if rows else ["class_id", "pasted_pixels"]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)

    if not records:
        log.warning("report: manifest %s has no sample records", manifest_path)
        return {"counts": counts, "baseline_counts": baseline_counts, "records": 0}

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # Supervision histogram, baseline side by side when present.
    fig, ax = plt.subplots(figsize=(max(6, num_classes * 0.5), 4))
    xs = np.arange(num_classes)
    if baseline_counts is not None:
        ax.bar(xs - 0.2, counts, width=0.4, label="class-balanced selection")
        ax.bar(xs + 0.2, baseline_counts, width=0.4, label="uniform selection")
        ax.legend()
    else:
        ax.bar(xs, counts, width=0.6)
    ax.set_xlabel("class id")
    ax.set_ylabel("pasted supervision pixels")
    ax.set_xticks(xs)
    fig.tight_layout()
    fig.savefig(out_dir / "histogram.png", dpi=110)
    plt.close(fig)

    if composites > 0:
        if source_dir is None or target_dir is None:
            log.warning("report: composites requested but dataset dirs not given; skipping")
        else:
            _write_composites(
                header, records[:composites], manifest_path.parent, out_dir, source_dir, target_dir
            )

    return {"counts": counts, "baseline_counts": baseline_counts, "records": len(records)}


def _write_composites(header, records, run_dir: Path, out_dir: Path, source_dir, target_dir):
    grid = _grid_from_header(header)
    sheet_dir = out_dir / "composites"
    sheet_dir.mkdir(exist_ok=True)
    for record in records:
        base_dir = Path(source_dir if record["direction"] == "source" else target_dir)
        try:
            original = load_sample(base_dir, record["base_sample"])
        except (FileNotFoundError, DataError) as exc:
            log.warning("report: cannot load %s (%s); skipping composite", record["base_sample"], exc)
            continue
        mixed_image = load_image_png(run_dir / record["image"])
        mixed_label = load_label_png(run_dir / record["label"])
        sheet = _composite_sheet(
            original,
            [int(c) for c in record["cut"]["cut_cells"]],
            mixed_image,
            mixed_label,
            grid,
            original.label,
        )
        name = f"pair{record['pair']:06d}_{record['direction']}.png"
        save_image_png(sheet_dir / name, sheet)
