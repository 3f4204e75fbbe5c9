"""Mix-run orchestration: datasets in, mixed samples + manifest out.

The manifest is JSON lines: a header record (grid, config, hash) then
one record per emitted sample carrying the cut plan and per-cell
provenance, enough to replay and audit any output.  Pair i draws its own
RNG stream from (seed, i), so results do not depend on worker
scheduling; the manifest is written in pair order.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .bank import PatchBank
from .errors import ConfigError, DataError
from .dataset import list_sample_ids, load_sample, save_image_png, save_label_png
from .mix import MixedSample, mix_pair
from .seeds import derive_rng
from .stats import ClassStats, SpatialPrior
from .types import MixConfig

MANIFEST_FORMAT = "domainmix-manifest"
MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.jsonl"


def config_hash(grid, config: MixConfig, selection: str) -> str:
    doc = {
        "grid": [grid.cols, grid.rows, grid.cell_width, grid.cell_height],
        "num_classes": config.num_classes,
        "gamma": config.gamma,
        "alpha": config.alpha,
        "num_groups": config.num_groups,
        "group_probs": list(config.group_probs),
        "num_cut_boxes": config.num_cut_boxes,
        "seed": config.seed,
        "selection": selection,
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def _sample_record(
    pair: int, direction: str, mixed: MixedSample, image_rel: str, label_rel: str
) -> dict:
    return {
        "type": "sample",
        "pair": pair,
        "direction": direction,
        "base_sample": mixed.base_id,
        "image": image_rel,
        "label": label_rel,
        "cut": {
            "candidates": list(mixed.cut.candidates),
            "ratios": list(mixed.cut.ratios),
            "cut_cells": list(mixed.cut.cut_cells),
        },
        "patches": [
            {
                "cell": p.cell,
                "class_id": p.class_id,
                "group": p.group,
                "origin_cell": p.origin_cell,
                "sample_id": p.sample_id,
            }
            for p in mixed.provenance
        ],
    }


def run_mix(
    src_dir: Path,
    tgt_dir: Path,
    src_bank: PatchBank,
    tgt_bank: PatchBank,
    stats: ClassStats,
    prior: SpatialPrior,
    config: MixConfig,
    out_dir: Path,
    count: int,
    workers: int = 1,
    selection: str = "weighted",
    sc_from_cut_content: bool = False,
) -> Path:
    """Emit ``count`` mixed pairs (2 * count samples); returns the manifest path."""
    if count < 0:
        raise ConfigError(f"count must be >= 0, got {count}")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    if selection not in ("weighted", "uniform"):
        raise ConfigError(f"unknown selection mode {selection!r}")
    if src_bank.grid != tgt_bank.grid:
        raise DataError("banks were built over different grids")
    grid = src_bank.grid
    if config.num_cut_boxes > grid.num_cells:
        raise ConfigError(
            f"num_cut_boxes {config.num_cut_boxes} exceeds the {grid.num_cells} grid cells"
        )

    src_ids = list_sample_ids(src_dir)
    tgt_ids = list_sample_ids(tgt_dir)
    if not src_ids:
        raise DataError(f"{src_dir}: no samples")
    if not tgt_ids:
        raise DataError(f"{tgt_dir}: no samples")

    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "labels").mkdir(parents=True, exist_ok=True)

    cache: dict[tuple[str, str], object] = {}

    def cached_sample(root: Path, sample_id: str):
        key = (str(root), sample_id)
        sample = cache.get(key)
        if sample is None:
            sample = load_sample(root, sample_id, config.num_classes)
            cache[key] = sample
        return sample

    def one_pair(pair: int) -> list[dict]:
        rng = derive_rng(config.seed, "pair", pair)
        src = cached_sample(src_dir, src_ids[int(rng.integers(len(src_ids)))])
        tgt = cached_sample(tgt_dir, tgt_ids[int(rng.integers(len(tgt_ids)))])
        mixed_src, mixed_tgt = mix_pair(
            src,
            tgt,
            src_bank,
            tgt_bank,
            stats,
            prior,
            config,
            rng,
            selection=selection,
            sc_from_cut_content=sc_from_cut_content,
        )
        records = []
        for direction, mixed in (("source", mixed_src), ("target", mixed_tgt)):
            stem = f"mix{pair:06d}_{direction}"
            image_rel = f"images/{stem}.png"
            label_rel = f"labels/{stem}.png"
            save_image_png(out_dir / image_rel, mixed.image)
            save_label_png(out_dir / label_rel, mixed.label)
            records.append(_sample_record(pair, direction, mixed, image_rel, label_rel))
        return records

    if workers == 1:
        per_pair = [one_pair(i) for i in range(count)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_pair = list(pool.map(one_pair, range(count)))

    header = {
        "type": "header",
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "grid": {
            "cols": grid.cols,
            "rows": grid.rows,
            "cell_width": grid.cell_width,
            "cell_height": grid.cell_height,
        },
        "num_classes": config.num_classes,
        "gamma": config.gamma,
        "alpha": config.alpha,
        "num_groups": config.num_groups,
        "group_probs": list(config.group_probs),
        "num_cut_boxes": config.num_cut_boxes,
        "seed": config.seed,
        "selection": selection,
        "count": count,
        "config_hash": config_hash(grid, config, selection),
    }
    manifest_path = out_dir / MANIFEST_NAME
    with open(manifest_path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for records in per_pair:
            for record in records:
                fh.write(json.dumps(record, sort_keys=True) + "\n")
    return manifest_path


def read_manifest(path: Path) -> tuple[dict, list[dict]]:
    """Returns (header, sample records); validates format and version."""
    path = Path(path)
    header = None
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            if doc.get("type") == "header":
                if header is not None:
                    raise DataError(f"{path}: duplicate manifest header")
                if doc.get("format") != MANIFEST_FORMAT:
                    raise DataError(f"{path}: not a mix manifest")
                if doc.get("version") != MANIFEST_VERSION:
                    raise DataError(f"{path}: unsupported manifest version {doc.get('version')!r}")
                header = doc
            elif doc.get("type") == "sample":
                records.append(doc)
            else:
                raise DataError(f"{path}: unknown record type {doc.get('type')!r}")
    if header is None:
        raise DataError(f"{path}: missing manifest header")
    return header, records
