"""Domain-wise patch banks.

A bank divides every sample of one domain into grid cells, scores each
cell patch by normalized confidence (pixel confidence minus the class
difficulty, averaged over labeled pixels), and indexes patch references
into one sequence per (cell location, class present, confidence group).
A patch containing m classes appears in m sequences.  Within one
(cell, class) the patches are sorted ascending by score and split into
``num_groups`` equal-count groups, remainder going to the earliest
groups.

Banks store references plus scores, not pixels; crops are resolved
lazily through a loader (in-memory dict of samples, or crop PNGs inside
a saved bank directory).
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DataError, InternalError
from .types import IGNORE, MAX_CLASSES, GridSpec, Rect, Sample
from .dataset import load_image_png, load_label_png, save_image_png, save_label_png

log = logging.getLogger(__name__)

BANK_FORMAT = "domainmix-bank"
BANK_VERSION = 1

EMPTY_PATCH_SCORE = -1.0  # sorts before every reachable score


class PatchRef(NamedTuple):
    sample_id: str
    cell: int
    score: float


class RawPatch(NamedTuple):
    """One grid cell of one sample, pixels included."""

    cell: int
    rect: Rect
    image: np.ndarray
    label: np.ndarray
    confidence: np.ndarray


@dataclass(frozen=True)
class Patch:
    """A bank patch resolved to pixels."""

    sample_id: str
    cell: int
    rect: Rect
    image: np.ndarray
    label: np.ndarray
    score: float
    classes_present: frozenset[int]


CropLoader = Callable[[str, int], tuple[np.ndarray, np.ndarray]]


def divide(sample: Sample, grid: GridSpec) -> list[RawPatch]:
    """Split a sample into its cols x rows cell patches, row-major."""
    ew, eh = grid.extent
    if sample.width < ew or sample.height < eh:
        raise DataError(
            f"sample {sample.id}: size {sample.width}x{sample.height} "
            f"smaller than grid extent {ew}x{eh}"
        )
    patches = []
    for cell in range(grid.num_cells):
        rect = grid.cell_rect(cell)
        rows, cols = rect.slices()
        patches.append(
            RawPatch(
                cell=cell,
                rect=rect,
                image=sample.image[rows, cols],
                label=sample.label[rows, cols],
                confidence=sample.confidence[rows, cols],
            )
        )
    return patches


def normalized_confidence(
    label: np.ndarray, confidence: np.ndarray, difficulty: np.ndarray
) -> float:
    """Mean of (pixel confidence - class difficulty) over labeled pixels.

    Patches with no labeled pixels get the sentinel -1.0 so they sort
    first (least confident); they carry no class and never enter a
    sequence anyway.
    """
    flat_label = label.reshape(-1)
    keep = flat_label != IGNORE
    if not keep.any():
        return EMPTY_PATCH_SCORE
    flat_label = flat_label[keep].astype(np.int64)
    flat_conf = confidence.reshape(-1)[keep].astype(np.float64)
    return float(np.mean(flat_conf - np.asarray(difficulty, dtype=np.float64)[flat_label]))


def split_into_groups(items: Sequence, num_groups: int) -> list[list]:
    """Equal-count split; remainder items go to the earliest groups."""
    n = len(items)
    base, extra = divmod(n, num_groups)
    groups = []
    start = 0
    for g in range(num_groups):
        size = base + (1 if g < extra else 0)
        groups.append(list(items[start : start + size]))
        start += size
    return groups


@dataclass
class PatchBank:
    """Indexed patch sequences for one domain.

    ``sequences`` maps (cell, class_id, group) to an ordered tuple of
    PatchRef; all cols*rows*K*R keys exist, empty sequences included.
    ``boundaries`` records the score split points per (cell, class).
    """

    domain: str
    grid: GridSpec
    num_classes: int
    num_groups: int
    sequences: dict[tuple[int, int, int], tuple[PatchRef, ...]]
    boundaries: dict[tuple[int, int], tuple[float, ...]]
    loader: CropLoader | None = None
    _nonempty_cache: tuple | None = field(default=None, repr=False, compare=False)

    def query(self, cell: int, class_id: int, group: int) -> tuple[PatchRef, ...]:
        if not 0 <= cell < self.grid.num_cells:
            raise DataError(f"cell index {cell} out of range [0, {self.grid.num_cells})")
        if not 0 <= class_id < self.num_classes:
            raise DataError(f"class id {class_id} out of range [0, {self.num_classes})")
        if not 0 <= group < self.num_groups:
            raise DataError(f"group {group} out of range [0, {self.num_groups})")
        return self.sequences[(cell, class_id, group)]

    def patch(self, ref: PatchRef) -> Patch:
        if self.loader is None:
            raise InternalError("bank has no crop loader attached")
        image, label = self.loader(ref.sample_id, ref.cell)
        rect = self.grid.cell_rect(ref.cell)
        classes = frozenset(int(c) for c in np.unique(label) if c != IGNORE)
        return Patch(
            sample_id=ref.sample_id,
            cell=ref.cell,
            rect=rect,
            image=image,
            label=label,
            score=ref.score,
            classes_present=classes,
        )

    def nonempty_index(self):
        """Vectorized view of the non-empty sequences, cached.

        Returns (cells, classes, groups, seqs): three int arrays plus the
        aligned list of sequences, in deterministic key order.
        """
        if self._nonempty_cache is None:
            cells, classes, groups, seqs = [], [], [], []
            for (cell, class_id, group), seq in self.sequences.items():
                if seq:
                    cells.append(cell)
                    classes.append(class_id)
                    groups.append(group)
                    seqs.append(seq)
            self._nonempty_cache = (
                np.asarray(cells, dtype=np.int64),
                np.asarray(classes, dtype=np.int64),
                np.asarray(groups, dtype=np.int64),
                seqs,
            )
        return self._nonempty_cache

    def distinct_refs(self) -> list[PatchRef]:
        """All distinct (sample, cell) patches, sorted for determinism."""
        seen: dict[tuple[str, int], PatchRef] = {}
        for seq in self.sequences.values():
            for ref in seq:
                seen.setdefault((ref.sample_id, ref.cell), ref)
        return [seen[k] for k in sorted(seen)]

    def total_memberships(self) -> int:
        return sum(len(seq) for seq in self.sequences.values())


def _iter_keys(grid: GridSpec, num_classes: int, num_groups: int):
    for cell in range(grid.num_cells):
        for class_id in range(num_classes):
            for group in range(num_groups):
                yield cell, class_id, group


def build_bank(
    samples: Sequence[Sample],
    grid: GridSpec,
    num_classes: int,
    num_groups: int,
    difficulty: np.ndarray,
    domain: str = "source",
) -> PatchBank:
    """Build the patch bank of one domain from scored grid patches."""
    if not samples:
        raise DataError("build_bank: empty dataset")
    if not 1 <= num_classes <= MAX_CLASSES:
        raise ConfigError(f"num_classes must be in [1, {MAX_CLASSES}], got {num_classes}")
    if num_groups < 1:
        raise ConfigError(f"num_groups must be >= 1, got {num_groups}")
    difficulty = np.asarray(difficulty, dtype=np.float64)
    if difficulty.shape != (num_classes,):
        raise ConfigError(
            f"difficulty has shape {difficulty.shape}, expected ({num_classes},)"
        )

    ids = [s.id for s in samples]
    if len(set(ids)) != len(ids):
        raise DataError("build_bank: duplicate sample ids")

    per_cell_class: dict[tuple[int, int], list[PatchRef]] = {}
    for sample in samples:
        for raw in divide(sample, grid):
            score = normalized_confidence(raw.label, raw.confidence, difficulty)
            present = [int(c) for c in np.unique(raw.label) if c != IGNORE]
            for class_id in present:
                if class_id >= num_classes:
                    raise DataError(
                        f"sample {sample.id}: class id {class_id} out of range "
                        f"[0, {num_classes})"
                    )
                per_cell_class.setdefault((raw.cell, class_id), []).append(
                    PatchRef(sample.id, raw.cell, score)
                )

    sequences: dict[tuple[int, int, int], tuple[PatchRef, ...]] = {}
    boundaries: dict[tuple[int, int], tuple[float, ...]] = {}
    for cell in range(grid.num_cells):
        for class_id in range(num_classes):
            refs = per_cell_class.get((cell, class_id), [])
            refs.sort(key=lambda r: r.score)  # stable: ties keep dataset order
            groups = split_into_groups(refs, num_groups)
            boundaries[(cell, class_id)] = tuple(
                groups[g][-1].score for g in range(num_groups - 1) if groups[g]
            )
            for g in range(num_groups):
                sequences[(cell, class_id, g)] = tuple(groups[g])

    by_id = {s.id: s for s in samples}

    def memory_loader(sample_id: str, cell: int) -> tuple[np.ndarray, np.ndarray]:
        sample = by_id[sample_id]
        rows, cols = grid.cell_rect(cell).slices()
        return sample.image[rows, cols], sample.label[rows, cols]

    return PatchBank(
        domain=domain,
        grid=grid,
        num_classes=num_classes,
        num_groups=num_groups,
        sequences=sequences,
        boundaries=boundaries,
        loader=memory_loader,
    )


def query(bank: PatchBank, cell: int, class_id: int, group: int) -> tuple[PatchRef, ...]:
    return bank.query(cell, class_id, group)


# --- persistence -----------------------------------------------------------


def _crop_dir_name(sample_id: str) -> str:
    return hashlib.sha1(sample_id.encode("utf-8")).hexdigest()[:16]


def save_bank(bank: PatchBank, out_dir: Path) -> None:
    """Persist index.json plus one image/label crop PNG pair per patch.

    Crop files live under crops/<sha1(sample_id)[:16]>/c<cell>_{img,lbl}.png;
    only patches referenced by at least one sequence are materialized.
    """
    out_dir = Path(out_dir)
    (out_dir / "crops").mkdir(parents=True, exist_ok=True)

    sample_dirs: dict[str, str] = {}
    written: set[tuple[str, int]] = set()
    for seq in bank.sequences.values():
        for ref in seq:
            key = (ref.sample_id, ref.cell)
            if key in written:
                continue
            written.add(key)
            digest = sample_dirs.setdefault(ref.sample_id, _crop_dir_name(ref.sample_id))
            crop_dir = out_dir / "crops" / digest
            crop_dir.mkdir(exist_ok=True)
            image, label = bank.loader(ref.sample_id, ref.cell)
            save_image_png(crop_dir / f"c{ref.cell:03d}_img.png", np.ascontiguousarray(image))
            save_label_png(crop_dir / f"c{ref.cell:03d}_lbl.png", np.ascontiguousarray(label))

    entries = []
    for cell in range(bank.grid.num_cells):
        for class_id in range(bank.num_classes):
            groups = [
                [[ref.sample_id, ref.score] for ref in bank.sequences[(cell, class_id, g)]]
                for g in range(bank.num_groups)
            ]
            if any(groups):
                entries.append(
                    {
                        "cell": cell,
                        "class_id": class_id,
                        "groups": groups,
                        "splits": list(bank.boundaries.get((cell, class_id), ())),
                    }
                )

    doc = {
        "format": BANK_FORMAT,
        "version": BANK_VERSION,
        "domain": bank.domain,
        "grid": {
            "cols": bank.grid.cols,
            "rows": bank.grid.rows,
            "cell_width": bank.grid.cell_width,
            "cell_height": bank.grid.cell_height,
        },
        "num_classes": bank.num_classes,
        "num_groups": bank.num_groups,
        "samples": sample_dirs,
        "sequences": entries,
    }
    (out_dir / "index.json").write_text(json.dumps(doc, indent=2) + "\n")


def load_bank(bank_dir: Path) -> PatchBank:
    bank_dir = Path(bank_dir)
    index_path = bank_dir / "index.json"
    if not index_path.exists():
        raise DataError(f"{bank_dir}: missing index.json")
    doc = json.loads(index_path.read_text())
    if doc.get("format") != BANK_FORMAT:
        raise DataError(f"{index_path}: not a bank index (format {doc.get('format')!r})")
    if doc.get("version") != BANK_VERSION:
        raise DataError(f"{index_path}: unsupported bank version {doc.get('version')!r}")

    grid = GridSpec(
        cols=int(doc["grid"]["cols"]),
        rows=int(doc["grid"]["rows"]),
        cell_width=int(doc["grid"]["cell_width"]),
        cell_height=int(doc["grid"]["cell_height"]),
    )
    num_classes = int(doc["num_classes"])
    num_groups = int(doc["num_groups"])
    sample_dirs: dict[str, str] = dict(doc["samples"])

    sequences: dict[tuple[int, int, int], tuple[PatchRef, ...]] = {
        key: () for key in _iter_keys(grid, num_classes, num_groups)
    }
    boundaries: dict[tuple[int, int], tuple[float, ...]] = {}
    for entry in doc["sequences"]:
        cell = int(entry["cell"])
        class_id = int(entry["class_id"])
        boundaries[(cell, class_id)] = tuple(float(s) for s in entry["splits"])
        for g, group in enumerate(entry["groups"]):
            sequences[(cell, class_id, g)] = tuple(
                PatchRef(str(sid), cell, float(score)) for sid, score in group
            )

    def disk_loader(sample_id: str, cell: int) -> tuple[np.ndarray, np.ndarray]:
        digest = sample_dirs.get(sample_id)
        if digest is None:
            raise DataError(f"bank {bank_dir}: unknown sample id {sample_id!r}")
        crop_dir = bank_dir / "crops" / digest
        image = load_image_png(crop_dir / f"c{cell:03d}_img.png")
        label = load_label_png(crop_dir / f"c{cell:03d}_lbl.png")
        return image, label

    return PatchBank(
        domain=str(doc["domain"]),
        grid=grid,
        num_classes=num_classes,
        num_groups=num_groups,
        sequences=sequences,
        boundaries=boundaries,
        loader=disk_loader,
    )
