"""Patch selection and bidirectional mixing.

For every cut cell a patch is drawn from the OTHER domain's bank with
probability proportional to

    class balance x spatial continuity x confidence group,

restricted to non-empty sequences and renormalized once over that
support (no rejection loops).  The spatial term queries the class-wise
prior at the cut cell's center, picks the class with the largest prior
there, and weights candidate origin locations by that class's prior at
their centers.

``mix_pair`` runs the whole thing in both directions: source holes are
filled from the target bank and target holes from the source bank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bank import Patch, PatchBank, PatchRef
from .cut import CutPlan, confidence_cutout
from .errors import ConfigError, DataError, InternalError
from .stats import ClassStats, SpatialPrior, class_balance_probs
from .types import IGNORE, GridSpec, MixConfig, Sample


def _as_distribution(name: str, weights: np.ndarray) -> np.ndarray:
    """Validate non-negative weights and normalize them to sum 1.

    Accepting any positive scale makes rescaling by a constant a no-op,
    which is exactly the product-then-normalize invariant of the joint
    selection distribution.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if weights.ndim != 1:
        raise ConfigError(f"{name} must be a vector, got shape {weights.shape}")
    if (weights < 0).any():
        raise ConfigError(f"{name} must be non-negative")
    total = float(weights.sum())
    if total <= 0.0:
        raise ConfigError(f"{name} has zero total mass")
    return weights / total


@dataclass(frozen=True)
class SelectionWeights:
    """The three per-axis distributions for one cut cell.

    Inputs may be unnormalized non-negative weights; each component is
    normalized to sum 1 over its support at construction.
    """

    p_class: np.ndarray  # (K,)
    p_cell: np.ndarray  # (num_cells,) given this cut center
    p_group: np.ndarray  # (R,) ascending confidence groups

    def __post_init__(self):
        object.__setattr__(self, "p_class", _as_distribution("p_class", self.p_class))
        object.__setattr__(self, "p_cell", _as_distribution("p_cell", self.p_cell))
        object.__setattr__(self, "p_group", _as_distribution("p_group", self.p_group))


@dataclass(frozen=True)
class Selection:
    """How one pasted patch was chosen (None fields = uniform mode)."""

    class_id: int | None
    origin_cell: int
    group: int | None
    ref: PatchRef


@dataclass(frozen=True)
class Provenance:
    cell: int  # cut cell that was filled
    class_id: int | None  # class drawn by the selector
    group: int | None  # confidence group drawn
    origin_cell: int  # grid location the patch came from
    sample_id: str  # bank sample the pixels came from


@dataclass(frozen=True)
class MixedSample:
    base_id: str
    image: np.ndarray
    label: np.ndarray
    cut: CutPlan
    provenance: tuple[Provenance, ...]


def spatial_continuity_probs(
    prior: SpatialPrior,
    cut_center: tuple[float, float],
    cell_centers: np.ndarray,
    class_id: int | None = None,
) -> np.ndarray:
    """Per-origin-location probabilities for one cut cell.

    The class is the prior argmax at the cut center unless overridden;
    probabilities over locations are that class's prior values at the
    cell centers, normalized to 1.  A class with zero prior at every
    center falls back to uniform.
    """
    cell_centers = np.asarray(cell_centers, dtype=np.float64)
    if class_id is None:
        class_id = prior.class_at(float(cut_center[0]), float(cut_center[1]))
    values = prior.values_at(class_id, cell_centers)
    total = float(values.sum())
    if total <= 0.0:
        return np.full(len(cell_centers), 1.0 / len(cell_centers))
    return values / total


def joint_selection_weights(
    bank: PatchBank, weights: SelectionWeights
) -> tuple[list[tuple[int, int, int]], np.ndarray]:
    """Normalized product distribution over non-empty (cell, class, group).

    Raises when the bank has no non-empty sequence at all, or when the
    weights put zero mass on every non-empty triple (e.g. every class in
    the bank has class-balance probability 0).
    """
    cells, classes, groups, seqs = bank.nonempty_index()
    if len(seqs) == 0:
        raise DataError("bank unusable: all patch sequences are empty")
    if weights.p_class.shape != (bank.num_classes,):
        raise ConfigError(
            f"p_class has shape {weights.p_class.shape}, bank has {bank.num_classes} classes"
        )
    if weights.p_cell.shape != (bank.grid.num_cells,):
        raise ConfigError(
            f"p_cell has shape {weights.p_cell.shape}, bank has {bank.grid.num_cells} cells"
        )
    if weights.p_group.shape != (bank.num_groups,):
        raise ConfigError(
            f"p_group has shape {weights.p_group.shape}, bank has {bank.num_groups} groups"
        )
    joint = weights.p_class[classes] * weights.p_cell[cells] * weights.p_group[groups]
    total = float(joint.sum())
    if total <= 0.0:
        raise DataError("no selectable patch sequence: joint weight mass is zero")
    triples = list(zip(cells.tolist(), classes.tolist(), groups.tolist()))
    return triples, joint / total


def select_patch(
    bank: PatchBank, weights: SelectionWeights, rng: np.random.Generator
) -> tuple[Patch, Selection]:
    """Draw one patch: a (cell, class, group) triple by the joint product
    distribution, then a uniform member of that sequence."""
    triples, probs = joint_selection_weights(bank, weights)
    index = int(rng.choice(len(triples), p=probs))
    cell, class_id, group = triples[index]
    seq = bank.sequences[(cell, class_id, group)]
    ref = seq[int(rng.integers(len(seq)))]
    return bank.patch(ref), Selection(class_id=class_id, origin_cell=cell, group=group, ref=ref)


def select_patch_uniform(
    bank: PatchBank, rng: np.random.Generator
) -> tuple[Patch, Selection]:
    """Baseline: one patch uniformly over the bank's distinct patches.

    This follows raw existence probability, so frequent classes dominate;
    it is the comparison point for the class-balanced selector.
    """
    refs = bank.distinct_refs()
    if not refs:
        raise DataError("bank unusable: all patch sequences are empty")
    ref = refs[int(rng.integers(len(refs)))]
    return bank.patch(ref), Selection(class_id=None, origin_cell=ref.cell, group=None, ref=ref)


def paste(
    masked: Sample,
    plan: CutPlan,
    selections: list[tuple[Patch, Selection]],
    grid: GridSpec,
) -> MixedSample:
    """Copy each selected patch into its cut cell.

    Image and label crops always come from the same patch.  Pixels
    outside the cut cells stay bit-identical to the masked input.
    """
    if len(selections) != len(plan.cut_cells):
        raise InternalError(
            f"{len(selections)} selections for {len(plan.cut_cells)} cut cells"
        )
    image = np.array(masked.image)
    label = np.array(masked.label)
    provenance = []
    for cell, (patch, sel) in zip(plan.cut_cells, selections):
        rect = grid.cell_rect(cell)
        if patch.image.shape != (rect.h, rect.w, 3) or patch.label.shape != (rect.h, rect.w):
            raise DataError(
                f"patch {patch.sample_id}/{patch.cell} size {patch.label.shape} "
                f"does not fit cell {cell} ({rect.h}, {rect.w})"
            )
        rows, cols = rect.slices()
        image[rows, cols] = patch.image
        label[rows, cols] = patch.label
        provenance.append(
            Provenance(
                cell=cell,
                class_id=sel.class_id,
                group=sel.group,
                origin_cell=sel.origin_cell,
                sample_id=patch.sample_id,
            )
        )
    return MixedSample(
        base_id=masked.id,
        image=image,
        label=label,
        cut=plan,
        provenance=tuple(provenance),
    )


def _dominant_class(label: np.ndarray, grid: GridSpec, cell: int) -> int | None:
    rows, cols = grid.cell_rect(cell).slices()
    crop = label[rows, cols].reshape(-1)
    crop = crop[crop != IGNORE]
    if crop.size == 0:
        return None
    counts = np.bincount(crop)
    return int(np.argmax(counts))


def _fill_cut_cells(
    bank: PatchBank,
    plan: CutPlan,
    original: Sample,
    p_class: np.ndarray,
    prior: SpatialPrior,
    config: MixConfig,
    grid: GridSpec,
    rng: np.random.Generator,
    selection: str,
    sc_from_cut_content: bool,
) -> list[tuple[Patch, Selection]]:
    centers = grid.cell_centers()
    picks = []
    for cell in plan.cut_cells:
        if selection == "uniform":
            picks.append(select_patch_uniform(bank, rng))
            continue
        override = None
        if sc_from_cut_content:
            # Variant: condition the spatial class on what the cut region
            # contained before masking, not on the prior peak.
            override = _dominant_class(original.label, grid, cell)
        p_cell = spatial_continuity_probs(prior, grid.cell_center(cell), centers, override)
        weights = SelectionWeights(
            p_class=p_class, p_cell=p_cell, p_group=np.asarray(config.group_probs)
        )
        picks.append(select_patch(bank, weights, rng))
    return picks


def mix_pair(
    src: Sample,
    tgt: Sample,
    src_bank: PatchBank,
    tgt_bank: PatchBank,
    stats: ClassStats,
    prior: SpatialPrior,
    config: MixConfig,
    rng: np.random.Generator,
    selection: str = "weighted",
    sc_from_cut_content: bool = False,
) -> tuple[MixedSample, MixedSample]:
    """Mix one source/target pair in both directions.

    Returns (mixed source, mixed target): the source sample with its cut
    cells filled from the TARGET bank, and the target sample filled from
    the SOURCE bank.  Class balance and the spatial prior both come from
    the source-domain statistics, shared by the two directions.
    """
    if selection not in ("weighted", "uniform"):
        raise ConfigError(f"unknown selection mode {selection!r}")
    if src_bank.grid != tgt_bank.grid:
        raise DataError("banks were built over different grids")
    for bank in (src_bank, tgt_bank):
        if bank.num_classes != config.num_classes:
            raise DataError(
                f"{bank.domain} bank has {bank.num_classes} classes, config says "
                f"{config.num_classes}"
            )
        if bank.num_groups != config.num_groups:
            raise DataError(
                f"{bank.domain} bank has {bank.num_groups} groups, config says "
                f"{config.num_groups}"
            )
    grid = src_bank.grid
    p_class = class_balance_probs(stats.pixel_counts, config.alpha)

    masked_src, plan_src = confidence_cutout(src, grid, config.gamma, config.num_cut_boxes, rng)
    picks_src = _fill_cut_cells(
        tgt_bank, plan_src, src, p_class, prior, config, grid, rng, selection, sc_from_cut_content
    )
    mixed_src = paste(masked_src, plan_src, picks_src, grid)

    masked_tgt, plan_tgt = confidence_cutout(tgt, grid, config.gamma, config.num_cut_boxes, rng)
    picks_tgt = _fill_cut_cells(
        src_bank, plan_tgt, tgt, p_class, prior, config, grid, rng, selection, sc_from_cut_content
    )
    mixed_tgt = paste(masked_tgt, plan_tgt, picks_tgt, grid)

    return mixed_src, mixed_tgt
