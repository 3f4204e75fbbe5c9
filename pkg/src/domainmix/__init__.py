"""domainmix: cross-domain cut-and-paste synthesis of segmentation data.

Given two labeled (or pseudo-labeled) datasets, the engine builds
confidence-stratified patch banks per domain, cuts low-confidence grid
cells out of samples, and fills the holes with patches drawn from the
other domain, weighting class balance, spatial continuity, and
confidence jointly.  Everything is seeded and replayable from the
emitted manifests.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, DomainMixError, InternalError
from .types import IGNORE, GridSpec, MixConfig, Rect, Sample, validate_sample
from .seeds import derive_rng
from .pseudolabel import (
    ThresholdPolicy,
    fit_class_thresholds,
    pseudo_label,
    read_prob_map,
    read_prob_map_pngs,
    write_prob_map,
    write_prob_map_pngs,
)
from .stats import (
    ClassStats,
    SpatialPrior,
    build_spatial_prior,
    class_balance_probs,
    class_difficulty,
    class_pixel_counts,
    compute_stats,
    load_prior,
    load_stats,
    save_prior,
    save_stats,
)
from .bank import (
    Patch,
    PatchBank,
    PatchRef,
    build_bank,
    divide,
    load_bank,
    normalized_confidence,
    query,
    save_bank,
)
from .cut import CutPlan, confidence_cutout, random_cutout, uncertain_ratio
from .mix import (
    MixedSample,
    Provenance,
    Selection,
    SelectionWeights,
    joint_selection_weights,
    mix_pair,
    paste,
    select_patch,
    select_patch_uniform,
    spatial_continuity_probs,
)
from .pipeline import read_manifest, run_mix
from .reports import pasted_class_counts, write_report

__all__ = [
    "IGNORE",
    "ClassStats",
    "ConfigError",
    "CutPlan",
    "DataError",
    "DomainMixError",
    "GridSpec",
    "InternalError",
    "MixConfig",
    "MixedSample",
    "Patch",
    "PatchBank",
    "PatchRef",
    "Provenance",
    "Rect",
    "Sample",
    "Selection",
    "SelectionWeights",
    "SpatialPrior",
    "ThresholdPolicy",
    "build_bank",
    "build_spatial_prior",
    "class_balance_probs",
    "class_difficulty",
    "class_pixel_counts",
    "compute_stats",
    "confidence_cutout",
    "derive_rng",
    "divide",
    "fit_class_thresholds",
    "joint_selection_weights",
    "load_bank",
    "load_prior",
    "load_stats",
    "mix_pair",
    "normalized_confidence",
    "pasted_class_counts",
    "paste",
    "pseudo_label",
    "query",
    "random_cutout",
    "read_manifest",
    "read_prob_map",
    "read_prob_map_pngs",
    "run_mix",
    "save_bank",
    "save_prior",
    "save_stats",
    "select_patch",
    "select_patch_uniform",
    "spatial_continuity_probs",
    "uncertain_ratio",
    "validate_sample",
    "write_prob_map",
    "write_prob_map_pngs",
    "write_report",
]
