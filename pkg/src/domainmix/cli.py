"""Command-line surface tying the pipeline together.

Subcommands: stats, prior, build-bank, pseudo-label, mix, report.
Exit codes: 0 success, 2 config error, 3 data error, 4 internal error.

The mix command is driven by a TOML config file; command-line flags
override file values and built-in defaults (4x3 grid, gamma 0.2,
alpha 2, 3 confidence groups with probabilities 0.1/0.3/0.6, 4 cut
boxes).  ``--print-config`` echoes the fully resolved configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .bank import build_bank, load_bank, save_bank
from .dataset import list_sample_ids, load_dataset, save_conf_png, save_label_png
from .errors import ConfigError, DataError, DomainMixError
from .pipeline import run_mix
from .pseudolabel import ThresholdPolicy, fit_class_thresholds, pseudo_label, read_prob_map
from .reports import write_report
from .stats import (
    DEFAULT_BANDWIDTH,
    DEFAULT_RESOLUTION,
    build_spatial_prior,
    compute_stats,
    load_prior,
    load_stats,
    save_prior,
    save_stats,
)
from .types import GridSpec, MixConfig

log = logging.getLogger(__name__)

CONFIG_DEFAULTS = {
    "seed": 0,
    "count": 1,
    "selection": "weighted",
    "sc_from_cut_content": False,
    "grid": {"cols": 4, "rows": 3},
    "mix": {
        "gamma": 0.2,
        "alpha": 2.0,
        "num_groups": 3,
        "group_probs": [0.1, 0.3, 0.6],
        "num_cut_boxes": 4,
    },
    "paths": {},
}

_KNOWN_KEYS = {
    "": {"seed", "count", "selection", "sc_from_cut_content", "grid", "mix", "paths"},
    "grid": {"cols", "rows"},
    "mix": {"num_classes", "gamma", "alpha", "num_groups", "group_probs", "num_cut_boxes"},
    "paths": {"source", "target", "source_bank", "target_bank", "stats", "prior", "out"},
}


def _merge_config(base: dict, update: dict, section: str = "") -> dict:
    known = _KNOWN_KEYS.get(section)
    merged = dict(base)
    for key, value in update.items():
        if known is not None and key not in known:
            where = f"[{section}]" if section else "top level"
            raise ConfigError(f"unknown config key {key!r} at {where}")
        if isinstance(value, dict):
            merged[key] = _merge_config(base.get(key, {}), value, key)
        else:
            merged[key] = value
    return merged


def load_mix_config(path: Path | None, overrides: dict) -> dict:
    doc = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: invalid TOML: {exc}")
    resolved = _merge_config(CONFIG_DEFAULTS, doc)
    resolved = _merge_config(resolved, overrides)
    return resolved


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise ConfigError(f"cannot format config value {value!r}")


def format_toml(doc: dict) -> str:
    lines = []
    sections = []
    for key, value in doc.items():
        if isinstance(value, dict):
            sections.append((key, value))
        else:
            lines.append(f"{key} = {_toml_value(value)}")
    for name, body in sections:
        lines.append("")
        lines.append(f"[{name}]")
        for key, value in body.items():
            lines.append(f"{key} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"


def _mix_config_from_resolved(resolved: dict) -> MixConfig:
    mix = resolved["mix"]
    if "num_classes" not in mix:
        raise ConfigError("config is missing [mix] num_classes")
    return MixConfig(
        num_classes=int(mix["num_classes"]),
        gamma=float(mix["gamma"]),
        alpha=float(mix["alpha"]),
        num_groups=int(mix["num_groups"]),
        group_probs=tuple(mix["group_probs"]),
        num_cut_boxes=int(mix["num_cut_boxes"]),
        seed=int(resolved["seed"]),
    )


def _required_path(resolved: dict, key: str) -> Path:
    value = resolved["paths"].get(key)
    if not value:
        raise ConfigError(f"config is missing [paths] {key}")
    return Path(value)


# --- subcommands ------------------------------------------------------------


def cmd_stats(args) -> int:
    samples = load_dataset(args.dataset, args.num_classes)
    if not samples:
        raise DataError(f"{args.dataset}: no samples")
    stats = compute_stats(samples, args.num_classes)
    save_stats(args.out, stats)
    print(f"wrote {args.out} ({len(samples)} samples, "
          f"{int(stats.pixel_counts.sum())} labeled pixels)")
    return 0


def cmd_prior(args) -> int:
    samples = load_dataset(args.dataset, args.num_classes)
    prior = build_spatial_prior(
        [s.label for s in samples],
        args.num_classes,
        bandwidth=args.bandwidth,
        resolution=args.resolution,
    )
    save_prior(args.out, prior)
    empty = int(prior.empty_classes().sum())
    print(f"wrote {args.out} (resolution {args.resolution}, {empty} empty class maps)")
    return 0


def cmd_build_bank(args) -> int:
    stats = load_stats(args.stats)
    num_classes = args.num_classes or stats.num_classes
    samples = load_dataset(args.dataset, num_classes)
    if not samples:
        raise DataError(f"{args.dataset}: no samples")
    grid = GridSpec.for_image(samples[0].width, samples[0].height, args.cols, args.rows)
    bank = build_bank(
        samples, grid, num_classes, args.num_groups, stats.difficulty, domain=args.domain
    )
    save_bank(bank, args.out)
    print(
        f"wrote {args.out}: {len(bank.sequences)} sequences, "
        f"{bank.total_memberships()} memberships, "
        f"{len(bank.distinct_refs())} distinct patches"
    )
    return 0


def cmd_pseudo_label(args) -> int:
    dataset = Path(args.dataset)
    probs_dir = dataset / "probs"
    if not probs_dir.is_dir():
        raise DataError(f"{dataset}: missing probs/ directory")
    ids = sorted(p.stem for p in probs_dir.glob("*.bin"))
    if not ids:
        raise DataError(f"{probs_dir}: no .bin probability maps")
    policy = ThresholdPolicy(
        mode=args.mode, fixed_threshold=args.threshold, quantile=args.quantile
    )
    thresholds = None
    if policy.mode == "per-class-quantile":
        thresholds = fit_class_thresholds(
            (read_prob_map(probs_dir / f"{sid}.bin") for sid in ids), policy.quantile
        )
    out = Path(args.out or dataset)
    (out / "labels").mkdir(parents=True, exist_ok=True)
    (out / "conf").mkdir(parents=True, exist_ok=True)
    for sid in ids:
        prob = read_prob_map(probs_dir / f"{sid}.bin")
        if prob.shape[0] != args.num_classes:
            raise DataError(
                f"{sid}: probability map has {prob.shape[0]} planes, expected {args.num_classes}"
            )
        label, conf = pseudo_label(prob, policy, thresholds)
        save_label_png(out / "labels" / f"{sid}.png", label)
        save_conf_png(out / "conf" / f"{sid}.png", conf)
    print(f"pseudo-labeled {len(ids)} samples into {out}")
    return 0


def cmd_mix(args) -> int:
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.count is not None:
        overrides["count"] = args.count
    if args.selection is not None:
        overrides["selection"] = args.selection
    if args.out is not None:
        overrides.setdefault("paths", {})["out"] = str(args.out)
    resolved = load_mix_config(args.config, overrides)

    if args.print_config:
        sys.stdout.write(format_toml(resolved))
        return 0

    config = _mix_config_from_resolved(resolved)
    src_dir = _required_path(resolved, "source")
    tgt_dir = _required_path(resolved, "target")
    src_bank = load_bank(_required_path(resolved, "source_bank"))
    tgt_bank = load_bank(_required_path(resolved, "target_bank"))
    stats = load_stats(_required_path(resolved, "stats"))
    prior = load_prior(_required_path(resolved, "prior"))
    out_dir = _required_path(resolved, "out")

    cols, rows = int(resolved["grid"]["cols"]), int(resolved["grid"]["rows"])
    if (src_bank.grid.cols, src_bank.grid.rows) != (cols, rows):
        raise ConfigError(
            f"config grid {cols}x{rows} does not match bank grid "
            f"{src_bank.grid.cols}x{src_bank.grid.rows}"
        )

    manifest = run_mix(
        src_dir,
        tgt_dir,
        src_bank,
        tgt_bank,
        stats,
        prior,
        config,
        out_dir,
        count=int(resolved["count"]),
        workers=args.workers,
        selection=resolved["selection"],
        sc_from_cut_content=bool(resolved["sc_from_cut_content"]),
    )
    print(f"wrote {manifest} ({2 * int(resolved['count'])} mixed samples)")
    return 0


def cmd_report(args) -> int:
    summary = write_report(
        args.manifest,
        args.stats,
        args.out,
        baseline_path=args.baseline,
        source_dir=args.source,
        target_dir=args.target,
        composites=args.composites,
    )
    if summary["records"] == 0:
        print("warning: empty manifest, wrote empty report", file=sys.stderr)
    else:
        print(f"wrote report to {args.out} ({summary['records']} samples)")
    return 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="domainmix",
        description="Cross-domain cut-and-paste synthesis of segmentation training data.",
    )
    parser.add_argument("--version", action="version", version=f"domainmix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="class pixel counts and difficulty of a dataset")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--num-classes", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("prior", help="class-wise spatial prior maps from labels")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--num-classes", type=int, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--bandwidth", type=float, default=DEFAULT_BANDWIDTH)
    p.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION)
    p.set_defaults(func=cmd_prior)

    p = sub.add_parser("build-bank", help="build and persist a domain patch bank")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--stats", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--cols", type=int, default=4)
    p.add_argument("--rows", type=int, default=3)
    p.add_argument("--num-classes", type=int, default=None, help="defaults to the stats file")
    p.add_argument("--num-groups", type=int, default=3)
    p.add_argument("--domain", choices=("source", "target"), default="source")
    p.set_defaults(func=cmd_build_bank)

    p = sub.add_parser("pseudo-label", help="threshold probs/<id>.bin into labels + conf")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--num-classes", type=int, required=True)
    p.add_argument("--mode", choices=("fixed", "per-class-quantile"), default="fixed")
    p.add_argument("--threshold", type=float, default=0.9)
    p.add_argument("--quantile", type=float, default=0.5)
    p.add_argument("--out", type=Path, default=None, help="defaults to the dataset directory")
    p.set_defaults(func=cmd_pseudo_label)

    p = sub.add_parser("mix", help="emit mixed samples from two datasets + banks")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--selection", choices=("weighted", "uniform"), default=None)
    p.add_argument("--print-config", action="store_true")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("report", help="supervision histogram + composites from a manifest")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--stats", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--baseline", type=Path, default=None)
    p.add_argument("--source", type=Path, default=None)
    p.add_argument("--target", type=Path, default=None)
    p.add_argument("--composites", type=int, default=0)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DomainMixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception as exc:  # invariant violation: loud, exit 4
        import traceback

        traceback.print_exc()
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
