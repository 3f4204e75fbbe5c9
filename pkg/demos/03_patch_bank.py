"""Anatomy of a patch bank.

Builds a bank over a small two-class dataset and walks through its
structure: one sequence per (cell, class, confidence group), ascending
normalized-confidence order, multi-class patches indexed once per class.
"""

import numpy as np

from domainmix import GridSpec, Sample, build_bank, compute_stats

rng = np.random.default_rng(2)
grid = GridSpec.for_image(32, 24, 4, 3)

samples = []
for i in range(12):
    label = (rng.random((24, 32)) < 0.4).astype(np.uint8)  # classes 0/1
    conf = np.clip(rng.normal(0.7, 0.15, size=(24, 32)), 0, 1).astype(np.float32)
    image = rng.integers(0, 256, size=(24, 32, 3), dtype=np.uint8)
    samples.append(Sample(id=f"scene{i:02d}", image=image, label=label, confidence=conf))

stats = compute_stats(samples, 2)
print("class difficulty (mean confidence):", np.round(stats.difficulty, 3))

bank = build_bank(samples, grid, num_classes=2, num_groups=3, difficulty=stats.difficulty)
print(f"sequences: {len(bank.sequences)} = "
      f"{grid.cols}x{grid.rows} cells x {bank.num_classes} classes x {bank.num_groups} groups")
print(f"total memberships: {bank.total_memberships()} "
      f"(a patch with both classes is indexed under both)")
print(f"distinct patches: {len(bank.distinct_refs())}")

cell = 5
print(f"\ncell {cell}, class 1, groups low -> high (score = conf minus difficulty):")
for g in range(bank.num_groups):
    seq = bank.query(cell, 1, g)
    lo = f"{seq[0].score:+.3f}" if seq else "  -  "
    hi = f"{seq[-1].score:+.3f}" if seq else "  -  "
    print(f"  group {g}: {len(seq):2d} patches, scores {lo} .. {hi}")

patch = bank.patch(bank.query(cell, 1, 2)[-1])
print(f"\nmost confident class-1 patch at cell {cell}: "
      f"{patch.sample_id}, classes present {sorted(patch.classes_present)}, "
      f"crop {patch.label.shape}")
