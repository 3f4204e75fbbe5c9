"""Pseudo labels from probability maps.

Builds a small synthetic probability map, thresholds it two ways (fixed
threshold vs per-class quantile), and renders the resulting label and
confidence planes side by side into demos/output/.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from domainmix import ThresholdPolicy, fit_class_thresholds, pseudo_label

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

rng = np.random.default_rng(0)
K, H, W = 3, 64, 96

# A scene-like map: class 0 on top (sky-ish), class 1 below (ground-ish),
# class 2 as scattered blobs, plus noise so confidence varies.
logits = np.zeros((K, H, W))
logits[0, : H // 2] = 2.0
logits[1, H // 2 :] = 2.0
for _ in range(6):
    y, x = rng.integers(10, H - 10), rng.integers(10, W - 10)
    logits[2, y - 6 : y + 6, x - 6 : x + 6] = 3.0
logits += rng.normal(0, 1.1, size=logits.shape)
exp = np.exp(logits - logits.max(axis=0))
prob = exp / exp.sum(axis=0)

fixed_label, conf = pseudo_label(prob, ThresholdPolicy(mode="fixed", fixed_threshold=0.8))
thresholds = fit_class_thresholds([prob], quantile=0.5)
quant_label, _ = pseudo_label(
    prob, ThresholdPolicy(mode="per-class-quantile", quantile=0.5), thresholds
)

print(f"per-class thresholds at the median, capped at 0.9: {np.round(thresholds, 3)}")
for name, label in (("fixed 0.8", fixed_label), ("median per-class", quant_label)):
    kept = (label != 255).mean()
    print(f"  {name:>18}: {kept:.1%} of pixels keep a label")

fig, axes = plt.subplots(1, 4, figsize=(14, 3.2))
axes[0].imshow(prob.argmax(axis=0), vmin=0, vmax=K, cmap="tab10")
axes[0].set_title("argmax class")
axes[1].imshow(conf, vmin=0, vmax=1, cmap="viridis")
axes[1].set_title("confidence (max prob)")
axes[2].imshow(np.where(fixed_label == 255, np.nan, fixed_label), vmin=0, vmax=K, cmap="tab10")
axes[2].set_title("pseudo label, fixed 0.8")
axes[3].imshow(np.where(quant_label == 255, np.nan, quant_label), vmin=0, vmax=K, cmap="tab10")
axes[3].set_title("pseudo label, median per class")
for ax in axes:
    ax.set_axis_off()
fig.tight_layout()
fig.savefig(OUT / "01_pseudo_labels.png", dpi=110)
print(f"wrote {OUT / '01_pseudo_labels.png'}")
