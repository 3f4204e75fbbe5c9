"""The whole pipeline through the command-line surface.

Writes two toy datasets to a scratch directory, then drives
stats -> prior -> build-bank -> mix -> report exactly as a shell user
would, finishing with the class-balance comparison against a
uniform-selection baseline run.
"""

import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from domainmix import IGNORE, GridSpec, Sample
from domainmix.dataset import save_sample

grid = GridSpec.for_image(48, 36, 4, 3)
K = 3
SHARES = [0.88, 0.10, 0.02]


def write_domain(root, tag, seed):
    rng = np.random.default_rng(seed)
    for i in range(16):
        cells = rng.choice(K, size=grid.num_cells, p=SHARES)
        label = np.empty((36, 48), dtype=np.uint8)
        for cell, cls in enumerate(cells):
            rows, cols = grid.cell_rect(cell).slices()
            label[rows, cols] = cls
        for cell in rng.choice(grid.num_cells, size=3, replace=False):
            rows, cols = grid.cell_rect(int(cell)).slices()
            label[rows, cols] = IGNORE
        conf = np.full((36, 48), 0.8, dtype=np.float32)
        image = rng.integers(0, 256, size=(36, 48, 3), dtype=np.uint8)
        save_sample(root, Sample(id=f"{tag}{i:03d}", image=image, label=label, confidence=conf))


def run(*args):
    cmd = [sys.executable, "-m", "domainmix", *map(str, args)]
    print("+", " ".join(cmd[2:]))
    subprocess.run(cmd, check=True)


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    write_domain(tmp / "src", "src", seed=10)
    write_domain(tmp / "tgt", "tgt", seed=11)

    run("stats", "--dataset", tmp / "src", "--num-classes", K, "--out", tmp / "stats.json")
    run("prior", "--dataset", tmp / "src", "--num-classes", K, "--out", tmp / "prior.json")
    run("build-bank", "--dataset", tmp / "src", "--stats", tmp / "stats.json",
        "--out", tmp / "bank_src", "--domain", "source")
    run("build-bank", "--dataset", tmp / "tgt", "--stats", tmp / "stats.json",
        "--out", tmp / "bank_tgt", "--domain", "target")

    (tmp / "mix.toml").write_text(f"""\
seed = 7
count = 50

[mix]
num_classes = {K}

[paths]
source = "{tmp / 'src'}"
target = "{tmp / 'tgt'}"
source_bank = "{tmp / 'bank_src'}"
target_bank = "{tmp / 'bank_tgt'}"
stats = "{tmp / 'stats.json'}"
prior = "{tmp / 'prior.json'}"
""")
    run("mix", "--config", tmp / "mix.toml", "--out", tmp / "mixed")
    run("mix", "--config", tmp / "mix.toml", "--out", tmp / "mixed_uniform",
        "--selection", "uniform")
    run("report", "--manifest", tmp / "mixed" / "manifest.jsonl",
        "--stats", tmp / "stats.json", "--out", tmp / "report",
        "--baseline", tmp / "mixed_uniform" / "manifest.jsonl",
        "--source", tmp / "src", "--target", tmp / "tgt", "--composites", "3")

    print("\nreport.csv:")
    print((tmp / "report" / "report.csv").read_text())
    out = Path(__file__).parent / "output"
    out.mkdir(exist_ok=True)
    (out / "05_report.csv").write_text((tmp / "report" / "report.csv").read_text())
    (out / "05_histogram.png").write_bytes((tmp / "report" / "histogram.png").read_bytes())
    print(f"copied report artifacts into {out}")
