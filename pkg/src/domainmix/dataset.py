"""Dataset directory I/O.

Layout of a dataset directory::

    images/<id>.png   RGB, 8-bit
    labels/<id>.png   indexed (palette) PNG, one byte per pixel; the
                      palette index IS the class id, 255 = ignore
    conf/<id>.png     optional, 16-bit grayscale; confidence = value / 65535
    probs/<id>.bin    optional raw probability planes (see pseudolabel.py)

Sample ids are the filename stems; the three planes of one sample share
the same stem.  Encoding then decoding a sample through this module is
bit-exact (confidences must already lie on the 1/65535 grid, which holds
for anything previously loaded from disk).
"""

from __future__ import annotations

import functools
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import DataError
from .types import Sample, validate_sample


@functools.lru_cache(maxsize=1)
def label_palette() -> bytes:
    """768-byte RGB palette with a distinct color per index.

    Classic bit-spread construction: bit j of each color channel comes
    from bit 3j+channel of the index, so the index -> color map is
    injective and invertible.
    """
    pal = bytearray()
    for index in range(256):
        r = g = b = 0
        v = index
        for j in range(8):
            r |= ((v >> 0) & 1) << (7 - j)
            g |= ((v >> 1) & 1) << (7 - j)
            b |= ((v >> 2) & 1) << (7 - j)
            v >>= 3
        pal.extend((r, g, b))
    return bytes(pal)


def save_image_png(path: Path, image: np.ndarray) -> None:
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise DataError(f"image must be (H, W, 3) uint8, got {image.shape} {image.dtype}")
    PILImage.fromarray(image, mode="RGB").save(path, format="PNG")


def load_image_png(path: Path) -> np.ndarray:
    with PILImage.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return arr


def save_label_png(path: Path, label: np.ndarray) -> None:
    if label.ndim != 2 or label.dtype != np.uint8:
        raise DataError(f"label must be (H, W) uint8, got {label.shape} {label.dtype}")
    im = PILImage.fromarray(label, mode="P")
    im.putpalette(label_palette())
    im.save(path, format="PNG")


def load_label_png(path: Path) -> np.ndarray:
    with PILImage.open(path) as im:
        if im.mode not in ("P", "L"):
            raise DataError(f"{path}: label PNG must be indexed or 8-bit grayscale, got {im.mode}")
        arr = np.asarray(im, dtype=np.uint8)
    return arr


def save_conf_png(path: Path, conf: np.ndarray) -> None:
    if conf.ndim != 2:
        raise DataError(f"confidence must be (H, W), got shape {conf.shape}")
    quantized = np.round(np.asarray(conf, dtype=np.float64) * 65535.0).astype(np.uint16)
    PILImage.fromarray(quantized).save(path, format="PNG")  # mode I;16


def load_conf_png(path: Path) -> np.ndarray:
    with PILImage.open(path) as im:
        arr = np.asarray(im)
    if arr.dtype == np.int32:  # Pillow reads some 16-bit PNGs as mode I
        arr = arr.astype(np.uint16)
    if arr.dtype != np.uint16:
        raise DataError(f"{path}: confidence PNG must be 16-bit grayscale, got {arr.dtype}")
    return (arr.astype(np.float32)) / np.float32(65535.0)


def list_sample_ids(root: Path) -> list[str]:
    images = Path(root) / "images"
    if not images.is_dir():
        raise DataError(f"{root}: missing images/ directory")
    return sorted(p.stem for p in images.glob("*.png"))


def save_sample(root: Path, sample: Sample, with_conf: bool = True) -> None:
    root = Path(root)
    for sub in ("images", "labels") + (("conf",) if with_conf else ()):
        (root / sub).mkdir(parents=True, exist_ok=True)
    save_image_png(root / "images" / f"{sample.id}.png", sample.image)
    save_label_png(root / "labels" / f"{sample.id}.png", sample.label)
    if with_conf:
        save_conf_png(root / "conf" / f"{sample.id}.png", sample.confidence)


def load_sample(root: Path, sample_id: str, num_classes: int | None = None) -> Sample:
    """Load one sample; missing conf plane defaults to confidence 1.0."""
    root = Path(root)
    image = load_image_png(root / "images" / f"{sample_id}.png")
    label = load_label_png(root / "labels" / f"{sample_id}.png")
    conf_path = root / "conf" / f"{sample_id}.png"
    conf = load_conf_png(conf_path) if conf_path.exists() else None
    sample = Sample(id=sample_id, image=image, label=label, confidence=conf)
    if num_classes is not None:
        problems = validate_sample(sample, num_classes)
        if problems:
            raise DataError(f"{root}/{sample_id}: " + "; ".join(problems))
    return sample


def load_dataset(root: Path, num_classes: int | None = None) -> list[Sample]:
    """All samples of a dataset directory, sorted by id."""
    return [load_sample(root, sid, num_classes) for sid in list_sample_ids(root)]
