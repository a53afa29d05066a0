"""Datasets (images + gold masks) and synthetic speckle-blob generation.

The on-disk layout is `<root>/images/<id>.png` plus `<root>/gold/<id>.png`;
PGM images are accepted too. Synthetic datasets imitate the low-contrast
lesion setting: a dark soft-edged blob on a brighter background under
multiplicative speckle, where the useful threshold tracks the per-image
lesion intensity.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .images import BinaryMask, GrayImage, load_gray, load_mask, save_gray, save_mask

_IMAGE_SUFFIXES = (".png", ".pgm")


@dataclass
class Dataset:
    """Ordered image ids with their grayscale images and gold masks."""

    ids: tuple[str, ...]
    images: dict[str, GrayImage]
    golds: dict[str, BinaryMask]

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("image ids must be unique")
        for i in self.ids:
            img = self.images[i]
            gold = self.golds[i]
            if gold.width != img.width or gold.height != img.height:
                raise ValueError(f"gold mask for {i!r} does not match its image")

    def __len__(self) -> int:
        return len(self.ids)

    def dims(self) -> list[tuple[int, int]]:
        return [(self.images[i].height, self.images[i].width) for i in self.ids]


def load_dataset(root: str | Path) -> Dataset:
    root = Path(root)
    img_dir = root / "images"
    gold_dir = root / "gold"
    if not img_dir.is_dir():
        raise FileNotFoundError(f"no images directory under {root}")
    ids = []
    images = {}
    golds = {}
    for path in sorted(img_dir.iterdir()):
        if path.suffix.lower() not in _IMAGE_SUFFIXES:
            continue
        image_id = path.stem
        gold_path = None
        for suffix in _IMAGE_SUFFIXES:
            cand = gold_dir / f"{image_id}{suffix}"
            if cand.exists():
                gold_path = cand
                break
        if gold_path is None:
            raise FileNotFoundError(f"no gold mask for image {image_id!r}")
        ids.append(image_id)
        images[image_id] = load_gray(path)
        golds[image_id] = load_mask(gold_path)
    if not ids:
        raise ValueError(f"no images found under {img_dir}")
    return Dataset(ids=tuple(ids), images=images, golds=golds)


def save_dataset(ds: Dataset, root: str | Path) -> None:
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "gold").mkdir(parents=True, exist_ok=True)
    for i in ds.ids:
        save_gray(ds.images[i], root / "images" / f"{i}.png")
        save_mask(ds.golds[i], root / "gold" / f"{i}.png")


def make_splits(
    ids: tuple[str, ...],
    runs: int,
    seed: int,
    train_fraction: float = 0.85,
) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """Seeded random train/test splits, one per run. A 35-image dataset uses
    the 30/5 split; anything else splits by fraction with at least one image
    on each side."""
    n = len(ids)
    if n < 2:
        raise ValueError("need at least two images to split")
    if n == 35:
        n_train = 30
    else:
        n_train = int(round(train_fraction * n))
        n_train = min(max(n_train, 1), n - 1)
    splits = []
    for r in range(runs):
        rng = np.random.default_rng([seed, r])
        order = rng.permutation(n)
        train = tuple(sorted(ids[i] for i in order[:n_train]))
        test = tuple(sorted(ids[i] for i in order[n_train:]))
        splits.append((train, test))
    return splits


# ---------------------------------------------------------------------------
# synthetic speckle-blob data
# ---------------------------------------------------------------------------

def speckle_blob_image(
    rng: np.random.Generator,
    size: tuple[int, int] = (96, 96),
    lesion_level: float | None = None,
    bg_level: float | None = None,
    speckle_looks: float = 20.0,
) -> tuple[GrayImage, BinaryMask, float]:
    """One dark elliptical blob on a speckled background.

    Returns (image, gold mask, lesion level). The lesion level is drawn
    uniformly from [0.10, 0.50] when not given and the background rides a
    fixed contrast band above it, so the best threshold varies close to
    affinely with the lesion level across a dataset while no single fixed
    threshold fits all images.
    """
    h, w = size
    if lesion_level is None:
        lesion_level = float(rng.uniform(0.10, 0.50))
    if bg_level is None:
        bg_level = min(lesion_level + float(rng.uniform(0.33, 0.45)), 0.95)
    cy = rng.uniform(0.32 * h, 0.68 * h)
    cx = rng.uniform(0.32 * w, 0.68 * w)
    ry = rng.uniform(0.12 * h, 0.22 * h)
    rx = rng.uniform(0.12 * w, 0.22 * w)
    theta = rng.uniform(0, np.pi)
    yy, xx = np.mgrid[0:h, 0:w]
    yr = (yy - cy) * np.cos(theta) - (xx - cx) * np.sin(theta)
    xr = (yy - cy) * np.sin(theta) + (xx - cx) * np.cos(theta)
    inside = (yr / ry) ** 2 + (xr / rx) ** 2 <= 1.0
    soft = gaussian_filter(inside.astype(float), 1.5)
    clean = bg_level + (lesion_level - bg_level) * soft
    speckle = rng.gamma(shape=speckle_looks, scale=1.0 / speckle_looks, size=(h, w))
    img = np.clip(clean * speckle, 0.0, 1.0)
    return GrayImage.from_array(img), BinaryMask.from_array(inside), lesion_level


def synthetic_dataset(
    n_images: int,
    seed: int = 0,
    size: tuple[int, int] = (96, 96),
) -> Dataset:
    rng = np.random.default_rng(seed)
    ids = []
    images = {}
    golds = {}
    for k in range(n_images):
        image_id = f"im{k:03d}"
        img, gold, _ = speckle_blob_image(rng, size=size)
        ids.append(image_id)
        images[image_id] = img
        golds[image_id] = gold
    return Dataset(ids=tuple(ids), images=images, golds=golds)
