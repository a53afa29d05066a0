"""Grayscale images and binary masks, plus PNG/PGM loading and saving.

Pixel values are normalized to [0, 1] at load time regardless of the
source bit depth, so thresholds stay comparable across inputs. Masks are
binary: 0 is background, any nonzero source value is object; on disk they
are written as 0/255 8-bit PNG.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

# ITU-R 601-2 luminance weights used for color inputs.
_LUMA = np.array([0.299, 0.587, 0.114])


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GrayImage:
    """Single-channel image; ``data`` is a (height, width) float64 array in [0, 1]."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be at least 1x1")
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.shape != (self.height, self.width):
            raise ValueError(
                f"data shape {arr.shape} does not match {self.height}x{self.width}"
            )
        if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(arr))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "GrayImage":
        arr = np.asarray(arr, dtype=np.float64)
        return cls(width=arr.shape[1], height=arr.shape[0], data=arr)


@dataclass(frozen=True)
class BinaryMask:
    """Binary labeling of an image; True marks object pixels."""

    width: int
    height: int
    data: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("mask dimensions must be at least 1x1")
        arr = np.asarray(self.data)
        if arr.shape != (self.height, self.width):
            raise ValueError(
                f"data shape {arr.shape} does not match {self.height}x{self.width}"
            )
        object.__setattr__(self, "data", _freeze(arr.astype(bool)))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "BinaryMask":
        arr = np.asarray(arr)
        return cls(width=arr.shape[1], height=arr.shape[0], data=arr)

    def count(self) -> int:
        return int(self.data.sum())

    def same_shape(self, other: "BinaryMask | GrayImage") -> bool:
        return self.width == other.width and self.height == other.height


def _pil_to_unit(img: Image.Image) -> np.ndarray:
    if img.mode in ("P", "RGBA", "LA"):
        img = img.convert("RGB")
    if img.mode == "RGB":
        rgb = np.asarray(img, dtype=np.float64) / 255.0
        return rgb @ _LUMA
    if img.mode == "L":
        return np.asarray(img, dtype=np.float64) / 255.0
    if img.mode in ("I", "I;16", "I;16B"):
        arr = np.asarray(img, dtype=np.float64)
        peak = arr.max()
        scale = 65535.0 if peak > 255 else 255.0
        return arr / scale
    if img.mode == "F":
        arr = np.asarray(img, dtype=np.float64)
        return np.clip(arr, 0.0, 1.0)
    return np.asarray(img.convert("L"), dtype=np.float64) / 255.0


def load_gray(path: str | Path) -> GrayImage:
    """Load an 8-bit grayscale PNG or binary PGM (P5); color inputs use luminance."""
    with Image.open(path) as img:
        arr = _pil_to_unit(img)
    return GrayImage.from_array(np.clip(arr, 0.0, 1.0))


def save_gray(image: GrayImage, path: str | Path) -> None:
    arr = np.round(image.data * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def load_mask(path: str | Path) -> BinaryMask:
    """Load a mask: 0 is background, any nonzero value is object."""
    with Image.open(path) as img:
        if img.mode not in ("L", "1"):
            img = img.convert("L")
        arr = np.asarray(img)
    return BinaryMask.from_array(arr != 0)


def save_mask(mask: BinaryMask, path: str | Path) -> None:
    arr = np.where(mask.data, 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def mask_to_png_bytes(mask: BinaryMask) -> bytes:
    import io

    buf = io.BytesIO()
    arr = np.where(mask.data, 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def mask_from_png_bytes(blob: bytes) -> BinaryMask:
    import io

    with Image.open(io.BytesIO(blob)) as img:
        if img.mode not in ("L", "1"):
            img = img.convert("L")
        arr = np.asarray(img)
    return BinaryMask.from_array(arr != 0)


def image_to_png_bytes(image: GrayImage) -> bytes:
    import io

    buf = io.BytesIO()
    arr = np.round(image.data * 255.0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()
