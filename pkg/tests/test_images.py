import numpy as np
import pytest
from PIL import Image

from scefis.images import (
    BinaryMask,
    GrayImage,
    image_to_png_bytes,
    load_gray,
    load_mask,
    mask_from_png_bytes,
    mask_to_png_bytes,
    save_gray,
    save_mask,
)


def test_grayimage_invariants():
    with pytest.raises(ValueError):
        GrayImage(width=0, height=2, data=np.zeros((2, 0)))
    with pytest.raises(ValueError):
        GrayImage(width=2, height=2, data=np.zeros((3, 2)))
    with pytest.raises(ValueError):
        GrayImage.from_array(np.full((2, 2), 1.5))
    img = GrayImage.from_array(np.full((2, 3), 0.5))
    assert img.width == 3 and img.height == 2
    with pytest.raises(ValueError):
        img.data[0, 0] = 0.1  # frozen buffer


def test_mask_any_nonzero_is_object(tmp_path):
    arr = np.array([[0, 1], [128, 255]], dtype=np.uint8)
    Image.fromarray(arr, mode="L").save(tmp_path / "m.png")
    mask = load_mask(tmp_path / "m.png")
    assert mask.data.tolist() == [[False, True], [True, True]]


def test_mask_written_as_0_255(tmp_path):
    mask = BinaryMask.from_array(np.array([[True, False]]))
    save_mask(mask, tmp_path / "m.png")
    arr = np.asarray(Image.open(tmp_path / "m.png"))
    assert sorted(set(arr.ravel().tolist())) in ([0, 255], [0], [255])


def test_gray_png_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    img = GrayImage.from_array(np.round(rng.random((12, 9)) * 255) / 255)
    save_gray(img, tmp_path / "g.png")
    back = load_gray(tmp_path / "g.png")
    assert np.allclose(back.data, img.data, atol=1 / 510)


def test_pgm_p5_load(tmp_path):
    arr = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
    path = tmp_path / "img.pgm"
    with open(path, "wb") as fh:
        fh.write(b"P5\n4 3\n255\n")
        fh.write(arr.tobytes())
    img = load_gray(path)
    assert img.width == 4 and img.height == 3
    assert np.allclose(img.data, arr / 255.0)


def test_color_png_uses_luminance_weights(tmp_path):
    rgb = np.zeros((1, 3, 3), dtype=np.uint8)
    rgb[0, 0] = (255, 0, 0)
    rgb[0, 1] = (0, 255, 0)
    rgb[0, 2] = (0, 0, 255)
    Image.fromarray(rgb, mode="RGB").save(tmp_path / "c.png")
    img = load_gray(tmp_path / "c.png")
    assert img.data[0, 0] == pytest.approx(0.299)
    assert img.data[0, 1] == pytest.approx(0.587)
    assert img.data[0, 2] == pytest.approx(0.114)


def test_png_bytes_roundtrip():
    rng = np.random.default_rng(1)
    mask = BinaryMask.from_array(rng.random((7, 5)) > 0.5)
    back = mask_from_png_bytes(mask_to_png_bytes(mask))
    assert np.array_equal(back.data, mask.data)
    img = GrayImage.from_array(np.round(rng.random((4, 6)) * 255) / 255)
    blob = image_to_png_bytes(img)
    assert blob[:4] == b"\x89PNG"
