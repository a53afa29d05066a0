import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from scefis.features import (
    BLOCK_ROW_STATS,
    N_FEATURES,
    SeedPoint,
    SelfConfig,
    column_names,
    compute_window_size,
    detect_seed_points,
    extract_features,
    image_feature_block,
    read_feature_csv,
    stack_blocks,
    strongest_seed,
    write_feature_csv,
)
from scefis.images import GrayImage

COLS = column_names()


def img_of(arr):
    return GrayImage.from_array(np.asarray(arr, dtype=np.float64))


def dummy_seed(x, y, desc=None):
    if desc is None:
        desc = np.zeros(128)
    return SeedPoint(x=x, y=y, response=0.0, descriptor=desc)


# --- window size ------------------------------------------------------------

def test_window_size_from_medians():
    dims = [(400, 600), (400, 600), (400, 600)]
    assert compute_window_size(dims) == 60


def test_window_size_single_image():
    assert compute_window_size([(230, 390)]) == 39


def test_window_size_clamped():
    assert compute_window_size([(50, 60)]) == 8


def test_window_size_even_count_uses_central_mean():
    # medians 350 and 500 -> z = 50
    assert compute_window_size([(300, 400), (400, 600)]) == 50


def test_window_size_empty_rejected():
    with pytest.raises(ValueError):
        compute_window_size([])


# --- seed detection ----------------------------------------------------------

def test_constant_image_falls_back_to_grid():
    img = img_of(np.full((40, 56), 0.5))
    seeds = detect_seed_points(img, 8)
    xs = sorted({s.x for s in seeds})
    ys = sorted({s.y for s in seeds})
    assert xs == list(range(4, 56, 8))
    assert ys == list(range(4, 40, 8))
    assert all(s.response == 0.0 for s in seeds)


def test_seeds_respect_separation():
    rng = np.random.default_rng(5)
    img = img_of(rng.random((64, 64)))
    z = 8
    seeds = detect_seed_points(img, z)
    for i, a in enumerate(seeds):
        for b in seeds[i + 1 :]:
            assert abs(a.x - b.x) >= z or abs(a.y - b.y) >= z


def test_two_near_extrema_keep_one():
    # two bright blobs closer than z in both axes collapse to a single seed;
    # far-away blobs keep the survivor count above the grid-fallback limit
    yy, xx = np.mgrid[0:96, 0:96]
    blob = lambda cx, cy: 0.5 * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * 3.0**2))
    arr = 0.1 + blob(22, 24) + blob(26, 25)
    for cx, cy in [(70, 20), (20, 70), (70, 70), (48, 48)]:
        arr = arr + blob(cx, cy)
    img = img_of(np.clip(arr, 0, 1))
    seeds = detect_seed_points(img, 12)
    assert any(s.response > 0 for s in seeds)  # not the grid fallback
    # a box of Chebyshev diameter < z admits at most one surviving point
    near = [s for s in seeds if abs(s.x - 24) <= 5 and abs(s.y - 24) <= 5]
    assert len(near) == 1


def test_blob_seed_near_reference_dog_location():
    # independent single-scale DoG oracle: peak of a smoothed difference
    yy, xx = np.mgrid[0:64, 0:64]
    arr = 0.2 + 0.6 * np.exp(-((xx - 31) ** 2 + (yy - 29) ** 2) / (2 * 4.0**2))
    ref = gaussian_filter(arr, 4.0) - gaussian_filter(arr, 6.0)
    oy, ox = np.unravel_index(np.argmax(np.abs(ref)), ref.shape)
    img = img_of(np.clip(arr, 0, 1))
    z = 8
    seeds = detect_seed_points(img, z)
    assert any(abs(s.x - ox) <= z / 2 and abs(s.y - oy) <= z / 2 for s in seeds)


def test_image_smaller_than_window_rejected():
    with pytest.raises(ValueError):
        detect_seed_points(img_of(np.zeros((6, 6))), 8)


def test_descriptor_norm_sorting_flag():
    rng = np.random.default_rng(11)
    img = img_of(rng.random((48, 48)))
    seeds = detect_seed_points(img, 8, sort_by="descriptor_norm")
    assert len(seeds) >= 1
    with pytest.raises(ValueError):
        detect_seed_points(img, 8, sort_by="bogus")


def test_strongest_seed():
    seeds = [dummy_seed(1, 1), SeedPoint(2, 2, 3.0, np.zeros(128))]
    assert strongest_seed(seeds).x == 2


# --- feature vector ----------------------------------------------------------

def test_vector_length_is_108():
    rng = np.random.default_rng(0)
    img = img_of(rng.random((32, 32)))
    vec = extract_features(img, dummy_seed(16, 16), 8)
    assert vec.shape == (N_FEATURES,)
    assert np.all(np.isfinite(vec))


def test_constant_window_statistics():
    img = img_of(np.full((24, 24), 0.4))
    vec = extract_features(img, dummy_seed(12, 12), 8)
    get = lambda name: vec[COLS.index(name)]
    assert get("win_sd") == 0.0
    assert get("win_range") == 0.0
    assert get("win_mean") == pytest.approx(0.4)
    assert get("win_mode") == pytest.approx(0.4)
    assert get("win_glcm0_energy") == 1.0
    assert get("win_glcm0_contrast") == 0.0
    assert get("win_glcm0_correlation") == 0.0


def test_checkerboard_glcm_oracle():
    # hand enumeration: every horizontal pair joins the two levels, so after
    # symmetric accumulation P(0,1) = P(1,0) = 1/2, contrast = 1, energy = 1/2
    board = np.indices((4, 4)).sum(axis=0) % 2
    img = img_of(board.astype(float))
    vec = extract_features(img, dummy_seed(2, 2), 4)
    get = lambda name: vec[COLS.index(name)]
    assert get("win_glcm0_contrast") == pytest.approx(1.0)
    assert get("win_glcm0_energy") == pytest.approx(0.5)
    assert get("win_glcm0_correlation") == pytest.approx(-1.0)
    assert get("win_glcm0_homogeneity") == pytest.approx(0.5)


def test_descriptor_min_is_smallest_nonzero():
    desc = np.zeros(128)
    desc[10] = 0.25
    desc[11] = 0.5
    rng = np.random.default_rng(1)
    img = img_of(rng.random((32, 32)))
    vec = extract_features(img, dummy_seed(16, 16, desc), 8)
    get = lambda name: vec[COLS.index(name)]
    assert get("desc_min") == 0.25
    assert get("desc_max") == 0.5
    assert get("desc_range") == 0.25
    assert get("desc_zero_count") == 126


def test_extract_is_deterministic():
    rng = np.random.default_rng(2)
    img = img_of(rng.random((40, 40)))
    desc = np.abs(rng.random(128))
    a = extract_features(img, dummy_seed(20, 18, desc), 10)
    b = extract_features(img, dummy_seed(20, 18, desc), 10)
    assert np.array_equal(a, b)


def test_translation_consistency():
    rng = np.random.default_rng(3)
    patch = rng.random((30, 30))
    base = np.full((60, 60), 0.5)
    base[10:40, 10:40] = patch
    shifted = np.full((60, 60), 0.5)
    shifted[15:45, 18:48] = patch
    desc = np.abs(rng.random(128))
    va = extract_features(img_of(base), dummy_seed(25, 25, desc), 8)
    vb = extract_features(img_of(shifted), dummy_seed(33, 30, desc), 8)
    assert np.allclose(va, vb, atol=1e-9)


def test_glcm_ranges_on_random_windows():
    rng = np.random.default_rng(4)
    for _ in range(20):
        img = img_of(rng.random((24, 24)))
        vec = extract_features(img, dummy_seed(12, 12), 8)
        for name, v in zip(COLS, vec):
            if name.endswith("_energy") or name.endswith("_homogeneity"):
                assert 0.0 < v <= 1.0 + 1e-12, name
            if name.endswith("_contrast"):
                assert v >= 0.0, name


def test_window_clamped_at_borders():
    rng = np.random.default_rng(6)
    img = img_of(rng.random((20, 20)))
    vec = extract_features(img, dummy_seed(0, 0), 8)
    assert vec.shape == (N_FEATURES,)


# --- per-image blocks ----------------------------------------------------------

def test_block_shape_and_order():
    rng = np.random.default_rng(7)
    img = img_of(rng.random((48, 48)))
    block = image_feature_block(img, 8, image_id="a")
    assert block.rows.shape == (8, N_FEATURES)
    assert BLOCK_ROW_STATS == ("mean", "median", "mode", "sd", "covariance", "range", "min", "max")


def test_block_single_seed_degenerates():
    # an 8x8 image admits exactly one grid point, so every row echoes it
    rng = np.random.default_rng(8)
    img = img_of(rng.random((8, 8)))
    block = image_feature_block(img, 8)
    rows = block.rows
    assert np.allclose(rows[0], rows[1])  # mean == median
    assert np.allclose(rows[3], 0.0)  # sd
    assert np.allclose(rows[5], 0.0)  # range


def test_block_min_mean_max_ordering():
    rng = np.random.default_rng(9)
    img = img_of(rng.random((64, 64)))
    rows = image_feature_block(img, 8).rows
    assert np.all(rows[6] <= rows[0] + 1e-12)
    assert np.all(rows[0] <= rows[7] + 1e-12)


def test_stack_blocks_and_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(10)
    blocks = [
        image_feature_block(img_of(rng.random((32, 32))), 8, image_id=f"im{i}")
        for i in range(3)
    ]
    mat, ids = stack_blocks(blocks)
    assert mat.shape == (24, N_FEATURES)
    assert ids[:8] == ["im0"] * 8
    path = tmp_path / "f3.csv"
    write_feature_csv(path, mat, ids)
    back, back_ids = read_feature_csv(path)
    assert back_ids == ids
    assert np.array_equal(back, mat)


def test_selfconfig_invariants():
    cfg = SelfConfig(
        window_z=8,
        n_total_features=108,
        selected_columns=(1, 5, 9),
        normalization=((0.0, 1.0),) * 3,
    )
    assert cfg.selected_columns == (1, 5, 9)
    with pytest.raises(ValueError):
        SelfConfig(8, 108, (5, 1), ((0, 1), (0, 1)))
    with pytest.raises(ValueError):
        SelfConfig(8, 108, (), ())
    with pytest.raises(ValueError):
        SelfConfig(4, 108, (1,), ((0, 1),))
