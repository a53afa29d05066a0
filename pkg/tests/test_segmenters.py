import math

import numpy as np
import pytest

from scefis.features import SeedPoint
from scefis.images import BinaryMask, GrayImage
from scefis.metrics import jaccard
from scefis.segmenters import (
    BestParamRecord,
    SegmenterSpec,
    apply_segmenter,
    baseline_threshold,
    best_parameter_search,
    default_spec,
    region_grow,
    srm_regions,
    srm_segment,
    staple_fuse,
    threshold_segment,
)


def img_of(arr):
    return GrayImage.from_array(np.asarray(arr, dtype=np.float64))


def seed_at(x, y, response=1.0):
    return SeedPoint(x=x, y=y, response=response, descriptor=np.zeros(128))


# --- spec objects ---------------------------------------------------------

def test_default_specs_match_documented_grids():
    thr = default_spec("threshold")
    assert len(thr.grid) == 256 and thr.grid[1] == pytest.approx(1 / 255)
    rg = default_spec("region_grow")
    assert 0.12 in rg.grid and rg.default == 0.17
    srm = default_spec("srm")
    assert srm.grid == (1, 2, 4, 8, 16, 32, 64, 128, 256) and srm.default == 32.0


def test_spec_validation():
    with pytest.raises(ValueError):
        SegmenterSpec("threshold", (0.5, 0.2), 0.5)
    with pytest.raises(ValueError):
        SegmenterSpec("threshold", (0.2, 0.5), 0.3)
    with pytest.raises(ValueError):
        BestParamRecord("x", 0.1, 1.5)


# --- thresholding ------------------------------------------------------------

def test_threshold_one_selects_everything():
    rng = np.random.default_rng(0)
    img = img_of(rng.random((10, 10)))
    mask = threshold_segment(img, 1.0, keep_largest=False)
    assert mask.count() == 100


def test_threshold_zero_empty_when_min_positive():
    img = img_of(np.full((5, 5), 0.3))
    assert threshold_segment(img, 0.0).count() == 0


def test_threshold_bimodal_selects_dark_region():
    arr = np.full((8, 8), 0.8)
    arr[2:5, 2:6] = 0.2
    mask = threshold_segment(img_of(arr), 0.5)
    assert np.array_equal(mask.data, arr == 0.2)


def test_threshold_bright_polarity():
    arr = np.full((6, 6), 0.2)
    arr[1:3, 1:3] = 0.9
    mask = threshold_segment(img_of(arr), 0.5, polarity="bright")
    assert np.array_equal(mask.data, arr == 0.9)


def test_threshold_monotone_in_t():
    rng = np.random.default_rng(1)
    img = img_of(rng.random((12, 12)))
    prev = np.zeros((12, 12), dtype=bool)
    for t in np.linspace(0, 1, 11):
        cur = threshold_segment(img, t, keep_largest=False).data
        assert np.all(prev <= cur)
        prev = cur


def test_threshold_keeps_largest_component():
    arr = np.full((10, 10), 0.9)
    arr[1:3, 1:3] = 0.1  # 4 pixels
    arr[5:9, 5:9] = 0.1  # 16 pixels
    mask = threshold_segment(img_of(arr), 0.5)
    assert mask.count() == 16
    full = threshold_segment(img_of(arr), 0.5, keep_largest=False)
    assert full.count() == 20


def test_threshold_out_of_range():
    with pytest.raises(ValueError):
        threshold_segment(img_of(np.zeros((3, 3))), 1.5)


# --- region growing ------------------------------------------------------------

def test_region_grow_sim_one_floods_everything():
    rng = np.random.default_rng(2)
    img = img_of(rng.random((9, 9)))
    mask = region_grow(img, [seed_at(4, 4)], 1.0)
    assert mask.count() == 81


def test_region_grow_sim_zero_keeps_seed_only():
    arr = np.full((5, 5), 0.8)
    arr[2, 2] = 0.3
    mask = region_grow(img_of(arr), [seed_at(2, 2)], 0.0)
    assert mask.count() == 1 and mask.data[2, 2]


def test_region_grow_running_mean_oracle():
    # hand-simulated flood: ring of 0.55 joins, corners at 0.9 stay out
    arr = np.array(
        [
            [0.9, 0.55, 0.9],
            [0.55, 0.5, 0.55],
            [0.9, 0.55, 0.9],
        ]
    )
    mask = region_grow(img_of(arr), [seed_at(1, 1)], 0.1)
    expected = np.array(
        [[False, True, False], [True, True, True], [False, True, False]]
    )
    assert np.array_equal(mask.data, expected)


def test_region_grow_contains_all_seeds():
    rng = np.random.default_rng(3)
    img = img_of(rng.random((10, 10)))
    seeds = [seed_at(1, 1), seed_at(8, 8), seed_at(3, 7)]
    mask = region_grow(img, seeds, 0.05)
    for s in seeds:
        assert mask.data[s.y, s.x]


def test_region_grow_requires_seeds():
    with pytest.raises(ValueError):
        region_grow(img_of(np.zeros((4, 4))), [], 0.2)


# --- statistical region merging ---------------------------------------------

def test_srm_constant_image_single_region():
    img = img_of(np.full((12, 12), 0.6))
    labels = srm_regions(img, 32)
    assert labels.max() == 0
    mask = srm_segment(img, 32, seed=seed_at(3, 3))
    assert mask.count() == 144


def test_srm_two_halves_predicate_oracle():
    arr = np.zeros((16, 16))
    arr[:, 8:] = 0.5
    img = img_of(arr)
    n = 256
    half = 128
    # oracle: the cross-boundary test compares two size-128 flat regions
    bound = lambda q: math.sqrt(math.log(2 * 6 * n * n) / (2 * q) * (1 / half + 1 / half))
    assert 0.5 > bound(1.0)  # predicate fails at every grid scale
    labels = srm_regions(img, 1.0)
    assert labels.max() == 1  # exactly two regions


def test_srm_scale_splits_close_halves():
    arr = np.full((16, 16), 0.4)
    arr[:, 8:] = 0.45
    img = img_of(arr)
    n, half = 256, 128
    bound = lambda q: math.sqrt(math.log(2 * 6 * n * n) / (2 * q) * (2 / half))
    assert 0.05 <= bound(32)  # merges at the default scale
    assert 0.05 > bound(64)  # splits at the next one
    assert srm_regions(img, 32).max() == 0
    assert srm_regions(img, 64).max() == 1


def test_srm_region_count_nondecreasing_in_scale():
    rng = np.random.default_rng(4)
    img = img_of(rng.random((20, 20)))
    counts = [srm_regions(img, q).max() + 1 for q in (1, 2, 4, 8, 16, 32, 64, 128, 256)]
    assert all(a <= b for a, b in zip(counts, counts[1:]))


def test_srm_partition_is_total():
    rng = np.random.default_rng(5)
    img = img_of(rng.random((15, 15)))
    labels = srm_regions(img, 16)
    sizes = np.bincount(labels.ravel())
    assert sizes.sum() == 225 and np.all(sizes > 0)


# --- baselines -----------------------------------------------------------------

def test_otsu_two_level_oracle():
    arr = np.full((10, 10), 0.8)
    arr.ravel()[:60] = 0.2
    img = img_of(arr)

    # exhaustive between-class-variance scan over all 256 candidate levels
    levels = np.clip(np.round(img.data * 255).astype(int), 0, 255).ravel()
    hist = np.bincount(levels, minlength=256) / levels.size
    g = np.arange(256)
    vals = []
    for k in range(256):
        w0 = hist[: k + 1].sum()
        w1 = 1 - w0
        if w0 <= 0 or w1 <= 0:
            vals.append(-1.0)
            continue
        m0 = (hist[: k + 1] * g[: k + 1]).sum() / w0
        m1 = (hist[k + 1 :] * g[k + 1 :]).sum() / w1
        vals.append(w0 * w1 * (m0 - m1) ** 2)
    plateau = [k for k, v in enumerate(vals) if v >= max(vals) - 1e-12]
    chosen = plateau[len(plateau) // 2]
    assert 0.2 < chosen / 255 < 0.8

    mask = baseline_threshold(img, "otsu", keep_largest=False)
    assert np.array_equal(mask.data, arr == 0.2)


def test_otsu_constant_image_errors():
    with pytest.raises(ValueError):
        baseline_threshold(img_of(np.full((6, 6), 0.4)), "otsu")


def test_kittler_and_huang_on_bimodal():
    rng = np.random.default_rng(6)
    arr = np.clip(
        np.where(rng.random((24, 24)) < 0.4, 0.25, 0.75) + rng.normal(0, 0.02, (24, 24)),
        0,
        1,
    )
    img = img_of(arr)
    for method in ("kittler", "huang"):
        mask = baseline_threshold(img, method, keep_largest=False)
        ref = arr <= 0.5
        agree = (mask.data == ref).mean()
        assert agree > 0.95, method


def test_niblack_k_zero_is_local_mean():
    rng = np.random.default_rng(7)
    arr = rng.random((12, 12))
    img = img_of(arr)
    from scipy.ndimage import uniform_filter

    mask = baseline_threshold(img, "niblack", keep_largest=False, niblack_k=0.0)
    mean = uniform_filter(arr, size=15, mode="nearest")
    assert np.array_equal(mask.data, arr <= mean)


def test_unknown_baseline_rejected():
    with pytest.raises(ValueError):
        baseline_threshold(img_of(np.zeros((4, 4))), "sauvola")


# --- exhaustive search -----------------------------------------------------------

def test_best_param_hits_perfect_score():
    rng = np.random.default_rng(8)
    img = img_of(rng.random((16, 16)))
    spec = default_spec("threshold")
    gold = threshold_segment(img, spec.grid[100])
    rec = best_parameter_search(img, gold, spec, image_id="a")
    assert rec.score == 1.0
    assert jaccard(threshold_segment(img, rec.param), gold) == 1.0


def test_best_param_dominates_default():
    rng = np.random.default_rng(9)
    img = img_of(rng.random((16, 16)))
    gold = BinaryMask.from_array(rng.random((16, 16)) > 0.6)
    spec = default_spec("threshold")
    rec = best_parameter_search(img, gold, spec)
    at_default = jaccard(threshold_segment(img, spec.default), gold)
    assert rec.score >= at_default


def test_best_param_matches_bruteforce_regrid():
    rng = np.random.default_rng(10)
    img = img_of(rng.random((12, 12)))
    gold = BinaryMask.from_array(rng.random((12, 12)) > 0.5)
    spec = SegmenterSpec("threshold", tuple(np.linspace(0, 1, 21)), 0.5)
    rec = best_parameter_search(img, gold, spec)
    scores = [jaccard(threshold_segment(img, p), gold) for p in spec.grid]
    best = max(scores)
    first = spec.grid[int(np.argmax(scores))]
    assert rec.score == best and rec.param == first


def test_best_param_dimension_mismatch():
    with pytest.raises(ValueError):
        best_parameter_search(
            img_of(np.zeros((4, 4))),
            BinaryMask.from_array(np.zeros((5, 5), dtype=bool)),
            default_spec("threshold"),
        )


def test_apply_segmenter_dispatch():
    rng = np.random.default_rng(11)
    img = img_of(rng.random((20, 20)))
    seeds = [seed_at(10, 10)]
    for kind in ("threshold", "region_grow", "srm"):
        spec = default_spec(kind)
        mask = apply_segmenter(img, spec, spec.default, seeds=seeds)
        assert mask.width == 20 and mask.height == 20


# --- STAPLE fusion ---------------------------------------------------------------

def staple_oracle(arrays):
    """Step-traced EM with explicit loops, mirroring the documented recipe."""
    r = len(arrays)
    flat = [a.ravel().astype(float) for a in arrays]
    npix = flat[0].size
    lo, hi = 1e-6, 1 - 1e-6
    prior = min(max(sum(a.sum() for a in flat) / (r * npix), lo), hi)
    p = [0.99999] * r
    q = [0.99999] * r
    last = -math.inf
    w = [prior] * npix
    for _ in range(100):
        ll = 0.0
        for i in range(npix):
            a = prior
            b = 1 - prior
            for j in range(r):
                if flat[j][i] > 0.5:
                    a *= p[j]
                    b *= 1 - q[j]
                else:
                    a *= 1 - p[j]
                    b *= q[j]
            w[i] = a / (a + b)
            ll += math.log(a + b)
        wsum = sum(w)
        nsum = npix - wsum
        for j in range(r):
            num_p = sum(w[i] for i in range(npix) if flat[j][i] > 0.5)
            num_q = sum(1 - w[i] for i in range(npix) if flat[j][i] <= 0.5)
            p[j] = min(max(num_p / max(wsum, lo), lo), hi)
            q[j] = min(max(num_q / max(nsum, lo), lo), hi)
        if abs(ll - last) < 1e-6:
            break
        last = ll
    return np.array([x >= 0.5 for x in w]).reshape(arrays[0].shape)


def test_staple_single_mask_identity():
    rng = np.random.default_rng(12)
    m = BinaryMask.from_array(rng.random((8, 8)) > 0.5)
    assert np.array_equal(staple_fuse([m]).data, m.data)


def test_staple_identical_masks_fixed_point():
    rng = np.random.default_rng(13)
    m = BinaryMask.from_array(rng.random((8, 8)) > 0.4)
    fused = staple_fuse([m, m, m])
    assert np.array_equal(fused.data, m.data)


def test_staple_two_vs_one_majority():
    rng = np.random.default_rng(14)
    for _ in range(10):
        base = rng.random((6, 6)) > 0.5
        a = BinaryMask.from_array(base)
        c = BinaryMask.from_array(~base)
        fused = staple_fuse([a, a, c])
        assert np.array_equal(fused.data, base)
        oracle = staple_oracle([base.astype(float), base.astype(float), (~base).astype(float)])
        assert np.array_equal(fused.data, oracle)


def test_staple_matches_oracle_on_random_masks():
    rng = np.random.default_rng(15)
    arrays = [rng.random((7, 7)) > 0.5 for _ in range(4)]
    fused = staple_fuse([BinaryMask.from_array(a) for a in arrays])
    oracle = staple_oracle([a.astype(float) for a in arrays])
    assert np.array_equal(fused.data, oracle)


def test_staple_dimension_mismatch():
    with pytest.raises(ValueError):
        staple_fuse(
            [
                BinaryMask.from_array(np.zeros((3, 3), dtype=bool)),
                BinaryMask.from_array(np.zeros((4, 4), dtype=bool)),
            ]
        )
