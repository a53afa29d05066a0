"""Parent segmentation algorithms, classical baselines, exhaustive parameter
search and EM label fusion.

Thresholding families keep the largest 4-connected foreground component by
default (single-lesion evaluation); pass ``keep_largest=False`` for the raw
mask. Object polarity is "dark" (object pixels at or below the threshold)
unless stated otherwise.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .features import SeedPoint, compute_window_size, detect_seed_points, strongest_seed
from .images import BinaryMask, GrayImage
from .metrics import jaccard

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

SEGMENTER_KINDS = ("threshold", "region_grow", "srm")


@dataclass(frozen=True)
class SegmenterSpec:
    """A parent algorithm, its parameter grid and the grid member used as default."""

    kind: str
    grid: tuple[float, ...]
    default: float

    def __post_init__(self):
        if self.kind not in SEGMENTER_KINDS:
            raise ValueError(f"unknown segmenter kind {self.kind!r}")
        grid = tuple(float(g) for g in self.grid)
        if not grid:
            raise ValueError("parameter grid must not be empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("parameter grid must be strictly increasing")
        if self.default not in grid:
            raise ValueError("default parameter must be a grid member")
        object.__setattr__(self, "grid", grid)

    @property
    def span(self) -> float:
        return self.grid[-1] - self.grid[0]


def default_spec(kind: str) -> SegmenterSpec:
    if kind == "threshold":
        grid = tuple(i / 255.0 for i in range(256))
        return SegmenterSpec(kind, grid, 128 / 255.0)
    if kind == "region_grow":
        grid = tuple(round(0.01 * i, 2) for i in range(1, 51))
        return SegmenterSpec(kind, grid, 0.17)
    if kind == "srm":
        return SegmenterSpec(kind, (1, 2, 4, 8, 16, 32, 64, 128, 256), 32.0)
    raise ValueError(f"unknown segmenter kind {kind!r}")


@dataclass(frozen=True)
class BestParamRecord:
    """Result of the exhaustive per-image search: the winning grid value and score."""

    image_id: str
    param: float
    score: float

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError("score must lie in [0, 1]")


def _largest_component(raw: np.ndarray) -> np.ndarray:
    labels, n = ndimage.label(raw, structure=_FOUR_CONN)
    if n == 0:
        return raw
    counts = np.bincount(labels.ravel())
    counts[0] = 0
    return labels == int(np.argmax(counts))


def threshold_segment(
    img: GrayImage,
    t: float,
    polarity: str = "dark",
    keep_largest: bool = True,
) -> BinaryMask:
    """Global threshold: dark polarity marks pixels <= t, bright marks >= t."""
    if not (0.0 <= t <= 1.0):
        raise ValueError("threshold must lie in [0, 1]")
    raw = img.data <= t if polarity == "dark" else img.data >= t
    if keep_largest:
        raw = _largest_component(raw)
    return BinaryMask.from_array(raw)


def region_grow(img: GrayImage, seeds: list[SeedPoint], sim: float) -> BinaryMask:
    """4-connected growth from each seed; a pixel joins while its value stays
    within `sim` of the running mean of the grown region. The result is the
    union over seeds."""
    if not seeds:
        raise ValueError("region growing requires at least one seed")
    if not (0.0 <= sim <= 1.0):
        raise ValueError("similarity threshold must lie in [0, 1]")
    data = img.data
    h, w = data.shape
    out = np.zeros((h, w), dtype=bool)
    for seed in seeds:
        visited = np.zeros((h, w), dtype=bool)
        region = np.zeros((h, w), dtype=bool)
        sy, sx = int(seed.y), int(seed.x)
        visited[sy, sx] = True
        region[sy, sx] = True
        total = float(data[sy, sx])
        count = 1
        queue: deque[tuple[int, int]] = deque()
        for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            ny, nx = sy + dy, sx + dx
            if 0 <= ny < h and 0 <= nx < w:
                queue.append((ny, nx))
        while queue:
            y, x = queue.popleft()
            if visited[y, x]:
                continue
            visited[y, x] = True
            if abs(data[y, x] - total / count) <= sim:
                region[y, x] = True
                total += float(data[y, x])
                count += 1
                for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and not visited[ny, nx]:
                        queue.append((ny, nx))
        out |= region
    return BinaryMask.from_array(out)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)

    def find(self, a: int) -> int:
        parent = self.parent
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root


def srm_regions(img: GrayImage, q: float) -> np.ndarray:
    """Statistical region merging partition as an integer label map.

    4-adjacent pixel pairs are visited by increasing intensity difference;
    two regions merge while |mean difference| stays below the statistical
    bound sqrt(b2(R) + b2(R')) with b2(R) = ln(2/delta) / (2 Q |R|) on the
    normalized intensity range, delta = 1 / (6 n^2).
    """
    if q < 1:
        raise ValueError("scale must be at least 1")
    data = img.data
    h, w = data.shape
    n = h * w
    flat = data.ravel()

    idx = np.arange(n).reshape(h, w)
    right = np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], axis=1)
    down = np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], axis=1)
    edges = np.vstack([right, down])
    weights = np.abs(flat[edges[:, 0]] - flat[edges[:, 1]])
    order = np.lexsort((edges[:, 1], edges[:, 0], weights))

    uf = _UnionFind(n)
    total = flat.astype(np.float64).copy()
    size = np.ones(n, dtype=np.int64)
    log_term = math.log(2.0 * 6.0 * n * n)  # ln(2/delta), delta = 1/(6 n^2)
    scale = log_term / (2.0 * float(q))

    for e in order:
        a = uf.find(int(edges[e, 0]))
        b = uf.find(int(edges[e, 1]))
        if a == b:
            continue
        mean_a = total[a] / size[a]
        mean_b = total[b] / size[b]
        bound = math.sqrt(scale / size[a] + scale / size[b])
        if abs(mean_a - mean_b) <= bound:
            uf.parent[b] = a
            total[a] += total[b]
            size[a] += size[b]

    roots = np.array([uf.find(i) for i in range(n)])
    _, labels = np.unique(roots, return_inverse=True)
    return labels.reshape(h, w)


def srm_segment(img: GrayImage, q: float, seed: SeedPoint | None = None) -> BinaryMask:
    """SRM mask: the merged region containing the strongest seed point."""
    labels = srm_regions(img, q)
    if seed is None:
        z = compute_window_size([(img.height, img.width)])
        z = min(z, img.height, img.width)
        seed = strongest_seed(detect_seed_points(img, z))
    target = labels[int(seed.y), int(seed.x)]
    return BinaryMask.from_array(labels == target)


# ---------------------------------------------------------------------------
# classical thresholding baselines
# ---------------------------------------------------------------------------

def _histogram256(img: GrayImage) -> np.ndarray:
    levels = np.clip(np.round(img.data * 255.0).astype(int), 0, 255)
    return np.bincount(levels.ravel(), minlength=256).astype(np.float64)


def _otsu_level(hist: np.ndarray) -> int:
    # maximize between-class variance; a flat maximizing plateau (well
    # separated modes) resolves to its center level
    p = hist / hist.sum()
    levels = np.arange(256)
    mu_total = float((p * levels).sum())
    w0 = 0.0
    mu0 = 0.0
    vals = np.full(256, -1.0)
    for k in range(255):
        w0 += p[k]
        mu0 += p[k] * k
        w1 = 1.0 - w0
        if w0 <= 0 or w1 <= 0:
            continue
        m0 = mu0 / w0
        m1 = (mu_total - mu0) / w1
        vals[k] = w0 * w1 * (m0 - m1) ** 2
    best = vals.max()
    plateau = np.nonzero(vals >= best - 1e-12)[0]
    return int(plateau[len(plateau) // 2])


def _kittler_level(hist: np.ndarray) -> int:
    # minimum-error criterion; class sd floored at half a bin to keep the
    # logs finite on spiky histograms
    p = hist / hist.sum()
    levels = np.arange(256, dtype=np.float64)
    best_k, best_val = 0, np.inf
    floor = 0.5
    for k in range(255):
        p0 = p[: k + 1].sum()
        p1 = 1.0 - p0
        if p0 <= 0 or p1 <= 0:
            continue
        m0 = (p[: k + 1] * levels[: k + 1]).sum() / p0
        m1 = (p[k + 1 :] * levels[k + 1 :]).sum() / p1
        v0 = (p[: k + 1] * (levels[: k + 1] - m0) ** 2).sum() / p0
        v1 = (p[k + 1 :] * (levels[k + 1 :] - m1) ** 2).sum() / p1
        s0 = max(math.sqrt(v0), floor)
        s1 = max(math.sqrt(v1), floor)
        val = 1.0 + 2.0 * (p0 * math.log(s0) + p1 * math.log(s1)) - 2.0 * (
            p0 * math.log(p0) + p1 * math.log(p1)
        )
        if val < best_val:
            best_val, best_k = val, k
    return best_k


def _huang_level(hist: np.ndarray) -> int:
    # fuzzy membership entropy minimization (Huang & Wang)
    p = hist
    levels = np.arange(256, dtype=np.float64)
    nz = np.nonzero(p)[0]
    gmin, gmax = nz[0], nz[-1]
    c = max(gmax - gmin, 1)
    best_k, best_val = int(gmin), np.inf
    for k in range(gmin, gmax):
        w0 = p[: k + 1].sum()
        w1 = p[k + 1 :].sum()
        if w0 <= 0 or w1 <= 0:
            continue
        m0 = (p[: k + 1] * levels[: k + 1]).sum() / w0
        m1 = (p[k + 1 :] * levels[k + 1 :]).sum() / w1
        mu = np.empty(256)
        mu[: k + 1] = 1.0 / (1.0 + np.abs(levels[: k + 1] - m0) / c)
        mu[k + 1 :] = 1.0 / (1.0 + np.abs(levels[k + 1 :] - m1) / c)
        mu = np.clip(mu, 1e-12, 1 - 1e-12)
        shannon = -mu * np.log(mu) - (1 - mu) * np.log(1 - mu)
        val = float((p * shannon).sum())
        if val < best_val:
            best_val, best_k = val, k
    return best_k


def baseline_threshold(
    img: GrayImage,
    method: str,
    polarity: str = "dark",
    keep_largest: bool = True,
    niblack_window: int = 15,
    niblack_k: float = -0.2,
) -> BinaryMask:
    """Classical thresholding baselines: otsu, kittler, huang (global) and
    niblack (local mean + k * local sd)."""
    if method == "niblack":
        size = niblack_window
        mean = ndimage.uniform_filter(img.data, size=size, mode="nearest")
        sq = ndimage.uniform_filter(img.data**2, size=size, mode="nearest")
        sd = np.sqrt(np.maximum(sq - mean**2, 0.0))
        thresh = mean + niblack_k * sd
        raw = img.data <= thresh if polarity == "dark" else img.data >= thresh
        if keep_largest:
            raw = _largest_component(raw)
        return BinaryMask.from_array(raw)

    if img.data.max() == img.data.min():
        raise ValueError(f"{method} threshold undefined on a constant image")
    hist = _histogram256(img)
    if method == "otsu":
        k = _otsu_level(hist)
    elif method == "kittler":
        k = _kittler_level(hist)
    elif method == "huang":
        k = _huang_level(hist)
    else:
        raise ValueError(f"unknown baseline method {method!r}")
    return threshold_segment(img, k / 255.0, polarity=polarity, keep_largest=keep_largest)


# ---------------------------------------------------------------------------
# exhaustive search and fusion
# ---------------------------------------------------------------------------

def apply_segmenter(
    img: GrayImage,
    spec: SegmenterSpec,
    param: float,
    polarity: str = "dark",
    seeds: list[SeedPoint] | None = None,
) -> BinaryMask:
    """Dispatch one parent algorithm at an arbitrary in-range parameter."""
    if spec.kind == "threshold":
        return threshold_segment(img, float(np.clip(param, 0.0, 1.0)), polarity=polarity)
    if seeds is None:
        z = min(compute_window_size([(img.height, img.width)]), img.height, img.width)
        seeds = detect_seed_points(img, z)
    if spec.kind == "region_grow":
        return region_grow(img, [strongest_seed(seeds)], float(np.clip(param, 0.0, 1.0)))
    return srm_segment(img, max(float(param), 1.0), seed=strongest_seed(seeds))


def best_parameter_search(
    img: GrayImage,
    gold: BinaryMask,
    spec: SegmenterSpec,
    image_id: str = "",
    polarity: str = "dark",
    seeds: list[SeedPoint] | None = None,
) -> BestParamRecord:
    """Evaluate the whole grid against the gold mask; ties keep the smallest value."""
    if img.width != gold.width or img.height != gold.height:
        raise ValueError("image and gold mask dimensions differ")
    if spec.kind != "threshold" and seeds is None:
        z = min(compute_window_size([(img.height, img.width)]), img.height, img.width)
        seeds = detect_seed_points(img, z)
    best_param, best_score = spec.grid[0], -1.0
    for p in spec.grid:
        mask = apply_segmenter(img, spec, p, polarity=polarity, seeds=seeds)
        score = jaccard(mask, gold)
        if score > best_score:
            best_param, best_score = p, score
    return BestParamRecord(image_id=image_id, param=best_param, score=best_score)


def staple_fuse(masks: list[BinaryMask], max_iter: int = 100, tol: float = 1e-6) -> BinaryMask:
    """Binary EM consensus over rater masks.

    Estimates per-rater sensitivity p and specificity q together with the
    hidden true segmentation; raters start at p = q = 0.99999 and the
    foreground prior is the mean foreground fraction. Iterates until the
    observed-data log-likelihood moves less than `tol` (or `max_iter`).
    Output pixels are those with posterior >= 0.5.
    """
    if not masks:
        raise ValueError("fusion requires at least one mask")
    h, w = masks[0].height, masks[0].width
    if any(m.height != h or m.width != w for m in masks):
        raise ValueError("all masks must share dimensions")
    d = np.stack([m.data.ravel() for m in masks]).astype(np.float64)  # raters x pixels
    r = d.shape[0]
    lo, hi = 1e-6, 1.0 - 1e-6
    prior = float(np.clip(d.mean(), lo, hi))
    p = np.full(r, 0.99999)
    q = np.full(r, 0.99999)
    last_ll = -np.inf
    weights = np.full(d.shape[1], prior)
    for _ in range(max_iter):
        log_a = (np.log(p) @ d) + (np.log1p(-p) @ (1 - d)) + math.log(prior)
        log_b = (np.log(q) @ (1 - d)) + (np.log1p(-q) @ d) + math.log(1 - prior)
        m = np.maximum(log_a, log_b)
        a = np.exp(log_a - m)
        b = np.exp(log_b - m)
        weights = a / (a + b)
        ll = float((m + np.log(a + b)).sum())
        wsum = weights.sum()
        nsum = (1.0 - weights).sum()
        p = np.clip((d @ weights) / max(wsum, lo), lo, hi)
        q = np.clip(((1 - d) @ (1.0 - weights)) / max(nsum, lo), lo, hi)
        if abs(ll - last_ll) < tol:
            break
        last_ll = ll
    fused = (weights >= 0.5).reshape(h, w)
    return BinaryMask.from_array(fused)
