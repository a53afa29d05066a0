"""Window sizing, seed-point detection and the 108-column texture feature extractor.

The feature vector layout is a fixed on-disk contract; `column_names()` is the
authoritative order. For one seed point the extractor emits:

  [0:32)    8 scalar statistics (mean, median, sd, covariance, mode, range,
            min, max) of each of: the raw window, its 2-D orthonormal DCT,
            its single-level Haar approximation band, and its gradient
            magnitude (source-major).
  [32:40)   descriptor statistics: mean, median, sd, covariance, range, min,
            max, zero count. The min (and the range derived from it) uses the
            smallest nonzero descriptor entry.
  [40:104)  co-occurrence contrast, correlation, energy and homogeneity at
            0/45/90/135 degrees for each of the four sources above
            (source-major, then angle, then property).
  [104:108) the same four co-occurrence properties of the descriptor, read as
            a 1x128 row, at 0 degrees only.

Total 32 + 8 + 64 + 4 = 108 columns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import dctn
from scipy.ndimage import gaussian_filter, maximum_filter, minimum_filter

from .images import GrayImage

N_FEATURES = 108
N_BLOCK_ROWS = 8
DESCRIPTOR_SIZE = 128
MIN_WINDOW = 8

_WINDOW_STATS = ("mean", "median", "sd", "covariance", "mode", "range", "min", "max")
_DESC_STATS = ("mean", "median", "sd", "covariance", "range", "min", "max", "zero_count")
_SOURCES = ("win", "dct", "haar", "grad")
_GLCM_PROPS = ("contrast", "correlation", "energy", "homogeneity")
_GLCM_ANGLES = (0, 45, 90, 135)
# (row, col) step per angle, matching the usual co-occurrence convention
_GLCM_OFFSETS = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}
_GLCM_LEVELS = 8

# statistic rows of a per-image block, in fixed order
BLOCK_ROW_STATS = ("mean", "median", "mode", "sd", "covariance", "range", "min", "max")

_DOG_SIGMA0 = 1.6
_DOG_LEVELS = 6
_DOG_CONTRAST = 0.002
_MAX_OCTAVES = 4
_MAX_CANDIDATES = 3000


@dataclass(frozen=True)
class SeedPoint:
    """Keypoint with detector strength and a 128-bin orientation descriptor."""

    x: int
    y: int
    response: float
    descriptor: np.ndarray

    def __post_init__(self):
        if self.response < 0:
            raise ValueError("seed response must be non-negative")
        d = np.asarray(self.descriptor, dtype=np.float64)
        if d.shape != (DESCRIPTOR_SIZE,):
            raise ValueError(f"descriptor must have length {DESCRIPTOR_SIZE}")
        if d.min() < 0:
            raise ValueError("descriptor entries must be non-negative")
        object.__setattr__(self, "descriptor", d)


@dataclass(frozen=True)
class SelfConfig:
    """Learned front-end configuration: window size, kept columns, column norms.

    ``normalization`` holds one (mean, sd) pair per selected column, computed
    on training rows only.
    """

    window_z: int
    n_total_features: int
    selected_columns: tuple[int, ...]
    normalization: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.window_z < MIN_WINDOW:
            raise ValueError(f"window size must be at least {MIN_WINDOW}")
        if self.n_total_features != N_FEATURES:
            raise ValueError(f"raw feature count must be {N_FEATURES}")
        cols = tuple(int(c) for c in self.selected_columns)
        if not cols:
            raise ValueError("selected column set must not be empty")
        if any(c < 0 or c >= self.n_total_features for c in cols):
            raise ValueError("selected column out of range")
        if any(b <= a for a, b in zip(cols, cols[1:])):
            raise ValueError("selected columns must be strictly increasing")
        if len(self.normalization) != len(cols):
            raise ValueError("one (mean, sd) pair required per selected column")
        object.__setattr__(self, "selected_columns", cols)
        object.__setattr__(
            self,
            "normalization",
            tuple((float(m), float(s)) for m, s in self.normalization),
        )


@dataclass(frozen=True)
class ImageFeatureBlock:
    """8 x 108 statistic rows summarizing one image's per-seed feature matrix."""

    image_id: str
    rows: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.rows, dtype=np.float64)
        if arr.shape != (N_BLOCK_ROWS, N_FEATURES):
            raise ValueError(f"block must be {N_BLOCK_ROWS}x{N_FEATURES}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("block contains non-finite entries")
        object.__setattr__(self, "rows", arr)


def compute_window_size(dims: list[tuple[int, int]]) -> int:
    """Square window side: round(0.1 * max(median rows, median cols)), floor 8."""
    if not dims:
        raise ValueError("need at least one image size")
    if any(r <= 0 or c <= 0 for r, c in dims):
        raise ValueError("image sizes must be positive")
    med_r = float(np.median([r for r, _ in dims]))
    med_c = float(np.median([c for _, c in dims]))
    z = int(math.floor(0.1 * max(med_r, med_c) + 0.5))
    return max(z, MIN_WINDOW)


# ---------------------------------------------------------------------------
# seed detection
# ---------------------------------------------------------------------------

def _dog_candidates(data: np.ndarray) -> list[tuple[int, int, float, float]]:
    """Scale-space extrema as (x, y, sigma, response), strongest response first."""
    found: dict[tuple[int, int], tuple[int, int, float, float]] = {}
    base = data
    k = 2.0 ** (1.0 / 3.0)
    octave = 0
    while min(base.shape) >= 8 and octave < _MAX_OCTAVES:
        sigmas = [_DOG_SIGMA0 * k**i for i in range(_DOG_LEVELS)]
        gauss = np.stack([gaussian_filter(base, s, mode="nearest") for s in sigmas])
        dog = gauss[1:] - gauss[:-1]
        is_max = dog == maximum_filter(dog, size=3, mode="constant", cval=-np.inf)
        is_min = dog == minimum_filter(dog, size=3, mode="constant", cval=np.inf)
        peaks = (is_max | is_min) & (np.abs(dog) > _DOG_CONTRAST)
        peaks[0] = peaks[-1] = False
        peaks[:, 0, :] = peaks[:, -1, :] = False
        peaks[:, :, 0] = peaks[:, :, -1] = False
        for layer, row, col in zip(*np.nonzero(peaks)):
            x = int(col) << octave
            y = int(row) << octave
            resp = float(abs(dog[layer, row, col]))
            sigma = sigmas[layer] * (1 << octave)
            prev = found.get((x, y))
            if prev is None or resp > prev[3]:
                found[(x, y)] = (x, y, sigma, resp)
        base = gauss[3][::2, ::2]
        octave += 1
    cands = sorted(found.values(), key=lambda c: (-c[3], c[1], c[0]))
    return cands[:_MAX_CANDIDATES]


def _grid_points(width: int, height: int, z: int) -> list[tuple[int, int]]:
    xs = list(range(z // 2, width, z))
    ys = list(range(z // 2, height, z))
    return [(x, y) for y in ys for x in xs]


class _GradientCache:
    """Per-image gradient fields of Gaussian-smoothed copies, keyed by sigma."""

    def __init__(self, data: np.ndarray):
        self.data = data
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def at(self, sigma: float) -> tuple[np.ndarray, np.ndarray]:
        key = round(sigma, 6)
        if key not in self._cache:
            sm = gaussian_filter(self.data, sigma, mode="nearest")
            gy, gx = np.gradient(sm)
            mag = np.hypot(gx, gy)
            ori = np.arctan2(gy, gx)
            self._cache[key] = (mag, ori)
        return self._cache[key]


def _raw_descriptor(cache: _GradientCache, x: int, y: int, sigma: float) -> np.ndarray:
    """4x4 spatial grid of 8-bin orientation histograms around (x, y), unnormalized."""
    mag, ori = cache.at(sigma)
    h, w = mag.shape
    step = max(1.0, 0.75 * sigma)
    hist = np.zeros((4, 4, 8))
    sig_w = 4.0 * step
    for j in range(16):
        for i in range(16):
            dx = (i - 7.5) * step
            dy = (j - 7.5) * step
            px = int(round(x + dx))
            py = int(round(y + dy))
            if px < 0 or px >= w or py < 0 or py >= h:
                continue
            wgt = math.exp(-(dx * dx + dy * dy) / (2.0 * sig_w * sig_w))
            ob = int((ori[py, px] + math.pi) / (2 * math.pi) * 8) % 8
            hist[j // 4, i // 4, ob] += wgt * mag[py, px]
    return hist.ravel()


def _finish_descriptor(raw: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        return np.zeros(DESCRIPTOR_SIZE)
    d = np.minimum(raw / norm, 0.2)
    norm = float(np.linalg.norm(d))
    return d / norm if norm > 0 else np.zeros(DESCRIPTOR_SIZE)


def detect_seed_points(
    img: GrayImage, z: int, sort_by: str = "response"
) -> list[SeedPoint]:
    """Scale-space extrema thinned so kept points differ by >= z in x or in y.

    Candidates are visited strongest-first ("response", the default) or by
    descending raw descriptor energy ("descriptor_norm"). If fewer than 4
    survive the separation rule, a uniform grid spaced z apart is used
    instead.
    """
    if img.width < z or img.height < z:
        raise ValueError(f"image must be at least {z}x{z}")
    if sort_by not in ("response", "descriptor_norm"):
        raise ValueError("sort_by must be 'response' or 'descriptor_norm'")
    cache = _GradientCache(img.data)
    cands = _dog_candidates(img.data)

    raw_by_idx: dict[int, np.ndarray] = {}
    if sort_by == "descriptor_norm" and cands:
        keyed = []
        for idx, (x, y, sigma, resp) in enumerate(cands):
            raw = _raw_descriptor(cache, x, y, sigma)
            raw_by_idx[idx] = raw
            keyed.append((float(np.linalg.norm(raw)), idx))
        keyed.sort(key=lambda t: (-t[0], t[1]))
        cands = [cands[i] for _, i in keyed]
        raw_by_idx = {new: raw_by_idx[old] for new, (_, old) in enumerate(keyed)}

    kept: list[tuple[int, int, float, float, int]] = []
    for idx, (x, y, sigma, resp) in enumerate(cands):
        if all(abs(x - kx) >= z or abs(y - ky) >= z for kx, ky, _, _, _ in kept):
            kept.append((x, y, sigma, resp, idx))

    if len(kept) < 4:
        grid_sigma = max(z / 4.0, 1.0)
        kept = [(x, y, grid_sigma, 0.0, -1) for x, y in _grid_points(img.width, img.height, z)]

    seeds = []
    for x, y, sigma, resp, idx in kept:
        raw = raw_by_idx.get(idx)
        if raw is None:
            raw = _raw_descriptor(cache, x, y, sigma)
        seeds.append(SeedPoint(x=x, y=y, response=resp, descriptor=_finish_descriptor(raw)))
    return seeds


def strongest_seed(seeds: list[SeedPoint]) -> SeedPoint:
    if not seeds:
        raise ValueError("no seed points")
    return max(seeds, key=lambda s: s.response)


# ---------------------------------------------------------------------------
# scalar statistics and transforms
# ---------------------------------------------------------------------------

def _mode_binned(flat: np.ndarray, lo: float, hi: float, nbins: int = 64) -> float:
    """Center of the most populated of `nbins` uniform bins over [lo, hi]."""
    if hi == lo:
        return float(lo)
    idx = np.clip(((flat - lo) / (hi - lo) * nbins).astype(int), 0, nbins - 1)
    counts = np.bincount(idx, minlength=nbins)
    b = int(np.argmax(counts))
    return float(lo + (b + 0.5) * (hi - lo) / nbins)


def _window_stat_vector(arr: np.ndarray) -> list[float]:
    flat = arr.ravel()
    lo = float(flat.min())
    hi = float(flat.max())
    if hi == lo:
        # exact zeros; summation noise must not leak into a flat window
        return [lo, lo, 0.0, 0.0, lo, 0.0, lo, hi]
    return [
        float(flat.mean()),
        float(np.median(flat)),
        float(flat.std()),
        float(flat.var()),
        _mode_binned(flat, lo, hi),
        hi - lo,
        lo,
        hi,
    ]


def _haar_approximation(arr: np.ndarray) -> np.ndarray:
    """Single-level Haar LL band; odd edges are replicated before pairing."""
    h, w = arr.shape
    if h % 2:
        arr = np.vstack([arr, arr[-1:]])
    if w % 2:
        arr = np.hstack([arr, arr[:, -1:]])
    return (arr[0::2, 0::2] + arr[0::2, 1::2] + arr[1::2, 0::2] + arr[1::2, 1::2]) / 2.0


def _gradient_magnitude(arr: np.ndarray) -> np.ndarray:
    """Central differences with replicated borders."""
    pad = np.pad(arr, 1, mode="edge")
    gx = (pad[1:-1, 2:] - pad[1:-1, :-2]) / 2.0
    gy = (pad[2:, 1:-1] - pad[:-2, 1:-1]) / 2.0
    return np.hypot(gx, gy)


def _quantize(arr: np.ndarray, levels: int = _GLCM_LEVELS) -> np.ndarray:
    """Map to integer gray levels. At most `levels` distinct values survive;
    a window with few distinct values keeps them as consecutive levels, so the
    adjacency structure of near-binary windows is preserved."""
    flat = arr.ravel()
    uniq = np.unique(flat)
    if uniq.size <= levels:
        return np.searchsorted(uniq, arr)
    lo, hi = float(flat.min()), float(flat.max())
    q = ((arr - lo) / (hi - lo) * levels).astype(int)
    return np.clip(q, 0, levels - 1)


def _glcm(q: np.ndarray, dy: int, dx: int, levels: int = _GLCM_LEVELS) -> np.ndarray:
    h, w = q.shape
    ys = slice(max(0, -dy), min(h, h - dy))
    xs = slice(max(0, -dx), min(w, w - dx))
    a = q[ys, xs]
    b = q[max(0, dy) : h + min(0, dy), max(0, dx) : w + min(0, dx)]
    counts = np.zeros((levels, levels), dtype=np.float64)
    if a.size:
        np.add.at(counts, (a.ravel(), b.ravel()), 1.0)
        counts += counts.T.copy()
    total = counts.sum()
    if total == 0:
        counts[0, 0] = 1.0
        total = 1.0
    return counts / total


def _glcm_props(p: np.ndarray) -> list[float]:
    levels = p.shape[0]
    i = np.arange(levels)[:, None]
    j = np.arange(levels)[None, :]
    contrast = float(((i - j) ** 2 * p).sum())
    pi = p.sum(axis=1)
    pj = p.sum(axis=0)
    mu_i = float((np.arange(levels) * pi).sum())
    mu_j = float((np.arange(levels) * pj).sum())
    var_i = float(((np.arange(levels) - mu_i) ** 2 * pi).sum())
    var_j = float(((np.arange(levels) - mu_j) ** 2 * pj).sum())
    if var_i <= 0 or var_j <= 0:
        correlation = 0.0
    else:
        cov = float(((i - mu_i) * (j - mu_j) * p).sum())
        correlation = cov / math.sqrt(var_i * var_j)
    energy = float((p**2).sum())
    homogeneity = float((p / (1.0 + np.abs(i - j))).sum())
    return [contrast, correlation, energy, homogeneity]


def _glcm_features(arr: np.ndarray, angles=_GLCM_ANGLES) -> list[float]:
    q = _quantize(arr)
    out: list[float] = []
    for angle in angles:
        dy, dx = _GLCM_OFFSETS[angle]
        out.extend(_glcm_props(_glcm(q, dy, dx)))
    return out


# ---------------------------------------------------------------------------
# the 108-column extractor
# ---------------------------------------------------------------------------

def _clamped_window(img: GrayImage, x: int, y: int, z: int) -> np.ndarray:
    wz = min(z, img.width)
    hz = min(z, img.height)
    x0 = int(np.clip(x - z // 2, 0, img.width - wz))
    y0 = int(np.clip(y - z // 2, 0, img.height - hz))
    return img.data[y0 : y0 + hz, x0 : x0 + wz]


def extract_features(img: GrayImage, p: SeedPoint, z: int) -> np.ndarray:
    """The 108-feature vector of the z x z window centered at seed p."""
    win = _clamped_window(img, p.x, p.y, z)
    if win.shape[0] < 2 or win.shape[1] < 2:
        raise ValueError("feature window must be at least 2x2 pixels")
    sources = [
        win,
        dctn(win, type=2, norm="ortho"),
        _haar_approximation(win),
        _gradient_magnitude(win),
    ]

    feats: list[float] = []
    for src in sources:
        feats.extend(_window_stat_vector(src))

    d = p.descriptor
    nz = d[d > 0]
    dmin = float(nz.min()) if nz.size else 0.0
    dmax = float(d.max())
    feats.extend(
        [
            float(d.mean()),
            float(np.median(d)),
            float(d.std()),
            float(d.var()),
            dmax - dmin,
            dmin,
            dmax,
            float((d == 0).sum()),
        ]
    )

    for src in sources:
        feats.extend(_glcm_features(src))
    feats.extend(_glcm_features(d.reshape(1, DESCRIPTOR_SIZE), angles=(0,)))

    vec = np.asarray(feats, dtype=np.float64)
    assert vec.shape == (N_FEATURES,)
    # degenerate statistics must not leak NaN/inf into the matrices
    return np.nan_to_num(vec, nan=0.0, posinf=0.0, neginf=0.0)


def image_feature_block(
    img: GrayImage,
    z: int,
    image_id: str = "",
    sort_by: str = "response",
    seeds: list[SeedPoint] | None = None,
) -> ImageFeatureBlock:
    """Per-seed features reduced column-wise to the 8 fixed statistic rows."""
    if seeds is None:
        seeds = detect_seed_points(img, z, sort_by=sort_by)
    f1 = np.stack([extract_features(img, s, z) for s in seeds])
    lo = f1.min(axis=0)
    hi = f1.max(axis=0)
    mode_row = np.array(
        [_mode_binned(f1[:, c], lo[c], hi[c]) for c in range(N_FEATURES)]
    )
    rows = np.stack(
        [
            f1.mean(axis=0),
            np.median(f1, axis=0),
            mode_row,
            f1.std(axis=0),
            f1.var(axis=0),
            hi - lo,
            lo,
            hi,
        ]
    )
    return ImageFeatureBlock(image_id=image_id, rows=rows)


def stack_blocks(blocks: list[ImageFeatureBlock]) -> tuple[np.ndarray, list[str]]:
    """Stack per-image blocks into the dataset matrix (8 rows per image)."""
    if not blocks:
        raise ValueError("no feature blocks to stack")
    mat = np.vstack([b.rows for b in blocks])
    ids = [b.image_id for b in blocks for _ in range(N_BLOCK_ROWS)]
    return mat, ids


def column_names() -> list[str]:
    names = [f"{src}_{stat}" for src in _SOURCES for stat in _WINDOW_STATS]
    names += [f"desc_{stat}" for stat in _DESC_STATS]
    names += [
        f"{src}_glcm{angle}_{prop}"
        for src in _SOURCES
        for angle in _GLCM_ANGLES
        for prop in _GLCM_PROPS
    ]
    names += [f"desc_glcm0_{prop}" for prop in _GLCM_PROPS]
    assert len(names) == N_FEATURES
    return names


def write_feature_csv(path, mat: np.ndarray, ids: list[str]) -> None:
    """Persist a stacked feature matrix; image_id first, then the statistic row
    name, then the 108 contract columns."""
    if mat.shape[0] != len(ids):
        raise ValueError("one image id required per matrix row")
    header = ["image_id", "row_stat"] + column_names()
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r, image_id in enumerate(ids):
            stat = BLOCK_ROW_STATS[r % N_BLOCK_ROWS]
            vals = ",".join(repr(float(v)) for v in mat[r])
            fh.write(f"{image_id},{stat},{vals}\n")


def read_feature_csv(path) -> tuple[np.ndarray, list[str]]:
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        if header[:2] != ["image_id", "row_stat"]:
            raise ValueError("not a feature matrix CSV")
        rows = []
        ids = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            ids.append(parts[0])
            rows.append([float(v) for v in parts[2:]])
    return np.asarray(rows, dtype=np.float64), ids
