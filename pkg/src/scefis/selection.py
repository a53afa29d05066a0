"""Correlation pruning, five unsupervised feature selectors and the ensemble vote.

The selection chain prunes near-duplicate columns (|r| >= 0.99), derives the
target feature count from a second pruning pass at 0.90, runs the five
selectors plus the correlation pass itself, keeps features chosen by at least
three of the six, and prunes the survivors once more at 0.90.

All selectors standardize columns internally and break ties by lowest column
index, so the whole chain is deterministic for a fixed input matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SELECTOR_METHODS = (
    "correlation",
    "feature_similarity",
    "laplacian",
    "spectral",
    "multi_cluster",
    "greedy",
)

_RIDGE_ALPHA = 0.01
_EPS = 1e-12


@dataclass(frozen=True)
class SelectorResult:
    """Columns chosen by one method, as indices into its input matrix."""

    method: str
    columns: tuple[int, ...]
    n_columns: int

    def __post_init__(self):
        if self.method not in SELECTOR_METHODS:
            raise ValueError(f"unknown selection method {self.method!r}")
        cols = tuple(int(c) for c in self.columns)
        if len(set(cols)) != len(cols):
            raise ValueError("selected columns must be unique")
        if any(c < 0 or c >= self.n_columns for c in cols):
            raise ValueError("selected column out of range")
        object.__setattr__(self, "columns", cols)


@dataclass(frozen=True)
class SelectionTrace:
    """Every stage of the selection chain, with indices in original coordinates.

    ``per_method`` results are local to the strict-pruned matrix they were run
    on; all other index lists refer to columns of the original input.
    """

    n_input: int
    kept_strict: tuple[int, ...]
    target_count: int
    per_method: tuple[SelectorResult, ...]
    vote_survivors: tuple[int, ...]
    final: tuple[int, ...]

    @property
    def stage_widths(self) -> tuple[int, int, int, int]:
        """(after strict pruning, selection target, after vote, final)."""
        return (
            len(self.kept_strict),
            self.target_count,
            len(self.vote_survivors),
            len(self.final),
        )


def _standardized(f: np.ndarray) -> np.ndarray:
    mu = f.mean(axis=0)
    sd = f.std(axis=0)
    out = np.zeros_like(f, dtype=np.float64)
    nz = sd > 0
    out[:, nz] = (f[:, nz] - mu[nz]) / sd[nz]
    return out


def _abs_corr(a: np.ndarray, b: np.ndarray) -> float:
    """|Pearson r| with the degenerate conventions used by the pruning scan:
    two zero-variance columns count as perfectly correlated, one as uncorrelated."""
    if np.array_equal(a, b):
        return 1.0
    va = a.std()
    vb = b.std()
    if va == 0.0 and vb == 0.0:
        return 1.0
    if va == 0.0 or vb == 0.0:
        return 0.0
    ca = a - a.mean()
    cb = b - b.mean()
    r = float(ca @ cb) / (np.linalg.norm(ca) * np.linalg.norm(cb))
    return min(abs(r), 1.0)


def drop_correlated(f: np.ndarray, tau: float) -> list[int]:
    """Left-to-right scan keeping a column iff |r| < tau against every kept one."""
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 2 or f.shape[0] < 2:
        raise ValueError("correlation pruning needs a matrix with at least 2 rows")
    if not (0.0 < tau <= 1.0):
        raise ValueError("tau must lie in (0, 1]")
    kept: list[int] = []
    for c in range(f.shape[1]):
        if all(_abs_corr(f[:, c], f[:, k]) < tau for k in kept):
            kept.append(c)
    return kept


# ---------------------------------------------------------------------------
# graph machinery shared by the graph-based selectors
# ---------------------------------------------------------------------------

def _knn_similarity(rows: np.ndarray, knn: int | None = None) -> np.ndarray:
    """Symmetric k-NN Gaussian similarity over samples; bandwidth is the mean
    pairwise Euclidean distance."""
    n = rows.shape[0]
    k = min(5, n - 1) if knn is None else min(knn, n - 1)
    diff = rows[:, None, :] - rows[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    off = dist[~np.eye(n, dtype=bool)]
    bw = float(off.mean()) if off.size and off.mean() > 0 else 1.0
    sim = np.exp(-(dist**2) / (2.0 * bw * bw))
    mask = np.zeros((n, n), dtype=bool)
    dist_noself = dist.copy()
    np.fill_diagonal(dist_noself, np.inf)
    order = np.argsort(dist_noself, axis=1, kind="stable")
    for i in range(n):
        mask[i, order[i, :k]] = True
    mask |= mask.T
    w = np.where(mask, sim, 0.0)
    np.fill_diagonal(w, 0.0)
    return w


def _laplacian_scores(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    d = w.sum(axis=1)
    lap = np.diag(d) - w
    dtot = d.sum()
    scores = np.full(x.shape[1], np.inf)
    for j in range(x.shape[1]):
        f = x[:, j]
        ft = f - (f @ d) / dtot if dtot > 0 else f
        den = float(ft @ (d * ft))
        if den > _EPS:
            scores[j] = float(ft @ lap @ ft) / den
    return scores


def _normalized_laplacian(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = w.sum(axis=1)
    inv_sqrt = np.where(d > 0, 1.0 / np.sqrt(np.maximum(d, _EPS)), 0.0)
    lap = np.eye(len(d)) - (inv_sqrt[:, None] * w) * inv_sqrt[None, :]
    return lap, d


def _spectral_scores(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Separability ranking against the normalized Laplacian spectrum; the
    trivial component is projected out of each feature before scoring."""
    lap, d = _normalized_laplacian(w)
    sqrt_d = np.sqrt(np.maximum(d, 0.0))
    xi1 = sqrt_d / np.linalg.norm(sqrt_d) if sqrt_d.any() else sqrt_d
    scores = np.full(x.shape[1], np.inf)
    for j in range(x.shape[1]):
        fh = sqrt_d * x[:, j]
        norm = np.linalg.norm(fh)
        if norm <= _EPS:
            continue
        fh = fh / norm
        align = float(fh @ xi1)
        den = 1.0 - align * align
        if den > _EPS:
            scores[j] = float(fh @ lap @ fh) / den
    return scores


def _multi_cluster_scores(
    x: np.ndarray, w: np.ndarray, n_clusters: int | None = None, alpha: float = _RIDGE_ALPHA
) -> np.ndarray:
    """Spectral embedding followed by per-eigenvector ridge regression; a
    feature scores by its largest absolute coefficient."""
    n = x.shape[0]
    big_k = min(5, n - 1) if n_clusters is None else min(n_clusters, n - 1)
    lap, d = _normalized_laplacian(w)
    vals, vecs = np.linalg.eigh(lap)
    inv_sqrt = np.where(d > 0, 1.0 / np.sqrt(np.maximum(d, _EPS)), 0.0)
    # skip the trivial eigenvector, then take the K smoothest components
    embed = inv_sqrt[:, None] * vecs[:, 1 : 1 + big_k]
    gram = x.T @ x + alpha * np.eye(x.shape[1])
    coef = np.linalg.solve(gram, x.T @ embed)
    return np.abs(coef).max(axis=1)


def _feature_similarity_order(x: np.ndarray, m: int) -> list[int]:
    """Iteratively discard the higher-index member of the most compressible
    feature pair (smallest maximum-information-compression index) until m remain."""
    n = x.shape[1]
    var = x.var(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.corrcoef(x, rowvar=False) if n > 1 else np.ones((1, 1))
    corr = np.nan_to_num(corr, nan=0.0)
    vs = var[:, None] + var[None, :]
    prod = var[:, None] * var[None, :]
    mici = 0.5 * (vs - np.sqrt(np.maximum(vs**2 - 4.0 * prod * (1.0 - corr**2), 0.0)))
    np.fill_diagonal(mici, np.inf)
    alive = list(range(n))
    while len(alive) > m:
        sub = mici[np.ix_(alive, alive)]
        flat = int(np.argmin(sub))
        i, j = divmod(flat, len(alive))
        drop = alive[max(i, j)]
        alive.remove(drop)
    return alive


def _greedy_order(x: np.ndarray, m: int) -> list[int]:
    """Forward selection minimizing the Frobenius reconstruction residual."""
    n = x.shape[1]
    resid_data = x.copy()
    resid_cols = x.copy()
    selected: list[int] = []
    available = np.ones(n, dtype=bool)
    for _ in range(m):
        norms = (resid_cols**2).sum(axis=0)
        gains = np.zeros(n)
        ok = available & (norms > _EPS)
        if ok.any():
            g = resid_data.T @ resid_cols[:, ok]
            gains[ok] = (g**2).sum(axis=0) / norms[ok]
        if ok.any() and gains.max() > 0:
            j = int(np.argmax(gains))
        else:
            j = int(np.nonzero(available)[0][0])
        selected.append(j)
        available[j] = False
        if norms[j] > _EPS:
            q = resid_cols[:, j] / np.sqrt(norms[j])
            resid_data = resid_data - np.outer(q, q @ resid_data)
            resid_cols = resid_cols - np.outer(q, q @ resid_cols)
        resid_cols[:, j] = 0.0
    return selected


def _smallest(scores: np.ndarray, m: int) -> list[int]:
    order = np.lexsort((np.arange(len(scores)), scores))
    return sorted(int(i) for i in order[:m])


def _largest(scores: np.ndarray, m: int) -> list[int]:
    order = np.lexsort((np.arange(len(scores)), -scores))
    return sorted(int(i) for i in order[:m])


def run_selector(
    method: str,
    f: np.ndarray,
    m: int,
    knn: int | None = None,
    n_clusters: int | None = None,
) -> SelectorResult:
    """Run one unsupervised selector and return exactly m column indices."""
    f = np.asarray(f, dtype=np.float64)
    n = f.shape[1]
    if m > n:
        raise ValueError(f"cannot select {m} of {n} columns")
    if method not in SELECTOR_METHODS or method == "correlation":
        raise ValueError(f"not a runnable selector: {method!r}")
    if m == 0:
        return SelectorResult(method=method, columns=(), n_columns=n)
    x = _standardized(f)
    if method == "feature_similarity":
        cols = _feature_similarity_order(x, m)
    elif method == "laplacian":
        w = _knn_similarity(x, knn)
        cols = _smallest(_laplacian_scores(x, w), m)
    elif method == "spectral":
        w = _knn_similarity(x, knn)
        cols = _smallest(_spectral_scores(x, w), m)
    elif method == "multi_cluster":
        w = _knn_similarity(x, knn)
        cols = _largest(_multi_cluster_scores(x, w, n_clusters), m)
    else:  # greedy
        cols = sorted(_greedy_order(x, m))
    return SelectorResult(method=method, columns=tuple(cols), n_columns=n)


def ensemble_vote(results: list[SelectorResult]) -> list[int]:
    """Indices chosen by at least half (3 of 6) of the selectors, ascending."""
    if len(results) != 6:
        raise ValueError("the vote requires exactly six selector results")
    widths = {r.n_columns for r in results}
    if len(widths) != 1:
        raise ValueError("selector results disagree on the column universe")
    counts: dict[int, int] = {}
    for r in results:
        for c in r.columns:
            counts[c] = counts.get(c, 0) + 1
    return sorted(c for c, k in counts.items() if k >= 3)


def self_select(f3: np.ndarray, knn: int | None = None, n_clusters: int | None = None) -> SelectionTrace:
    """The full selection chain on a stacked dataset feature matrix."""
    f3 = np.asarray(f3, dtype=np.float64)
    kept_strict = drop_correlated(f3, 0.99)
    f4 = f3[:, kept_strict]
    corr_cols = drop_correlated(f4, 0.90)
    m = len(corr_cols)
    results = [
        SelectorResult(method="correlation", columns=tuple(corr_cols), n_columns=f4.shape[1])
    ]
    for method in SELECTOR_METHODS[1:]:
        results.append(run_selector(method, f4, m, knn=knn, n_clusters=n_clusters))
    vote_local = ensemble_vote(results)
    if len(vote_local) > m:
        # six selectors picking m features each can push more than m past the
        # >= 3 vote bar; the stage width is capped at the selection target,
        # keeping the strongest consensus (vote count, then column order)
        counts: dict[int, int] = {}
        for r in results:
            for c in r.columns:
                counts[c] = counts.get(c, 0) + 1
        vote_local = sorted(
            sorted(vote_local, key=lambda c: (-counts[c], c))[:m]
        )
    vote_orig = [kept_strict[i] for i in vote_local]
    if vote_local:
        final_local = drop_correlated(f4[:, vote_local], 0.90)
        final = [vote_orig[i] for i in final_local]
    else:
        final = []
    return SelectionTrace(
        n_input=f3.shape[1],
        kept_strict=tuple(kept_strict),
        target_count=m,
        per_method=tuple(results),
        vote_survivors=tuple(vote_orig),
        final=tuple(final),
    )


def write_trace(path, trace: SelectionTrace) -> None:
    """Persist a trace as readable text: stage widths, then the index lists."""
    with open(path, "w") as fh:
        fh.write("scefis-selection-trace v1\n")
        fh.write(f"n_input {trace.n_input}\n")
        widths = trace.stage_widths
        fh.write(
            f"widths strict={widths[0]} target={widths[1]} voted={widths[2]} final={widths[3]}\n"
        )
        fh.write("kept_strict " + " ".join(map(str, trace.kept_strict)) + "\n")
        for r in trace.per_method:
            fh.write(f"method {r.method} " + " ".join(map(str, r.columns)) + "\n")
        fh.write("vote_survivors " + " ".join(map(str, trace.vote_survivors)) + "\n")
        fh.write("final " + " ".join(map(str, trace.final)) + "\n")
