"""End-to-end orchestration: self-configuration, offline search, training,
the evolving stream, and the repeated-runs experiment harness.

Feature blocks and per-image search results depend only on the image, so the
harness computes them once and reuses them across runs. Normalization
statistics always come from training rows only; whether test rows may inform
column selection is controlled by ``selection_scope`` ("train" is the
leakage-tight default, "all" mirrors a front end configured on every
available image).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .data import Dataset, make_splits
from .features import (
    ImageFeatureBlock,
    N_BLOCK_ROWS,
    SeedPoint,
    SelfConfig,
    compute_window_size,
    detect_seed_points,
    image_feature_block,
)
from .fuzzy import RuleBase, aggregate, generate_rules, infer, prune_and_evolve
from .images import BinaryMask
from .metrics import ScoreSummary, jaccard, paired_t_test, summarize, welch_t_test
from .segmenters import (
    BestParamRecord,
    SegmenterSpec,
    apply_segmenter,
    best_parameter_search,
    staple_fuse,
)
from .selection import SelectionTrace, self_select


@dataclass
class FeatureStore:
    """Split-independent per-image artifacts: window size, seeds, blocks."""

    z: int
    blocks: dict[str, ImageFeatureBlock]
    seeds: dict[str, list[SeedPoint]]


def build_feature_store(ds: Dataset, sort_by: str = "response") -> FeatureStore:
    z = compute_window_size(ds.dims())
    blocks = {}
    seeds = {}
    for i in ds.ids:
        img = ds.images[i]
        zi = min(z, img.height, img.width)
        s = detect_seed_points(img, zi, sort_by=sort_by)
        seeds[i] = s
        blocks[i] = image_feature_block(img, zi, image_id=i, seeds=s)
    return FeatureStore(z=z, blocks=blocks, seeds=seeds)


def _rows_for(store: FeatureStore, ids) -> np.ndarray:
    return np.vstack([store.blocks[i].rows for i in ids])


def self_configure(
    ds: Dataset,
    store: FeatureStore | None = None,
    train_ids: tuple[str, ...] | None = None,
    selection_scope: str = "train",
    knn: int | None = None,
    n_clusters: int | None = None,
) -> tuple[SelfConfig, SelectionTrace]:
    """Pick the window size, feature columns and column norms from the data.

    Column selection sees training rows only under the default scope; the
    normalization statistics are always restricted to training rows.
    """
    if store is None:
        store = build_feature_store(ds)
    if train_ids is None:
        train_ids = ds.ids
    selection_ids = ds.ids if selection_scope == "all" else train_ids
    trace = self_select(_rows_for(store, selection_ids), knn=knn, n_clusters=n_clusters)
    train_rows = _rows_for(store, train_ids)
    cols = list(trace.final)
    if not cols:
        # total fallback: keep the single most informative raw column
        cols = [int(np.argmax(train_rows.var(axis=0)))]
    norm = tuple(
        (float(train_rows[:, c].mean()), float(train_rows[:, c].std())) for c in cols
    )
    cfg = SelfConfig(
        window_z=store.z,
        n_total_features=train_rows.shape[1],
        selected_columns=tuple(cols),
        normalization=norm,
    )
    return cfg, trace


def selected_rows(store: FeatureStore, cfg: SelfConfig, image_id: str) -> np.ndarray:
    return store.blocks[image_id].rows[:, list(cfg.selected_columns)]


def offline_best_params(
    ds: Dataset,
    spec: SegmenterSpec,
    store: FeatureStore | None = None,
    polarity: str = "dark",
) -> dict[str, BestParamRecord]:
    """Exhaustive per-image search against the gold masks, one record each."""
    if store is None:
        store = build_feature_store(ds)
    records = {}
    for i in ds.ids:
        records[i] = best_parameter_search(
            ds.images[i],
            ds.golds[i],
            spec,
            image_id=i,
            polarity=polarity,
            seeds=store.seeds[i],
        )
    return records


def _norm_arrays(cfg: SelfConfig) -> tuple[np.ndarray, np.ndarray]:
    mean = np.array([m for m, _ in cfg.normalization])
    sd = np.array([s for _, s in cfg.normalization])
    return mean, sd


def train(
    ds: Dataset,
    train_ids: tuple[str, ...],
    cfg: SelfConfig,
    spec: SegmenterSpec,
    best: dict[str, BestParamRecord],
    store: FeatureStore,
    eps_x: float | None = None,
    eps_o: float | None = None,
) -> RuleBase:
    """Assemble the training matrices (8 rows per image, best parameter
    replicated per row), pruning redundant rows from the second image on,
    then generate the initial rule base."""
    if not train_ids:
        raise ValueError("training split is empty")
    dim = len(cfg.selected_columns)
    if eps_x is None:
        eps_x = 0.10 * math.sqrt(dim)
    if eps_o is None:
        eps_o = 0.05 * spec.span if spec.span > 0 else 0.05
    mean, sd = _norm_arrays(cfg)
    safe_sd = np.where(sd > 0, sd, 1.0)

    m_rows: list[np.ndarray] = []
    o_vals: list[float] = []
    for idx, image_id in enumerate(train_ids):
        rows = selected_rows(store, cfg, image_id)
        t_best = best[image_id].param
        if idx == 0:
            keep = list(range(rows.shape[0]))
        else:
            acc = (np.vstack(m_rows) - mean) / safe_sd
            cand = (rows - mean) / safe_sd
            o_acc = np.array(o_vals)
            keep = []
            for r in range(rows.shape[0]):
                dist = np.sqrt(((acc - cand[r]) ** 2).sum(axis=1))
                redundant = (dist <= eps_x) & (np.abs(o_acc - t_best) <= eps_o)
                if not redundant.any():
                    keep.append(r)
        for r in keep:
            m_rows.append(rows[r])
            o_vals.append(float(t_best))
    return generate_rules(
        np.vstack(m_rows),
        np.array(o_vals),
        norm=(mean, sd),
        eps_x=eps_x,
        eps_o=eps_o,
    )


@dataclass(frozen=True)
class EvolutionEntry:
    image_id: str
    inferred: float
    score: float
    best_param: float
    n_rules: int
    skipped: bool = False


@dataclass(frozen=True)
class EvolutionLog:
    entries: tuple[EvolutionEntry, ...]

    def scores(self) -> list[float]:
        return [e.score for e in self.entries if not e.skipped]

    def rule_counts(self) -> list[int]:
        return [e.n_rules for e in self.entries if not e.skipped]

    def summary(self) -> ScoreSummary:
        return summarize(self.scores())


def evolve_stream(
    rb: RuleBase,
    ds: Dataset,
    store: FeatureStore,
    cfg: SelfConfig,
    spec: SegmenterSpec,
    test_ids: tuple[str, ...],
    feedback,
    polarity: str = "dark",
) -> tuple[RuleBase, EvolutionLog]:
    """Run the online loop over a test stream.

    ``feedback(image_id, proposal_mask) -> BinaryMask | None`` supplies the
    corrected mask; None skips the image and leaves the rule base untouched.
    """
    entries: list[EvolutionEntry] = []
    bounds = (spec.grid[0], spec.grid[-1])
    for image_id in test_ids:
        img = ds.images[image_id]
        f_s = selected_rows(store, cfg, image_id)
        t_o = infer(rb, f_s)
        t_star = aggregate(t_o, bounds=bounds)
        proposal = apply_segmenter(
            img, spec, t_star, polarity=polarity, seeds=store.seeds[image_id]
        )
        corrected = feedback(image_id, proposal)
        if corrected is None:
            entries.append(
                EvolutionEntry(
                    image_id=image_id,
                    inferred=t_star,
                    score=0.0,
                    best_param=math.nan,
                    n_rules=rb.n_rules,
                    skipped=True,
                )
            )
            continue
        score = jaccard(proposal, corrected)
        rec = best_parameter_search(
            img, corrected, spec, image_id=image_id, polarity=polarity,
            seeds=store.seeds[image_id],
        )
        rb = prune_and_evolve(rb, f_s, rec.param)
        entries.append(
            EvolutionEntry(
                image_id=image_id,
                inferred=t_star,
                score=score,
                best_param=rec.param,
                n_rules=rb.n_rules,
            )
        )
    return rb, EvolutionLog(entries=tuple(entries))


def gold_feedback(ds: Dataset):
    """Batch-mode feedback: the stored gold mask plays the expert."""

    def provider(image_id: str, proposal: BinaryMask):
        return ds.golds[image_id]

    return provider


# ---------------------------------------------------------------------------
# repeated-runs experiment harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunResult:
    run_index: int
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    summaries: dict[str, ScoreSummary]
    log: EvolutionLog
    t_paired: tuple[float, float]
    t_welch: tuple[float, float]
    n_selected: int


@dataclass(frozen=True)
class ExperimentReport:
    spec: SegmenterSpec
    runs: tuple[RunResult, ...]

    def method_means(self, method: str) -> list[float]:
        return [r.summaries[method].mean for r in self.runs]


def run_experiment(
    ds: Dataset,
    config: RunConfig,
    runs: int | None = None,
    seed: int | None = None,
    store: FeatureStore | None = None,
) -> ExperimentReport:
    """Seeded repeated train/evolve cycles reporting the tuned system against
    the fixed-default parent and the exhaustive-search ceiling."""
    runs = config.runs if runs is None else runs
    seed = config.seed if seed is None else seed
    spec = config.spec()
    if store is None:
        store = build_feature_store(ds, sort_by=config.seed_sort)
    best = offline_best_params(ds, spec, store=store, polarity=config.polarity)
    default_score = {
        i: jaccard(
            apply_segmenter(
                ds.images[i], spec, spec.default,
                polarity=config.polarity, seeds=store.seeds[i],
            ),
            ds.golds[i],
        )
        for i in ds.ids
    }
    fusion_kinds = tuple(config.fusion)

    results = []
    splits = make_splits(ds.ids, runs, seed, config.train_fraction)
    for run_index, (train_ids, test_ids) in enumerate(splits):
        cfg, _ = self_configure(
            ds,
            store=store,
            train_ids=train_ids,
            selection_scope=config.selection_scope,
            knn=config.selector_knn,
            n_clusters=config.selector_clusters,
        )
        rb = train(
            ds, train_ids, cfg, spec, best, store,
            eps_x=config.eps_x, eps_o=config.eps_o,
        )
        rb, log = evolve_stream(
            rb, ds, store, cfg, spec, test_ids,
            feedback=gold_feedback(ds), polarity=config.polarity,
        )
        summaries = {
            "scefis": log.summary(),
            "maa": summarize([best[i].score for i in test_ids]),
            "default": summarize([default_score[i] for i in test_ids]),
        }
        if fusion_kinds:
            summaries["fusion"] = _fusion_summary(
                ds, store, cfg, spec, fusion_kinds, train_ids, test_ids, config, best
            )
        scefis_scores = log.scores()
        default_scores = [default_score[i] for i in test_ids]
        if len(scefis_scores) == len(default_scores) and len(scefis_scores) >= 2:
            t_paired = paired_t_test(scefis_scores, default_scores)
            t_welch = welch_t_test(scefis_scores, default_scores)
        else:
            t_paired = (math.nan, math.nan)
            t_welch = (math.nan, math.nan)
        results.append(
            RunResult(
                run_index=run_index,
                train_ids=train_ids,
                test_ids=test_ids,
                summaries=summaries,
                log=log,
                t_paired=t_paired,
                t_welch=t_welch,
                n_selected=len(cfg.selected_columns),
            )
        )
    return ExperimentReport(spec=spec, runs=tuple(results))


def _fusion_summary(ds, store, cfg, spec, fusion_kinds, train_ids, test_ids, config, best):
    """Evolve one tuner per parent and fuse their per-image masks."""
    from .segmenters import default_spec

    specs = [spec] + [default_spec(k) for k in fusion_kinds if k != spec.kind]
    bases = []
    for sp in specs:
        b = best if sp.kind == spec.kind else offline_best_params(
            ds, sp, store=store, polarity=config.polarity
        )
        rb = train(ds, train_ids, cfg, sp, b, store,
                   eps_x=config.eps_x, eps_o=config.eps_o)
        bases.append((sp, rb))
    scores = []
    for image_id in test_ids:
        img = ds.images[image_id]
        f_s = selected_rows(store, cfg, image_id)
        masks = []
        for sp, rb in bases:
            t_star = aggregate(infer(rb, f_s), bounds=(sp.grid[0], sp.grid[-1]))
            masks.append(
                apply_segmenter(img, sp, t_star, polarity=config.polarity,
                                seeds=store.seeds[image_id])
            )
        fused = staple_fuse(masks)
        scores.append(jaccard(fused, ds.golds[image_id]))
    return summarize(scores)


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

def write_report_csv(path: str | Path, report: ExperimentReport) -> None:
    methods = sorted({m for r in report.runs for m in r.summaries})
    with open(path, "w") as fh:
        fh.write("run,method,mean,sd,ci_lo,ci_hi,n\n")
        for r in report.runs:
            for method in methods:
                s = r.summaries[method]
                fh.write(
                    f"{r.run_index},{method},{s.mean!r},{s.sd!r},{s.ci_lo!r},{s.ci_hi!r},{s.n}\n"
                )


def write_aggregate_csv(path: str | Path, report: ExperimentReport) -> None:
    methods = sorted({m for r in report.runs for m in r.summaries})
    with open(path, "w") as fh:
        fh.write("method,mean_of_means,min,max,runs\n")
        for method in methods:
            means = report.method_means(method)
            fh.write(
                f"{method},{float(np.mean(means))!r},{min(means)!r},{max(means)!r},{len(means)}\n"
            )


def write_evolution_csv(path: str | Path, report: ExperimentReport) -> None:
    with open(path, "w") as fh:
        fh.write("run,image_id,inferred,score,best_param,n_rules,skipped\n")
        for r in report.runs:
            for e in r.log.entries:
                fh.write(
                    f"{r.run_index},{e.image_id},{e.inferred!r},{e.score!r},"
                    f"{e.best_param!r},{e.n_rules},{int(e.skipped)}\n"
                )


def write_ttest_csv(path: str | Path, report: ExperimentReport) -> None:
    """Tuned-vs-default significance per run, paired test plus Welch."""
    with open(path, "w") as fh:
        fh.write("run,t_paired,p_paired,t_welch,p_welch\n")
        for r in report.runs:
            fh.write(
                f"{r.run_index},{r.t_paired[0]!r},{r.t_paired[1]!r},"
                f"{r.t_welch[0]!r},{r.t_welch[1]!r}\n"
            )


def rule_trajectory_svg(counts: list[int], title: str = "rule count") -> str:
    """Minimal deterministic SVG polyline of the rule-count trajectory."""
    width, height, margin = 480, 280, 40
    if not counts:
        counts = [0]
    n = len(counts)
    top = max(max(counts), 1)
    xs = [
        margin + (width - 2 * margin) * (i / max(n - 1, 1)) for i in range(n)
    ]
    ys = [height - margin - (height - 2 * margin) * (c / top) for c in counts]
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f'<text x="{margin}" y="20" font-size="13">{title}</text>\n'
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>\n'
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        f'stroke="black"/>\n'
        f'<text x="8" y="{margin}" font-size="11">{top}</text>\n'
        f'<text x="{width - margin}" y="{height - 16}" font-size="11">{n}</text>\n'
        f'<polyline points="{pts}" fill="none" stroke="#0055aa" stroke-width="2"/>\n'
        "</svg>\n"
    )


def write_report(out_dir: str | Path, report: ExperimentReport) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_report_csv(out / "report.csv", report)
    write_aggregate_csv(out / "aggregate.csv", report)
    write_evolution_csv(out / "evolution.csv", report)
    write_ttest_csv(out / "ttests.csv", report)
    for r in report.runs:
        svg = rule_trajectory_svg(
            r.log.rule_counts(), title=f"rules over stream, run {r.run_index}"
        )
        (out / f"rules_run{r.run_index}.svg").write_text(svg)
