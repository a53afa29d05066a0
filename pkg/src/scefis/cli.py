"""Command line interface.

Subcommands: features, select, segment, maa, configure, train, run, report,
serve. Dataset directories follow `<root>/images/<id>.png` +
`<root>/gold/<id>.png`; run settings come from a key = value config file.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, parse_config
from .data import load_dataset
from .features import column_names, stack_blocks, write_feature_csv, read_feature_csv
from .fuzzy import save_rulebase
from .images import load_gray, save_mask
from .pipeline import (
    build_feature_store,
    offline_best_params,
    run_experiment,
    self_configure,
    train,
    write_report,
)
from .segmenters import apply_segmenter, baseline_threshold, default_spec
from .selection import self_select, write_trace

_ALGO_KINDS = {"thr": "threshold", "rg": "region_grow", "srm": "srm"}
_BASELINES = ("otsu", "kittler", "huang", "niblack")


def _load_config(path: str | None) -> RunConfig:
    return parse_config(path) if path else RunConfig()


def cmd_features(args) -> int:
    if args.list_columns:
        for idx, name in enumerate(column_names()):
            print(f"{idx},{name}")
        return 0
    if not args.dataset:
        print("features: --dataset is required unless --list-columns", file=sys.stderr)
        return 2
    ds = load_dataset(args.dataset)
    store = build_feature_store(ds)
    mat, ids = stack_blocks([store.blocks[i] for i in ds.ids])
    write_feature_csv(args.out, mat, ids)
    print(f"wrote {mat.shape[0]} rows x {mat.shape[1]} features to {args.out}")
    return 0


def cmd_select(args) -> int:
    mat, _ = read_feature_csv(args.matrix)
    cfg = _load_config(args.config)
    trace = self_select(mat, knn=cfg.selector_knn, n_clusters=cfg.selector_clusters)
    write_trace(args.trace, trace)
    cols = list(trace.final)
    header = [column_names()[c] for c in cols] if mat.shape[1] == len(column_names()) else [
        f"col{c}" for c in cols
    ]
    with open(args.out, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in mat[:, cols]:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    widths = trace.stage_widths
    print(f"selection widths: strict={widths[0]} target={widths[1]} voted={widths[2]} final={widths[3]}")
    return 0


def cmd_segment(args) -> int:
    img = load_gray(args.infile)
    if args.algo in _BASELINES:
        mask = baseline_threshold(img, args.algo, polarity=args.polarity)
    else:
        kind = _ALGO_KINDS[args.algo]
        spec = default_spec(kind)
        param = spec.default if args.param is None else args.param
        mask = apply_segmenter(img, spec, param, polarity=args.polarity)
    save_mask(mask, args.out)
    print(f"wrote {args.out} ({mask.count()} object pixels)")
    return 0


def cmd_maa(args) -> int:
    ds = load_dataset(args.dataset)
    cfg = _load_config(args.config)
    spec = cfg.spec()
    store = build_feature_store(ds, sort_by=cfg.seed_sort)
    records = offline_best_params(ds, spec, store=store, polarity=cfg.polarity)
    with open(args.out, "w") as fh:
        fh.write("image_id,param,score\n")
        for i in ds.ids:
            r = records[i]
            fh.write(f"{i},{r.param!r},{r.score!r}\n")
    mean = float(np.mean([records[i].score for i in ds.ids]))
    print(f"wrote {args.out}; grid-search mean accuracy {mean:.4f}")
    return 0


def cmd_configure(args) -> int:
    ds = load_dataset(args.dataset)
    cfg = _load_config(args.config)
    store = build_feature_store(ds, sort_by=cfg.seed_sort)
    self_cfg, trace = self_configure(
        ds, store=store, selection_scope="all",
        knn=cfg.selector_knn, n_clusters=cfg.selector_clusters,
    )
    widths = trace.stage_widths
    print(f"window size: {self_cfg.window_z}")
    print(f"selection widths: strict={widths[0]} target={widths[1]} voted={widths[2]} final={widths[3]}")
    print("selected columns: " + " ".join(str(c) for c in self_cfg.selected_columns))
    if args.out:
        write_trace(args.out, trace)
    return 0


def cmd_train(args) -> int:
    ds = load_dataset(args.dataset)
    cfg = _load_config(args.config)
    spec = cfg.spec()
    store = build_feature_store(ds, sort_by=cfg.seed_sort)
    from .data import make_splits

    train_ids, test_ids = make_splits(ds.ids, 1, cfg.seed, cfg.train_fraction)[0]
    self_cfg, _ = self_configure(
        ds, store=store, train_ids=train_ids, selection_scope=cfg.selection_scope,
        knn=cfg.selector_knn, n_clusters=cfg.selector_clusters,
    )
    best = offline_best_params(ds, spec, store=store, polarity=cfg.polarity)
    rb = train(ds, train_ids, self_cfg, spec, best, store,
               eps_x=cfg.eps_x, eps_o=cfg.eps_o)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_rulebase(rb, out / "rulebase.txt")
    _write_bundle_meta(out, self_cfg, spec, cfg, train_ids, test_ids)
    print(f"trained {rb.n_rules} rules from {len(train_ids)} images; bundle at {out}")
    return 0


def _write_bundle_meta(out: Path, self_cfg, spec, cfg, train_ids, test_ids) -> None:
    lines = [
        "scefis-bundle v1",
        f"window_z {self_cfg.window_z}",
        "selected_columns " + " ".join(str(c) for c in self_cfg.selected_columns),
        "norm_mean " + " ".join(repr(m) for m, _ in self_cfg.normalization),
        "norm_sd " + " ".join(repr(s) for _, s in self_cfg.normalization),
        f"segmenter {spec.kind}",
        "grid " + " ".join(repr(g) for g in spec.grid),
        f"default {spec.default!r}",
        f"polarity {cfg.polarity}",
        "train_ids " + " ".join(train_ids),
        "test_ids " + " ".join(test_ids),
    ]
    (out / "bundle.txt").write_text("\n".join(lines) + "\n")


def cmd_run(args) -> int:
    ds = load_dataset(args.dataset)
    cfg = _load_config(args.config)
    report = run_experiment(ds, cfg, runs=args.runs, seed=args.seed)
    write_report(args.out, report)
    for r in report.runs:
        s = r.summaries
        print(
            f"run {r.run_index}: tuned {s['scefis'].mean:.3f}  "
            f"ceiling {s['maa'].mean:.3f}  default {s['default'].mean:.3f}"
        )
    print(f"report written to {args.out}")
    return 0


def cmd_report(args) -> int:
    path = Path(args.out) / "report.csv"
    if not path.exists():
        print(f"no report.csv under {args.out}", file=sys.stderr)
        return 1
    rows = path.read_text().splitlines()
    header = rows[0].split(",")
    print(" | ".join(header))
    for line in rows[1:]:
        parts = line.split(",")
        pretty = [
            f"{float(p):.4f}" if i in (2, 3, 4, 5) else p for i, p in enumerate(parts)
        ]
        print(" | ".join(pretty))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        data_dir=args.data_dir,
        default_dataset=args.dataset,
        default_config=args.config,
    )
    host, _, port = args.addr.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scefis", description=__doc__)
    p.add_argument("--version", action="version", version=f"scefis {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("features", help="extract the stacked feature matrix as CSV")
    f.add_argument("--dataset", help="dataset root directory")
    f.add_argument("--out", default="features.csv")
    f.add_argument("--list-columns", action="store_true", help="print the 108 column names")
    f.set_defaults(func=cmd_features)

    s = sub.add_parser("select", help="run the selection chain on a feature CSV")
    s.add_argument("--matrix", required=True, help="feature CSV from `features`")
    s.add_argument("--trace", default="selection_trace.txt")
    s.add_argument("--out", default="selected.csv")
    s.add_argument("--config")
    s.set_defaults(func=cmd_select)

    g = sub.add_parser("segment", help="segment one image")
    g.add_argument("--algo", required=True, choices=list(_ALGO_KINDS) + list(_BASELINES))
    g.add_argument("--param", type=float)
    g.add_argument("--in", dest="infile", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--polarity", default="dark", choices=("dark", "bright"))
    g.set_defaults(func=cmd_segment)

    m = sub.add_parser("maa", help="exhaustive best-parameter search per image")
    m.add_argument("--dataset", required=True)
    m.add_argument("--config")
    m.add_argument("--out", default="maa.csv")
    m.set_defaults(func=cmd_maa)

    c = sub.add_parser("configure", help="self-configure on a dataset")
    c.add_argument("--dataset", required=True)
    c.add_argument("--config")
    c.add_argument("--out", help="optional trace output path")
    c.set_defaults(func=cmd_configure)

    t = sub.add_parser("train", help="train a rule base bundle")
    t.add_argument("--dataset", required=True)
    t.add_argument("--config")
    t.add_argument("--out", required=True, help="bundle output directory")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("run", help="run the repeated train/evolve experiment")
    r.add_argument("--dataset", required=True)
    r.add_argument("--config")
    r.add_argument("--runs", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", default="report")
    r.set_defaults(func=cmd_run)

    q = sub.add_parser("report", help="pretty-print a written report")
    q.add_argument("--out", default="report", help="report directory")
    q.set_defaults(func=cmd_report)

    v = sub.add_parser("serve", help="start the review service")
    v.add_argument("--addr", default="127.0.0.1:8732")
    v.add_argument("--dataset")
    v.add_argument("--config")
    v.add_argument("--data-dir", default=None, help="persistence root (or SCEFIS_DATA_DIR)")
    v.set_defaults(func=cmd_serve)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
