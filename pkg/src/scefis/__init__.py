"""Self-configuring evolving fuzzy tuner for segmentation parameters."""

__version__ = "0.1.0"

from .images import BinaryMask, GrayImage
from .metrics import ScoreSummary, jaccard, paired_t_test, summarize, welch_t_test
from .features import (
    ImageFeatureBlock,
    SeedPoint,
    SelfConfig,
    compute_window_size,
    detect_seed_points,
    extract_features,
    image_feature_block,
)
from .selection import (
    SelectionTrace,
    SelectorResult,
    drop_correlated,
    ensemble_vote,
    run_selector,
    self_select,
)
from .segmenters import (
    BestParamRecord,
    SegmenterSpec,
    baseline_threshold,
    best_parameter_search,
    default_spec,
    region_grow,
    srm_segment,
    staple_fuse,
    threshold_segment,
)
from .fuzzy import Rule, RuleBase, aggregate, generate_rules, infer, prune_and_evolve, zmf
from .data import Dataset, load_dataset, make_splits, save_dataset, synthetic_dataset
from .config import RunConfig, parse_config
from .pipeline import (
    EvolutionEntry,
    EvolutionLog,
    ExperimentReport,
    build_feature_store,
    evolve_stream,
    offline_best_params,
    run_experiment,
    self_configure,
    train,
)
