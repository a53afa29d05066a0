"""Run configuration: a small key = value text format.

Lines are `key = value`; `#` starts a comment. Lists are comma separated;
grids may also be written `lo:hi:n` for n evenly spaced values. Unknown keys
are rejected so typos surface early.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .segmenters import SegmenterSpec, default_spec


@dataclass
class RunConfig:
    segmenter: str = "threshold"
    polarity: str = "dark"
    grid: tuple[float, ...] | None = None
    default_param: float | None = None
    eps_x: float | None = None
    eps_o: float | None = None
    selector_knn: int | None = None
    selector_clusters: int | None = None
    selection_scope: str = "train"
    seed_sort: str = "response"
    runs: int = 10
    seed: int = 0
    train_fraction: float = 0.85
    fusion: tuple[str, ...] = ()
    bundle_dir: str | None = None

    def __post_init__(self):
        if self.selection_scope not in ("train", "all"):
            raise ValueError("selection_scope must be 'train' or 'all'")
        if self.polarity not in ("dark", "bright"):
            raise ValueError("polarity must be 'dark' or 'bright'")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError("train_fraction must lie in (0, 1)")

    def spec(self) -> SegmenterSpec:
        base = default_spec(self.segmenter)
        grid = self.grid if self.grid is not None else base.grid
        default = self.default_param if self.default_param is not None else base.default
        if default not in grid:
            # snap to the nearest grid member so the spec invariant holds
            default = min(grid, key=lambda g: abs(g - default))
        return SegmenterSpec(self.segmenter, tuple(grid), default)


def _parse_grid(text: str) -> tuple[float, ...]:
    if ":" in text:
        lo_s, hi_s, n_s = text.split(":")
        lo, hi, n = float(lo_s), float(hi_s), int(n_s)
        if n < 2:
            raise ValueError("grid needs at least two points")
        step = (hi - lo) / (n - 1)
        return tuple(lo + i * step for i in range(n))
    return tuple(float(v) for v in text.split(","))


_INT_KEYS = {"selector_knn", "selector_clusters", "runs", "seed"}
_FLOAT_KEYS = {"default_param", "eps_x", "eps_o", "train_fraction"}
_STR_KEYS = {"segmenter", "polarity", "selection_scope", "seed_sort", "bundle_dir"}


def parse_config(path: str | Path) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in known:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        if key == "grid":
            values[key] = _parse_grid(val)
        elif key == "fusion":
            values[key] = tuple(v.strip() for v in val.split(",") if v.strip())
        elif key in _INT_KEYS:
            values[key] = int(val)
        elif key in _FLOAT_KEYS:
            values[key] = float(val)
        elif key in _STR_KEYS:
            values[key] = val
    return RunConfig(**values)


def write_config(path: str | Path, cfg: RunConfig) -> None:
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if v is None or v == ():
            continue
        if f.name in ("grid", "fusion"):
            v = ",".join(repr(float(x)) if f.name == "grid" else str(x) for x in v)
        lines.append(f"{f.name} = {v}")
    Path(path).write_text("\n".join(lines) + "\n")
