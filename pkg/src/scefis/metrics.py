"""Mask agreement scoring and the summary statistics used in result tables."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .images import BinaryMask


@dataclass(frozen=True)
class ScoreSummary:
    """Mean, sample sd and two-sided 95% Student-t confidence interval."""

    mean: float
    sd: float
    ci_lo: float
    ci_hi: float
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("summary requires at least one score")
        if self.sd < 0:
            raise ValueError("sd must be non-negative")
        if not (self.ci_lo <= self.mean + 1e-12 and self.mean - 1e-12 <= self.ci_hi):
            raise ValueError("confidence interval must bracket the mean")


def jaccard(s: BinaryMask, g: BinaryMask) -> float:
    """Area overlap |s ∩ g| / |s ∪ g|; two empty masks agree perfectly (1.0)."""
    if s.width != g.width or s.height != g.height:
        raise ValueError(
            f"mask dimensions differ: {s.width}x{s.height} vs {g.width}x{g.height}"
        )
    inter = np.logical_and(s.data, g.data).sum()
    union = np.logical_or(s.data, g.data).sum()
    if union == 0:
        return 1.0
    return float(inter) / float(union)


def summarize(scores: list[float]) -> ScoreSummary:
    """Summarize scores with a two-sided 95% CI, mean +/- t(0.975, n-1) * sd / sqrt(n).

    A single score yields a degenerate interval equal to the mean.
    """
    if len(scores) == 0:
        raise ValueError("cannot summarize an empty score list")
    arr = np.asarray(scores, dtype=np.float64)
    n = arr.size
    mean = float(arr.mean())
    if n == 1:
        return ScoreSummary(mean=mean, sd=0.0, ci_lo=mean, ci_hi=mean, n=1)
    sd = float(arr.std(ddof=1))
    half = float(stats.t.ppf(0.975, n - 1)) * sd / math.sqrt(n)
    return ScoreSummary(mean=mean, sd=sd, ci_lo=mean - half, ci_hi=mean + half, n=n)


def paired_t_test(a: list[float], b: list[float]) -> tuple[float, float]:
    """Two-sided paired t-test on per-item differences.

    Degenerate cases: all differences zero reports (0, 1); a nonzero constant
    difference has zero variance, so the statistic is reported as signed
    infinity with p = 0.
    """
    if len(a) != len(b):
        raise ValueError("paired samples must have equal length")
    if len(a) < 2:
        raise ValueError("paired t-test requires at least two pairs")
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    n = d.size
    mean_d = float(d.mean())
    sd_d = float(d.std(ddof=1))
    if sd_d == 0.0:
        if mean_d == 0.0:
            return 0.0, 1.0
        return math.copysign(math.inf, mean_d), 0.0
    t = mean_d / (sd_d / math.sqrt(n))
    p = 2.0 * float(stats.t.sf(abs(t), n - 1))
    return t, min(p, 1.0)


def welch_t_test(a: list[float], b: list[float]) -> tuple[float, float]:
    """Two-sided Welch (unequal variance) t-test, reported alongside the paired one."""
    if len(a) < 2 or len(b) < 2:
        raise ValueError("welch t-test requires at least two samples per group")
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    va = xa.var(ddof=1) / xa.size
    vb = xb.var(ddof=1) / xb.size
    if va + vb == 0.0:
        if xa.mean() == xb.mean():
            return 0.0, 1.0
        return math.copysign(math.inf, float(xa.mean() - xb.mean())), 0.0
    t = float((xa.mean() - xb.mean()) / math.sqrt(va + vb))
    df = (va + vb) ** 2 / (va**2 / (xa.size - 1) + vb**2 / (xb.size - 1))
    p = 2.0 * float(stats.t.sf(abs(t), df))
    return t, min(p, 1.0)
