"""Takagi-Sugeno rule engine: genesis by subtractive clustering, inference,
output aggregation and distance-gated evolution.

Rules are regenerated from the stored training matrices rather than adapted
in place, so a rule base is a pure function of (inputs, outputs, column
norms) and reloading a saved base reproduces inference bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# subtractive clustering constants (influence radius, squash factor,
# acceptance and rejection ratios)
RADIUS = 0.5
SQUASH = 1.25
ACCEPT = 0.5
REJECT = 0.15

_FIRING_FLOOR = 1e-12
# pseudoinverse cutoff for the consequent fit; the regressor matrix is often
# near-square, and untruncated solutions blow up on its tiny singular values
_LSTSQ_RCOND = 1e-4


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(arr, dtype=np.float64))
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Rule:
    """Gaussian antecedent (center, widths) with an affine consequent."""

    center: np.ndarray
    sigma: np.ndarray
    consequent: np.ndarray

    def __post_init__(self):
        center = _frozen(self.center)
        sigma = _frozen(self.sigma)
        consequent = _frozen(self.consequent)
        if center.ndim != 1 or sigma.shape != center.shape:
            raise ValueError("center and sigma must be equal-length vectors")
        if consequent.shape != (center.size + 1,):
            raise ValueError("consequent needs one coefficient per input plus a constant")
        if np.any(sigma <= 0):
            raise ValueError("antecedent widths must be positive")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "consequent", consequent)


@dataclass(frozen=True)
class RuleBase:
    """Rules plus the training matrices and norms they regenerate from."""

    rules: tuple[Rule, ...]
    input_dim: int
    m_matrix: np.ndarray
    o_vector: np.ndarray
    norm_mean: np.ndarray
    norm_sd: np.ndarray
    eps_x: float
    eps_o: float

    def __post_init__(self):
        if not self.rules:
            raise ValueError("a rule base needs at least one rule")
        m = _frozen(self.m_matrix)
        o = _frozen(self.o_vector)
        if m.ndim != 2 or m.shape[1] != self.input_dim:
            raise ValueError("training inputs must be rows of width input_dim")
        if o.shape != (m.shape[0],):
            raise ValueError("one output required per training row")
        if any(r.center.size != self.input_dim for r in self.rules):
            raise ValueError("rule dimension mismatch")
        object.__setattr__(self, "m_matrix", m)
        object.__setattr__(self, "o_vector", o)
        object.__setattr__(self, "norm_mean", _frozen(self.norm_mean))
        object.__setattr__(self, "norm_sd", _frozen(self.norm_sd))

    @property
    def n_rules(self) -> int:
        return len(self.rules)

    def normalize(self, rows: np.ndarray) -> np.ndarray:
        sd = np.where(self.norm_sd > 0, self.norm_sd, 1.0)
        return (np.atleast_2d(rows) - self.norm_mean) / sd


def _subtractive_centers(z: np.ndarray) -> list[int]:
    """Chiu-style subtractive clustering; returns indices of the data points
    accepted as cluster centers. Dimensions are scaled to the unit hyperbox
    first so the influence radius means the same thing at any input scale."""
    n = z.shape[0]
    lo = z.min(axis=0)
    span = z.max(axis=0) - lo
    z = (z - lo) / np.where(span > 0, span, 1.0)
    alpha = 4.0 / (RADIUS**2)
    beta = 4.0 / ((SQUASH * RADIUS) ** 2)
    d2 = ((z[:, None, :] - z[None, :, :]) ** 2).sum(axis=2)
    potential = np.exp(-alpha * d2).sum(axis=1)
    centers: list[int] = []
    p_first = 0.0
    while len(centers) < n:
        i = int(np.argmax(potential))
        p_star = float(potential[i])
        if not centers:
            if p_star <= 0:
                break
            p_first = p_star
        elif p_star > ACCEPT * p_first:
            pass
        elif p_star < REJECT * p_first:
            break
        else:
            d_min = math.sqrt(
                min(((z[i] - z[c]) ** 2).sum() for c in centers)
            )
            if d_min / RADIUS + p_star / p_first < 1.0:
                potential[i] = 0.0
                continue
        centers.append(i)
        potential = potential - p_star * np.exp(-beta * d2[i])
    return centers


def _firing_strengths(rules: tuple[Rule, ...], x_norm: np.ndarray) -> np.ndarray:
    """Gaussian product memberships for normalized rows; shape (rows, rules)."""
    w = np.empty((x_norm.shape[0], len(rules)))
    for k, rule in enumerate(rules):
        d = (x_norm - rule.center) / rule.sigma
        w[:, k] = np.exp(-0.5 * (d**2).sum(axis=1))
    return w


def _consequent_values(rules: tuple[Rule, ...], x_norm: np.ndarray) -> np.ndarray:
    vals = np.empty((x_norm.shape[0], len(rules)))
    for k, rule in enumerate(rules):
        vals[:, k] = x_norm @ rule.consequent[:-1] + rule.consequent[-1]
    return vals


def generate_rules(
    m: np.ndarray,
    o: np.ndarray,
    norm: tuple[np.ndarray, np.ndarray] | None = None,
    eps_x: float | None = None,
    eps_o: float | None = None,
) -> RuleBase:
    """Cluster the joint normalized input/output space into rules and fit the
    affine consequents by membership-weighted global least squares."""
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    o = np.asarray(o, dtype=np.float64).ravel()
    if m.size == 0 or o.size == 0:
        raise ValueError("rule genesis needs at least one training row")
    if m.shape[0] != o.size:
        raise ValueError("one output required per training row")
    dim = m.shape[1]
    if norm is None:
        mean = m.mean(axis=0)
        sd = m.std(axis=0)
    else:
        mean = np.asarray(norm[0], dtype=np.float64)
        sd = np.asarray(norm[1], dtype=np.float64)
    safe_sd = np.where(sd > 0, sd, 1.0)
    x = (m - mean) / safe_sd

    o_sd = o.std()
    o_norm = (o - o.mean()) / (o_sd if o_sd > 0 else 1.0)
    joint = np.hstack([x, o_norm[:, None]])
    center_idx = _subtractive_centers(joint)

    spread = x.max(axis=0) - x.min(axis=0)
    sigma = RADIUS * np.where(spread > 0, spread, 1.0) / math.sqrt(8.0)

    prototype = [Rule(center=x[i], sigma=sigma, consequent=np.zeros(dim + 1)) for i in center_idx]
    w = _firing_strengths(tuple(prototype), x)
    tot = w.sum(axis=1, keepdims=True)
    gamma = np.where(tot > _FIRING_FLOOR, w / np.maximum(tot, _FIRING_FLOOR), 0.0)
    dead = tot.ravel() <= _FIRING_FLOOR
    if dead.any():
        # no rule fires: attribute the row to its nearest center
        centers = np.stack([r.center for r in prototype])
        for i in np.nonzero(dead)[0]:
            nearest = int(np.argmin(((centers - x[i]) ** 2).sum(axis=1)))
            gamma[i, nearest] = 1.0

    k = len(prototype)
    phi = np.empty((m.shape[0], k * (dim + 1)))
    for j in range(k):
        phi[:, j * (dim + 1) : j * (dim + 1) + dim] = gamma[:, j : j + 1] * x
        phi[:, j * (dim + 1) + dim] = gamma[:, j]
    theta, *_ = np.linalg.lstsq(phi, o, rcond=_LSTSQ_RCOND)

    rules = tuple(
        Rule(
            center=r.center,
            sigma=r.sigma,
            consequent=theta[j * (dim + 1) : (j + 1) * (dim + 1)],
        )
        for j, r in enumerate(prototype)
    )
    if eps_x is None:
        eps_x = 0.10 * math.sqrt(dim)
    if eps_o is None:
        span = float(o.max() - o.min())
        eps_o = 0.05 * (span if span > 0 else 1.0)
    return RuleBase(
        rules=rules,
        input_dim=dim,
        m_matrix=m,
        o_vector=o,
        norm_mean=mean,
        norm_sd=sd,
        eps_x=float(eps_x),
        eps_o=float(eps_o),
    )


def infer(rb: RuleBase, f_s: np.ndarray) -> np.ndarray:
    """Weighted-average Takagi-Sugeno inference, one output per input row.

    Rows whose total firing strength underflows fall back to the consequent
    of the nearest rule center.
    """
    rows = np.atleast_2d(np.asarray(f_s, dtype=np.float64))
    if rows.shape[1] != rb.input_dim:
        raise ValueError(f"expected rows of width {rb.input_dim}, got {rows.shape[1]}")
    x = rb.normalize(rows)
    w = _firing_strengths(rb.rules, x)
    vals = _consequent_values(rb.rules, x)
    tot = w.sum(axis=1)
    out = np.empty(rows.shape[0])
    ok = tot >= _FIRING_FLOOR
    out[ok] = (w[ok] * vals[ok]).sum(axis=1) / tot[ok]
    if (~ok).any():
        centers = np.stack([r.center for r in rb.rules])
        for i in np.nonzero(~ok)[0]:
            nearest = int(np.argmin(((centers - x[i]) ** 2).sum(axis=1)))
            out[i] = vals[i, nearest]
    return out


def zmf(x: float, a: float, b: float) -> float:
    """Standard Z-shaped membership: 1 below a, 0 above b, quadratic blend between."""
    if a >= b:
        raise ValueError("zmf breakpoints require a < b")
    if x <= a:
        return 1.0
    if x >= b:
        return 0.0
    mid = (a + b) / 2.0
    if x <= mid:
        return 1.0 - 2.0 * ((x - a) / (b - a)) ** 2
    return 2.0 * ((x - b) / (b - a)) ** 2


def aggregate(t_o: np.ndarray, bounds: tuple[float, float] | None = None) -> float:
    """Blend mean and median of the per-row outputs by a Z-shaped weight on
    their dispersion: low scatter trusts the mean, high scatter the median."""
    t_o = np.asarray(t_o, dtype=np.float64).ravel()
    if t_o.size == 0:
        raise ValueError("cannot aggregate an empty output vector")
    mu = float(t_o.mean())
    md = float(np.median(t_o))
    sigma = float(t_o.std(ddof=1)) if t_o.size > 1 else 0.0
    if mu > 0:
        member = zmf(sigma, 0.10 * mu, 0.20 * mu)
    else:
        # degenerate breakpoints; only a perfectly agreeing vector trusts the mean
        member = 1.0 if sigma == 0 else 0.0
    value = member * mu + (1.0 - member) * md
    if bounds is not None:
        value = float(np.clip(value, bounds[0], bounds[1]))
    return value


def prune_and_evolve(rb: RuleBase, f_s: np.ndarray, t_b: float) -> RuleBase:
    """Append feedback rows not already represented within (eps_x, eps_o) and
    regenerate the rules; an entirely redundant batch leaves the base untouched."""
    rows = np.atleast_2d(np.asarray(f_s, dtype=np.float64))
    if rows.shape[1] != rb.input_dim:
        raise ValueError(f"expected rows of width {rb.input_dim}, got {rows.shape[1]}")
    x_new = rb.normalize(rows)
    x_old = rb.normalize(rb.m_matrix)
    keep = []
    for i in range(rows.shape[0]):
        dist = np.sqrt(((x_old - x_new[i]) ** 2).sum(axis=1))
        redundant = (dist <= rb.eps_x) & (np.abs(rb.o_vector - t_b) <= rb.eps_o)
        if not redundant.any():
            keep.append(i)
    if not keep:
        return rb
    new_m = np.vstack([rb.m_matrix, rows[keep]])
    new_o = np.concatenate([rb.o_vector, np.full(len(keep), float(t_b))])
    return generate_rules(
        new_m,
        new_o,
        norm=(rb.norm_mean, rb.norm_sd),
        eps_x=rb.eps_x,
        eps_o=rb.eps_o,
    )


# ---------------------------------------------------------------------------
# persistence (versioned text; floats as shortest exact repr)
# ---------------------------------------------------------------------------

_MAGIC = "scefis-rulebase v1"


def _fmt(vec: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(vec).ravel())


def save_rulebase(rb: RuleBase, path: str | Path) -> None:
    lines = [
        _MAGIC,
        f"input_dim {rb.input_dim}",
        f"eps_x {rb.eps_x!r}",
        f"eps_o {rb.eps_o!r}",
        "norm_mean " + _fmt(rb.norm_mean),
        "norm_sd " + _fmt(rb.norm_sd),
        f"rows {rb.m_matrix.shape[0]}",
    ]
    lines += ["m " + _fmt(row) for row in rb.m_matrix]
    lines.append("o " + _fmt(rb.o_vector))
    lines.append(f"rules {rb.n_rules}")
    for r in rb.rules:
        lines.append("center " + _fmt(r.center))
        lines.append("sigma " + _fmt(r.sigma))
        lines.append("consequent " + _fmt(r.consequent))
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_vec(line: str, tag: str) -> np.ndarray:
    head, _, rest = line.partition(" ")
    if head != tag:
        raise ValueError(f"expected {tag!r} line, got {head!r}")
    return np.array([float(v) for v in rest.split()]) if rest else np.array([])


def load_rulebase(path: str | Path) -> RuleBase:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ValueError("not a rule base file")
    it = iter(lines[1:])
    input_dim = int(next(it).split()[1])
    eps_x = float(next(it).split()[1])
    eps_o = float(next(it).split()[1])
    norm_mean = _parse_vec(next(it), "norm_mean")
    norm_sd = _parse_vec(next(it), "norm_sd")
    n_rows = int(next(it).split()[1])
    m = np.stack([_parse_vec(next(it), "m") for _ in range(n_rows)])
    o = _parse_vec(next(it), "o")
    n_rules = int(next(it).split()[1])
    rules = []
    for _ in range(n_rules):
        center = _parse_vec(next(it), "center")
        sigma = _parse_vec(next(it), "sigma")
        consequent = _parse_vec(next(it), "consequent")
        rules.append(Rule(center=center, sigma=sigma, consequent=consequent))
    return RuleBase(
        rules=tuple(rules),
        input_dim=input_dim,
        m_matrix=m,
        o_vector=o,
        norm_mean=norm_mean,
        norm_sd=norm_sd,
        eps_x=eps_x,
        eps_o=eps_o,
    )


def rulebases_equal(a: RuleBase, b: RuleBase) -> bool:
    """Bitwise equality of every stored array and threshold."""
    if a.input_dim != b.input_dim or a.n_rules != b.n_rules:
        return False
    if a.eps_x != b.eps_x or a.eps_o != b.eps_o:
        return False
    checks = [
        (a.m_matrix, b.m_matrix),
        (a.o_vector, b.o_vector),
        (a.norm_mean, b.norm_mean),
        (a.norm_sd, b.norm_sd),
    ]
    for ra, rb_ in zip(a.rules, b.rules):
        checks += [(ra.center, rb_.center), (ra.sigma, rb_.sigma), (ra.consequent, rb_.consequent)]
    return all(np.array_equal(x, y) for x, y in checks)
