import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from scefis.images import BinaryMask
from scefis.metrics import jaccard, paired_t_test, summarize, welch_t_test


def mask(arr):
    return BinaryMask.from_array(np.asarray(arr, dtype=bool))


# --- independent oracles -------------------------------------------------

def t_pdf(x, df):
    c = math.gamma((df + 1) / 2) / (math.sqrt(df * math.pi) * math.gamma(df / 2))
    return c * (1 + x * x / df) ** (-(df + 1) / 2)


def t_cdf(x, df):
    val, _ = quad(t_pdf, 0.0, abs(x), args=(df,))
    return 0.5 + math.copysign(val, x)


def t_quantile(p, df):
    lo, hi = 0.0, 50.0
    for _ in range(200):
        mid = (lo + hi) / 2
        if t_cdf(mid, df) < p:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


# --- jaccard --------------------------------------------------------------

def test_jaccard_identity():
    m = mask([[1, 0], [1, 1]])
    assert jaccard(m, m) == 1.0


def test_jaccard_disjoint():
    a = mask([[1, 0], [0, 0]])
    b = mask([[0, 1], [0, 1]])
    assert jaccard(a, b) == 0.0


def test_jaccard_direct_count():
    # s = {(0,0),(0,1)}, g = {(0,1),(1,1)}: one shared pixel, three in the union
    s = mask([[1, 1], [0, 0]])
    g = mask([[0, 1], [0, 1]])
    assert jaccard(s, g) == pytest.approx(1.0 / 3.0)


def test_jaccard_both_empty_is_one():
    z = mask(np.zeros((3, 3)))
    assert jaccard(z, z) == 1.0


def test_jaccard_one_empty_is_zero():
    z = mask(np.zeros((3, 3)))
    f = mask(np.ones((3, 3)))
    assert jaccard(z, f) == 0.0


def test_jaccard_dimension_mismatch():
    with pytest.raises(ValueError):
        jaccard(mask(np.zeros((2, 2))), mask(np.zeros((3, 3))))


@given(st.integers(0, 2**16 - 1), st.integers(0, 2**16 - 1))
def test_jaccard_symmetric(bits_a, bits_b):
    a = mask(np.array([(bits_a >> i) & 1 for i in range(16)]).reshape(4, 4))
    b = mask(np.array([(bits_b >> i) & 1 for i in range(16)]).reshape(4, 4))
    assert jaccard(a, b) == jaccard(b, a)


@given(st.data())
def test_jaccard_subset_ratio(data):
    # for s a subset of g, jaccard reduces to |s| / |g|
    g_bits = data.draw(st.lists(st.booleans(), min_size=16, max_size=16))
    g_arr = np.array(g_bits).reshape(4, 4)
    keep = data.draw(st.lists(st.booleans(), min_size=16, max_size=16))
    s_arr = g_arr & np.array(keep).reshape(4, 4)
    g, s = mask(g_arr), mask(s_arr)
    if g_arr.sum() > 0:
        assert jaccard(s, g) == pytest.approx(s_arr.sum() / g_arr.sum())


def test_jaccard_one_iff_equal():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = rng.random((5, 5)) > 0.5
        b = rng.random((5, 5)) > 0.5
        j = jaccard(mask(a), mask(b))
        assert (j == 1.0) == np.array_equal(a, b)


# --- summarize ------------------------------------------------------------

def test_summarize_zero_variance():
    s = summarize([0.5, 0.5, 0.5])
    assert s.mean == 0.5 and s.sd == 0.0
    assert s.ci_lo == 0.5 and s.ci_hi == 0.5


def test_summarize_single_value():
    s = summarize([0.7])
    assert s.mean == 0.7 and s.ci_lo == 0.7 and s.ci_hi == 0.7 and s.n == 1


def test_summarize_t_quantile_oracle_n10():
    # frozen from the integral oracle: t(0.975, df=9)
    t9 = t_quantile(0.975, 9)
    assert t9 == pytest.approx(2.2621571627, abs=1e-6)
    rng = np.random.default_rng(42)
    scores = rng.random(10)
    s = summarize(list(scores))
    half = t9 * scores.std(ddof=1) / math.sqrt(10)
    assert s.ci_lo == pytest.approx(scores.mean() - half, abs=1e-9)
    assert s.ci_hi == pytest.approx(scores.mean() + half, abs=1e-9)


def test_summarize_empty_rejected():
    with pytest.raises(ValueError):
        summarize([])


@settings(max_examples=30)
@given(st.floats(0.01, 0.3), st.integers(2, 40))
def test_summary_ci_width_shrinks_with_n(sd, n):
    # same sd, larger n: the CI can only tighten
    rng = np.random.default_rng(7)
    base = rng.standard_normal(n + 5)
    a = base[:n] / base[:n].std(ddof=1) * sd
    b = base / base.std(ddof=1) * sd
    wa = summarize(list(a)).ci_hi - summarize(list(a)).ci_lo
    wb = summarize(list(b)).ci_hi - summarize(list(b)).ci_lo
    assert wb <= wa + 1e-12


# --- t-tests ---------------------------------------------------------------

def test_paired_t_identical_samples():
    a = [0.1, 0.4, 0.3]
    assert paired_t_test(a, a) == (0.0, 1.0)


def test_paired_t_constant_nonzero_difference():
    # exactly representable values so the differences are bit-identical
    a = [0.125, 0.25, 0.375, 0.5]
    b = [x + 0.25 for x in a]
    t, p = paired_t_test(a, b)
    assert math.isinf(t) and t < 0
    assert p == 0.0


def test_paired_t_matches_formula_oracle():
    a = [0.1, 0.2, 0.3, 0.4]
    b = [0.2, 0.31, 0.39, 0.52]
    t, p = paired_t_test(a, b)
    d = np.array(a) - np.array(b)
    t_ref = d.mean() / (d.std(ddof=1) / math.sqrt(len(d)))
    assert t == pytest.approx(t_ref, abs=1e-9)
    p_ref = 2 * (1 - t_cdf(abs(t_ref), len(d) - 1))
    assert p == pytest.approx(p_ref, abs=1e-9)


def test_paired_t_length_mismatch():
    with pytest.raises(ValueError):
        paired_t_test([0.1, 0.2], [0.1])


def test_welch_t_zero_for_identical():
    a = [0.1, 0.5, 0.9, 0.2]
    t, p = welch_t_test(a, a)
    assert t == pytest.approx(0.0)
    assert p == pytest.approx(1.0)


def test_welch_t_reasonable_p():
    rng = np.random.default_rng(3)
    a = list(rng.normal(0.0, 1.0, 30))
    b = list(rng.normal(2.0, 1.0, 30))
    t, p = welch_t_test(a, b)
    assert t < 0 and p < 1e-6
