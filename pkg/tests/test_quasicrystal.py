import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles as O
from quasiriesz.coboundary import build_coboundary, evaluate_float
from quasiriesz.diophantine import IrrationalAlpha, golden, silver
from quasiriesz.errors import OutOfWindow
from quasiriesz.quasicrystal import (
    centered_slice,
    counting_function,
    density_profile,
    lambda_slice,
    write_slice_csv,
)
from quasiriesz.torus_sets import MultibandSet, TorusInterval

HALF = MultibandSet.interval(0, Fraction(1, 2))
# frozen from the 256-bit oracle scan
GOLDEN_HALF_0_10 = [0, 2, 4, 5, 7]


def test_lambda_slice_examples():
    sl = lambda_slice(golden(), HALF, 0, 10)
    assert sl.elements.tolist() == GOLDEN_HALF_0_10
    assert lambda_slice(golden(), MultibandSet.full(), -3, 3).elements.tolist() == [-3, -2, -1, 0, 1, 2]
    assert lambda_slice(silver(), MultibandSet.empty(), 0, 100).elements.tolist() == []


def test_lambda_slice_matches_oracle_on_window():
    a = golden()
    S = MultibandSet.interval(Fraction(1, 7), a.exact - Fraction(1, 3))
    sl = lambda_slice(a, S, -500, 500)
    ref = [n for n in range(-500, 500)
           if O.in_intervals(O.orbit(O.GOLDEN, n), [(1, O.mp.mpf(1) / 7, O.GOLDEN - O.mp.mpf(1) / 3)]) == 1]
    assert sl.elements.tolist() == ref


def test_lambda_slice_exact_boundaries():
    # {n alpha} hits the endpoints alpha and {2 alpha} exactly at n = 1, 2
    a = golden()
    S = MultibandSet.interval(a.exact, a.exact)
    assert S.intervals[0].right == (2 * a.exact).frac()
    sl = lambda_slice(a, S, 0, 5)
    assert 1 in sl.elements.tolist()
    assert 2 not in sl.elements.tolist()


def test_lambda_slice_preconditions():
    with pytest.raises(ValueError):
        lambda_slice(golden(), HALF, 5, 5)
    with pytest.raises(ValueError):
        lambda_slice(golden(), HALF, 0, 10**8 + 1)


def test_float_mode_flags_grazing_points():
    a = IrrationalAlpha.from_decimal("0.6180339887498948482045868343656")
    S = MultibandSet.interval(0, Fraction(6180339887, 10**10))
    sl = lambda_slice(a, S, 0, 10)
    assert 1 in sl.boundary_warnings.tolist()
    assert lambda_slice(golden(), MultibandSet.interval(0, golden().exact), 0, 10).boundary_warnings.size == 0


def test_counting_function_examples():
    sl = lambda_slice(golden(), HALF, 0, 10)
    assert counting_function(sl, 6) == 4
    assert counting_function(sl, 0) == 0
    with pytest.raises(OutOfWindow):
        counting_function(sl, -1)


@given(st.floats(-200, 200), st.floats(-200, 200))
def test_counting_function_monotone(x, y):
    sl = lambda_slice(silver(), HALF, -200, 200)
    lo, hi = min(x, y), max(x, y)
    assert counting_function(sl, lo) <= counting_function(sl, hi)
    # increments only at elements
    between = ((sl.elements >= lo) & (sl.elements < hi)).sum()
    assert counting_function(sl, hi) - counting_function(sl, lo) == between


def test_density_examples():
    full = lambda_slice(golden(), MultibandSet.full(), 0, 1000)
    assert all(lo == hi == 1 for _, lo, hi in density_profile(full, [8, 64, 256]))
    empty = lambda_slice(golden(), MultibandSet.empty(), 0, 1000)
    assert all(lo == hi == 0 for _, lo, hi in density_profile(empty, [8, 64]))
    a = golden()
    sl = lambda_slice(a, MultibandSet.interval(0, a.exact), 0, 10**5)
    (_, lo, hi), = density_profile(sl, [10**4])
    # oracle scan of the same window: min 0.618, max 0.6181
    assert (lo, hi) == (0.618, 0.6181)
    assert abs(lo - a.value) < 1e-3 and abs(hi - a.value) < 1e-3


@pytest.mark.parametrize("alpha", [golden(), silver()])
def test_density_brackets_measure(alpha):
    S = MultibandSet.interval(Fraction(1, 5), Fraction(1, 3))
    sl = lambda_slice(alpha, S, 0, 40_000)
    for r, lo, hi in density_profile(sl):
        assert lo <= S.measure() <= hi


def test_density_rejects_large_r():
    sl = lambda_slice(golden(), HALF, 0, 100)
    with pytest.raises(ValueError):
        density_profile(sl, [51])


def test_centered_slice():
    sl = centered_slice(golden(), HALF, 9)
    el = sl.elements
    assert len(el) == 9 and (el >= 0).sum() == 4
    ref = lambda_slice(golden(), HALF, -100, 100).elements
    neg = ref[ref < 0][-5:]
    pos = ref[ref >= 0][:4]
    assert el.tolist() == neg.tolist() + pos.tolist()


def test_counting_matches_coboundary_bound():
    # for a multiband set with a certificate the window counts deviate from
    # (n - m) mes S by at most 2 sup|g|
    a = golden()
    S = MultibandSet.combination([(1, TorusInterval(0, (3 * a.exact).frac())),
                                  (-1, TorusInterval(Fraction(1, 10), a.exact))])
    g = build_coboundary(S, a)
    # grid sup plus the largest change of g between grid points
    grid = np.arange(10**6) / 10**6
    sup_g = np.max(np.abs(evaluate_float(g, grid))) + sum(abs(c) for c, _ in g.terms) * 1e-6
    assert sup_g <= g.sup_bound()
    bound = 2 * sup_g
    sl = lambda_slice(a, S, -3000, 3000)
    rng = np.random.default_rng(4)
    for _ in range(200):
        m, n = sorted(rng.integers(-3000, 3001, size=2).tolist())
        count = ((sl.elements >= m) & (sl.elements < n)).sum()
        assert abs(count - (n - m) * S.measure()) <= bound


def test_write_slice_csv():
    sl = lambda_slice(golden(), HALF, 0, 4)
    buf = io.StringIO()
    write_slice_csv(sl, buf)
    lines = buf.getvalue().split("\n")
    assert lines[0] == "n,frac_n_alpha,in_S,boundary_flag"
    assert lines[1] == "0,0.0,1,0"
    assert lines[2].startswith("1,0.618033988749894") and lines[2].endswith(",0,0")
    assert "\r" not in buf.getvalue()
