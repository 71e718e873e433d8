import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtwsoh.dtw import (
    FastDtwConfig,
    WarpPath,
    coarsen,
    dtw_exact,
    expand_window,
    fastdtw,
    path_cost,
    validate_path,
)
from dtwsoh.errors import EmptySeries, InvalidConfig, NonFiniteValue
from oracles import brute_force_dtw, memo_dtw_cost

series = st.lists(st.integers(-20, 20), min_size=1, max_size=64).map(lambda v: np.array(v, dtype=float))


def kinds(violations):
    return [v.kind for v in violations]


def test_identity_is_diagonal():
    s = np.array([3.0, 1.0, 4.0, 1.0, 5.0, 9.0])
    p = dtw_exact(s, s)
    assert p.as_tuples() == [(i, i) for i in range(6)]
    assert p.cost == 0


def test_small_example_matches_enumeration():
    ref, samp = [0, 1, 2], [0, 1, 1, 2]
    best, winners = brute_force_dtw(ref, samp)
    assert best == 0 and winners == [[(0, 0), (1, 1), (1, 2), (2, 3)]]
    p = dtw_exact(ref, samp)
    assert p.cost == 0
    assert p.as_tuples() == [(0, 0), (1, 1), (1, 2), (2, 3)]


def test_single_point_reference():
    p = dtw_exact([5], [1, 2, 3])
    assert p.as_tuples() == [(0, 0), (0, 1), (0, 2)]
    assert p.cost == 9


def test_constant_tie_break():
    # all paths cost 0; backtrace takes diagonals until the sample index hits 0
    p = dtw_exact(np.ones(5), np.ones(3))
    assert p.as_tuples() == [(0, 0), (1, 0), (2, 0), (3, 1), (4, 2)]


@pytest.mark.parametrize("bad", [[], np.array([])])
def test_empty_series(bad):
    with pytest.raises(EmptySeries):
        dtw_exact(bad, [1.0])
    with pytest.raises(EmptySeries):
        fastdtw([1.0], bad)


def test_non_finite():
    with pytest.raises(NonFiniteValue, match="index 1"):
        dtw_exact([1.0, np.nan], [1.0])
    with pytest.raises(NonFiniteValue):
        fastdtw([1.0, 2.0], [np.inf])


def test_config_bounds():
    with pytest.raises(InvalidConfig):
        FastDtwConfig(radius=-1)
    with pytest.raises(InvalidConfig):
        FastDtwConfig(min_size=1)


def test_validate_path_examples():
    diag = WarpPath([(i, i) for i in range(4)], 0.0)
    assert validate_path(diag, 4, 4) == []
    assert kinds(validate_path([(1, 1), (2, 2), (3, 3)], 4, 4)) == ["BoundaryViolation"]
    assert kinds(validate_path([(0, 0), (2, 1), (3, 2), (3, 3)], 4, 4)) == ["ContinuityViolation"]
    assert kinds(validate_path([(0, 0), (1, 1), (1, 0), (2, 1), (3, 2), (3, 3)], 4, 4)) == ["MonotonicityViolation"]
    assert kinds(validate_path([(0, 0), (0, 0), (1, 1)], 2, 2)) == ["ContinuityViolation"]
    assert kinds(validate_path([(0, 0), (1, 1), (2, 2)], 2, 2)) == ["BoundaryViolation", "BoundaryViolation"]
    assert kinds(validate_path(np.zeros((0, 2)), 2, 2)) == ["BoundaryViolation"]


def test_oracle_equivalence_small_corpus():
    rng = np.random.default_rng(0)
    for _ in range(60):
        m, n = rng.integers(1, 9, size=2)
        x = rng.integers(-9, 10, m).astype(float)
        y = rng.integers(-9, 10, n).astype(float)
        assert dtw_exact(x, y).cost == memo_dtw_cost(x, y)


def test_exact_path_is_a_minimiser_by_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(40):
        m, n = rng.integers(1, 6, size=2)
        x = rng.integers(0, 5, m).astype(float)
        y = rng.integers(0, 5, n).astype(float)
        best, winners = brute_force_dtw(x, y)
        p = dtw_exact(x, y)
        assert p.cost == best
        assert p.as_tuples() in winners


@settings(max_examples=80, deadline=None)
@given(series, series)
def test_exact_path_valid_and_cost_consistent(x, y):
    p = dtw_exact(x, y)
    assert validate_path(p, len(x), len(y)) == []
    assert p.cost == pytest.approx(path_cost(x, y, p.pairs), abs=1e-9)


@settings(max_examples=80, deadline=None)
@given(series, series)
def test_cost_symmetry(x, y):
    assert dtw_exact(x, y).cost == dtw_exact(y, x).cost


def test_paths_transpose_when_minimiser_unique():
    rng = np.random.default_rng(8)
    checked = 0
    for _ in range(60):
        m, n = rng.integers(2, 6, size=2)
        x = rng.normal(size=m)
        y = rng.normal(size=n)
        _, winners = brute_force_dtw(x, y)
        if len(winners) == 1:
            checked += 1
            assert dtw_exact(y, x).as_tuples() == dtw_exact(x, y).transpose().as_tuples()
    assert checked > 30


def test_coarsen_carries_odd_tail():
    np.testing.assert_array_equal(coarsen(np.array([1.0, 3.0, 5.0, 7.0, 9.0])), [2.0, 6.0, 9.0])
    np.testing.assert_array_equal(coarsen(np.array([1.0, 3.0])), [2.0])


def test_expand_window_contains_projected_path():
    coarse = np.array([(0, 0), (1, 1), (2, 1), (2, 2)])
    lo, hi = expand_window(coarse, 5, 6, 0)
    for i, j in coarse:
        for a in (2 * i, 2 * i + 1):
            for b in (2 * j, 2 * j + 1):
                if a < 5 and b < 6:
                    assert lo[a] <= b <= hi[a]
    lo, hi = expand_window(coarse, 5, 6, 3)
    assert np.all(lo == 0) and np.all(hi == 5)


def test_fastdtw_identity():
    s = np.sin(np.linspace(0, 7, 300))
    for cfg in (FastDtwConfig(0), FastDtwConfig(1), FastDtwConfig(10, 4)):
        p = fastdtw(s, s, cfg)
        assert p.cost == 0
        assert p.as_tuples() == [(i, i) for i in range(300)]


def test_fastdtw_full_radius_is_exact():
    rng = np.random.default_rng(11)
    for _ in range(30):
        m, n = rng.integers(1, 65, size=2)
        x = rng.integers(0, 20, m).astype(float)
        y = rng.integers(0, 20, n).astype(float)
        cfg = FastDtwConfig(radius=int(max(m, n)), min_size=2)
        assert fastdtw(x, y, cfg).cost == dtw_exact(x, y).cost


def test_fastdtw_long_random_walks_radius_one():
    rng = np.random.default_rng(5)
    x = np.cumsum(rng.normal(size=1000))
    y = np.cumsum(rng.normal(size=1000))
    p = fastdtw(x, y, FastDtwConfig(radius=1))
    assert validate_path(p, 1000, 1000) == []
    assert p.cost >= dtw_exact(x, y).cost


def test_fastdtw_inflation_guard():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(40):
        m, n = rng.integers(2, 257, size=2)
        x = rng.integers(0, 10, m).astype(float)
        y = rng.integers(0, 10, n).astype(float)
        exact = dtw_exact(x, y).cost
        approx = fastdtw(x, y, FastDtwConfig(radius=10)).cost
        assert approx >= exact
        if exact > 0:
            worst = max(worst, (approx - exact) / exact)
    assert worst <= 0.05


def test_fastdtw_radius_bounds():
    # Each radius is bounded below by the exact cost and a radius spanning the
    # series recovers it. Strict monotonicity in radius does not hold in general
    # (see test_radius_monotonicity_counterexample).
    rng = np.random.default_rng(77)
    for _ in range(20):
        m, n = rng.integers(20, 120, size=2)
        x = np.cumsum(rng.normal(size=m))
        y = np.cumsum(rng.normal(size=n))
        exact = dtw_exact(x, y).cost
        costs = [fastdtw(x, y, FastDtwConfig(radius=r)).cost for r in (0, 1, 2, 5, 10)]
        assert min(costs) >= exact - 1e-9
        assert fastdtw(x, y, FastDtwConfig(radius=int(max(m, n)))).cost == pytest.approx(exact, abs=1e-9)


def test_radius_monotonicity_counterexample():
    rng = np.random.default_rng(0)
    x = np.cumsum(rng.normal(size=1000))
    y = np.cumsum(rng.normal(size=1000))
    c5 = fastdtw(x, y, FastDtwConfig(radius=5)).cost
    c10 = fastdtw(x, y, FastDtwConfig(radius=10)).cost
    assert c10 > c5


def test_fastdtw_half_radius_recursion_is_exact():
    # radius covering the coarse grid skips the shortcut yet still yields a full window
    rng = np.random.default_rng(12)
    for _ in range(30):
        m, n = rng.integers(8, 65, size=2)
        x = rng.integers(0, 20, m).astype(float)
        y = rng.integers(0, 20, n).astype(float)
        r = (int(max(m, n)) + 1) // 2
        assert fastdtw(x, y, FastDtwConfig(radius=r, min_size=2)).cost == dtw_exact(x, y).cost
