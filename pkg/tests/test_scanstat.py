import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from replicaload import demand as dm
from replicaload import scanstat as sc
from replicaload.errors import TooShort, WindowTooLarge


def test_small_examples():
    assert sc.scan_statistic([0, 3, 1, 2], 2) == 4
    assert sc.scan_statistic([0, 3, 1, 2], 2, circular=True) == 4
    assert sc.scan_statistic([5, 0, 0, 0], 2, circular=True) == 5
    assert sc.scan_statistic([1, 0, 0, 2], 2, circular=True) == 3
    assert sc.scan_statistic([1, 0, 0, 2], 2) == 2


def test_window_checks():
    with pytest.raises(WindowTooLarge):
        sc.ScanQuery(5, 6, 1.0)
    with pytest.raises(WindowTooLarge):
        sc.scan_statistic([1, 2], 3)
    with pytest.raises(TooShort):
        sc.scan_cdf_naus(dm.Exp(1.0), sc.ScanQuery(10, 4, 5.0))


@given(st.lists(st.floats(0, 100), min_size=1, max_size=40), st.data())
def test_against_brute_force(xs, data):
    n = len(xs)
    s = data.draw(st.integers(1, n))
    lin = max(sum(xs[i : i + s]) for i in range(n - s + 1))
    circ = max(sum(xs[(i + j) % n] for j in range(s)) for i in range(n))
    assert sc.scan_statistic(xs, s) == pytest.approx(lin, rel=1e-9, abs=1e-9)
    assert sc.scan_statistic(xs, s, True) == pytest.approx(circ, rel=1e-9, abs=1e-9)


@given(st.lists(st.floats(0, 10), min_size=2, max_size=30), st.data())
def test_circular_shift_invariant(xs, data):
    s = data.draw(st.integers(1, len(xs)))
    k = data.draw(st.integers(0, len(xs) - 1))
    assert sc.scan_statistic(np.roll(xs, k), s, True) == pytest.approx(sc.scan_statistic(xs, s, True), abs=1e-9)


def test_long_windows_use_running_sum():
    X = np.random.default_rng(1).random((50, 200))
    for s in (17, 64, 200):
        want = np.array([max(row[i : i + s].sum() for i in range(200 - s + 1)) for row in X])
        assert np.allclose(sc.scan_batch(X, s), want)


def test_trivial_models():
    q = sc.ScanQuery(10, 3, 2.5)
    assert sc.scan_cdf_mc(dm.Bernoulli(1.0, 0.0), q, 1000, 0).p_hat == 1.0
    assert sc.scan_cdf_mc(dm.Bernoulli(1.0, 1.0), q, 1000, 0).p_hat == 0.0
    assert sc.scan_cdf_poisson(dm.Bernoulli(1.0, 0.5), sc.ScanQuery(10, 3, 3.0)) == 1.0


def test_poisson_arithmetic():
    v = sc.scan_cdf_poisson(dm.Bernoulli(1.0, 0.1), sc.ScanQuery(100, 3, 1.5))
    assert v == pytest.approx(math.exp(-98 * 0.028), rel=1e-12)


def test_mc_against_larger_run():
    q = sc.ScanQuery(20, 2, 4.0, circular=True)
    small = sc.scan_cdf_mc(dm.Exp(1.0), q, 100_000, 1)
    big = sc.scan_cdf_mc(dm.Exp(1.0), q, 1_000_000, 2)
    assert abs(small.p_hat - big.p_hat) <= small.half_width + big.half_width


def test_circular_sandwich():
    n, s, x = 60, 4, 7.0
    vals = sc.scan_samples(dm.Exp(1.0), n, [(s, False), (s, True)], 100_000, 3)
    lin, circ = vals[(s, False)], vals[(s, True)]
    assert np.all(circ >= lin)
    p_lin, p_circ = np.mean(lin > x), np.mean(circ > x)
    se = math.sqrt(p_circ * (1 - p_circ) / lin.size)
    assert p_lin <= p_circ <= n / (n - s) * p_lin + 3 * se


def test_workers_do_not_change_samples():
    a = sc.scan_samples(dm.Exp(1.0), 30, [(3, True)], 5000, 4, workers=1)
    b = sc.scan_samples(dm.Exp(1.0), 30, [(3, True)], 5000, 4, workers=2)
    assert np.array_equal(a[(3, True)], b[(3, True)])
