import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from replicaload import allocation as al
from replicaload.errors import (
    AlreadyStored,
    BudgetExceeded,
    IndexOutOfRange,
    NoBlockDesign,
    NotStored,
    ParameterMismatch,
)

BALANCED = [("clustering", 9, 3), ("clustering", 12, 4), ("cyclic", 9, 3), ("cyclic", 10, 4),
            ("block", 7, 3), ("block", 13, 4), ("block", 21, 5), ("block", 14, 3)]


def test_small_examples():
    a = al.build("clustering", 6, 2)
    assert a.choices == ((0, 1), (0, 1), (2, 3), (2, 3), (4, 5), (4, 5))
    c = al.build("cyclic", 5, 3)
    assert set(c.choices[4]) == {4, 0, 1}
    assert al.span(c, [0, 1]) == 4
    assert al.build("single-choice:b=2", 3, 1).choices == ((0,), (0,), (1,), (1,), (2,), (2,))


def test_block_pairs_meet_once():
    for d in (2, 3, 4, 5, 6, 8):
        a = al.build("block", d * d - d + 1, d)
        O = al.overlap_matrix(a)
        off = O[~np.eye(a.n_objects, dtype=bool)]
        assert np.all(off == 1)


def test_block_copies():
    a = al.build("block", 14, 3)
    O = al.overlap_matrix(a)
    assert np.all(O[:7, 7:] == 0)
    assert a.is_balanced


def test_block_missing_d7():
    with pytest.raises(NoBlockDesign):
        al.difference_set(7)


@pytest.mark.parametrize("kind,n,d", [("clustering", 10, 3), ("block", 8, 3), ("single-choice", 4, 2), ("cyclic", 2, 3)])
def test_parameter_mismatch(kind, n, d):
    with pytest.raises(ParameterMismatch):
        al.build(kind, n, d)


def test_randomized_kinds_need_seed():
    with pytest.raises(ValueError):
        al.build("random", 10, 3)


@pytest.mark.parametrize("kind,n,d", BALANCED)
def test_balanced_loads_and_regularity(kind, n, d):
    a = al.build(kind, n, d)
    assert all(len(set(c)) == d for c in a.choices)
    assert np.all(a.loads == d)


@given(st.sampled_from(["random", "random-block-approx", "constrained-random"]),
       st.integers(6, 30), st.integers(2, 4), st.integers(0, 10**6))
def test_random_designs_regular(kind, n, d, seed):
    a = al.build(kind, n, d, seed)
    assert all(len(set(c)) == d for c in a.choices)
    assert int(a.loads.sum()) == n * d
    assert a == al.build(kind, n, d, seed)


@pytest.mark.parametrize("kind,n,d", BALANCED)
def test_cum_overlap_identity(kind, n, d):
    a = al.build(kind, n, d)
    for t in range(2, d + 1):
        want = n * math.comb(d, t)
        assert al.cum_overlap(a, t) == want
        assert al.cum_overlap(a, t, method="nodes") == want


@given(st.integers(6, 16), st.integers(2, 4), st.integers(0, 10**6), st.integers(2, 4))
def test_cum_overlap_routes_agree(n, d, seed, t):
    a = al.build("random", n, d, seed)
    assert al.cum_overlap(a, t) == al.cum_overlap(a, t, method="nodes")


def _regular_allocations(n, d):
    subsets = list(itertools.combinations(range(n), d))
    return itertools.product(subsets, repeat=n)


@pytest.mark.parametrize("n", [3, 4])
def test_cum_overlap_minimal_when_balanced(n):
    # exhaustive over every 2-regular allocation of n objects on n nodes
    best = min(sum(math.comb(L, 2) for L in np.bincount(np.ravel(ch), minlength=n))
               for ch in _regular_allocations(n, 2))
    assert best == al.cum_overlap(al.build("cyclic", n, 2), 2)


def test_cum_overlap_minimal_n5_sampled():
    rng = np.random.default_rng(3)
    target = al.cum_overlap(al.build("cyclic", 5, 2), 2)
    subsets = list(itertools.combinations(range(5), 2))
    for _ in range(20000):
        ch = [subsets[i] for i in rng.integers(0, len(subsets), 5)]
        assert sum(math.comb(int(L), 2) for L in np.bincount(np.ravel(ch), minlength=5)) >= target


@given(st.integers(0, 10**6), st.integers(2, 3))
def test_move_changes_overlap_by_load_delta(seed, t):
    rng = np.random.default_rng(seed)
    a = al.build("random", int(rng.integers(5, 12)), 3, seed)
    for _ in range(5):
        obj = int(rng.integers(a.n_objects))
        src = int(rng.choice(a.choices[obj]))
        free = [x for x in range(a.n_nodes) if x not in a.choices[obj]]
        if not free:
            continue
        dst = int(rng.choice(free))
        u, v = int(a.loads[src]), int(a.loads[dst])
        b = al.move_object(a, obj, src, dst)
        assert al.cum_overlap(b, t) == al.cum_overlap(a, t) - (math.comb(u - 1, t - 1) - math.comb(v, t - 1))
        a = b


def test_move_errors():
    a = al.build("cyclic", 5, 2)
    with pytest.raises(NotStored):
        al.move_object(a, 0, 3, 4)
    with pytest.raises(AlreadyStored):
        al.move_object(a, 0, 0, 1)
    with pytest.raises(IndexOutOfRange):
        al.move_object(a, 9, 0, 1)


@given(st.integers(4, 40), st.integers(1, 6), st.data())
def test_cyclic_window_span(n, d, data):
    d = min(d, n)
    a = al.build("cyclic", n, d)
    x = data.draw(st.integers(1, n))
    start = data.draw(st.integers(0, n - 1))
    s = al.span(a, [(start + j) % n for j in range(x)])
    assert s == min(x + d - 1, n)
    assert x <= s <= x + 2 * (d - 1)


def test_r_gap():
    c = al.build("cyclic", 12, 3)
    assert al.is_r_gap(c, 2)
    assert not al.is_r_gap(c, 1)
    assert al.is_r_gap(al.build("clustering", 12, 3), 2)
    assert not al.is_r_gap(al.build("block", 7, 3), 2)


def test_overlap_profile_and_span_distribution():
    assert al.overlap_profile(al.build("clustering", 9, 3)).by_size == {3: 1.0}
    assert al.overlap_profile(al.build("block", 7, 3)).by_size == {1: 1.0}
    dist = al.span_t_distribution(al.build("clustering", 4, 2), 2)
    assert dist == {2: pytest.approx(1 / 3), 4: pytest.approx(2 / 3)}
    b = al.build("block", 13, 4)
    assert al.span_t_distribution(b, 2) == {7: 1.0}
    samp = al.span_t_distribution(al.build("cyclic", 20, 3), 3, "sampled", 20000, 1)
    exact = al.span_t_distribution(al.build("cyclic", 20, 3), 3)
    for v, p in exact.items():
        assert abs(samp.get(v, 0.0) - p) < 0.015


def test_cum_span_matches_brute_force():
    a = al.build("random", 8, 3, 4)
    want = sum(al.span(a, c) for c in itertools.combinations(range(8), 3))
    assert al.cum_span(a, 3) == want


def test_enumeration_budget():
    a = al.build("cyclic", 200, 3)
    with pytest.raises(BudgetExceeded):
        al.cum_overlap(a, 5)


def test_text_round_trip(tmp_path):
    a = al.build("constrained-random", 12, 3, 9)
    path = tmp_path / "a.txt"
    a.save(path)
    b = al.StorageAllocation.load(path)
    assert b.choices == a.choices and b.n_nodes == a.n_nodes and b.seed == 9


def test_sibling_limit():
    a = al.build("constrained-random:v_max=1", 30, 3, 2)
    assert np.all(al.sibling_overlaps(a, 3) <= 1)


def test_approx_block_overlaps_small():
    prof = al.overlap_profile(al.build("random-block-approx", 100, 10, 0))
    assert prof.by_size[1] > 0.6
