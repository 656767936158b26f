import numpy as np
import pytest
from hypothesis import given, strategies as st

from replicaload import allocation as al
from replicaload import demand as dm
from replicaload import feasibility as fe
from replicaload.errors import LengthMismatch, NonpositiveThreshold, TooLarge

KINDS = ["clustering", "cyclic", "random", "random-block-approx", "constrained-random"]
MODELS = [dm.Exp(1.0), dm.Bernoulli(2.0, 0.4), dm.Pareto(0.5, 2.0)]


@st.composite
def instances(draw, max_k=10):
    kind = draw(st.sampled_from(KINDS + ["block"]))
    d = draw(st.integers(2, 3))
    if kind == "block":
        n = d * d - d + 1
    elif kind == "clustering":
        n = d * draw(st.integers(1, max_k // d))
    else:
        n = draw(st.integers(d + 1, max_k))
    seed = draw(st.integers(0, 10**6))
    alloc = al.build(kind, n, d, seed if al.DesignKind.parse(kind).kind.randomized else None)
    model = draw(st.sampled_from(MODELS))
    rho = dm.sample(model, alloc.n_objects, np.random.default_rng(seed))
    m = draw(st.sampled_from([0.5, 1.0, 1.7]))
    return alloc, rho, m


def test_examples():
    a = al.build("cyclic", 4, 2)
    assert fe.check_flow(a, [1, 1, 1, 1], 1.0).feasible
    v = fe.check_flow(a, [2, 2, 0, 0], 1.0)
    assert not v.feasible and v.violating == (0, 1) and v.excess == pytest.approx(1.0)
    assert v.describe() == "infeasible I={0,1}"
    s = fe.check_subsets(a, [2, 2, 0, 0], 1.0)
    assert s.max_served == pytest.approx(3.0)
    assert fe.check_flow(a, [2, 1, 0, 0], 1.0).feasible  # span 3 holds demand 3 exactly


@given(instances())
def test_routes_agree(inst):
    alloc, rho, m = inst
    f = fe.check_flow(alloc, rho, m)
    s = fe.check_subsets(alloc, rho, m)
    assert f.feasible == s.feasible
    assert f.max_served == pytest.approx(s.max_served, rel=1e-9, abs=1e-9)


@given(instances())
def test_witnesses(inst):
    alloc, rho, m = inst
    for v in (fe.check_flow(alloc, rho, m), fe.check_subsets(alloc, rho, m)):
        if not v.feasible:
            I = list(v.violating)
            assert rho[I].sum() > m * al.span(alloc, I)
    v = fe.check_flow(alloc, rho, m)
    if v.feasible:
        loads = v.node_loads(alloc)
        assert np.all(loads <= m + 1e-9)
        served = np.add.reduceat(v.flow, alloc.indptr[:-1])
        assert np.allclose(served, rho, atol=1e-9)


@given(instances(), st.floats(1.0, 3.0), st.floats(0.0, 1.0))
def test_monotone(inst, grow, shrink):
    alloc, rho, m = inst
    if fe.check_flow(alloc, rho, m).feasible:
        assert fe.check_flow(alloc, rho, m * grow).feasible
        assert fe.check_flow(alloc, rho * shrink, m).feasible


@given(instances())
def test_min_threshold(inst):
    alloc, rho, _ = inst
    m_star = fe.min_threshold(alloc, rho)
    if rho.sum() == 0:
        assert m_star == 0.0
        return
    assert fe.check_flow(alloc, rho, m_star).feasible
    if m_star > 1e-3:
        assert not fe.check_flow(alloc, rho, m_star * (1 - 1e-4)).feasible


def test_errors():
    a = al.build("cyclic", 4, 2)
    with pytest.raises(LengthMismatch):
        fe.check_flow(a, [1, 1, 1], 1.0)
    with pytest.raises(NonpositiveThreshold):
        fe.check_flow(a, [1, 1, 1, 1], 0.0)
    with pytest.raises(ValueError):
        fe.check_flow(a, [1, -1, 1, 1], 1.0)
    with pytest.raises(TooLarge):
        fe.check_subsets(al.build("cyclic", 23, 2), np.ones(23), 1.0)
