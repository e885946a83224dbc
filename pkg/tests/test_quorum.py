import math
import random

import numpy as np
import pytest
from hypothesis import assume, example, given, settings
from hypothesis import strategies as st

from oracles import config_oracle, minimal_quorums, quorum_time_oracle, safety_oracle
from weighted_hotstuff.errors import InvalidParameter, QuorumUnreachable
from weighted_hotstuff.quorum import (
    Scheme,
    WeightAssignment,
    check_continuous_safety,
    make_config,
    make_continuous_assignment,
    make_discrete_assignment,
    make_equal_assignment,
    select_faulty,
    time_to_form_quorum,
    verify_witness,
)

GRID = [(f, d) for f in range(1, 5) for d in range(0, 4)]


@pytest.mark.parametrize("f, delta", GRID)
def test_config_matches_formulas(f, delta):
    c = make_config(f, delta)
    n, q_v, v_max, v_min = config_oracle(f, delta)
    assert (c.n, c.q_v, c.v_min) == (n, q_v, v_min)
    assert c.v_max == float(v_max)
    assert c.v_max >= c.v_min


@pytest.mark.parametrize("f, delta, expected", [
    (1, 1, (5, 5, 2.0)),
    (1, 0, (4, 3, 1.0)),
    (2, 1, (8, 7, 1.5)),
])
def test_config_examples(f, delta, expected):
    c = make_config(f, delta)
    assert (c.n, c.q_v, c.v_max, c.v_min) == (*expected, 1.0)


@pytest.mark.parametrize("f, delta", [(0, 1), (-1, 0), (1, -1), (True, 0)])
def test_config_invalid(f, delta):
    with pytest.raises(InvalidParameter):
        make_config(f, delta)


def test_discrete_examples():
    a = make_discrete_assignment(make_config(1, 1), {0, 1})
    assert a.weights == (2, 2, 1, 1, 1)
    assert a.scheme is Scheme.DISCRETE and a.threshold == 5
    assert make_discrete_assignment(make_config(1, 0), {2, 3}).weights == (1, 1, 1, 1)
    with pytest.raises(InvalidParameter):
        make_discrete_assignment(make_config(1, 1), {0})
    with pytest.raises(InvalidParameter):
        make_discrete_assignment(make_config(1, 1), [0, 5])
    with pytest.raises(InvalidParameter):
        make_discrete_assignment(make_config(1, 1), [0, 0])


def test_equal_baseline_keeps_weighted_threshold():
    a = make_equal_assignment(make_config(1, 1))
    assert a.weights == (1,) * 5 and a.threshold == 5
    assert a.scheme is Scheme.EQUAL_BASELINE


def test_weights_must_be_in_range():
    with pytest.raises(InvalidParameter):
        WeightAssignment((2.5, 1, 1, 1), Scheme.CONTINUOUS, 2)
    with pytest.raises(InvalidParameter):
        WeightAssignment((1, 1, 1, 1), Scheme.CONTINUOUS, 0)
    with pytest.raises(InvalidParameter):
        make_continuous_assignment([1, 0, 0, 0], 1)


@pytest.mark.parametrize("f, delta", GRID)
def test_discrete_totals_and_availability(f, delta):
    c = make_config(f, delta)
    for positions in [range(2 * f), range(c.n - 2 * f, c.n)]:
        a = make_discrete_assignment(c, positions)
        assert math.isclose(a.total, c.n + 2 * delta)
        assert math.isclose(a.total - f * c.v_max, c.q_v)
        survivors = [w for i, w in enumerate(a.weights) if i not in set(select_faulty(a, f))]
        assert math.isclose(math.fsum(survivors), c.q_v)


@pytest.mark.parametrize("f, delta", GRID)
def test_discrete_minimal_quorum_cardinality(f, delta):
    c = make_config(f, delta)
    if c.n > 10:
        pytest.skip("enumeration too large")
    a = make_discrete_assignment(c, range(2 * f))
    for q in minimal_quorums(a.weights, c.q_v):
        assert 2 * f + 1 <= len(q) <= c.n - f


def test_time_to_form_quorum_examples():
    w = [2, 2, 1, 1, 1]
    assert time_to_form_quorum([10, 20, 30, 40, 50], w, 5) == 30
    lat = [17.0, 3.0, 99.0, 4.0, 8.0]
    assert time_to_form_quorum(lat, [1] * 5, 5) == max(lat)
    assert time_to_form_quorum([math.inf, 20, 30, 40, 50], w, 5) == 50


def test_time_to_form_quorum_uses_assignment_threshold():
    a = make_discrete_assignment(make_config(1, 1), {0, 1})
    assert time_to_form_quorum([10, 20, 30, 40, 50], a) == 30


def test_time_to_form_quorum_unreachable():
    with pytest.raises(QuorumUnreachable) as exc:
        time_to_form_quorum([math.inf, 1, 2, 3, 4], [1] * 5, 5)
    assert exc.value.available == 4 and exc.value.threshold == 5
    with pytest.raises(InvalidParameter):
        time_to_form_quorum([1, 2], [1, 1], 0)
    with pytest.raises(InvalidParameter):
        time_to_form_quorum([1, 2, 3], [1, 1], 1)


def _random_instance(rng):
    n = rng.randint(1, 8)
    lat = [rng.choice([rng.uniform(0, 500), float(rng.randint(0, 5))]) for _ in range(n)]
    for i in range(n):
        if rng.random() < 0.15:
            lat[i] = math.inf
    w = [rng.choice([rng.uniform(0, 2), 1.0, 2.0, 0.0]) for _ in range(n)]
    threshold = rng.uniform(0.05, max(sum(w), 0.1))
    return lat, w, threshold


def test_quorum_time_matches_oracle_1000():
    rng = random.Random(20240501)
    for _ in range(1000):
        lat, w, threshold = _random_instance(rng)
        expected = quorum_time_oracle(lat, w, threshold)
        if expected is None:
            with pytest.raises(QuorumUnreachable):
                time_to_form_quorum(lat, w, threshold)
        else:
            assert time_to_form_quorum(lat, w, threshold) == expected


latency = st.floats(0, 1000, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(data=st.data(), n=st.integers(1, 8))
def test_quorum_time_monotone(data, n):
    lat = data.draw(st.lists(latency, min_size=n, max_size=n))
    w = data.draw(st.lists(st.floats(0, 2), min_size=n, max_size=n))
    assume(sum(w) > 0.01)
    threshold = data.draw(st.floats(0.01, sum(w)))
    base = time_to_form_quorum(lat, w, threshold)
    i = data.draw(st.integers(0, n - 1))
    bump = data.draw(st.floats(0, 500))
    raised = list(lat)
    raised[i] += bump
    assert time_to_form_quorum(raised, w, threshold) >= base
    higher = data.draw(st.floats(threshold, sum(w)))
    assert time_to_form_quorum(lat, w, higher) >= base


@pytest.mark.parametrize("w, f, expected", [
    ([2, 2, 1, 1, 1], 1, [0]),
    ([1, 1, 1, 1, 1], 1, [0]),
    ([1, 1.7, 0.3, 1, 1], 2, [1, 0]),
])
def test_select_faulty_examples(w, f, expected):
    assert select_faulty(w, f) == expected


def test_select_faulty_bounds():
    with pytest.raises(InvalidParameter):
        select_faulty([1, 1, 1, 1], 4)


def test_safety_worked_examples():
    r = check_continuous_safety([2, 2, 1, 1, 1], 1)
    assert r.valid and r.threshold == 5 and r.witness is None
    r = check_continuous_safety([2, 2, 2, 0, 0], 1)
    assert not r.valid and r.threshold == 4
    a, b = r.witness
    assert len(set(a) & set(b)) < 2
    assert verify_witness(r, [2, 2, 2, 0, 0], 1)
    r = check_continuous_safety([1, 1, 1, 1, 1], 1)
    assert r.valid and r.threshold == 4


def test_safety_first_witness_by_bitmask():
    # {0,1} (mask 3) is the smallest-mask quorum, and {0,2} (mask 5) the first
    # quorum it overlaps in a single replica
    assert check_continuous_safety([2, 2, 2, 0, 0], 1).witness_pair == ((0, 1), (0, 2))


def test_safety_availability_failure():
    r = check_continuous_safety([2, 0, 0, 0], 1)
    assert not r.valid and r.availability_deficit is not None
    assert verify_witness(r, [2, 0, 0, 0], 1)


def test_safety_size_cap():
    with pytest.raises(InvalidParameter):
        check_continuous_safety([1.0] * 11, 1)


@pytest.mark.parametrize("n", [4, 5, 6])
def test_safety_matches_minimal_quorum_oracle(n):
    rng = np.random.default_rng(1000 + n)
    f = 1
    valid_seen = invalid_seen = 0
    for k in range(200):
        # mix fully random vectors with perturbations of a discrete scheme so
        # both outcomes are well represented
        if k % 2:
            w = rng.uniform(0, 2, n)
        else:
            w = np.ones(n)
            w[rng.choice(n, 2, replace=False)] = 1 + (n - 4)
            w = np.clip(w + rng.uniform(-0.3, 0.3, n), 0, 2)
        w = [float(x) for x in w]
        r = check_continuous_safety(w, f)
        valid, threshold = safety_oracle(w, f)
        assert r.valid == valid, w
        assert math.isclose(r.threshold, threshold, abs_tol=1e-12)
        assert verify_witness(r, w, f)
        valid_seen += valid
        invalid_seen += not valid
    assert valid_seen and invalid_seen


@settings(max_examples=100, deadline=None)
@given(w=st.lists(st.floats(0, 2), min_size=4, max_size=6), f=st.integers(1, 2))
@example(w=[0.7315283631828545] * 3 + [1e-09], f=1)
def test_safety_property(w, f):
    r = check_continuous_safety(w, f)
    assert r.valid == safety_oracle(w, f)[0]
    assert (r.witness is None) == r.valid
    assert verify_witness(r, w, f)
