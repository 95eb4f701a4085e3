import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from densify.core import FeatureSequence, VoteVector
from densify.errors import ContractError, ShapeError
from densify.scoremap import (
    cosine_score_map,
    difference,
    localize_first_above,
    localize_vote,
    pool,
    temporal_max,
    vote,
)

import oracles

finite = st.floats(-10, 10, allow_nan=False, width=32)


def matrices(max_rows=6, dim=3):
    return st.integers(1, max_rows).flatmap(lambda n: arrays(np.float64, (n, dim), elements=finite))


@given(matrices(), matrices())
def test_score_map_matches_oracle_and_bounds(ref, ex):
    got = cosine_score_map(ref, ex)
    want = np.array(oracles.score_map(ref.tolist(), ex.tolist()))
    assert got.shape == (ref.shape[0], ex.shape[0])
    assert np.allclose(got, want, atol=1e-9)
    assert got.min() >= 0 and got.max() <= 1


def test_score_map_identity_and_opposite():
    x = np.array([[1.0, 0.0], [0.0, 2.0]])
    m = cosine_score_map(x, np.vstack([x, -x]))
    assert np.allclose(np.diag(m[:, :2]), 1.0)
    assert np.allclose(np.diag(m[:, 2:]), 0.0)
    assert np.isclose(m[0, 1], 0.5)


def test_zero_rows_score_half():
    m = cosine_score_map(np.zeros((2, 3)), np.ones((1, 3)))
    assert np.allclose(m, 0.5)


def test_score_map_accepts_windows_and_checks_dims():
    seq = FeatureSequence("v", np.eye(4))
    m = cosine_score_map(seq.window(1, 2), seq.data[:1])
    assert m.shape == (2, 1)
    with pytest.raises(ShapeError):
        cosine_score_map(np.ones((2, 3)), np.ones((2, 4)))
    with pytest.raises(ShapeError):
        cosine_score_map(np.ones((0, 3)), np.ones((2, 3)))


@given(st.lists(matrices(max_rows=4), min_size=1, max_size=3), st.floats(0.05, 0.95))
def test_vote_matches_oracle(exemplars, h):
    rng = np.random.default_rng(0)
    ref = rng.standard_normal((5, 3))
    maps = [cosine_score_map(ref, e) for e in exemplars]
    got = vote([temporal_max(m) for m in maps], h)
    assert np.array_equal(got.values, oracles.vote([m.tolist() for m in maps], h))


def test_vote_uses_strict_inequality():
    assert vote([np.array([0.8, 0.81])], 0.8).values.tolist() == [0.0, 1.0]


@given(st.lists(arrays(np.float64, (4, 3), elements=st.floats(0, 1)), min_size=1, max_size=4), st.sampled_from(["avg", "max"]))
def test_pool_matches_oracle(maps, method):
    got = pool(maps, method)
    assert got.kind == method
    assert np.allclose(got.values, oracles.pool([m.tolist() for m in maps], method))


def test_pool_rejects_mismatched_maps():
    with pytest.raises(ShapeError):
        pool([np.zeros((3, 2)), np.zeros((3, 3))], "avg")
    with pytest.raises(ContractError):
        pool([np.zeros((3, 2))], "median")
    with pytest.raises(ContractError):
        pool([], "avg")


def test_plateau_tie_break():
    assert localize_vote([0, 0.75, 0.75, 0.75, 0.5, 0.75, 0])[0] == 2


def test_equal_runs_pick_earlier_and_even_runs_floor():
    assert localize_vote([0.5, 0.5, 0, 0.5, 0.5])[0] == 0
    assert localize_vote([0, 0.5, 0.5, 0.5, 0.5])[0] == 2


def test_absent_when_nothing_positive():
    assert localize_vote(np.zeros(7)) is None
    assert localize_vote(np.array([-0.2, 0.0])) is None
    assert localize_vote(np.array([])) is None


@given(st.lists(st.sampled_from([-0.5, 0.0, 0.25, 0.5, 1.0]), min_size=1, max_size=12))
def test_localize_vote_matches_oracle(values):
    assert localize_vote(values) == oracles.localize_vote(values)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=10), st.floats(0, 1))
def test_first_above_matches_oracle(values, h):
    assert localize_first_above(values, h) == oracles.localize_first_above(values, h)


def test_difference():
    pos = VoteVector([0.5, 1.0], "positive")
    neg = VoteVector([1.0, 0.0], "negative")
    assert difference(pos, neg).values.tolist() == [-0.5, 1.0]
    assert difference(pos, None).values.tolist() == [0.5, 1.0]
    with pytest.raises(ShapeError):
        difference(pos, VoteVector([0.1], "negative"))


def test_vote_vector_values_stay_in_unit_range():
    rng = np.random.default_rng(3)
    ref = rng.standard_normal((9, 5))
    maps = [cosine_score_map(ref, rng.standard_normal((4, 5))) for _ in range(6)]
    for h in (0.1, 0.5, 0.9):
        L = vote([temporal_max(m) for m in maps], h).values
        assert L.min() >= 0 and L.max() <= 1
        assert np.allclose(L * 6, np.round(L * 6))
