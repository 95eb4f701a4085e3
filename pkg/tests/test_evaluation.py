import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from densify.core import Source, Spotting, SubtitleRecord
from densify.errors import ConfigError, ContractError
from densify.evaluation import (
    EvalReport,
    Prediction,
    coverage,
    credit,
    evaluate_corpus,
    oracle,
    preprocess,
    recall_iou,
    score_subtitle,
)
from densify.keywords import Lexicon, SynonymTable
from densify.pseudo import PredictionSequence

LEX = Lexicon(
    frozenset({"the", "a", "on"}),
    {"sat": "sit", "cats": "cat"},
    SynonymTable([("cat", "kitten", 0.9, 2), ("sit", "rest", 0.6, 1), ("mat", "rug", 0.8, 2), ("rug", "carpet", 0.8, 2)]),
)


def test_worked_recall_iou():
    r, i = recall_iou({"cat", "sit"}, ["cat", "dog"], SynonymTable())
    assert r == pytest.approx(50.0, abs=1e-6)
    assert i == pytest.approx(100 / 3, abs=1e-6)


def test_worked_coverage():
    assert coverage([0], 0, 64) == pytest.approx(25.0, abs=1e-6)
    assert coverage([10, 18], 0, 64) == pytest.approx(37.5, abs=1e-6)
    assert coverage([60], 0, 64) == pytest.approx(100 * 4 / 64)
    with pytest.raises(ContractError):
        coverage([0], 5, 5)


def test_repeated_predictions_collapse():
    ref, preds = preprocess("the cat", [Prediction("cat", 0), Prediction("cat", 4), Prediction("dog", 8), Prediction("cat", 12)], LEX)
    assert [p.keyword for p in preds] == ["cat", "dog", "cat"]


def test_dropped_when_only_stopwords():
    assert preprocess("the a on", [], LEX) is None


def test_each_reference_word_credited_once():
    # kitten and cat both match "cat", but only one reference word exists
    r, i = recall_iou({"cat"}, ["cat", "kitten"], LEX.synonyms)
    assert r == 100.0 and i == 100.0
    # synonym credit needs a free reference word; matching is maximal
    assert len(credit({"mat", "carpet"}, ["rug"], LEX.synonyms)) == 1
    assert credit({"cat"}, ["cat", "kitten"], LEX.synonyms) == {"cat": "cat"}


def test_tier_one_synonyms_earn_no_credit():
    assert recall_iou({"sit"}, ["rest"], LEX.synonyms) == (0.0, 0.0)


@given(st.lists(st.sampled_from(["cat", "dog", "sit", "kitten", "mat", "rug", "bird"]), max_size=8))
def test_metric_bounds_and_order(preds):
    ref = {"cat", "sit", "mat"}
    r, i = recall_iou(ref, preds, LEX.synonyms)
    assert 0 <= i <= r <= 100


@given(st.lists(st.integers(0, 200), max_size=10))
def test_coverage_bounds_and_union(frames):
    c = coverage(frames, 0, 128)
    assert 0 <= c <= 100
    assert c <= min(100, 16 * len(set(frames)) / 128 * 100) + 1e-9
    assert coverage(frames + frames, 0, 128) == c


def test_score_subtitle_counts_only_correct_for_coverage():
    sub = SubtitleRecord("s", "v", 0, 64, "The cats sat")
    score = score_subtitle(sub, [Prediction("cat", 0), Prediction("dog", 32)], LEX)
    assert score.recall == 50.0
    assert score.coverage == 25.0


def test_evaluate_corpus_modes():
    subs = [SubtitleRecord("s1", "v", 0, 64, "The cat sat"), SubtitleRecord("s2", "v", 64, 128, "the")]
    spots = [Spotting("v", "cat", 0, 0.9, Source.E), Spotting("v", "sit", 16, 0.2, Source.E)]
    rep = evaluate_corpus(subs, LEX, spottings=spots)
    assert (rep.n_subtitles_retained, rep.n_subtitles_dropped) == (1, 1)
    assert rep.recall == 100.0 and rep.coverage == 50.0
    rep = evaluate_corpus(subs, LEX, spottings=spots, min_conf=0.5)
    assert rep.recall == 50.0
    with pytest.raises(ConfigError):
        evaluate_corpus(subs, LEX)
    with pytest.raises(ConfigError):
        evaluate_corpus([SubtitleRecord("s", "v", 0, 4, "x", aligned=False)], LEX, spottings=[], strict=True)


def test_evaluate_predictions_mode():
    vocab = ("cat", "sit", "dog")
    probs = np.array([[0.9, 0.05, 0.05]] * 4 + [[0.1, 0.8, 0.1]] * 4 + [[0.2, 0.2, 0.6]] * 8)
    seq = PredictionSequence("v", 4, probs, vocab)
    subs = [SubtitleRecord("s1", "v", 0, 64, "The cat sat")]
    rep = evaluate_corpus(subs, LEX, predictions={"v": seq})
    assert rep.recall == 100.0
    assert rep.iou == pytest.approx(100 * 2 / 3)
    assert rep.coverage == pytest.approx(100 * 32 / 64)


def test_oracle_formula():
    subs = [SubtitleRecord("s1", "v", 0, 64, "The cat sat on the mat"), SubtitleRecord("s2", "v", 0, 20, "cat sat")]
    rep = oracle(subs, ["cat", "sit", "rug"], LEX)
    assert rep.rows[0].recall == 100.0
    assert rep.rows[0].coverage == 75.0
    assert rep.rows[1].coverage == 100.0
    rep = oracle(subs, ["cat"], LEX)
    assert rep.rows[0].recall == pytest.approx(100 / 3)


def test_report_serialisation_and_bounds():
    rep = evaluate_corpus([SubtitleRecord("s1", "v", 0, 64, "cat")], LEX, spottings=[])
    assert rep.to_tsv().splitlines()[1].startswith("s1\t0.000000")
    assert '"recall": 0.0' in rep.to_json()
    assert "recall 0.00" in rep.summary()
    with pytest.raises(ContractError):
        EvalReport(1, 0, 101.0, 0.0, 0.0)
