import io
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from densify.core import FeatureSequence, Source, Spotting, SubtitleRecord
from densify.errors import DataError, FormatError, ParseError, TagError, TruncationError
from densify.formats import (
    atomic_open,
    read_features,
    read_lemmas,
    read_manifest,
    read_model,
    read_predictions,
    read_spottings,
    read_stopwords,
    read_subtitles,
    read_synonyms,
    to_bytes,
    to_text,
    write_features,
    write_lemmas,
    write_model,
    write_predictions,
    write_spottings,
    write_stopwords,
    write_subtitles,
    write_synonyms,
)
from densify.keywords import SynonymTable
from densify.mlp import MlpModel
from densify.pseudo import PredictionSequence

words = st.text(st.characters(blacklist_categories=("Cs", "Cc", "Zs", "Zl", "Zp")), min_size=1, max_size=8)


def roundtrip_bytes(writer, reader, obj, **kw):
    first = to_bytes(writer, obj)
    again = reader(io.BytesIO(first), **kw)
    assert to_bytes(writer, again) == first
    return again


@given(st.integers(1, 6), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_features_roundtrip(T, D, seed):
    data = np.random.default_rng(seed).standard_normal((T, D))
    seq = FeatureSequence("v", data, 4, 16)
    back = roundtrip_bytes(write_features, read_features, seq, video_id="v")
    assert np.array_equal(back.data, seq.data)
    assert (back.stride, back.receptive_field) == (4, 16)


@given(st.integers(0, 5), st.lists(words, min_size=1, max_size=4, unique=True), st.integers(0, 2**32 - 1))
def test_predictions_roundtrip(T, vocab, seed):
    p = np.random.default_rng(seed).dirichlet(np.ones(len(vocab)), size=T).astype(np.float32)
    p /= p.sum(axis=1, keepdims=True)
    preds = PredictionSequence("v", 4, p, vocab)
    back = roundtrip_bytes(write_predictions, read_predictions, preds, video_id="v")
    assert back.vocab == tuple(vocab)


@given(st.integers(1, 5), st.lists(words, min_size=1, max_size=4, unique=True), st.integers(0, 2**32 - 1))
def test_model_roundtrip(F, vocab, seed):
    model = MlpModel.init(F, vocab, hidden=(3, 2), rng=seed).astype(np.float32)
    back = roundtrip_bytes(write_model, read_model, model)
    for a, b in zip(model.weights, back.weights):
        assert np.array_equal(a, b)
    assert np.isclose(back.leaky_slope, 0.01)


spottings_st = st.lists(
    st.builds(
        Spotting,
        words,
        words,
        st.integers(0, 10**6),
        st.floats(0, 1),
        st.sampled_from(list(Source)),
    ),
    max_size=5,
)


@given(spottings_st)
def test_spottings_roundtrip_exactly(spots):
    text = to_text(write_spottings, spots)
    back = read_spottings(io.StringIO(text))
    assert back == spots
    assert to_text(write_spottings, back) == text


@given(
    st.lists(
        st.builds(
            lambda sid, vid, a, n, text, al: SubtitleRecord(sid, vid, a, a + n, text, al),
            words, words, st.integers(0, 1000), st.integers(1, 500), st.text(max_size=20), st.booleans(),
        ),
        max_size=4,
    )
)
def test_subtitles_roundtrip(subs):
    text = to_text(write_subtitles, subs)
    back = read_subtitles(io.StringIO(text))
    assert back == subs
    assert to_text(write_subtitles, back) == text


def test_tables_roundtrip():
    table = SynonymTable([("big", "large", 0.9, 2), ("big", "huge", 0.6543, 1)])
    text = to_text(write_synonyms, table)
    assert to_text(write_synonyms, read_synonyms(io.StringIO(text))) == text
    lemmas = {"cats": "cat", "ran": "run"}
    assert read_lemmas(io.StringIO(to_text(write_lemmas, lemmas))) == lemmas
    stop = frozenset({"the", "a"})
    assert read_stopwords(io.StringIO(to_text(write_stopwords, stop))) == stop


def features_bytes():
    return to_bytes(write_features, FeatureSequence("v", np.ones((3, 2))))


def test_bad_magic():
    raw = b"XXXX" + features_bytes()[4:]
    with pytest.raises(FormatError):
        read_features(io.BytesIO(raw))


def test_truncated_and_trailing_bytes():
    raw = features_bytes()
    with pytest.raises(TruncationError):
        read_features(io.BytesIO(raw[:-1]))
    with pytest.raises(TruncationError):
        read_features(io.BytesIO(raw + b"\0"))


def test_non_finite_payload_is_data_error():
    raw = bytearray(features_bytes())
    raw[-4:] = np.array([np.nan], dtype="<f4").tobytes()
    with pytest.raises(DataError):
        read_features(io.BytesIO(bytes(raw)))


def test_spottings_parse_errors_carry_line_numbers():
    good = json.dumps({"video": "v", "word": "w", "frame": 0, "conf": 0.5, "source": "E"})
    with pytest.raises(TagError) as e:
        read_spottings(io.StringIO(good + "\n" + good.replace('"E"', '"Q"') + "\n"))
    assert e.value.line == 2
    with pytest.raises(ParseError) as e:
        read_spottings(io.StringIO("{not json\n"))
    assert e.value.line == 1
    with pytest.raises(ParseError):
        read_spottings(io.StringIO(good.replace("0.5", "1.5") + "\n"))
    with pytest.raises(ParseError):
        read_spottings(io.StringIO(good.replace('"frame": 0', '"frame": "0"') + "\n"))


def test_synonym_rows_validated():
    with pytest.raises(ParseError):
        read_synonyms(io.StringIO("a\tb\tx\t1\n"))
    with pytest.raises(ParseError):
        read_synonyms(io.StringIO("a\tb\t0.9\n"))


def test_atomic_open_leaves_no_partial_file(tmp_path):
    target = tmp_path / "out.txt"
    with pytest.raises(RuntimeError):
        with atomic_open(target) as f:
            f.write("partial")
            raise RuntimeError("boom")
    assert not target.exists()
    assert list(tmp_path.iterdir()) == []
    with atomic_open(target) as f:
        f.write("done\n")
    assert target.read_text() == "done\n"


def test_manifest_roundtrip(tmp_path, small_synth):
    path = small_synth.write(tmp_path)
    m = read_manifest(path)
    assert len(m.videos) == 3
    assert m.annotation_paths[0][0] is Source.Mstar
    (tmp_path / "subtitles.jsonl").unlink()
    with pytest.raises(FileNotFoundError):
        read_manifest(path)
    (tmp_path / "bad.json").write_text("{}")
    with pytest.raises(FormatError):
        read_manifest(tmp_path / "bad.json")
