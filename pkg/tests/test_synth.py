import numpy as np
import pytest

from densify.core import Source
from densify.errors import ContractError
from densify.formats import load_features, load_spottings, load_subtitles
from densify.synth import SynthConfig, brute_force_spot, generate


def test_generation_is_seeded():
    a = generate(SynthConfig(n_videos=1, subtitles_per_video=3, seed=4))
    b = generate(SynthConfig(n_videos=1, subtitles_per_video=3, seed=4))
    c = generate(SynthConfig(n_videos=1, subtitles_per_video=3, seed=5))
    assert np.array_equal(a.features["v000"].data, b.features["v000"].data)
    assert a.subtitles == b.subtitles
    assert not np.array_equal(a.features["v000"].data, c.features["v000"].data)


def test_planted_signs_match_their_prototype(small_synth):
    subs = {s.subtitle_id: s for s in small_synth.subtitles}
    for p in small_synth.planted[:20]:
        seq = small_synth.features[p.video_id]
        block = seq.data[p.start : p.start + p.length]
        assert np.abs(block - small_synth.prototypes[p.class_index]).max() < 0.5
        sub = subs[p.subtitle_id]
        first = sub.start_frame // seq.stride
        clip = seq.data[first : sub.end_frame // seq.stride]
        template = np.repeat(small_synth.prototypes[p.class_index][None], p.length, 0)
        start, score = brute_force_spot(clip, template)
        assert first + start == p.start and score > 0.9


def test_subtitle_text_names_the_planted_words(small_synth):
    for sub in small_synth.subtitles:
        words = set(small_synth.lexicon.content_lemmas(sub.text))
        assert words == {p.keyword for p in small_synth.planted_in(sub.subtitle_id)}


def test_seed_annotations_skip_hidden_classes():
    sc = generate(SynthConfig(unannotated_classes=0.5, annotated_fraction=1.0, seed=2))
    annotated = {s.keyword for s in sc.seed_spottings}
    assert 0 < len(annotated) <= 25
    assert all(0.8 <= s.confidence <= 1 for s in sc.seed_spottings)


def test_write_layout(tmp_path, small_synth):
    manifest = small_synth.write(tmp_path)
    assert manifest.exists()
    assert load_subtitles(tmp_path / "subtitles.jsonl") == small_synth.subtitles
    gt = load_spottings(tmp_path / "gt.spottings.jsonl")
    assert gt == small_synth.ground_truth and gt[0].source is Source.Mstar
    seq = load_features(tmp_path / "features" / "v000.dsf")
    assert np.array_equal(seq.data, small_synth.features["v000"].data)


def test_config_validation():
    with pytest.raises(ContractError):
        SynthConfig(words_per_subtitle=100)
    with pytest.raises(ContractError):
        SynthConfig(noise_sigma=-1)
