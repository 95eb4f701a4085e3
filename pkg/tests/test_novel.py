import pytest

from densify.core import Source, SpotterConfig, anchor_window
from densify.errors import ContractError
from densify.novel import SubtitlePool, mine_novel, novel_votes, select_exemplar_subtitles, spot_novel


def test_pool_and_selection(small_synth):
    pool = SubtitlePool(small_synth.subtitles, small_synth.lexicon)
    word = small_synth.planted[0].keyword
    ref_id = small_synth.planted[0].subtitle_id
    pos, neg = select_exemplar_subtitles(word, pool, 9, 12, seed=0, exclude=ref_id)
    assert all(word in small_synth.lexicon.content_lemmas(s.text) for s in pos)
    assert all(word not in small_synth.lexicon.content_lemmas(s.text) for s in neg)
    assert ref_id not in {s.subtitle_id for s in pos + neg}
    assert len(neg) == 12 and len(pos) <= 9
    again = select_exemplar_subtitles(word, pool, 9, 12, seed=0, exclude=ref_id)
    assert (pos, neg) == again
    other = select_exemplar_subtitles(word, pool, 9, 12, seed=1, exclude=ref_id)
    assert len(select_exemplar_subtitles(word, pool, 9, 1000, exclude=ref_id)[1]) == len(pool) - len(pool.containing(word))
    assert other[1] != neg


def test_no_positives_is_an_error(small_synth):
    seq = small_synth.features["v000"]
    with pytest.raises(ContractError):
        novel_votes(seq.whole(), [], [], 0.8)


def test_negatives_suppress_shared_filler(filler_synth):
    sc = filler_synth
    pool = SubtitlePool(sc.subtitles, sc.lexicon)
    subs = {s.subtitle_id: s for s in sc.subtitles}
    fillers = {f.subtitle_id: f for f in sc.fillers}
    win = lambda s: anchor_window(sc.features[s.video_id], s.start_frame, s.end_frame)
    checked = 0
    for p in sc.planted[:40]:
        pos, neg = select_exemplar_subtitles(p.keyword, pool, exclude=p.subtitle_id)
        if len(pos) < 3:
            continue
        ref = win(subs[p.subtitle_id])
        _, _, L = novel_votes(ref, [win(s) for s in pos], [win(s) for s in neg], 0.8)
        f = fillers[p.subtitle_id]
        at_filler = L.values[f.start - ref.first_index : f.start - ref.first_index + f.length]
        assert at_filler.max() <= 0
        checked += 1
    assert checked >= 10


def test_spot_novel_confidence_is_positive_vote_max(filler_synth):
    sc = filler_synth
    pool = SubtitlePool(sc.subtitles, sc.lexicon)
    subs = {s.subtitle_id: s for s in sc.subtitles}
    win = lambda s: anchor_window(sc.features[s.video_id], s.start_frame, s.end_frame)
    p = sc.planted[0]
    pos, neg = select_exemplar_subtitles(p.keyword, pool, exclude=p.subtitle_id)
    ref = win(subs[p.subtitle_id])
    hit = spot_novel(ref, p.keyword, [win(s) for s in pos], [win(s) for s in neg])
    Lp, _, _ = novel_votes(ref, [win(s) for s in pos], [win(s) for s in neg], 0.8)
    assert hit.source is Source.N
    assert hit.confidence == pytest.approx(Lp.values.max())
    assert spot_novel(ref, p.keyword, [win(s) for s in pos], [win(s) for s in neg], min_confidence=1.0) is None


def test_mine_novel_skips_known_and_is_deterministic(small_synth):
    corpus = small_synth.corpus()
    known = set(small_synth.vocab[:15])
    a = mine_novel(corpus, known, SpotterConfig(), workers=1)
    b = mine_novel(corpus, known, SpotterConfig(), workers=3)
    assert a == b
    assert a and all(s.keyword not in known and s.source is Source.N for s in a)
