"""Mining more instances of already-spotted signs (source E) by matching
short in-domain sign exemplars against padded subtitle windows."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    FeatureSequence,
    FeatureWindow,
    Source,
    SpotterConfig,
    Spotting,
    anchor_window,
    feature_anchor_frame,
    frame_to_feature_index,
    pad_span,
    padded_span,
)
from .corpus import Corpus, by_video, load_corpus, spottings_in, worker_count
from .errors import ContractError
from .scoremap import cosine_score_map, localize_first_above, localize_vote, pool, temporal_max, vote

log = logging.getLogger(__name__)

EXEMPLAR_LEN = 8
_BEFORE = EXEMPLAR_LEN // 2 - 1  # positions c-3 .. c+4


@dataclass(frozen=True)
class SignExemplar:
    keyword: str
    positions: tuple
    features: np.ndarray
    source_confidence: float
    origin: Optional[Spotting] = None


def exemplar_positions(center: int, length: int) -> np.ndarray:
    return np.clip(np.arange(center - _BEFORE, center - _BEFORE + EXEMPLAR_LEN), 0, length - 1)


def build_exemplar(spotting: Spotting, seq: FeatureSequence) -> SignExemplar:
    if spotting.video_id != seq.video_id:
        raise ContractError(f"spotting from {spotting.video_id} cannot index features of {seq.video_id}")
    positions = exemplar_positions(frame_to_feature_index(spotting.frame, seq), seq.length)
    return SignExemplar(
        spotting.keyword,
        tuple(int(p) for p in positions),
        seq.data[positions],
        spotting.confidence,
        spotting,
    )


def reference_window(seq: FeatureSequence, start_frame: int, end_frame: int, pad_frames: int, n_frames=None) -> FeatureWindow:
    """Candidate positions for a subtitle span padded on both sides."""
    return anchor_window(seq, *pad_span(start_frame, end_frame, pad_frames, n_frames))


def spot_known(
    reference: FeatureWindow,
    keyword: str,
    exemplars: Sequence[SignExemplar],
    cfg: Optional[SpotterConfig] = None,
) -> Optional[Spotting]:
    cfg = cfg or SpotterConfig()
    if not exemplars:
        raise ContractError("spot_known needs at least one exemplar")
    if any(e.keyword != keyword for e in exemplars):
        raise ContractError(f"exemplars for other keywords passed when querying {keyword!r}")
    maps = [cosine_score_map(reference, e.features) for e in exemplars]
    if cfg.method == "vote":
        L = vote([temporal_max(m) for m in maps], cfg.h)
        hit = localize_vote(L)
        if hit is None:
            return None
        p, conf = hit
    else:
        L = pool(maps, cfg.method)
        p = localize_first_above(L, cfg.h)
        if p is None:
            return None
        conf = float(L[p])
    frame = feature_anchor_frame(reference.first_index + p, reference.parent)
    return Spotting(reference.parent.video_id, keyword, frame, conf, Source.E)


def covered_words(words, annotated: set, lexicon) -> set:
    """Subtitle words already annotated, directly or through a query synonym."""
    out = set()
    for w in words:
        if w in annotated or any(s in annotated for s in lexicon.synonyms.synonyms(w, tier=1)):
            out.add(w)
    return out


def rank_exemplar_spottings(spottings, min_confidence: float) -> dict:
    """keyword -> spottings usable as exemplars, most confident first."""
    pool_: dict = {}
    for s in spottings:
        if s.confidence >= min_confidence:
            pool_.setdefault(s.keyword, []).append(s)
    for spots in pool_.values():
        spots.sort(key=lambda s: (-s.confidence, s.video_id, s.frame))
    return pool_


def mine_corpus(corpus, existing: Optional[Sequence[Spotting]] = None, cfg: Optional[SpotterConfig] = None, workers=None) -> list[Spotting]:
    """E spottings for subtitle words that no existing annotation covers."""
    cfg = cfg or SpotterConfig()
    if not isinstance(corpus, Corpus):
        corpus = load_corpus(corpus)
    if existing is None:
        existing = corpus.spottings()
    lexicon = corpus.lexicon
    annotated_by_video = by_video(existing)
    candidates = rank_exemplar_spottings(existing, cfg.min_exemplar_confidence)
    tier = 1 if cfg.expand_synonyms else None

    def run(sub):
        seq = corpus.sequence(sub.video_id)
        n_frames = corpus.frames_of(sub.video_id)
        start, end = padded_span(sub, cfg.pad_frames, n_frames)
        annotated = {s.keyword for s in spottings_in(annotated_by_video, sub, cfg.pad_frames)}
        words = sorted(lexicon.expand(sub.text, tier)) if tier else lexicon.content_lemmas(sub.text)
        skip = covered_words(words, annotated, lexicon)
        reference = anchor_window(seq, start, end)
        found = []
        for w in words:
            if w in skip or w not in candidates:
                continue
            chosen = []
            for s in candidates[w]:
                # an exemplar inside the reference window would just find itself
                if s.video_id == sub.video_id and start <= s.frame < end:
                    continue
                if s.video_id not in corpus.features:
                    continue
                chosen.append(s)
                if len(chosen) == cfg.n_exemplars:
                    break
            if not chosen:
                continue
            exemplars = [build_exemplar(s, corpus.features[s.video_id]) for s in chosen]
            spot = spot_known(reference, w, exemplars, cfg)
            if spot is not None:
                found.append(spot)
        return found

    n = worker_count(workers)
    if n == 1:
        results = [run(s) for s in corpus.subtitles]
    else:
        with ThreadPoolExecutor(n) as ex:
            results = list(ex.map(run, corpus.subtitles))
    out = [s for chunk in results for s in chunk]
    log.info("mined %d E spottings over %d subtitles", len(out), len(corpus.subtitles))
    return out
