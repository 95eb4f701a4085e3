"""Discovering signs with no exemplars (source N).

Whole subtitles whose text contains the keyword act as weak positive
exemplars; subtitles without it act as negatives, whose votes are
subtracted so that signs common to every subtitle (pointing, pauses) do not
win the localisation.
"""

from __future__ import annotations

import logging
import zlib
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import Source, SpotterConfig, Spotting, SubtitleRecord, anchor_window, feature_anchor_frame
from .corpus import Corpus, load_corpus, worker_count
from .errors import ContractError
from .keywords import Lexicon
from .scoremap import cosine_score_map, difference, localize_vote, temporal_max, vote

log = logging.getLogger(__name__)


class SubtitlePool:
    """Subtitles indexed by the lemmas their text contains."""

    def __init__(self, subtitles: Sequence[SubtitleRecord], lexicon: Optional[Lexicon] = None):
        lexicon = lexicon or Lexicon()
        self.subtitles = list(subtitles)
        self.lemmas = [frozenset(lexicon.content_lemmas(s.text)) for s in self.subtitles]
        self._with: dict = {}
        for i, words in enumerate(self.lemmas):
            for w in words:
                self._with.setdefault(w, []).append(i)

    def __len__(self):
        return len(self.subtitles)

    def containing(self, keyword: str) -> list[int]:
        return self._with.get(keyword, [])


def _rng(seed: int, keyword: str, reference_id: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(keyword.encode()), zlib.crc32(reference_id.encode())])


def select_exemplar_subtitles(
    keyword: str,
    pool: SubtitlePool,
    n_pos: int = 9,
    n_neg: int = 27,
    seed: int = 0,
    exclude: Optional[str] = None,
) -> tuple[list[SubtitleRecord], list[SubtitleRecord]]:
    """Seeded choice of up to ``n_pos`` subtitles containing ``keyword`` and
    ``n_neg`` subtitles lacking it; ``exclude`` names the reference subtitle."""
    rng = _rng(seed, keyword, exclude or "")
    skip = {i for i, s in enumerate(pool.subtitles) if s.subtitle_id == exclude} if exclude else set()
    having = [i for i in pool.containing(keyword) if i not in skip]
    if len(having) > n_pos:
        having = sorted(rng.choice(having, size=n_pos, replace=False).tolist())

    banned = set(pool.containing(keyword)) | skip
    n_lacking = len(pool) - len(banned)
    want = min(n_neg, n_lacking)
    if want >= n_lacking // 2:
        lacking = [i for i in range(len(pool)) if i not in banned]
        negatives = sorted(rng.choice(lacking, size=want, replace=False).tolist()) if want else []
    else:
        picked: set = set()
        while len(picked) < want:
            i = int(rng.integers(len(pool)))
            if i not in banned:
                picked.add(i)
        negatives = sorted(picked)
    return [pool.subtitles[i] for i in having], [pool.subtitles[i] for i in negatives]


def novel_votes(reference, positives: Sequence, negatives: Sequence, h: float):
    """``(L+, L-, L = L+ - L-)``; ``L-`` is None without negatives."""
    if not positives:
        raise ContractError("novel-sign spotting needs at least one positive exemplar")
    pos = vote([temporal_max(cosine_score_map(reference, p)) for p in positives], h, kind="positive")
    neg = None
    if negatives:
        neg = vote([temporal_max(cosine_score_map(reference, n)) for n in negatives], h, kind="negative")
    return pos, neg, difference(pos, neg)


def spot_novel(
    reference,
    keyword: str,
    positives: Sequence,
    negatives: Sequence,
    h: float = 0.8,
    min_confidence: float = 0.0,
) -> Optional[Spotting]:
    """Localise on ``L+ - L-``; confidence is the maximum of ``L+``."""
    pos, _, L = novel_votes(reference, positives, negatives, h)
    hit = localize_vote(L)
    if hit is None:
        return None
    confidence = float(np.max(pos.values))
    if not confidence > min_confidence:
        return None
    frame = feature_anchor_frame(reference.first_index + hit[0], reference.parent)
    return Spotting(reference.parent.video_id, keyword, frame, confidence, Source.N)


def subtitle_window(corpus: Corpus, sub: SubtitleRecord):
    return anchor_window(corpus.sequence(sub.video_id), sub.start_frame, sub.end_frame)


def mine_novel(
    corpus,
    known_vocab: Iterable[str] = (),
    cfg: Optional[SpotterConfig] = None,
    workers=None,
) -> list[Spotting]:
    """N spottings for every subtitle word outside ``known_vocab``."""
    cfg = cfg or SpotterConfig()
    if not isinstance(corpus, Corpus):
        corpus = load_corpus(corpus)
    known = set(known_vocab)
    pool = SubtitlePool(corpus.subtitles, corpus.lexicon)

    def run(i):
        sub = pool.subtitles[i]
        if sub.video_id not in corpus.features:
            return []
        reference = subtitle_window(corpus, sub)
        found = []
        for w in sorted(pool.lemmas[i]):
            if w in known:
                continue
            pos, neg = select_exemplar_subtitles(w, pool, cfg.n_positives, cfg.n_negatives, cfg.seed, sub.subtitle_id)
            pos = [s for s in pos if s.video_id in corpus.features]
            neg = [s for s in neg if s.video_id in corpus.features]
            if not pos:
                continue
            spot = spot_novel(
                reference,
                w,
                [subtitle_window(corpus, s) for s in pos],
                [subtitle_window(corpus, s) for s in neg],
                cfg.h,
                cfg.min_confidence,
            )
            if spot is not None:
                found.append(spot)
        return found

    n = worker_count(workers)
    idx = range(len(pool))
    if n == 1:
        results = [run(i) for i in idx]
    else:
        with ThreadPoolExecutor(n) as ex:
            results = list(ex.map(run, idx))
    out = [s for chunk in results for s in chunk]
    log.info("discovered %d N spottings", len(out))
    return out
