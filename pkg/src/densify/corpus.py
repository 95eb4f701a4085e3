"""In-memory view of a corpus described by a manifest."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .core import FeatureSequence, Source, Spotting, SubtitleRecord, padded_span
from .formats import (
    CorpusManifest,
    load_features,
    load_lemmas,
    load_spottings,
    load_stopwords,
    load_subtitles,
    load_synonyms,
    read_manifest,
)
from .keywords import Lexicon


@dataclass
class Corpus:
    features: dict
    subtitles: list
    lexicon: Lexicon = field(default_factory=Lexicon)
    n_frames: dict = field(default_factory=dict)
    annotations: dict = field(default_factory=dict)

    def frames_of(self, video_id: str) -> int:
        if video_id in self.n_frames:
            return self.n_frames[video_id]
        return self.features[video_id].n_frames

    def sequence(self, video_id: str) -> FeatureSequence:
        try:
            return self.features[video_id]
        except KeyError:
            raise FileNotFoundError(f"no feature file for video {video_id}") from None

    def spottings(self, sources: Optional[Iterable[Source]] = None) -> list[Spotting]:
        wanted = None if sources is None else set(sources)
        out = []
        for tag, spots in self.annotations.items():
            if wanted is None or tag in wanted:
                out.extend(spots)
        return out


def load_lexicon(manifest: CorpusManifest) -> Lexicon:
    lex = Lexicon()
    if manifest.stopword_path:
        lex.stopwords = load_stopwords(manifest.stopword_path)
    if manifest.lemma_path:
        lex.lemmas = load_lemmas(manifest.lemma_path)
    if manifest.synonym_path:
        lex.synonyms = load_synonyms(manifest.synonym_path)
    return lex


def load_corpus(manifest, with_annotations: bool = True) -> Corpus:
    if not isinstance(manifest, CorpusManifest):
        manifest = read_manifest(manifest)
    features = {v.video_id: load_features(v.feature_path, v.video_id) for v in manifest.videos}
    annotations: dict = {}
    if with_annotations:
        for tag, path in manifest.annotation_paths:
            annotations.setdefault(tag, []).extend(load_spottings(path))
    return Corpus(
        features,
        load_subtitles(manifest.subtitle_path),
        load_lexicon(manifest),
        {v.video_id: v.n_frames for v in manifest.videos},
        annotations,
    )


def spottings_in(spottings_by_video: dict, subtitle: SubtitleRecord, pad_frames: int = 0) -> list[Spotting]:
    start, end = padded_span(subtitle, pad_frames)
    return [s for s in spottings_by_video.get(subtitle.video_id, ()) if start <= s.frame < end]


def by_video(spottings: Iterable[Spotting]) -> dict:
    out: dict = {}
    for s in spottings:
        out.setdefault(s.video_id, []).append(s)
    for spots in out.values():
        spots.sort(key=lambda s: (s.frame, s.keyword))
    return out


def worker_count(default: Optional[int] = None) -> int:
    env = os.environ.get("DENSIFY_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return default or os.cpu_count() or 1
