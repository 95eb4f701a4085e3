"""Subtitle-level recall, IoU and temporal coverage of predicted signs.

Stop words are removed from the subtitle and both sides are lemmatised;
subtitles left without content words are dropped. Consecutive repeated
predictions collapse to the first. A predicted word is correct when it is a
reference word or a tier-2 synonym of one, and each reference word is
credited at most once. All metrics are percentages.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import Spotting, SubtitleRecord
from .corpus import by_video, spottings_in
from .errors import ConfigError, ContractError
from .keywords import Lexicon, SynonymTable, matches
from .pseudo import PredictionSequence, argmax_track

SIGN_DURATION = 16


@dataclass(frozen=True)
class Prediction:
    keyword: str
    frame: int


@dataclass
class SubtitleScore:
    subtitle_id: str
    recall: float
    iou: float
    coverage: float
    n_reference: int
    n_predicted: int
    n_matched: int


@dataclass
class EvalReport:
    n_subtitles_retained: int
    n_subtitles_dropped: int
    recall: float
    iou: float
    coverage: float
    rows: list = field(default_factory=list)

    def __post_init__(self):
        for name in ("recall", "iou", "coverage"):
            v = getattr(self, name)
            if not 0.0 <= v <= 100.0:
                raise ContractError(f"{name}={v} outside [0, 100]")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"

    def to_tsv(self) -> str:
        buf = io.StringIO(newline="")
        w = csv.writer(buf, delimiter="\t", lineterminator="\n")
        w.writerow(["subtitle_id", "recall", "iou", "coverage", "n_reference", "n_predicted", "n_matched"])
        for r in self.rows:
            w.writerow([r.subtitle_id, f"{r.recall:.6f}", f"{r.iou:.6f}", f"{r.coverage:.6f}", r.n_reference, r.n_predicted, r.n_matched])
        return buf.getvalue()

    def summary(self) -> str:
        return (
            f"recall {self.recall:.2f}  IoU {self.iou:.2f}  coverage {self.coverage:.2f}  "
            f"({self.n_subtitles_retained} subtitles, {self.n_subtitles_dropped} dropped)"
        )


def preprocess(
    text: str,
    predictions: Sequence[Prediction],
    lexicon: Lexicon,
) -> Optional[tuple[set, list[Prediction]]]:
    """Reference lemma set and de-repeated predictions, or None if dropped."""
    reference = set(lexicon.content_lemmas(text))
    if not reference:
        return None
    deduped: list[Prediction] = []
    for p in sorted(predictions, key=lambda p: (p.frame, p.keyword)):
        word = lexicon.lemma(p.keyword)
        if deduped and deduped[-1].keyword == word:
            continue
        deduped.append(Prediction(word, p.frame))
    return reference, deduped


def credit(reference: set, predicted: Iterable[str], table: SynonymTable) -> dict:
    """Maximum one-to-one assignment of distinct predicted words to reference
    words they match; returns ``{predicted: reference}``."""
    preds = sorted(set(predicted))
    options = {p: sorted(r for r in reference if matches(p, {r}, table)) for p in preds}
    # identity first so the natural pairing wins whenever it is optimal
    for p in preds:
        if p in options[p]:
            options[p].remove(p)
            options[p].insert(0, p)
    owner: dict = {}

    def augment(p, seen):
        for r in options[p]:
            if r in seen:
                continue
            seen.add(r)
            if r not in owner or augment(owner[r], seen):
                owner[r] = p
                return True
        return False

    for p in preds:
        augment(p, set())
    return {p: r for r, p in owner.items()}


def _scores(reference: set, words: Sequence[str], table: SynonymTable) -> tuple[float, float, int]:
    if not reference:
        raise ContractError("empty reference: the subtitle should have been dropped")
    n_matched = len(credit(reference, words, table))
    unmatched = {w for w in words if not matches(w, reference, table)}
    return n_matched / len(reference) * 100.0, n_matched / (len(reference) + len(unmatched)) * 100.0, n_matched


def recall_iou(reference: set, predictions: Sequence, table: SynonymTable) -> tuple[float, float]:
    words = [p.keyword if isinstance(p, Prediction) else p for p in predictions]
    recall, iou, _ = _scores(reference, words, table)
    return recall, iou


def coverage(frames: Iterable[int], clip_start: int, clip_end: int, sign_duration: int = SIGN_DURATION) -> float:
    """Percentage of the clip covered by ``[f, f + sign_duration)`` intervals."""
    length = clip_end - clip_start
    if length <= 0:
        raise ContractError("coverage of a zero-length clip")
    covered = np.zeros(length, dtype=bool)
    for f in frames:
        lo, hi = max(f, clip_start) - clip_start, min(f + sign_duration, clip_end) - clip_start
        if hi > lo:
            covered[lo:hi] = True
    return covered.sum() / length * 100.0


def score_subtitle(sub: SubtitleRecord, predictions: Sequence[Prediction], lexicon: Lexicon) -> Optional[SubtitleScore]:
    prepared = preprocess(sub.text, predictions, lexicon)
    if prepared is None:
        return None
    reference, preds = prepared
    recall, iou, n_matched = _scores(reference, [p.keyword for p in preds], lexicon.synonyms)
    correct = [p.frame for p in preds if matches(p.keyword, reference, lexicon.synonyms)]
    cov = coverage(correct, sub.start_frame, sub.end_frame)
    return SubtitleScore(sub.subtitle_id, recall, iou, cov, len(reference), len(preds), n_matched)


def _aggregate(rows: list, dropped: int) -> EvalReport:
    if not rows:
        return EvalReport(0, dropped, 0.0, 0.0, 0.0, [])
    mean = lambda name: float(np.mean([getattr(r, name) for r in rows]))  # noqa: E731
    return EvalReport(len(rows), dropped, mean("recall"), mean("iou"), mean("coverage"), rows)


def oracle(subtitles: Iterable[SubtitleRecord], vocab: Iterable[str], lexicon: Lexicon, sign_duration: int = SIGN_DURATION) -> EvalReport:
    """Upper bound assuming every in-vocabulary subtitle word is signed and
    recognised, each sign lasting ``sign_duration`` frames without overlap."""
    vocab = {lexicon.lemma(v) for v in vocab}
    rows, dropped = [], 0
    for sub in subtitles:
        reference = set(lexicon.content_lemmas(sub.text))
        if not reference:
            dropped += 1
            continue
        hits = [
            r for r in reference
            if r in vocab or any(s in vocab for s in lexicon.synonyms.synonyms(r, tier=2))
        ]
        score = len(hits) / len(reference) * 100.0
        cov = min(1.0, sign_duration * len(hits) / sub.n_frames) * 100.0
        rows.append(SubtitleScore(sub.subtitle_id, score, score, cov, len(reference), len(hits), len(hits)))
    return _aggregate(rows, dropped)


def predictions_from_spottings(spottings: Sequence[Spotting], sub: SubtitleRecord, min_conf: float = 0.0, pad_frames: int = 0, index=None) -> list[Prediction]:
    index = index if index is not None else by_video(spottings)
    return [Prediction(s.keyword, s.frame) for s in spottings_in(index, sub, pad_frames) if s.confidence >= min_conf]


def predictions_from_track(preds: PredictionSequence, sub: SubtitleRecord, min_conf: float = 0.0) -> list[Prediction]:
    track = argmax_track(preds, preds.steps_in(sub.start_frame, sub.end_frame))
    return [Prediction(preds.vocab[c], step * preds.stride) for step, c, p in track if p >= min_conf]


def evaluate_corpus(
    subtitles: Iterable[SubtitleRecord],
    lexicon: Lexicon,
    spottings: Optional[Sequence[Spotting]] = None,
    predictions: Optional[Mapping[str, PredictionSequence]] = None,
    min_conf: float = 0.0,
    strict: bool = False,
    pad_frames: int = 0,
) -> EvalReport:
    """Macro-averaged metrics over retained subtitles.

    Exactly one of ``spottings`` (subtitle-dependent annotations) or
    ``predictions`` (per-step classifier output) must be given.
    """
    if (spottings is None) == (predictions is None):
        raise ConfigError("evaluate either spottings or predictions")
    subtitles = list(subtitles)
    if strict:
        bad = [s.subtitle_id for s in subtitles if not s.aligned]
        if bad:
            raise ConfigError(f"{len(bad)} subtitles lack signing alignment (e.g. {bad[0]})")
    index = by_video(spottings) if spottings is not None else None
    rows, dropped = [], 0
    for sub in subtitles:
        if spottings is not None:
            preds = predictions_from_spottings(spottings, sub, min_conf, pad_frames, index)
        else:
            seq = predictions.get(sub.video_id)
            preds = predictions_from_track(seq, sub, min_conf) if seq is not None else []
        score = score_subtitle(sub, preds, lexicon)
        if score is None:
            dropped += 1
        else:
            rows.append(score)
    return _aggregate(rows, dropped)
