"""Pseudo-labelling: per-step classifier predictions filtered by the subtitle."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

import numpy as np

from .core import Source, Spotting, SubtitleRecord, _readonly
from .errors import ContractError, ShapeError
from .keywords import Lexicon, normalize_token

SIMPLEX_TOL = 1e-5


@dataclass(frozen=True)
class PredictionSequence:
    video_id: str
    stride: int
    probs: np.ndarray
    vocab: tuple

    def __post_init__(self):
        probs = np.array(self.probs, copy=True)
        if probs.dtype not in (np.float32, np.float64):
            probs = probs.astype(np.float64)
        vocab = tuple(self.vocab)
        if probs.ndim != 2 or probs.shape[1] != len(vocab):
            raise ShapeError(f"probabilities {probs.shape} do not match a vocabulary of {len(vocab)}")
        if self.stride < 1:
            raise ContractError("stride must be >= 1")
        if probs.size and (probs.min() < 0 or np.abs(probs.sum(axis=1) - 1.0).max() > SIMPLEX_TOL):
            raise ContractError("prediction rows must lie on the probability simplex")
        object.__setattr__(self, "probs", _readonly(probs))
        object.__setattr__(self, "vocab", vocab)

    @property
    def length(self) -> int:
        return self.probs.shape[0]

    def steps_in(self, start_frame: int, end_frame: int) -> range:
        """Steps whose anchor frame lies in ``[start_frame, end_frame)``."""
        first = -(-start_frame // self.stride)
        last = min(self.length - 1, (end_frame - 1) // self.stride)
        return range(max(first, 0), last + 1)


def argmax_track(preds: PredictionSequence, steps: Iterable[int]):
    """(step, class index, probability) for each step."""
    steps = list(steps)
    if not steps:
        return []
    block = preds.probs[steps]
    cls = block.argmax(axis=1)
    return [(s, int(c), float(block[i, c])) for i, (s, c) in enumerate(zip(steps, cls))]


def pseudo_label(
    preds: PredictionSequence,
    subtitle: SubtitleRecord,
    keyword_set: set,
    threshold: float = 0.5,
    lexicon: Optional[Lexicon] = None,
) -> list[Spotting]:
    """Keep predicted classes that occur in ``keyword_set``.

    Steps are grouped into maximal runs of the same argmax class; a run
    yields one spotting at its most probable step when that peak reaches
    ``threshold`` and the class keyword is in the (already expanded)
    subtitle keyword set.
    """
    if preds.video_id != subtitle.video_id:
        raise ContractError(f"predictions for {preds.video_id} applied to subtitle of {subtitle.video_id}")
    lexicon = lexicon or Lexicon()
    for w in keyword_set:
        if normalize_token(w, lexicon.number_words) != w:
            raise ContractError(f"keyword set entry {w!r} is not in normalised form")
    mapped = [lexicon.lemma(k) for k in preds.vocab]

    out = []
    track = argmax_track(preds, preds.steps_in(subtitle.start_frame, subtitle.end_frame))
    i = 0
    while i < len(track):
        j = i
        while j + 1 < len(track) and track[j + 1][1] == track[i][1]:
            j += 1
        run = track[i : j + 1]
        peak_step, cls, peak = max(run, key=lambda r: r[2])  # first max on ties
        keyword = mapped[cls]
        if peak >= threshold and keyword in keyword_set:
            out.append(Spotting(preds.video_id, keyword, peak_step * preds.stride, min(peak, 1.0), Source.P))
        i = j + 1
    return out


def pseudo_label_corpus(
    predictions: Mapping[str, PredictionSequence],
    subtitles: Iterable[SubtitleRecord],
    lexicon: Lexicon,
    threshold: float = 0.5,
    tier: Optional[int] = 2,
) -> list[Spotting]:
    out = []
    for sub in subtitles:
        preds = predictions.get(sub.video_id)
        if preds is None:
            continue
        out.extend(pseudo_label(preds, sub, lexicon.expand(sub.text, tier), threshold, lexicon))
    return out
