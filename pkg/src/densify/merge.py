"""Combining spotting sources into one densified annotation set."""

from __future__ import annotations

from collections import Counter
from typing import Iterable, Mapping, Optional, Sequence

from .core import DEFAULT_STRIDE, Source, Spotting


def sort_key(s: Spotting):
    return (s.video_id, s.frame, s.keyword, s.source.value, -s.confidence)


def densify(
    spottings: Iterable[Spotting],
    sources: Iterable[Source],
    min_conf: Optional[Mapping[Source, float]] = None,
    dedup_window: Optional[int] = None,
    stride: int = DEFAULT_STRIDE,
) -> list[Spotting]:
    """Union of the selected sources after per-source confidence thresholds.

    With ``dedup_window`` (in feature positions), spottings of the same word
    in the same video closer than the window collapse to the most confident.
    """
    wanted = set(sources)
    min_conf = min_conf or {}
    kept = [s for s in spottings if s.source in wanted and s.confidence >= min_conf.get(s.source, 0.0)]
    kept.sort(key=sort_key)
    if dedup_window is None:
        return kept
    radius = dedup_window * stride
    by_word: dict = {}
    for s in kept:
        by_word.setdefault((s.video_id, s.keyword), []).append(s)
    out = []
    for group in by_word.values():
        # greedy by confidence; earlier frame wins ties
        taken: list = []
        for s in sorted(group, key=lambda s: (-s.confidence, s.frame, s.source.value)):
            if all(abs(s.frame - t.frame) > radius for t in taken):
                taken.append(s)
        out.extend(taken)
    out.sort(key=sort_key)
    return out


def spotting_stats(spottings: Sequence[Spotting]) -> dict:
    per_source = Counter(s.source.value for s in spottings)
    vocab_by_source: dict = {}
    for s in spottings:
        vocab_by_source.setdefault(s.source.value, set()).add(s.keyword)
    return {
        "total": len(spottings),
        "vocabulary": len({s.keyword for s in spottings}),
        "videos": len({s.video_id for s in spottings}),
        "per_source": {k: per_source[k] for k in sorted(per_source)},
        "vocabulary_per_source": {k: len(v) for k, v in sorted(vocab_by_source.items())},
    }
