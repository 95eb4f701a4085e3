"""Domain types and frame/feature index arithmetic.

Every spotting method works on pre-extracted feature sequences: row ``i``
summarises the frames ``[i * stride, i * stride + receptive_field)``.
Anchor frames (the ``frame`` of a :class:`Spotting`) are always the first
frame of a feature's receptive field, so that
``frame_to_feature_index(feature_anchor_frame(i)) == i``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractError, TagError

DEFAULT_STRIDE = 4
DEFAULT_RECEPTIVE_FIELD = 16
FPS = 25


class Source(str, enum.Enum):
    """Provenance of an automatic annotation."""

    M = "M"
    D = "D"
    A = "A"
    Mstar = "Mstar"
    Dstar = "Dstar"
    P = "P"
    E = "E"
    N = "N"

    @classmethod
    def parse(cls, tag: str) -> "Source":
        # CLI spellings are case-insensitive ("mstar", "e"); file tags are exact.
        for member in cls:
            if tag == member.value or tag.lower() == member.value.lower():
                return member
        raise TagError(f"unknown source tag {tag!r}")


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FeatureSequence:
    video_id: str
    data: np.ndarray
    stride: int = DEFAULT_STRIDE
    receptive_field: int = DEFAULT_RECEPTIVE_FIELD

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float32, copy=True)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ContractError(f"feature data must be a non-empty T x D matrix, got {data.shape}")
        if not np.isfinite(data).all():
            raise ContractError("feature data contains non-finite values")
        if self.stride < 1 or self.receptive_field < self.stride:
            raise ContractError(
                f"need stride >= 1 and receptive_field >= stride "
                f"(stride={self.stride}, receptive_field={self.receptive_field})"
            )
        object.__setattr__(self, "data", _readonly(data))

    @property
    def length(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @property
    def n_frames(self) -> int:
        """Frames spanned by the whole sequence."""
        return (self.length - 1) * self.stride + self.receptive_field

    def window(self, first: int, last: int) -> "FeatureWindow":
        return FeatureWindow(self, first, last)

    def whole(self) -> "FeatureWindow":
        return FeatureWindow(self, 0, self.length - 1)


@dataclass(frozen=True)
class FeatureWindow:
    """Inclusive range ``[first_index, last_index]`` of feature positions."""

    parent: FeatureSequence
    first_index: int
    last_index: int

    def __post_init__(self):
        if not 0 <= self.first_index <= self.last_index < self.parent.length:
            raise ContractError(
                f"window [{self.first_index}, {self.last_index}] outside "
                f"0..{self.parent.length - 1}"
            )

    @property
    def data(self) -> np.ndarray:
        return self.parent.data[self.first_index : self.last_index + 1]

    def __len__(self):
        return self.last_index - self.first_index + 1


@dataclass(frozen=True)
class SubtitleRecord:
    subtitle_id: str
    video_id: str
    start_frame: int
    end_frame: int
    text: str
    aligned: bool = True

    def __post_init__(self):
        if self.start_frame < 0 or self.end_frame <= self.start_frame:
            raise ContractError(
                f"subtitle {self.subtitle_id}: need 0 <= start_frame < end_frame, "
                f"got [{self.start_frame}, {self.end_frame})"
            )

    @property
    def n_frames(self) -> int:
        return self.end_frame - self.start_frame


@dataclass(frozen=True)
class Spotting:
    video_id: str
    keyword: str
    frame: int
    confidence: float
    source: Source

    def __post_init__(self):
        if not self.keyword:
            raise ContractError("spotting keyword must be non-empty")
        if self.frame < 0:
            raise ContractError(f"negative spotting frame {self.frame}")
        conf = float(self.confidence)
        if not 0.0 <= conf <= 1.0:
            raise ContractError(f"spotting confidence {conf} outside [0, 1]")
        object.__setattr__(self, "confidence", conf)
        if not isinstance(self.source, Source):
            object.__setattr__(self, "source", Source.parse(self.source))


_VOTE_KINDS = ("vote", "avg", "max", "positive", "negative", "difference")


@dataclass(frozen=True)
class VoteVector:
    """Localisation signal over the reference candidate positions."""

    values: np.ndarray
    kind: str = "vote"

    def __post_init__(self):
        if self.kind not in _VOTE_KINDS:
            raise ContractError(f"unknown vote vector kind {self.kind!r}")
        values = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        lo = -1.0 if self.kind == "difference" else 0.0
        if values.size and (values.min() < lo or values.max() > 1.0):
            raise ContractError(f"{self.kind} vector values outside [{lo}, 1]")
        object.__setattr__(self, "values", _readonly(values))

    def __len__(self):
        return self.values.shape[0]

    def __getitem__(self, i):
        return self.values[i]

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


DEFAULT_THRESHOLDS = {"vote": 0.8, "avg": 0.7, "max": 0.8}


@dataclass
class SpotterConfig:
    method: str = "vote"
    h: Optional[float] = None
    n_exemplars: int = 20
    n_positives: int = 9
    n_negatives: int = 27
    pad_frames: int = 2 * FPS
    min_exemplar_confidence: float = 0.8
    min_confidence: float = 0.0
    expand_synonyms: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.method not in DEFAULT_THRESHOLDS:
            raise ContractError(f"unknown spotting method {self.method!r}")
        if self.h is None:
            self.h = DEFAULT_THRESHOLDS[self.method]
        if not 0.0 < self.h < 1.0:
            raise ContractError(f"threshold h={self.h} must lie in (0, 1)")
        if self.n_exemplars < 1 or self.n_positives < 1 or self.n_negatives < 0 or self.pad_frames < 0:
            raise ContractError("exemplar counts and padding must be non-negative (N >= 1)")


def feature_to_frame_span(index: int, seq: FeatureSequence, n_frames: Optional[int] = None) -> tuple[int, int]:
    """Half-open frame interval covered by feature ``index``."""
    if not 0 <= index < seq.length:
        raise IndexError(f"feature index {index} outside 0..{seq.length - 1}")
    start = index * seq.stride
    end = start + seq.receptive_field
    if n_frames is not None:
        start, end = min(start, n_frames), min(end, n_frames)
    return start, end


def frame_to_feature_index(frame: int, seq: FeatureSequence) -> int:
    # round half up, then clamp
    index = math.floor(frame / seq.stride + 0.5)
    return min(max(index, 0), seq.length - 1)


def feature_anchor_frame(index: int, seq: FeatureSequence) -> int:
    return feature_to_frame_span(index, seq)[0]


def anchor_window(seq: FeatureSequence, start_frame: int, end_frame: int) -> FeatureWindow:
    """Feature positions whose anchor frame lies in ``[start_frame, end_frame)``.

    Degenerate spans (shorter than a stride, or outside the sequence) fall
    back to the single nearest position.
    """
    first = max(0, -(-start_frame // seq.stride))
    last = min(seq.length - 1, (end_frame - 1) // seq.stride)
    if first > last:
        first = last = frame_to_feature_index(start_frame, seq)
    return FeatureWindow(seq, first, last)


def pad_span(start_frame: int, end_frame: int, pad_frames: int, n_frames: Optional[int] = None) -> tuple[int, int]:
    start = max(0, start_frame - pad_frames)
    end = end_frame + pad_frames
    if n_frames is not None:
        end = min(end, n_frames)
    return start, max(end, start + 1)


def padded_span(subtitle: SubtitleRecord, pad_frames: int, n_frames: Optional[int] = None) -> tuple[int, int]:
    return pad_span(subtitle.start_frame, subtitle.end_frame, pad_frames, n_frames)
