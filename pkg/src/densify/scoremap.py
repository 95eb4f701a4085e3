"""Cosine score maps between feature windows and their reduction to a
per-position localisation signal."""

from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

from .core import FeatureWindow, VoteVector
from .errors import ContractError, ShapeError

ArrayLike = Union[np.ndarray, FeatureWindow]


def _rows(x: ArrayLike) -> np.ndarray:
    data = x.data if isinstance(x, FeatureWindow) else x
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[None, :]
    if data.ndim != 2 or data.shape[0] == 0:
        raise ShapeError(f"expected a non-empty 2-D window, got shape {data.shape}")
    return data


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    # zero rows stay zero, so their cosine with anything is 0
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


def cosine_score_map(reference: ArrayLike, exemplar: ArrayLike) -> np.ndarray:
    """``|C0| x |Ci|`` matrix of cosine similarities rescaled to [0, 1]."""
    ref, ex = _rows(reference), _rows(exemplar)
    if ref.shape[1] != ex.shape[1]:
        raise ShapeError(f"feature dims differ: {ref.shape[1]} vs {ex.shape[1]}")
    cos = _unit_rows(ref) @ _unit_rows(ex).T
    return np.clip((cos + 1.0) / 2.0, 0.0, 1.0)


def temporal_max(score_map: np.ndarray) -> VoteVector:
    score_map = np.asarray(score_map)
    if score_map.ndim != 2 or score_map.size == 0:
        raise ShapeError(f"score map must be a non-empty matrix, got {score_map.shape}")
    return VoteVector(score_map.max(axis=1), kind="max")


def vote(match_vectors: Sequence, h: float, kind: str = "vote") -> VoteVector:
    """Fraction of exemplars whose match vector exceeds ``h`` (strictly)."""
    if len(match_vectors) == 0:
        raise ContractError("vote needs at least one match vector")
    stacked = np.stack([np.asarray(m, dtype=np.float64) for m in match_vectors])
    if stacked.ndim != 2:
        raise ShapeError("match vectors must be 1-D and of equal length")
    return VoteVector((stacked > h).sum(axis=0) / stacked.shape[0], kind=kind)


def pool(maps: Sequence[np.ndarray], method: str) -> VoteVector:
    """Reduce N score maps over the exemplars (mean or max), then take the
    maximum across the exemplar temporal dimension."""
    if len(maps) == 0:
        raise ContractError("pool needs at least one score map")
    shapes = {np.shape(m) for m in maps}
    if len(shapes) != 1:
        raise ShapeError(f"score maps differ in shape: {sorted(shapes)}")
    stacked = np.stack([np.asarray(m, dtype=np.float64) for m in maps])
    if method == "avg":
        reduced = stacked.mean(axis=0)
    elif method == "max":
        reduced = stacked.max(axis=0)
    else:
        raise ContractError(f"unknown pooling method {method!r}")
    return VoteVector(reduced.max(axis=1), kind=method)


def difference(positive: VoteVector, negative: Optional[VoteVector]) -> VoteVector:
    pos = np.asarray(positive, dtype=np.float64)
    if negative is None:
        return VoteVector(pos, kind="difference")
    neg = np.asarray(negative, dtype=np.float64)
    if neg.shape != pos.shape:
        raise ShapeError("positive and negative vote vectors differ in length")
    return VoteVector(pos - neg, kind="difference")


def localize_vote(L) -> Optional[tuple[int, float]]:
    """Position and value of the maximum positive entry of ``L``.

    Returns None when no entry is positive. When several positions attain the
    maximum, the midpoint ``(a + b) // 2`` of the longest run ``[a..b]`` of
    consecutive maxima wins; equally long runs resolve to the earlier one.
    """
    values = np.asarray(L, dtype=np.float64)
    if values.size == 0:
        return None
    m = values.max()
    if not m > 0:
        return None
    hits = np.flatnonzero(values == m)
    best_start, best_end = hits[0], hits[0]
    start = prev = hits[0]
    for i in hits[1:]:
        if i != prev + 1:
            if prev - start > best_end - best_start:
                best_start, best_end = start, prev
            start = i
        prev = i
    if prev - start > best_end - best_start:
        best_start, best_end = start, prev
    return int((best_start + best_end) // 2), float(m)


def localize_first_above(L, h: float) -> Optional[int]:
    hits = np.flatnonzero(np.asarray(L, dtype=np.float64) > h)
    return int(hits[0]) if hits.size else None
