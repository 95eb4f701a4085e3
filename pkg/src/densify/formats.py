"""Readers and writers for every on-disk format.

Binary containers (all little-endian):

* features ``DSF1``: version, T, D, stride, receptive_field (u32), then
  T*D float32 row-major.
* predictions ``DSP1``: version, T, V, stride (u32), V length-prefixed
  UTF-8 class names, then T*V float32.
* models ``DSM1``: version, F, V (u32), leaky slope (f32), vocabulary block,
  then four layers of (rows u32, cols u32, weights f32, bias f32).

Text formats are UTF-8 with LF line endings: subtitles and spottings are
JSON Lines, synonyms and lemmas are TSV, stop words are one per line.
"""

from __future__ import annotations

import contextlib
import io
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable, Optional, TextIO

import numpy as np

from .core import FeatureSequence, Source, Spotting, SubtitleRecord
from .errors import ContractError, DataError, FormatError, ParseError, TagError, TruncationError
from .keywords import SynonymTable
from .mlp import MlpModel
from .pseudo import PredictionSequence

VERSION = 1
_U32 = struct.Struct("<I")
_F32 = struct.Struct("<f")
_LE_F32 = np.dtype("<f4")


# -- helpers -----------------------------------------------------------------


def _read_exact(source: BinaryIO, n: int, what: str) -> bytes:
    buf = source.read(n)
    if len(buf) != n:
        raise TruncationError(f"truncated {what}: expected {n} bytes, got {len(buf)}")
    return buf


def _read_u32(source: BinaryIO, what: str) -> int:
    return _U32.unpack(_read_exact(source, 4, what))[0]


def _check_magic(source: BinaryIO, magic: bytes):
    got = source.read(4)
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}")
    version = _read_u32(source, "version")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")


def _write_matrix(sink: BinaryIO, a: np.ndarray) -> int:
    payload = np.ascontiguousarray(a, dtype=_LE_F32).tobytes()
    sink.write(payload)
    return len(payload)


def _read_matrix(source: BinaryIO, rows: int, cols: int, what: str, exact_end: bool = False) -> np.ndarray:
    n = rows * cols * 4
    payload = source.read(n)
    if len(payload) != n or (exact_end and source.read(1)):
        raise TruncationError(f"{what}: header implies {n} payload bytes, stream length differs")
    a = np.frombuffer(payload, dtype=_LE_F32).astype(np.float32).reshape(rows, cols)
    if not np.isfinite(a).all():
        raise DataError(f"{what} contains non-finite values")
    return a


def _write_vocab(sink: BinaryIO, vocab) -> int:
    n = 0
    for word in vocab:
        raw = word.encode("utf-8")
        sink.write(_U32.pack(len(raw)) + raw)
        n += 4 + len(raw)
    return n


def _read_vocab(source: BinaryIO, count: int) -> tuple:
    out = []
    for _ in range(count):
        size = _read_u32(source, "vocabulary entry length")
        try:
            out.append(_read_exact(source, size, "vocabulary entry").decode("utf-8"))
        except UnicodeDecodeError as e:
            raise FormatError(f"vocabulary entry is not UTF-8: {e}") from None
    return tuple(out)


# -- features ----------------------------------------------------------------


def write_features(seq: FeatureSequence, sink: BinaryIO) -> int:
    T, D = seq.data.shape
    header = b"DSF1" + struct.pack("<5I", VERSION, T, D, seq.stride, seq.receptive_field)
    sink.write(header)
    return len(header) + _write_matrix(sink, seq.data)


def read_features(source: BinaryIO, video_id: str = "") -> FeatureSequence:
    _check_magic(source, b"DSF1")
    T, D, stride, rf = struct.unpack("<4I", _read_exact(source, 16, "feature header"))
    data = _read_matrix(source, T, D, "feature payload", exact_end=True)
    try:
        return FeatureSequence(video_id, data, stride, rf)
    except ContractError as e:
        raise DataError(str(e)) from None


# -- predictions ---------------------------------------------------------------


def write_predictions(preds: PredictionSequence, sink: BinaryIO) -> int:
    T, V = preds.probs.shape
    header = b"DSP1" + struct.pack("<4I", VERSION, T, V, preds.stride)
    sink.write(header)
    return len(header) + _write_vocab(sink, preds.vocab) + _write_matrix(sink, preds.probs)


def read_predictions(source: BinaryIO, video_id: str = "") -> PredictionSequence:
    _check_magic(source, b"DSP1")
    T, V, stride = struct.unpack("<3I", _read_exact(source, 12, "prediction header"))
    vocab = _read_vocab(source, V)
    probs = _read_matrix(source, T, V, "prediction payload", exact_end=True)
    try:
        return PredictionSequence(video_id, stride, probs, vocab)
    except ContractError as e:
        raise DataError(str(e)) from None


# -- models ------------------------------------------------------------------


def write_model(model: MlpModel, sink: BinaryIO) -> int:
    head = b"DSM1" + struct.pack("<3I", VERSION, model.in_dim, model.n_classes) + _F32.pack(model.leaky_slope)
    sink.write(head)
    n = len(head) + _write_vocab(sink, model.vocab)
    for w, b in zip(model.weights, model.biases):
        sink.write(struct.pack("<2I", *w.shape))
        n += 8 + _write_matrix(sink, w) + _write_matrix(sink, b[None, :])
    return n


def read_model(source: BinaryIO) -> MlpModel:
    _check_magic(source, b"DSM1")
    F, V = struct.unpack("<2I", _read_exact(source, 8, "model header"))
    slope = _F32.unpack(_read_exact(source, 4, "leaky slope"))[0]
    vocab = _read_vocab(source, V)
    weights, biases = [], []
    for layer in range(4):
        rows, cols = struct.unpack("<2I", _read_exact(source, 8, f"layer {layer} shape"))
        weights.append(_read_matrix(source, rows, cols, f"layer {layer} weights"))
        biases.append(_read_matrix(source, 1, rows, f"layer {layer} bias", exact_end=layer == 3)[0])
    try:
        model = MlpModel(tuple(weights), tuple(biases), vocab, float(slope))
    except ContractError as e:
        raise DataError(str(e)) from None
    if model.in_dim != F:
        raise DataError(f"header says F={F}, first layer takes {model.in_dim}")
    return model


# -- JSON Lines --------------------------------------------------------------


def _json_lines(source: TextIO, path=None):
    for lineno, line in enumerate(source, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ParseError(f"invalid JSON: {e.msg}", lineno, path) from None
        if not isinstance(obj, dict):
            raise ParseError("expected a JSON object", lineno, path)
        yield lineno, obj


def _dump(obj) -> str:
    return json.dumps(obj, ensure_ascii=False) + "\n"


def _field(obj, key, kind, lineno, path):
    if key not in obj:
        raise ParseError(f"missing field {key!r}", lineno, path)
    value = obj[key]
    ok = isinstance(value, kind) and not (kind is not bool and isinstance(value, bool))
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if not ok:
        raise ParseError(f"field {key!r} has wrong type {type(value).__name__}", lineno, path)
    return value


def read_subtitles(source: TextIO, path=None) -> list[SubtitleRecord]:
    out = []
    for lineno, obj in _json_lines(source, path):
        try:
            out.append(
                SubtitleRecord(
                    _field(obj, "id", str, lineno, path),
                    _field(obj, "video", str, lineno, path),
                    _field(obj, "start_frame", int, lineno, path),
                    _field(obj, "end_frame", int, lineno, path),
                    _field(obj, "text", str, lineno, path),
                    _field(obj, "aligned", bool, lineno, path),
                )
            )
        except ContractError as e:
            raise ParseError(str(e), lineno, path) from None
    return out


def write_subtitles(subtitles: Iterable[SubtitleRecord], sink: TextIO) -> int:
    n = 0
    for s in subtitles:
        sink.write(
            _dump(
                {
                    "id": s.subtitle_id,
                    "video": s.video_id,
                    "start_frame": s.start_frame,
                    "end_frame": s.end_frame,
                    "text": s.text,
                    "aligned": s.aligned,
                }
            )
        )
        n += 1
    return n


def read_spottings(source: TextIO, path=None) -> list[Spotting]:
    out = []
    for lineno, obj in _json_lines(source, path):
        tag = _field(obj, "source", str, lineno, path)
        if tag not in Source._value2member_map_:
            raise TagError(f"unknown source tag {tag!r}", lineno, path)
        try:
            out.append(
                Spotting(
                    _field(obj, "video", str, lineno, path),
                    _field(obj, "word", str, lineno, path),
                    _field(obj, "frame", int, lineno, path),
                    _field(obj, "conf", float, lineno, path),
                    Source(tag),
                )
            )
        except ContractError as e:
            raise ParseError(str(e), lineno, path) from None
    return out


def write_spottings(spottings: Iterable[Spotting], sink: TextIO) -> int:
    n = 0
    for s in spottings:
        sink.write(
            _dump({"video": s.video_id, "word": s.keyword, "frame": s.frame, "conf": s.confidence, "source": s.source.value})
        )
        n += 1
    return n


# -- tables ------------------------------------------------------------------


def _tsv_rows(source: TextIO, ncols: int, path=None):
    for lineno, line in enumerate(source, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != ncols:
            raise ParseError(f"expected {ncols} tab-separated columns, got {len(cols)}", lineno, path)
        yield lineno, cols


def read_synonyms(source: TextIO, path=None) -> SynonymTable:
    table = SynonymTable()
    for lineno, (word, syn, sim, tier) in _tsv_rows(source, 4, path):
        try:
            table.add(word, syn, float(sim), int(tier))
        except (ValueError, ContractError) as e:
            raise ParseError(f"bad synonym row: {e}", lineno, path) from None
    return table


def write_synonyms(table: SynonymTable, sink: TextIO) -> int:
    n = 0
    for word, syn, sim, tier in table.rows():
        sink.write(f"{word}\t{syn}\t{sim!r}\t{tier}\n")
        n += 1
    return n


def read_lemmas(source: TextIO, path=None) -> dict:
    return {word: lemma for _, (word, lemma) in _tsv_rows(source, 2, path)}


def write_lemmas(lemmas: dict, sink: TextIO) -> int:
    for word, lemma in lemmas.items():
        sink.write(f"{word}\t{lemma}\n")
    return len(lemmas)


def read_stopwords(source: TextIO, path=None) -> frozenset:
    return frozenset(w for w in (line.strip() for line in source) if w)


def write_stopwords(words: Iterable[str], sink: TextIO) -> int:
    words = sorted(set(words))
    for w in words:
        sink.write(w + "\n")
    return len(words)


# -- paths -------------------------------------------------------------------


@contextlib.contextmanager
def atomic_open(path, mode="w"):
    """Write to a temporary sibling file and rename it into place on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        if "b" in mode:
            f = os.fdopen(fd, mode)
        else:
            f = os.fdopen(fd, mode, encoding="utf-8", newline="\n")
        with f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def _open_text(path):
    return open(path, encoding="utf-8", newline="")


def load_features(path, video_id: str = "") -> FeatureSequence:
    with open(path, "rb") as f:
        return read_features(f, video_id or Path(path).stem)


def save_features(seq: FeatureSequence, path) -> int:
    with atomic_open(path, "wb") as f:
        return write_features(seq, f)


def load_predictions(path, video_id: str = "") -> PredictionSequence:
    with open(path, "rb") as f:
        return read_predictions(f, video_id or Path(path).stem)


def save_predictions(preds: PredictionSequence, path) -> int:
    with atomic_open(path, "wb") as f:
        return write_predictions(preds, f)


def load_model(path) -> MlpModel:
    with open(path, "rb") as f:
        return read_model(f)


def save_model(model: MlpModel, path) -> int:
    with atomic_open(path, "wb") as f:
        return write_model(model, f)


def load_subtitles(path) -> list[SubtitleRecord]:
    with _open_text(path) as f:
        return read_subtitles(f, path)


def save_subtitles(subtitles, path) -> int:
    with atomic_open(path) as f:
        return write_subtitles(subtitles, f)


def load_spottings(path) -> list[Spotting]:
    with _open_text(path) as f:
        return read_spottings(f, path)


def save_spottings(spottings, path) -> int:
    with atomic_open(path) as f:
        return write_spottings(spottings, f)


def load_synonyms(path) -> SynonymTable:
    with _open_text(path) as f:
        return read_synonyms(f, path)


def load_lemmas(path) -> dict:
    with _open_text(path) as f:
        return read_lemmas(f, path)


def load_stopwords(path) -> frozenset:
    with _open_text(path) as f:
        return read_stopwords(f, path)


# -- manifest ----------------------------------------------------------------


@dataclass
class VideoEntry:
    video_id: str
    feature_path: Path
    n_frames: int


@dataclass
class CorpusManifest:
    """Where a corpus lives on disk. Relative paths resolve against the manifest file."""

    videos: list
    subtitle_path: Path
    annotation_paths: list = field(default_factory=list)
    lemma_path: Optional[Path] = None
    stopword_path: Optional[Path] = None
    synonym_path: Optional[Path] = None
    root: Path = Path(".")

    def validate(self):
        ids = [v.video_id for v in self.videos]
        if len(set(ids)) != len(ids):
            raise FormatError("duplicate video ids in manifest")
        paths = [v.feature_path for v in self.videos] + [self.subtitle_path]
        paths += [p for _, p in self.annotation_paths]
        paths += [p for p in (self.lemma_path, self.stopword_path, self.synonym_path) if p is not None]
        for p in paths:
            if not p.exists():
                raise FileNotFoundError(f"manifest references missing file {p}")
        return self

    def video(self, video_id: str) -> VideoEntry:
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise KeyError(video_id)

    def to_json(self) -> dict:
        def rel(p):
            p = Path(p)
            try:
                return p.relative_to(self.root).as_posix()
            except ValueError:
                return str(p)

        out = {
            "videos": [{"id": v.video_id, "features": rel(v.feature_path), "n_frames": v.n_frames} for v in self.videos],
            "subtitles": rel(self.subtitle_path),
            "annotations": [{"source": tag.value, "path": rel(p)} for tag, p in self.annotation_paths],
        }
        for key, p in (("lemmas", self.lemma_path), ("stopwords", self.stopword_path), ("synonyms", self.synonym_path)):
            if p is not None:
                out[key] = rel(p)
        return out


def read_manifest(path) -> CorpusManifest:
    path = Path(path)
    root = path.parent
    try:
        with _open_text(path) as f:
            obj = json.load(f)
        videos = [VideoEntry(v["id"], root / v["features"], int(v["n_frames"])) for v in obj["videos"]]
        annotations = [(Source.parse(a["source"]), root / a["path"]) for a in obj.get("annotations", [])]
        opt = {k: (root / obj[k] if obj.get(k) else None) for k in ("lemmas", "stopwords", "synonyms")}
        manifest = CorpusManifest(
            videos,
            root / obj["subtitles"],
            annotations,
            opt["lemmas"],
            opt["stopwords"],
            opt["synonyms"],
            root,
        )
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(f"{path}: malformed manifest ({e!r})") from None
    return manifest.validate()


def write_manifest(manifest: CorpusManifest, path) -> None:
    with atomic_open(path) as f:
        json.dump(manifest.to_json(), f, indent=2, ensure_ascii=False)
        f.write("\n")


def to_bytes(writer, obj) -> bytes:
    """Serialise ``obj`` with a stream writer into an in-memory buffer."""
    buf = io.BytesIO()
    writer(obj, buf)
    return buf.getvalue()


def to_text(writer, obj) -> str:
    buf = io.StringIO(newline="\n")
    writer(obj, buf)
    return buf.getvalue()
