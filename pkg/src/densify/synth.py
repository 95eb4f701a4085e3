"""Synthetic signing corpus with planted sign prototypes.

Each word of a subtitle is realised as ``sign_len`` feature rows equal to its
class prototype plus Gaussian noise; items are separated by a short neutral
pause (one corpus-wide vector plus noise). An optional non-lexical filler
pattern, shared by every subtitle it appears in, stands in for pointing
signs and pause gestures. The planted positions are the ground truth for
every spotter and metric test.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import FeatureSequence, Source, Spotting, SubtitleRecord
from .corpus import Corpus
from .errors import ContractError
from .formats import (
    CorpusManifest,
    VideoEntry,
    atomic_open,
    save_features,
    save_spottings,
    save_subtitles,
    write_lemmas,
    write_manifest,
    write_stopwords,
    write_synonyms,
)
from .keywords import Lexicon, SynonymTable
from .scoremap import cosine_score_map

STOPWORDS = ("the", "a", "and", "is", "it", "of", "to", "but", "oh", "no")


@dataclass
class SynthConfig:
    n_classes: int = 50
    dim: int = 64
    sign_len: int = 8
    noise_sigma: float = 0.05
    n_videos: int = 4
    subtitles_per_video: int = 25
    words_per_subtitle: int = 5
    filler_rate: float = 0.0
    filler_len: int = 12
    pause_len: int = 2
    stopword_rate: float = 0.2
    synonym_fraction: float = 0.1
    annotated_fraction: float = 0.5
    unannotated_classes: float = 0.2
    stride: int = 4
    receptive_field: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2 or self.dim < 8 or self.noise_sigma < 0:
            raise ContractError("need n_classes >= 2, dim >= 8, noise_sigma >= 0")
        if not 1 <= self.words_per_subtitle <= self.n_classes:
            raise ContractError("words_per_subtitle must lie in [1, n_classes]")
        if self.sign_len < 1 or self.pause_len < 1 or self.filler_len < 1:
            raise ContractError("segment lengths must be positive")


@dataclass(frozen=True)
class PlantedSign:
    video_id: str
    subtitle_id: str
    keyword: str
    class_index: int
    start: int
    length: int

    @property
    def anchor(self) -> int:
        """Feature position whose exemplar window covers exactly the sign."""
        return self.start + self.length // 2 - 1


@dataclass(frozen=True)
class PlantedFiller:
    video_id: str
    subtitle_id: str
    start: int
    length: int


@dataclass
class SynthCorpus:
    config: SynthConfig
    features: dict
    subtitles: list
    planted: list
    fillers: list
    prototypes: np.ndarray
    pause: np.ndarray
    filler: np.ndarray
    vocab: list
    lexicon: Lexicon
    seed_spottings: list = field(default_factory=list)

    @property
    def ground_truth(self) -> list[Spotting]:
        stride = self.config.stride
        return [Spotting(p.video_id, p.keyword, p.anchor * stride, 1.0, Source.Mstar) for p in self.planted]

    def corpus(self, with_seed: bool = True) -> Corpus:
        annotations = {Source.Mstar: list(self.seed_spottings)} if with_seed else {}
        return Corpus(dict(self.features), list(self.subtitles), self.lexicon, {}, annotations)

    def planted_in(self, subtitle_id: str) -> list[PlantedSign]:
        return [p for p in self.planted if p.subtitle_id == subtitle_id]

    def write(self, out_dir) -> Path:
        """Write all files plus a manifest; returns the manifest path."""
        out = Path(out_dir)
        videos = []
        for vid, seq in self.features.items():
            path = out / "features" / f"{vid}.dsf"
            save_features(seq, path)
            videos.append(VideoEntry(vid, path, seq.n_frames))
        save_subtitles(self.subtitles, out / "subtitles.jsonl")
        save_spottings(self.ground_truth, out / "gt.spottings.jsonl")
        save_spottings(self.seed_spottings, out / "seed.spottings.jsonl")
        with atomic_open(out / "lemmas.tsv") as f:
            write_lemmas(self.lexicon.lemmas, f)
        with atomic_open(out / "stopwords.txt") as f:
            write_stopwords(self.lexicon.stopwords, f)
        with atomic_open(out / "synonyms.tsv") as f:
            write_synonyms(self.lexicon.synonyms, f)
        manifest = CorpusManifest(
            videos,
            out / "subtitles.jsonl",
            [(Source.Mstar, out / "seed.spottings.jsonl")],
            out / "lemmas.tsv",
            out / "stopwords.txt",
            out / "synonyms.tsv",
            out,
        )
        write_manifest(manifest, out / "manifest.json")
        return out / "manifest.json"


def _unit(rng, n, d):
    v = rng.standard_normal((n, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def generate(cfg: Optional[SynthConfig] = None) -> SynthCorpus:
    cfg = cfg or SynthConfig()
    rng = np.random.default_rng(cfg.seed)
    protos = _unit(rng, cfg.n_classes, cfg.dim)
    pause, filler = _unit(rng, 2, cfg.dim)
    vocab = [f"w{k:03d}" for k in range(cfg.n_classes)]

    def segment(base, length):
        return base[None, :] + cfg.noise_sigma * rng.standard_normal((length, cfg.dim))

    features, subtitles, planted, fillers = {}, [], [], []
    for v in range(cfg.n_videos):
        vid = f"v{v:03d}"
        rows: list = []
        n = 0

        def put(block):
            nonlocal n
            rows.append(block)
            n += block.shape[0]

        for s in range(cfg.subtitles_per_video):
            sid = f"{vid}_s{s:03d}"
            classes = rng.choice(cfg.n_classes, size=cfg.words_per_subtitle, replace=False).tolist()
            items: list = list(classes)
            if rng.random() < cfg.filler_rate:
                items.insert(int(rng.integers(0, len(items) + 1)), None)
            start = n
            for item in items:
                put(segment(pause, cfg.pause_len))
                if item is None:
                    fillers.append(PlantedFiller(vid, sid, n, cfg.filler_len))
                    put(segment(filler, cfg.filler_len))
                else:
                    planted.append(PlantedSign(vid, sid, vocab[item], item, n, cfg.sign_len))
                    put(segment(protos[item], cfg.sign_len))
            tokens = []
            for k in classes:
                if rng.random() < cfg.stopword_rate:
                    tokens.append(STOPWORDS[int(rng.integers(len(STOPWORDS)))])
                tokens.append(vocab[k])
            text = " ".join(tokens)
            subtitles.append(SubtitleRecord(sid, vid, start * cfg.stride, n * cfg.stride, text[:1].upper() + text[1:] + ".", True))
        put(segment(pause, cfg.pause_len))
        features[vid] = FeatureSequence(vid, np.concatenate(rows), cfg.stride, cfg.receptive_field)

    synonyms = SynonymTable()
    n_pairs = int(round(cfg.synonym_fraction * cfg.n_classes / 2))
    if n_pairs:
        chosen = rng.choice(cfg.n_classes, size=2 * n_pairs, replace=False)
        for a, b in chosen.reshape(-1, 2):
            synonyms.add(vocab[a], vocab[b], round(float(rng.uniform(0.5, 1.0)), 4), int(rng.integers(1, 3)))
    lexicon = Lexicon(frozenset(STOPWORDS), {w: w for w in vocab}, synonyms)

    n_hidden = int(round(cfg.unannotated_classes * cfg.n_classes))
    hidden = set(rng.choice(cfg.n_classes, size=n_hidden, replace=False).tolist()) if n_hidden else set()
    seed_spottings = []
    for p in planted:
        if p.class_index in hidden or rng.random() >= cfg.annotated_fraction:
            continue
        conf = round(float(rng.uniform(0.8, 1.0)), 4)
        seed_spottings.append(Spotting(p.video_id, p.keyword, p.anchor * cfg.stride, conf, Source.Mstar))

    return SynthCorpus(cfg, features, subtitles, planted, fillers, protos, pause, filler, vocab, lexicon, seed_spottings)


def brute_force_spot(reference, prototype) -> tuple[int, float]:
    """Exhaustive alignment of ``prototype`` (m x D) against ``reference``.

    Returns the start position maximising the mean rescaled cosine similarity
    of aligned rows (earliest on ties) and that similarity.
    """
    ref = np.asarray(getattr(reference, "data", reference), dtype=np.float64)
    proto = np.asarray(prototype, dtype=np.float64)
    if proto.ndim == 1:
        proto = proto[None, :]
    m = proto.shape[0]
    if m > ref.shape[0]:
        raise ContractError("prototype longer than reference")
    sims = cosine_score_map(ref, proto)
    best, best_score = 0, -np.inf
    for s in range(ref.shape[0] - m + 1):
        score = float(np.mean([sims[s + j, j] for j in range(m)]))
        if score > best_score:
            best, best_score = s, score
    return best, best_score
