"""Command-line entry point: ``densify <subcommand> ...``.

Options may also come from ``--config FILE``, a flat TOML file whose keys are
option names with dashes replaced by underscores; flags on the command line
win. Outputs are written to a temporary file and renamed into place.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .core import Source, SpotterConfig
from .corpus import load_corpus
from .errors import ConfigError, DensifyError
from .evaluation import evaluate_corpus, oracle
from .exemplar import mine_corpus
from .formats import (
    atomic_open,
    load_model,
    load_predictions,
    load_spottings,
    read_manifest,
    save_model,
    save_predictions,
    save_spottings,
)
from .merge import densify, sort_key, spotting_stats
from .mlp import TrainConfig, predict_sliding, train
from .novel import mine_novel
from .pseudo import pseudo_label_corpus
from .synth import SynthConfig, generate

log = logging.getLogger("densify")


def _load_config(path) -> dict:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        tomllib = None
    text = Path(path).read_text(encoding="utf-8")
    if tomllib is not None:
        try:
            return tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (x.strip() for x in line.split("=", 1))
        try:
            out[key] = json.loads(value.replace("'", '"'))
        except json.JSONDecodeError:
            out[key] = value
    return out


def _tag(text) -> Source:
    try:
        return Source.parse(text.strip())
    except DensifyError as e:
        raise ConfigError(str(e)) from None


def _min_conf_map(text) -> dict:
    out = {}
    if not text:
        return out
    for item in text.split(","):
        if "=" not in item:
            raise ConfigError(f"--min-conf entries look like mstar=0.5, got {item!r}")
        tag, value = item.split("=", 1)
        out[_tag(tag)] = float(value)
    return out


def _sources(text) -> list:
    return [_tag(t) for t in text.split(",") if t.strip()]


def _annotation_spottings(args, manifest=None):
    paths = list(args.annotations or [])
    if not paths and manifest is not None:
        paths = [p for _, p in manifest.annotation_paths]
    out = []
    for p in paths:
        out.extend(load_spottings(p))
    return out


def _write_spottings(spottings, path):
    spottings = sorted(spottings, key=sort_key)
    save_spottings(spottings, path)
    log.info("wrote %d spottings to %s", len(spottings), path)
    return spottings


def _spotter_config(args) -> SpotterConfig:
    return SpotterConfig(
        method=getattr(args, "method", "vote"),
        h=args.h,
        n_exemplars=getattr(args, "n_exemplars", 20),
        n_positives=getattr(args, "n_pos", 9),
        n_negatives=getattr(args, "n_neg", 27),
        pad_frames=getattr(args, "pad_frames", 50),
        min_exemplar_confidence=getattr(args, "min_exemplar_conf", 0.8),
        min_confidence=getattr(args, "min_conf", 0.0),
        expand_synonyms=getattr(args, "expand_synonyms", False),
        seed=getattr(args, "seed", 0),
    )


# -- subcommands -------------------------------------------------------------


def cmd_synth(args):
    cfg = SynthConfig(
        n_classes=args.classes,
        dim=args.dim,
        noise_sigma=args.noise,
        n_videos=args.videos,
        subtitles_per_video=args.subtitles_per_video,
        words_per_subtitle=args.words,
        filler_rate=args.filler_rate,
        filler_len=args.filler_len,
        seed=args.seed,
    )
    corpus = generate(cfg)
    manifest = corpus.write(args.out)
    print(json.dumps({"manifest": str(manifest), "videos": len(corpus.features), "subtitles": len(corpus.subtitles), "planted": len(corpus.planted)}))


def cmd_spot_exemplar(args):
    manifest = read_manifest(args.manifest)
    corpus = load_corpus(manifest, with_annotations=False)
    existing = _annotation_spottings(args, manifest)
    found = mine_corpus(corpus, existing, _spotter_config(args), args.workers)
    _write_spottings(found, args.out)


def cmd_spot_novel(args):
    manifest = read_manifest(args.manifest)
    corpus = load_corpus(manifest, with_annotations=False)
    known = {s.keyword for s in _annotation_spottings(args, manifest)}
    if args.model:
        known |= set(load_model(args.model).vocab)
    found = mine_novel(corpus, known, _spotter_config(args), args.workers)
    _write_spottings(found, args.out)


def _load_prediction_dir(directory, video_ids):
    out = {}
    for vid in video_ids:
        path = Path(directory) / f"{vid}.dsp"
        if path.exists():
            out[vid] = load_predictions(path, vid)
    if not out:
        raise FileNotFoundError(f"no prediction files (<video>.dsp) under {directory}")
    return out


def cmd_pseudo_label(args):
    manifest = read_manifest(args.manifest)
    corpus = load_corpus(manifest, with_annotations=False)
    preds = _load_prediction_dir(args.predictions, corpus.features)
    tier = None if args.tier == "none" else int(args.tier)
    found = pseudo_label_corpus(preds, corpus.subtitles, corpus.lexicon, args.threshold, tier)
    _write_spottings(found, args.out)


def cmd_train_mlp(args):
    manifest = read_manifest(args.manifest)
    corpus = load_corpus(manifest, with_annotations=False)
    spots = [s for s in _annotation_spottings(args, manifest) if s.confidence >= args.min_conf]
    spots.sort(key=sort_key)
    vocab = sorted({s.keyword for s in spots})
    cfg = TrainConfig(
        batch_size=args.batch_size,
        epochs=args.epochs,
        lr=args.lr,
        decay_epochs=tuple(args.decay_epochs),
        seed=args.seed,
        hidden=tuple(args.hidden),
    )
    model, history = train(spots, corpus.features, vocab, cfg)
    save_model(model.astype("float32"), args.out)
    print(json.dumps({"samples": len(spots), "classes": len(vocab), "loss": [round(x, 6) for x in history]}))


def cmd_predict(args):
    manifest = read_manifest(args.manifest)
    corpus = load_corpus(manifest, with_annotations=False)
    model = load_model(args.model)
    for vid in sorted(corpus.features):
        save_predictions(predict_sliding(model, corpus.features[vid]), Path(args.out) / f"{vid}.dsp")
    log.info("wrote predictions for %d videos to %s", len(corpus.features), args.out)


def cmd_evaluate(args):
    manifest = read_manifest(args.manifest)
    corpus = load_corpus(manifest, with_annotations=False)
    if args.mode == "spottings":
        if not args.spottings:
            raise ConfigError("--mode spottings needs --spottings FILE ...")
        spots = [s for p in args.spottings for s in load_spottings(p)]
        report = evaluate_corpus(corpus.subtitles, corpus.lexicon, spottings=spots, min_conf=args.min_conf, strict=args.strict, pad_frames=args.pad_frames)
    elif args.mode == "predictions":
        if not args.predictions:
            raise ConfigError("--mode predictions needs --predictions DIR")
        preds = _load_prediction_dir(args.predictions, corpus.features)
        report = evaluate_corpus(corpus.subtitles, corpus.lexicon, predictions=preds, min_conf=args.min_conf, strict=args.strict)
    else:
        if not args.model:
            raise ConfigError("--mode oracle needs --model FILE for the vocabulary")
        report = oracle(corpus.subtitles, load_model(args.model).vocab, corpus.lexicon)
    if args.json:
        with atomic_open(args.json) as f:
            f.write(report.to_json())
    if args.tsv:
        with atomic_open(args.tsv) as f:
            f.write(report.to_tsv())
    summary = {k: v for k, v in asdict(report).items() if k != "rows"}
    print(json.dumps(summary))


def cmd_densify(args):
    paths = list(args.input or [])
    if args.manifest:
        paths += [p for _, p in read_manifest(args.manifest).annotation_paths]
    if not paths:
        raise ConfigError("densify needs --input FILE ... or --manifest")
    spots = [s for p in paths for s in load_spottings(p)]
    merged = densify(spots, _sources(args.sources), _min_conf_map(args.min_conf), args.dedup_window)
    _write_spottings(merged, args.out)
    stats = spotting_stats(merged)
    if args.stats:
        with atomic_open(args.stats) as f:
            f.write(json.dumps(stats, indent=2) + "\n")
    print(json.dumps(stats))


def cmd_stats(args):
    spots = [s for p in args.spottings for s in load_spottings(p)]
    print(json.dumps(spotting_stats(spots), indent=2))


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="densify", description="Dense automatic sign annotation toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="flat TOML file of option defaults")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--classes", type=int, default=50)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--videos", type=int, default=4)
    p.add_argument("--subtitles-per-video", type=int, default=25)
    p.add_argument("--words", type=int, default=5)
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--filler-rate", type=float, default=0.0)
    p.add_argument("--filler-len", type=int, default=12)
    p.set_defaults(func=cmd_synth)

    def corpus_args(p, out=True):
        p.add_argument("--manifest", required=True)
        if out:
            p.add_argument("--out", required=True)
        p.add_argument("--workers", type=int, default=None, help="default: $DENSIFY_THREADS or all cores")

    p = sub.add_parser("spot-exemplar", help="mine known signs from in-domain exemplars (E)")
    corpus_args(p)
    p.add_argument("--annotations", nargs="+", help="existing spotting files (default: the manifest's)")
    p.add_argument("--method", choices=["vote", "avg", "max"], default="vote")
    p.add_argument("--h", type=float, default=None, help="threshold (default 0.8 vote/max, 0.7 avg)")
    p.add_argument("--n-exemplars", type=int, default=20)
    p.add_argument("--min-exemplar-conf", type=float, default=0.8)
    p.add_argument("--pad-frames", type=int, default=50)
    p.add_argument("--expand-synonyms", action="store_true")
    p.set_defaults(func=cmd_spot_exemplar)

    p = sub.add_parser("spot-novel", help="discover novel signs from subtitle exemplars (N)")
    corpus_args(p)
    p.add_argument("--annotations", nargs="+", help="spottings defining the known vocabulary")
    p.add_argument("--model", help="model whose vocabulary also counts as known")
    p.add_argument("--n-pos", type=int, default=9)
    p.add_argument("--n-neg", type=int, default=27)
    p.add_argument("--h", type=float, default=0.8)
    p.add_argument("--min-conf", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_spot_novel)

    p = sub.add_parser("pseudo-label", help="filter classifier predictions by subtitle words (P)")
    corpus_args(p)
    p.add_argument("--predictions", required=True, help="directory of <video>.dsp files")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--tier", choices=["1", "2", "none"], default="2")
    p.set_defaults(func=cmd_pseudo_label)

    p = sub.add_parser("train-mlp", help="train the lightweight classifier")
    corpus_args(p)
    p.add_argument("--annotations", nargs="+")
    p.add_argument("--min-conf", type=float, default=0.0)
    p.add_argument("--epochs", type=int, default=15)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--decay-epochs", type=int, nargs="*", default=[5, 10])
    p.add_argument("--hidden", type=int, nargs=2, default=[512, 256])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_mlp)

    p = sub.add_parser("predict", help="sliding-window predictions for every video")
    corpus_args(p)
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="recall / IoU / coverage against subtitles")
    corpus_args(p, out=False)
    p.add_argument("--mode", choices=["spottings", "predictions", "oracle"], default="spottings")
    p.add_argument("--spottings", nargs="+")
    p.add_argument("--predictions")
    p.add_argument("--model")
    p.add_argument("--min-conf", type=float, default=0.0, help="confidence threshold")
    p.add_argument("--pad-frames", type=int, default=0)
    p.add_argument("--strict", action="store_true", help="refuse subtitles without signing alignment")
    p.add_argument("--json")
    p.add_argument("--tsv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("densify", help="union of spotting sources")
    p.add_argument("--sources", default="m,d,a,mstar,dstar,p,e,n")
    p.add_argument("--min-conf", default="", help="per-source thresholds, e.g. mstar=0.5,dstar=0.75")
    p.add_argument("--input", nargs="+")
    p.add_argument("--manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--dedup-window", type=int, nargs="?", const=8, default=None)
    p.add_argument("--stats")
    p.set_defaults(func=cmd_densify)

    p = sub.add_parser("stats", help="counts per source and vocabulary")
    p.add_argument("spottings", nargs="+")
    p.set_defaults(func=cmd_stats)
    return parser


def _apply_config(parser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    values = {k.replace("-", "_"): v for k, v in _load_config(known.config).items()}
    # defaults live on the subparsers, so push the config values down to each
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            sp.set_defaults(**{k: v for k, v in values.items() if any(a.dest == k for a in sp._actions)})


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (DensifyError, OSError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except DensifyError as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return e.exit_code
    except (OSError, UnicodeDecodeError) as e:
        print(json.dumps({"error": type(e).__name__, "message": str(e)}), file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
