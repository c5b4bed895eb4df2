"""Single command-line entry point.

Every subcommand accepts --run-config pointing at a key=value file whose
keys mirror the command's flags (flags win; VMTLAB_SEED beats both for the
seed).  Primary outputs go to --output / --out-dir; a small JSON summary is
printed to stdout when the primary output is a file, to stderr when the
primary output already occupies stdout.  Data problems exit 1 with a JSON
error object on stderr; bad command lines exit 2 (argparse's convention).
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from dataclasses import replace

from . import corpus as corpus_mod
from . import diversity, scoring
from .configfile import (
    Option,
    parse_max_failures,
    parse_optional_float,
    parse_optional_int,
    resolve_options,
)
from .errors import ConfigError, DataError, VmtError
from .metrics.terms import evaluate, load_annotations, load_eval_pairs, load_stopwords
from .metrics.tokenizers import get_tokenizer
from .model import (
    FeatureStore,
    Vocab,
    VideoGuidedTransformer,
    beam_decode,
    decode_to_text,
    desk_config,
    desk_train_config,
    generate_toy_corpus,
    incongruent_probe,
    load_model,
    mean_ce,
    full_config,
    full_train_config,
    samples_from_records,
    save_checkpoint,
    train,
    write_bundle,
)


def _emit_json(obj, stream) -> None:
    stream.write(json.dumps(obj, ensure_ascii=False, sort_keys=True))
    stream.write("\n")


@contextlib.contextmanager
def _open_out(path: str):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _summary(summary: dict, out_path: str) -> None:
    _emit_json(summary, sys.stderr if out_path == "-" else sys.stdout)


def _parse_specs(text: str):
    """comma-separated name:threshold:orientation triples."""
    specs = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        pieces = part.split(":")
        if len(pieces) != 3:
            raise ValueError(f"expected name:threshold:orientation, got {part!r}")
        name, threshold, orientation = pieces
        orientation = {
            "higher": scoring.HIGHER,
            "lower": scoring.LOWER,
            scoring.HIGHER: scoring.HIGHER,
            scoring.LOWER: scoring.LOWER,
        }.get(orientation.strip())
        if orientation is None:
            raise ValueError(f"orientation must be 'higher' or 'lower' in {part!r}")
        specs.append(scoring.ScorerSpec(name.strip(), float(threshold), orientation))
    if not specs:
        raise ValueError("empty filter spec list")
    return tuple(specs)


# ---------------------------------------------------------------------------
# option tables (also the documented config-file schema)

_MODEL_OPTIONS = [
    Option("profile", str, "desk", "model size profile: desk or full"),
    Option("enc_layers", int, None, "encoder layers (overrides profile)"),
    Option("dec_layers", int, None, "decoder layers (overrides profile)"),
    Option("heads", int, None, "attention heads (overrides profile)"),
    Option("d_model", int, None, "model width (overrides profile)"),
    Option("d_ffn", int, None, "feed-forward width (overrides profile)"),
    Option("d_feature", int, None, "video feature dimension (overrides profile)"),
    Option("dropout", float, None, "dropout rate (overrides profile)"),
    Option("label_smoothing", float, None, "label smoothing (overrides profile)"),
    Option("tau", float, None, "contrastive temperature"),
    Option("alpha", float, None, "contrastive loss weight"),
    Option("max_frames", int, None, "frames sampled per clip"),
    Option("max_text_len", int, None, "maximum token sequence length"),
    Option("pooling_source", str, None, "encoder_output or input_embedding"),
]

_TRAIN_OPTIONS = [
    Option("steps", int, None, "optimizer steps"),
    Option("batch_size", int, None, "samples per step"),
    Option("peak_lr", float, None, "peak learning rate"),
    Option("warmup_steps", int, None, "linear warmup length"),
    Option("weight_decay", float, None, "Adam weight decay"),
    Option("clip_norm", parse_optional_float, None, "gradient norm clip, or none"),
    Option("log_every", int, None, "steps between log rows"),
]

OPTIONS = {
    "build": [
        Option("input", str, None, "subtitle file to read", required=True),
        Option("format", str, "srt-like", "input format: srt-like or tsv"),
        Option("video_id", str, None, "video id when the format has none"),
        Option("gap_ms", int, 500, "silence gap that ends a sentence"),
        Option("pack_gap_ms", int, 500, "gap that ends a segment"),
        Option("max_duration_ms", int, 15000, "maximum segment span"),
        Option("output", str, "-", "corpus JSONL destination ('-' = stdout)"),
    ],
    "filter": [
        Option("corpus", str, None, "corpus JSONL to filter", required=True),
        Option("scores", str, None, "score file (TSV or JSONL)"),
        Option("heuristic", None, None, "compute built-in heuristic scores", is_flag=True),
        Option("specs", _parse_specs, None,
               "name:threshold:orientation[,...]; default is the stock trio"),
        Option("max_failures", parse_max_failures, 1, "failures tolerated before drop"),
        Option("output", str, "-", "kept-records JSONL destination"),
        Option("report", str, None, "drop-report JSON destination"),
    ],
    "stats": [
        Option("corpus", str, None, "corpus JSONL to profile", required=True),
        Option("n_max", int, 4, "largest n-gram order"),
        Option("output", str, "-", "report JSON destination"),
    ],
    "eval": [
        Option("pairs", str, None, "JSONL of {record_id, hyp, ref}", required=True),
        Option("annotations", str, None, "terminology annotation JSONL"),
        Option("tok", str, "whitespace", "tokenizer: whitespace or zh"),
        Option("stopwords", str, None, "stopword file, one token per line"),
        Option("stopword_lang", str, None, "builtin list: en, zh, or none"),
        Option("term_cost", float, 2.0, "edit cost at annotated positions"),
        Option("base_cost", float, 1.0, "edit cost elsewhere"),
        Option("no_shifts", None, None, "disable block shifts in the edit rate", is_flag=True),
        Option("smoothing", str, "exp", "BLEU smoothing: exp or none"),
        Option("per_record", None, None, "include a per-record breakdown", is_flag=True),
        Option("output", str, "-", "report JSON destination"),
    ],
    "train": [
        Option("corpus", str, None, "corpus JSONL", required=True),
        Option("features", str, None, "feature directory", required=True),
        Option("manifest", str, None, "manifest path (default: features/manifest.jsonl)"),
        Option("out_dir", str, None, "output directory", required=True),
        Option("seed", int, 42, "model init and shuffling seed"),
        *_MODEL_OPTIONS,
        *_TRAIN_OPTIONS,
    ],
    "translate": [
        Option("checkpoint", str, None, "model checkpoint", required=True),
        Option("corpus", str, None, "corpus JSONL to translate", required=True),
        Option("features", str, None, "feature directory", required=True),
        Option("manifest", str, None, "manifest path (default: features/manifest.jsonl)"),
        Option("src_vocab", str, None, "source vocab (default: next to checkpoint)"),
        Option("tgt_vocab", str, None, "target vocab (default: next to checkpoint)"),
        Option("split", str, None, "only translate records of this split"),
        Option("beam", int, 4, "beam size"),
        Option("length_penalty", float, 1.0, "length normalization exponent"),
        Option("max_len", parse_optional_int, None, "decode length budget"),
        Option("output", str, "-", "hypotheses JSONL {record_id, hyp, ref}"),
    ],
    "probe": [
        Option("checkpoint", str, None, "model checkpoint", required=True),
        Option("corpus", str, None, "corpus JSONL", required=True),
        Option("features", str, None, "feature directory", required=True),
        Option("manifest", str, None, "manifest path (default: features/manifest.jsonl)"),
        Option("src_vocab", str, None, "source vocab (default: next to checkpoint)"),
        Option("tgt_vocab", str, None, "target vocab (default: next to checkpoint)"),
        Option("annotations", str, None, "terminology annotation JSONL"),
        Option("split", str, "test-ambiguous", "records to probe"),
        Option("beam", int, 4, "beam size"),
        Option("seed", int, 0, "derangement seed"),
        Option("output", str, "-", "paired report JSON destination"),
    ],
    "synth": [
        Option("seed", int, 42, "corpus generation seed"),
        Option("size", int, 128, "training records"),
        Option("ambiguity_rate", float, 1.0, "fraction of ambiguous training records"),
        Option("out_dir", str, None, "bundle directory", required=True),
    ],
}


def _resolve(args: argparse.Namespace) -> dict:
    return resolve_options(OPTIONS[args.command], vars(args), args.run_config)


# ---------------------------------------------------------------------------
# subcommands


def cmd_build(args) -> int:
    opts = _resolve(args)
    with open(opts["input"], encoding="utf-8") as fh:
        parsed = corpus_mod.parse_chunks(fh, format=opts["format"])
    video_id = opts["video_id"] or parsed.video_id
    if not video_id:
        raise DataError("no video id: pass --video-id for this format")
    sentences = corpus_mod.merge_into_sentences(parsed.chunks, gap_ms=opts["gap_ms"])
    segments = corpus_mod.pack_segments(
        sentences,
        max_duration_ms=opts["max_duration_ms"],
        pack_gap_ms=opts["pack_gap_ms"],
    )
    records = corpus_mod.attach_clips(segments, video_id)
    with _open_out(opts["output"]) as out:
        corpus_mod.write_corpus(records, out)
    _summary(
        {
            "chunks": len(parsed.chunks),
            "sentences": len(sentences),
            "segments": len(segments),
            "records": len(records),
            "warnings": parsed.warnings,
        },
        opts["output"],
    )
    return 0


def cmd_filter(args) -> int:
    opts = _resolve(args)
    with open(opts["corpus"], encoding="utf-8") as fh:
        records = corpus_mod.read_corpus(fh)
    warnings = []
    if opts["scores"]:
        with open(opts["scores"], encoding="utf-8") as fh:
            records, warnings = scoring.ingest_scores(records, fh)
    if opts["heuristic"]:
        records = [
            replace(
                r,
                scores={
                    **(r.scores or {}),
                    "length_ratio": scoring.heuristic_score(r, "length_ratio"),
                    "lexical_overlap": scoring.heuristic_score(r, "lexical_overlap"),
                },
            )
            for r in records
        ]
    specs = opts["specs"] or scoring.DEFAULT_FILTER_SPECS
    kept, dropped = scoring.filter_corpus(records, specs, opts["max_failures"])
    with _open_out(opts["output"]) as out:
        corpus_mod.write_corpus(kept, out)
    if opts["report"]:
        with _open_out(opts["report"]) as out:
            _emit_json({"dropped": dropped}, out)
    _summary(
        {
            "read": len(records),
            "kept": len(kept),
            "dropped": len(dropped),
            "warnings": warnings,
        },
        opts["output"],
    )
    return 0


def cmd_stats(args) -> int:
    opts = _resolve(args)
    with open(opts["corpus"], encoding="utf-8") as fh:
        records = corpus_mod.read_corpus(fh)
    src_texts = [r.src for r in records]
    tgt_texts = [r.tgt for r in records]
    report = {
        "records": len(records),
        "src_ngrams": diversity.ngram_profile(src_texts, opts["n_max"]).report(),
        "tgt_ngrams": diversity.ngram_profile(tgt_texts, opts["n_max"]).report(),
        "src_pos": diversity.pos_profile(src_texts),
        "tgt_pos": diversity.pos_profile(tgt_texts),
    }
    with _open_out(opts["output"]) as out:
        _emit_json(report, out)
    _summary({"records": len(records)}, opts["output"])
    return 0


def _load_stopword_choice(opts) -> frozenset:
    if opts["stopwords"]:
        return load_stopwords(path=opts["stopwords"])
    lang = opts.get("stopword_lang")
    if lang == "none":
        return frozenset()
    return load_stopwords(lang=lang)


def cmd_eval(args) -> int:
    opts = _resolve(args)
    annotations = {}
    if opts["annotations"]:
        with open(opts["annotations"], encoding="utf-8") as fh:
            annotations = load_annotations(fh)
    tokenizer = get_tokenizer(opts["tok"])
    with open(opts["pairs"], encoding="utf-8") as fh:
        pairs = load_eval_pairs(fh, tokenizer, annotations)
    report = evaluate(
        pairs,
        stopwords=_load_stopword_choice(opts),
        term_cost=opts["term_cost"],
        base_cost=opts["base_cost"],
        shifts=not opts["no_shifts"],
        smoothing=opts["smoothing"],
        per_record=bool(opts["per_record"]),
    )
    with _open_out(opts["output"]) as out:
        _emit_json(report.as_dict(), out)
    _summary({"pairs": len(pairs)}, opts["output"])
    return 0


def _model_config(opts, src_vocab: int, tgt_vocab: int):
    factory = {"desk": desk_config, "full": full_config}.get(opts["profile"])
    if factory is None:
        raise ConfigError(f"unknown profile {opts['profile']!r} (want desk or full)")
    overrides = {
        o.name: opts[o.name]
        for o in _MODEL_OPTIONS
        if o.name != "profile" and opts[o.name] is not None
    }
    overrides["seed"] = opts["seed"]
    return factory(src_vocab, tgt_vocab, **overrides)


def _train_config(opts):
    factory = {"desk": desk_train_config, "full": full_train_config}[opts["profile"]]
    overrides = {o.name: opts[o.name] for o in _TRAIN_OPTIONS if opts[o.name] is not None}
    overrides["seed"] = opts["seed"]
    return factory(**overrides)


def _open_store(opts) -> FeatureStore:
    manifest = opts["manifest"] or os.path.join(opts["features"], "manifest.jsonl")
    return FeatureStore.open(opts["features"], manifest)


def cmd_train(args) -> int:
    opts = _resolve(args)
    with open(opts["corpus"], encoding="utf-8") as fh:
        records = corpus_mod.read_corpus(fh)
    train_records = [r for r in records if r.split == "train"]
    if not train_records:
        raise DataError("corpus has no train-split records")
    src_vocab = Vocab.build(r.src.split() for r in train_records)
    tgt_vocab = Vocab.build(r.tgt.split() for r in train_records)
    config = _model_config(opts, len(src_vocab), len(tgt_vocab))
    train_config = _train_config(opts)
    store = _open_store(opts)
    samples = samples_from_records(
        train_records, src_vocab, tgt_vocab, store, config.max_frames
    )
    model = VideoGuidedTransformer(config)

    os.makedirs(opts["out_dir"], exist_ok=True)
    log_path = os.path.join(opts["out_dir"], "train_log.jsonl")
    with open(log_path, "w", encoding="utf-8") as log:
        history = train(model, samples, train_config, log_stream=log)
    checkpoint_path = os.path.join(opts["out_dir"], "checkpoint.bin")
    save_checkpoint(checkpoint_path, model)
    for name, vocab in (("src_vocab.json", src_vocab), ("tgt_vocab.json", tgt_vocab)):
        with open(os.path.join(opts["out_dir"], name), "w", encoding="utf-8") as fh:
            vocab.save(fh)
    _summary(
        {
            "checkpoint": checkpoint_path,
            "log": log_path,
            "records": len(train_records),
            "final": history[-1] if history else None,
            "train_ce": mean_ce(model, samples) if samples else None,
        },
        "",
    )
    return 0


def _load_vocabs(opts):
    base = os.path.dirname(os.path.abspath(opts["checkpoint"]))
    src_path = opts["src_vocab"] or os.path.join(base, "src_vocab.json")
    tgt_path = opts["tgt_vocab"] or os.path.join(base, "tgt_vocab.json")
    try:
        with open(src_path, encoding="utf-8") as fh:
            src_vocab = Vocab.load(fh)
        with open(tgt_path, encoding="utf-8") as fh:
            tgt_vocab = Vocab.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read vocab file: {exc}") from exc
    return src_vocab, tgt_vocab


def _split_records(opts, split) -> list:
    with open(opts["corpus"], encoding="utf-8") as fh:
        records = corpus_mod.read_corpus(fh)
    if split:
        records = [r for r in records if r.split == split]
    if not records:
        raise DataError(f"no records in split {split!r}" if split else "empty corpus")
    return records


def cmd_translate(args) -> int:
    opts = _resolve(args)
    model = load_model(opts["checkpoint"])
    src_vocab, tgt_vocab = _load_vocabs(opts)
    records = _split_records(opts, opts["split"])
    store = _open_store(opts)
    samples = samples_from_records(
        records, src_vocab, tgt_vocab, store, model.config.max_frames
    )
    results = beam_decode(
        model,
        samples,
        beam_size=opts["beam"],
        length_penalty=opts["length_penalty"],
        max_len=opts["max_len"],
    )
    with _open_out(opts["output"]) as out:
        for record, result in zip(records, results):
            _emit_json(
                {
                    "record_id": record.id,
                    "hyp": decode_to_text(result, tgt_vocab),
                    "ref": record.tgt,
                },
                out,
            )
    _summary(
        {
            "records": len(records),
            "truncated": sum(r.truncated for r in results),
        },
        opts["output"],
    )
    return 0


def cmd_probe(args) -> int:
    opts = _resolve(args)
    model = load_model(opts["checkpoint"])
    src_vocab, tgt_vocab = _load_vocabs(opts)
    records = _split_records(opts, opts["split"])
    store = _open_store(opts)
    samples = samples_from_records(
        records, src_vocab, tgt_vocab, store, model.config.max_frames
    )
    annotations = {}
    if opts["annotations"]:
        with open(opts["annotations"], encoding="utf-8") as fh:
            annotations = load_annotations(fh)
    report = incongruent_probe(
        model,
        samples,
        tgt_vocab,
        annotations_by_id=annotations,
        beam_size=opts["beam"],
        seed=opts["seed"],
    )
    with _open_out(opts["output"]) as out:
        _emit_json(report.as_dict(), out)
    _summary({"records": len(records), "deltas": report.deltas}, opts["output"])
    return 0


def cmd_synth(args) -> int:
    opts = _resolve(args)
    toy = generate_toy_corpus(opts["seed"], opts["size"], opts["ambiguity_rate"])
    paths = write_bundle(toy, opts["out_dir"])
    splits = {}
    for record in toy.records:
        splits[record.split] = splits.get(record.split, 0) + 1
    _summary({**paths, "records": len(toy.records), "splits": splits}, "")
    return 0


_COMMANDS = {
    "build": (cmd_build, "subtitle file -> clip-aligned corpus JSONL"),
    "filter": (cmd_filter, "drop records failing quality thresholds"),
    "stats": (cmd_stats, "n-gram and part-of-speech diversity report"),
    "eval": (cmd_eval, "BLEU and terminology metrics for hypothesis/reference pairs"),
    "train": (cmd_train, "train the video-guided translator"),
    "translate": (cmd_translate, "beam-decode a corpus with a checkpoint"),
    "probe": (cmd_probe, "compare congruent vs mismatched-video decoding"),
    "synth": (cmd_synth, "generate the synthetic disambiguation corpus"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vmtlab",
        description="Video-guided machine translation toolkit.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (func, help_text) in _COMMANDS.items():
        sub = subparsers.add_parser(name, help=help_text, description=help_text)
        sub.set_defaults(func=func)
        sub.add_argument(
            "--run-config",
            default=None,
            help="key=value file supplying defaults for this command's flags",
        )
        for opt in OPTIONS[name]:
            suffix = "" if opt.default in (None, "") else f" (default: {opt.default})"
            if opt.is_flag:
                sub.add_argument(
                    opt.flag, dest=opt.name, action="store_const", const=True,
                    default=None, help=opt.help,
                )
            else:
                sub.add_argument(
                    opt.flag, dest=opt.name, type=opt.type, default=None,
                    help=opt.help + suffix,
                )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except VmtError as exc:
        _emit_json({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        return 1
    except OSError as exc:
        _emit_json({"error": "OSError", "message": str(exc)}, sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
