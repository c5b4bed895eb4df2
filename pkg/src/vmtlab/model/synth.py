"""Synthetic disambiguation corpus.

The task is token copying with a twist: a few source words are ambiguous
and have two target renderings.  Which rendering is correct is encoded only
in the clip features (a signed offset on the first four dimensions), never
in the text.  Ambiguous sources appear twice, once per sense, in both the
train and the held-out split, so a model that ignores the features cannot
get more than half of the ambiguous terms right.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass, field

import numpy as np

from ..corpus import CorpusRecord, write_corpus
from ..errors import DataError
from ..metrics.terms import TermAnnotation
from .features import write_feature, write_manifest

REGULAR_WORDS = tuple(f"w{i:02d}" for i in range(10))
AMBIGUOUS_WORDS = ("amb0", "amb1", "amb2", "amb3")
SENSE_SUFFIX = ("x", "y")
FEATURE_DIM = 16
SENSE_DIMS = slice(0, 4)
SENSE_OFFSET = 1.2
NOISE_SCALE = 0.1


def rendering(word: str, sense: int) -> str:
    return f"{word}_{SENSE_SUFFIX[sense]}"


@dataclass
class ToyCorpus:
    records: list
    features: dict = field(default_factory=dict)     # record id -> (frames, dim) float32
    annotations: dict = field(default_factory=dict)  # record id -> [TermAnnotation]


def _source_tokens(rng: random.Random, ambiguous: str | None) -> list:
    words = [rng.choice(REGULAR_WORDS) for _ in range(rng.randint(2, 4))]
    if ambiguous is not None:
        words.insert(rng.randint(0, len(words)), ambiguous)
    return words


def _target_tokens(source: list, sense: int) -> list:
    return [rendering(w, sense) if w in AMBIGUOUS_WORDS else w for w in source]


def _features(np_rng: np.random.Generator, sense: int | None) -> np.ndarray:
    frames = int(np_rng.integers(4, 11))
    data = np_rng.normal(0.0, NOISE_SCALE, size=(frames, FEATURE_DIM))
    if sense is not None:
        data[:, SENSE_DIMS] += SENSE_OFFSET if sense else -SENSE_OFFSET
    return data.astype(np.float32)


def generate_toy_corpus(seed: int, size: int, ambiguity_rate: float = 1.0) -> ToyCorpus:
    """Build a deterministic toy corpus of `size` training records.

    ambiguity_rate is the fraction of training records that carry an
    ambiguous word; those records come in same-source pairs covering both
    senses.  A test split of max(2, size // 4) records is built the same
    way.  Identical seeds give identical output, bytes included.
    """
    if size < 2:
        raise DataError("toy corpus needs size >= 2")
    if not 0.0 <= ambiguity_rate <= 1.0:
        raise DataError("ambiguity_rate must be within [0, 1]")
    rng = random.Random(seed)
    np_rng = np.random.default_rng(seed)

    corpus = ToyCorpus(records=[])
    counter = 0

    def add_record(split: str, source: list, sense: int | None) -> None:
        nonlocal counter
        rid = f"toy#{counter:06d}"
        tgt_sense = 0 if sense is None else sense
        feats = _features(np_rng, sense)
        record = CorpusRecord(
            id=rid,
            video_id=f"toyvid{counter:06d}",
            clip_start_ms=0,
            clip_end_ms=feats.shape[0] * 500,
            src=" ".join(source),
            tgt=" ".join(_target_tokens(source, tgt_sense)),
            category="toy",
            split=split,
        )
        corpus.records.append(record)
        corpus.features[rid] = feats
        if sense is not None:
            amb = next(w for w in source if w in AMBIGUOUS_WORDS)
            corpus.annotations[rid] = [
                TermAnnotation(
                    record_id=rid,
                    src_term=(amb,),
                    tgt_variants=((rendering(amb, sense),),),
                )
            ]
        counter += 1

    n_amb = int(round(size * ambiguity_rate))
    n_amb -= n_amb % 2
    pair_sources = []
    for _ in range(n_amb // 2):
        source = _source_tokens(rng, rng.choice(AMBIGUOUS_WORDS))
        pair_sources.append(source)
        add_record("train", source, sense=0)
        add_record("train", source, sense=1)
    plain_sources = []
    for _ in range(size - n_amb):
        source = _source_tokens(rng, None)
        plain_sources.append(source)
        add_record("train", source, sense=None)

    # Held-out records reuse training sources: the unseen part is the
    # feature draw, which is exactly what the task is meant to test.
    test_size = max(2, size // 4)
    n_test_amb = int(round(test_size * ambiguity_rate))
    n_test_amb -= n_test_amb % 2
    if not pair_sources:
        n_test_amb = 0
    for i in range(n_test_amb // 2):
        source = pair_sources[i % len(pair_sources)]
        add_record("test-ambiguous", source, sense=0)
        add_record("test-ambiguous", source, sense=1)
    if plain_sources:
        for i in range(test_size - n_test_amb):
            add_record("test-unambiguous", plain_sources[i % len(plain_sources)], sense=None)
    return corpus


def write_bundle(corpus: ToyCorpus, out_dir: str) -> dict:
    """Write corpus.jsonl, features/ (+manifest.jsonl), annotations.jsonl.

    Returns the paths written, keyed by artifact name.
    """
    os.makedirs(out_dir, exist_ok=True)
    feature_dir = os.path.join(out_dir, "features")
    os.makedirs(feature_dir, exist_ok=True)

    corpus_path = os.path.join(out_dir, "corpus.jsonl")
    with open(corpus_path, "w", encoding="utf-8") as f:
        write_corpus(corpus.records, f)

    manifest = {}
    for record in corpus.records:
        path = write_feature(feature_dir, record.id, corpus.features[record.id])
        manifest[record.id] = os.path.relpath(path, feature_dir)
    manifest_path = os.path.join(feature_dir, "manifest.jsonl")
    with open(manifest_path, "w", encoding="utf-8") as f:
        write_manifest(manifest, f)

    annotations_path = os.path.join(out_dir, "annotations.jsonl")
    with open(annotations_path, "w", encoding="utf-8") as f:
        for record in corpus.records:
            for ann in corpus.annotations.get(record.id, []):
                f.write(
                    json.dumps(
                        {
                            "record_id": ann.record_id,
                            "src_term": list(ann.src_term),
                            "tgt_variants": [list(v) for v in ann.tgt_variants],
                        },
                        ensure_ascii=False,
                    )
                )
                f.write("\n")

    return {
        "corpus": corpus_path,
        "features": feature_dir,
        "manifest": manifest_path,
        "annotations": annotations_path,
    }
