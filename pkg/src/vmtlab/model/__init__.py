"""Video-guided Transformer translation model and its training loop."""

from .batching import Batch, Sample, collate, make_sample, samples_from_records
from .checkpoint import load_checkpoint, load_model, save_checkpoint
from .config import (
    ModelConfig,
    TrainConfig,
    desk_config,
    desk_train_config,
    full_config,
    full_train_config,
)
from .decode import DecodeResult, beam_decode, beam_decode_sample, decode_to_text
from .features import (
    FeatureSequence,
    FeatureStore,
    read_feature,
    read_manifest,
    write_feature,
    write_manifest,
)
from .frames import sample_frames
from .gradcheck import GradCheckReport, grad_check
from .losses import LossBreakdown, ce_loss, compute_losses, ctr_loss
from .probe import ProbeReport, derangement, incongruent_probe
from .synth import ToyCorpus, generate_toy_corpus, write_bundle
from .train import lr_at, mean_ce, train
from .transformer import PooledProjection, VideoGuidedTransformer, masked_mean
from .vocab import BOS, EOS, PAD, UNK, Vocab

__all__ = [
    "BOS",
    "Batch",
    "DecodeResult",
    "EOS",
    "FeatureSequence",
    "FeatureStore",
    "GradCheckReport",
    "LossBreakdown",
    "ModelConfig",
    "PAD",
    "PooledProjection",
    "ProbeReport",
    "Sample",
    "ToyCorpus",
    "TrainConfig",
    "UNK",
    "VideoGuidedTransformer",
    "Vocab",
    "beam_decode",
    "beam_decode_sample",
    "ce_loss",
    "collate",
    "compute_losses",
    "ctr_loss",
    "decode_to_text",
    "derangement",
    "desk_config",
    "desk_train_config",
    "generate_toy_corpus",
    "grad_check",
    "incongruent_probe",
    "load_checkpoint",
    "load_model",
    "lr_at",
    "make_sample",
    "masked_mean",
    "mean_ce",
    "full_config",
    "full_train_config",
    "read_feature",
    "read_manifest",
    "sample_frames",
    "samples_from_records",
    "save_checkpoint",
    "train",
    "write_bundle",
    "write_feature",
    "write_manifest",
]
