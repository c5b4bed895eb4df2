"""Model and training hyperparameters."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

from ..errors import ConfigError


@dataclass
class ModelConfig:
    src_vocab: int
    tgt_vocab: int
    enc_layers: int = 2
    dec_layers: int = 2
    heads: int = 4
    d_model: int = 64
    d_ffn: int = 128
    max_text_len: int = 256
    max_frames: int = 12
    d_feature: int = 16
    dropout: float = 0.1
    label_smoothing: float = 0.1
    tau: float = 0.002
    alpha: float = 1.0
    # Layer norm placement is fixed to post-norm (after each residual add).
    norm_style: str = "post"
    # Where the contrastive pooling reads from.
    pooling_source: str = "encoder_output"
    seed: int = 42

    def __post_init__(self):
        if self.d_model % self.heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by heads {self.heads}")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.alpha < 0:
            raise ConfigError("alpha must be non-negative")
        if self.max_frames < 1:
            raise ConfigError("max_frames must be at least 1")
        if self.norm_style != "post":
            raise ConfigError("only post-layer normalization is supported")
        if self.pooling_source not in ("encoder_output", "input_embedding"):
            raise ConfigError(f"unknown pooling_source {self.pooling_source!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ConfigError("label_smoothing must be in [0, 1)")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainConfig:
    steps: int = 2000
    batch_size: int = 16
    peak_lr: float = 3e-3
    warmup_steps: int = 200
    betas: tuple[float, float] = (0.9, 0.98)
    adam_eps: float = 1e-9
    weight_decay: float = 0.0
    clip_norm: float | None = None
    log_every: int = 50
    seed: int = 42

    def __post_init__(self):
        if self.steps < 0 or self.batch_size < 1 or self.warmup_steps < 1:
            raise ConfigError("steps must be >= 0, batch_size and warmup_steps >= 1")
        if self.peak_lr < 0 or self.weight_decay < 0:
            raise ConfigError("peak_lr and weight_decay must be non-negative")

    def as_dict(self) -> dict:
        return asdict(self)


def desk_config(src_vocab: int, tgt_vocab: int, **overrides) -> ModelConfig:
    """Small CPU-friendly profile used by the toy experiments.

    Dropout and label smoothing are off: the desk runs overfit tiny corpora
    on purpose, and both regularizers bound the reachable training loss away
    from zero.
    """
    params = dict(
        enc_layers=2,
        dec_layers=2,
        heads=4,
        d_model=64,
        d_ffn=128,
        d_feature=16,
        dropout=0.0,
        label_smoothing=0.0,
    )
    params.update(overrides)
    return ModelConfig(src_vocab=src_vocab, tgt_vocab=tgt_vocab, **params)


def full_config(src_vocab: int, tgt_vocab: int, **overrides) -> ModelConfig:
    """Full-scale profile for real GPU runs."""
    params = dict(
        enc_layers=6,
        dec_layers=6,
        heads=8,
        d_model=512,
        d_ffn=2048,
        d_feature=768,
        dropout=0.1,
        label_smoothing=0.1,
    )
    params.update(overrides)
    return ModelConfig(src_vocab=src_vocab, tgt_vocab=tgt_vocab, **params)


def desk_train_config(**overrides) -> TrainConfig:
    """CPU-friendly optimization profile (the TrainConfig defaults)."""
    return TrainConfig(**overrides)


def full_train_config(**overrides) -> TrainConfig:
    """Full-scale optimization settings: lower peak rate, long warmup."""
    params = dict(peak_lr=7e-4, warmup_steps=4000, weight_decay=0.1)
    params.update(overrides)
    return TrainConfig(**params)
