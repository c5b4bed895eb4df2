"""Step-based training with Adam and an inverse square root schedule."""

from __future__ import annotations

import json
import math
import random
from typing import Optional, Sequence

import torch

from ..errors import DataError
from .batching import Sample, collate
from .config import TrainConfig
from .losses import compute_losses
from .transformer import VideoGuidedTransformer


def lr_at(step: int, peak_lr: float, warmup_steps: int) -> float:
    """Linear warmup to peak_lr, then decay proportional to 1/sqrt(step)."""
    if step < 1:
        raise ValueError("schedule is defined for steps >= 1")
    return peak_lr * min(step / warmup_steps, math.sqrt(warmup_steps / step))


def _epoch_batches(n_samples: int, batch_size: int, epoch: int, seed: int):
    order = list(range(n_samples))
    random.Random(seed + epoch).shuffle(order)
    for lo in range(0, n_samples, batch_size):
        yield order[lo : lo + batch_size]


def train(
    model: VideoGuidedTransformer,
    samples: Sequence[Sample],
    train_config: TrainConfig,
    log_stream=None,
) -> list:
    """Run the full step budget over shuffled batches; returns the log rows.

    Shuffling depends only on the seed and epoch number, so a rerun with the
    same inputs walks the same batches.  Each log row carries the step, the
    loss components, and the learning rate in effect.
    """
    if not samples:
        raise DataError("no training samples")
    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=train_config.peak_lr,
        betas=train_config.betas,
        eps=train_config.adam_eps,
        weight_decay=train_config.weight_decay,
    )
    history = []
    step = 0
    epoch = 0
    model.train()
    while step < train_config.steps:
        for indices in _epoch_batches(
            len(samples), train_config.batch_size, epoch, train_config.seed
        ):
            step += 1
            lr = lr_at(step, train_config.peak_lr, train_config.warmup_steps)
            for group in optimizer.param_groups:
                group["lr"] = lr
            optimizer.zero_grad()
            batch = collate([samples[i] for i in indices])
            total, breakdown = compute_losses(model, batch)
            total.backward()
            for name, param in model.named_parameters():
                if param.grad is not None and not torch.isfinite(param.grad).all():
                    raise DataError(f"non-finite gradient in {name} at step {step}")
            if train_config.clip_norm is not None:
                torch.nn.utils.clip_grad_norm_(model.parameters(), train_config.clip_norm)
            optimizer.step()
            if step % train_config.log_every == 0 or step == train_config.steps:
                row = {
                    "step": step,
                    "ce": breakdown.ce,
                    "ctr": breakdown.ctr,
                    "total": breakdown.total,
                    "lr": lr,
                }
                history.append(row)
                if log_stream is not None:
                    log_stream.write(json.dumps(row) + "\n")
            if step >= train_config.steps:
                break
        epoch += 1
    model.eval()
    return history


def mean_ce(
    model: VideoGuidedTransformer, samples: Sequence[Sample], batch_size: int = 16
) -> float:
    """Token-weighted cross entropy over a sample set, without grad."""
    from .losses import ce_loss
    from .vocab import PAD

    model.eval()
    total = 0.0
    tokens = 0
    with torch.no_grad():
        for lo in range(0, len(samples), batch_size):
            batch = collate(samples[lo : lo + batch_size])
            logits, _ = model(batch)
            n_tok = int((batch.tgt_out != PAD).sum())
            loss = ce_loss(logits, batch.tgt_out, pad_id=PAD, reduction="sum")
            total += float(loss.item())
            tokens += n_tok
    if tokens == 0:
        raise DataError("no target tokens to score")
    return total / tokens
