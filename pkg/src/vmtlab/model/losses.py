"""Training objectives: smoothed cross entropy plus a contrastive term.

The contrastive loss treats the text and video projections of the same clip
as a positive pair and every other clip in the batch as a negative.  It is
summed (not averaged) over the batch, so a single-sample batch contributes
exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from ..errors import DataError
from .vocab import PAD


@dataclass
class LossBreakdown:
    ce: float
    ctr: float
    total: float

    def as_dict(self) -> dict:
        return {"ce": self.ce, "ctr": self.ctr, "total": self.total}


def ce_loss(
    logits: torch.Tensor,
    targets: torch.Tensor,
    pad_id: int = PAD,
    label_smoothing: float = 0.0,
    reduction: str = "mean",
) -> torch.Tensor:
    """Cross entropy over non-pad target positions.

    With smoothing eps, the target distribution is (1 - eps) on the gold
    token plus eps spread uniformly over the whole vocabulary.  ``mean``
    divides by the number of non-pad tokens; ``sum`` does not.
    """
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction {reduction!r}")
    vocab = logits.shape[-1]
    logp = F.log_softmax(logits, dim=-1)
    flat_logp = logp.reshape(-1, vocab)
    flat_tgt = targets.reshape(-1)
    keep = flat_tgt != pad_id
    if not keep.any():
        raise DataError("no non-pad target tokens")
    flat_logp = flat_logp[keep]
    flat_tgt = flat_tgt[keep]
    nll = -flat_logp.gather(1, flat_tgt.unsqueeze(1)).squeeze(1)
    if label_smoothing > 0.0:
        uniform = -flat_logp.mean(dim=-1)
        per_token = (1.0 - label_smoothing) * nll + label_smoothing * uniform
    else:
        per_token = nll
    total = per_token.sum()
    if reduction == "mean":
        return total / keep.sum()
    return total


def ctr_loss(text_pooled: torch.Tensor, video_pooled: torch.Tensor, tau: float) -> torch.Tensor:
    """Sum over the batch of -log p(matching video | text) at temperature tau.

    Similarities are cosine; scaling by 1/tau happens before a log-softmax,
    which keeps the computation finite even for very small tau.  A batch of
    one has no negatives, and the softmax over its single entry makes the
    loss exactly zero.
    """
    if text_pooled.shape != video_pooled.shape:
        raise DataError("text and video projections must have matching shapes")
    n = text_pooled.shape[0]
    if n == 0:
        raise DataError("empty batch")
    text_norms = text_pooled.norm(dim=-1)
    video_norms = video_pooled.norm(dim=-1)
    if (text_norms == 0).any() or (video_norms == 0).any():
        raise DataError("zero-norm projection cannot be cosine-normalized")
    text_unit = text_pooled / text_norms.unsqueeze(-1)
    video_unit = video_pooled / video_norms.unsqueeze(-1)
    sim = text_unit @ video_unit.transpose(0, 1) / tau
    logp = F.log_softmax(sim, dim=-1)
    return -logp.diagonal().sum()


def compute_losses(model, batch, reduction: str = "mean"):
    """Run the model on a batch and combine the objectives.

    Returns (total tensor for backward, LossBreakdown of detached floats).
    The combined loss is ce + alpha * ctr even when alpha is zero, so the
    projection heads always participate in the graph.
    """
    config = model.config
    logits, pooled = model(batch)
    ce = ce_loss(
        logits,
        batch.tgt_out,
        pad_id=PAD,
        label_smoothing=config.label_smoothing,
        reduction=reduction,
    )
    ctr = ctr_loss(pooled.text, pooled.video, config.tau)
    total = ce + config.alpha * ctr
    breakdown = LossBreakdown(ce=float(ce.item()), ctr=float(ctr.item()), total=float(total.item()))
    return total, breakdown
