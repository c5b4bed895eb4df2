"""Video-guided Transformer with post-layer normalization.

The encoder consumes the video frame features (linearly projected, with
learned positional embeddings and a layer norm) concatenated in front of the
embedded source tokens.  A standard autoregressive decoder produces the
target.  Two projection heads map masked time-means of each modality into
the shared contrastive space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from ..errors import DataError
from .config import ModelConfig


@dataclass
class PooledProjection:
    text: torch.Tensor   # (N, d_model)
    video: torch.Tensor  # (N, d_model)


def sinusoidal_positions(length: int, d_model: int) -> torch.Tensor:
    pos = torch.arange(length, dtype=torch.float32).unsqueeze(1)
    div = torch.exp(torch.arange(0, d_model, 2, dtype=torch.float32) * (-math.log(10000.0) / d_model))
    pe = torch.zeros(length, d_model)
    pe[:, 0::2] = torch.sin(pos * div)
    pe[:, 1::2] = torch.cos(pos * div)
    return pe


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.d_head = d_model // heads
        self.w_q = nn.Linear(d_model, d_model)
        # no key bias: it shifts every logit of a query by the same amount,
        # which softmax cancels, leaving a permanently zero gradient
        self.w_k = nn.Linear(d_model, d_model, bias=False)
        self.w_v = nn.Linear(d_model, d_model)
        self.w_o = nn.Linear(d_model, d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, query, key, value, mask):
        # mask: broadcastable to (N, heads, Lq, Lk), True where attention is allowed
        n = query.shape[0]
        q = self.w_q(query).view(n, -1, self.heads, self.d_head).transpose(1, 2)
        k = self.w_k(key).view(n, -1, self.heads, self.d_head).transpose(1, 2)
        v = self.w_v(value).view(n, -1, self.heads, self.d_head).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        if mask is not None:
            scores = scores.masked_fill(~mask, -1e9)
        attn = self.dropout(torch.softmax(scores, dim=-1))
        out = (attn @ v).transpose(1, 2).contiguous().view(n, -1, self.heads * self.d_head)
        return self.w_o(out)


class FeedForward(nn.Module):
    def __init__(self, d_model: int, d_ffn: int, dropout: float):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(d_model, d_ffn),
            nn.ReLU(),
            nn.Dropout(dropout),
            nn.Linear(d_ffn, d_model),
        )

    def forward(self, x):
        return self.net(x)


class EncoderLayer(nn.Module):
    """Self-attention and FFN sublayers, norm applied after each residual."""

    def __init__(self, d_model: int, heads: int, d_ffn: int, dropout: float):
        super().__init__()
        self.attn = MultiHeadAttention(d_model, heads, dropout)
        self.ffn = FeedForward(d_model, d_ffn, dropout)
        self.norm1 = nn.LayerNorm(d_model)
        self.norm2 = nn.LayerNorm(d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, mask):
        x = self.norm1(x + self.dropout(self.attn(x, x, x, mask)))
        x = self.norm2(x + self.dropout(self.ffn(x)))
        return x


class DecoderLayer(nn.Module):
    def __init__(self, d_model: int, heads: int, d_ffn: int, dropout: float):
        super().__init__()
        self.self_attn = MultiHeadAttention(d_model, heads, dropout)
        self.cross_attn = MultiHeadAttention(d_model, heads, dropout)
        self.ffn = FeedForward(d_model, d_ffn, dropout)
        self.norm1 = nn.LayerNorm(d_model)
        self.norm2 = nn.LayerNorm(d_model)
        self.norm3 = nn.LayerNorm(d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, enc_out, self_mask, cross_mask):
        x = self.norm1(x + self.dropout(self.self_attn(x, x, x, self_mask)))
        x = self.norm2(x + self.dropout(self.cross_attn(x, enc_out, enc_out, cross_mask)))
        x = self.norm3(x + self.dropout(self.ffn(x)))
        return x


class ProjectionHead(nn.Module):
    def __init__(self, d_model: int):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(d_model, d_model),
            nn.ReLU(),
            nn.Linear(d_model, d_model),
        )

    def forward(self, x):
        return self.net(x)


def masked_mean(states: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean over time of the positions where mask is True.

    Raises when a row has no valid position: the mean would be undefined.
    """
    counts = mask.sum(dim=1)
    if (counts == 0).any():
        raise DataError("cannot pool a fully masked modality")
    total = (states * mask.unsqueeze(-1).to(states.dtype)).sum(dim=1)
    return total / counts.unsqueeze(-1).to(states.dtype)


class VideoGuidedTransformer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        torch.manual_seed(config.seed)

        d = config.d_model
        self.src_embed = nn.Embedding(config.src_vocab, d)
        self.tgt_embed = nn.Embedding(config.tgt_vocab, d)
        self.register_buffer("text_pos", sinusoidal_positions(config.max_text_len, d))
        self.video_proj = nn.Linear(config.d_feature, d)
        self.video_pos = nn.Parameter(torch.zeros(config.max_frames, d))
        self.video_norm = nn.LayerNorm(d)
        self.dropout = nn.Dropout(config.dropout)
        self.encoder = nn.ModuleList(
            EncoderLayer(d, config.heads, config.d_ffn, config.dropout)
            for _ in range(config.enc_layers)
        )
        self.decoder = nn.ModuleList(
            DecoderLayer(d, config.heads, config.d_ffn, config.dropout)
            for _ in range(config.dec_layers)
        )
        self.out_proj = nn.Linear(d, config.tgt_vocab)
        self.text_head = ProjectionHead(d)
        self.video_head = ProjectionHead(d)

        for p in self.parameters():
            if p.dim() > 1:
                nn.init.xavier_uniform_(p)

    def embed_inputs(self, feats, feat_mask, src_ids, src_mask):
        """Concatenated encoder input, video first. Returns (x, mask, video_len)."""
        n, frames, d_feature = feats.shape
        if d_feature != self.config.d_feature:
            raise DataError(
                f"feature dim {d_feature} does not match configured {self.config.d_feature}"
            )
        if frames < 1 or (feat_mask.sum(dim=1) == 0).any():
            raise DataError("every sample needs at least one video frame")
        if frames > self.config.max_frames:
            raise DataError(f"{frames} frames exceed max_frames={self.config.max_frames}")
        if (src_mask.sum(dim=1) == 0).any():
            raise DataError("empty source")
        if src_ids.shape[1] > self.config.max_text_len:
            raise DataError(f"source length {src_ids.shape[1]} exceeds {self.config.max_text_len}")

        video = self.video_norm(self.video_proj(feats) + self.video_pos[:frames])
        scale = math.sqrt(self.config.d_model)
        text = self.src_embed(src_ids) * scale + self.text_pos[: src_ids.shape[1]]
        x = self.dropout(torch.cat([video, text], dim=1))
        mask = torch.cat([feat_mask, src_mask], dim=1)
        return x, mask, frames

    def encode(self, feats, feat_mask, src_ids, src_mask):
        x, mask, video_len = self.embed_inputs(feats, feat_mask, src_ids, src_mask)
        enc_in = x
        attn_mask = mask[:, None, None, :]
        for layer in self.encoder:
            x = layer(x, attn_mask)
        return x, mask, video_len, enc_in

    def decode(self, enc_out, enc_mask, tgt_in, tgt_mask):
        ly = tgt_in.shape[1]
        if ly > self.config.max_text_len:
            raise DataError(f"target length {ly} exceeds {self.config.max_text_len}")
        scale = math.sqrt(self.config.d_model)
        x = self.dropout(self.tgt_embed(tgt_in) * scale + self.text_pos[:ly])
        causal = torch.tril(torch.ones(ly, ly, dtype=torch.bool, device=tgt_in.device))
        self_mask = tgt_mask[:, None, None, :] & causal[None, None, :, :]
        cross_mask = enc_mask[:, None, None, :]
        for layer in self.decoder:
            x = layer(x, enc_out, self_mask, cross_mask)
        return self.out_proj(x)

    def pool_and_project(self, enc_out, enc_in, enc_mask, video_len) -> PooledProjection:
        source = enc_out if self.config.pooling_source == "encoder_output" else enc_in
        video_states, text_states = source[:, :video_len], source[:, video_len:]
        video_mask, text_mask = enc_mask[:, :video_len], enc_mask[:, video_len:]
        video_pooled = self.video_head(masked_mean(video_states, video_mask))
        text_pooled = self.text_head(masked_mean(text_states, text_mask))
        return PooledProjection(text=text_pooled, video=video_pooled)

    def forward(self, batch):
        enc_out, enc_mask, video_len, enc_in = self.encode(
            batch.feats, batch.feat_mask, batch.src_ids, batch.src_mask
        )
        logits = self.decode(enc_out, enc_mask, batch.tgt_in, batch.tgt_mask)
        pooled = self.pool_and_project(enc_out, enc_in, enc_mask, video_len)
        return logits, pooled
