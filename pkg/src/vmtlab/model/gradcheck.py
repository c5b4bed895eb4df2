"""Finite-difference verification of the combined loss gradient."""

from __future__ import annotations

import random
from dataclasses import dataclass

import torch

from .batching import Batch
from .losses import compute_losses
from .transformer import VideoGuidedTransformer


@dataclass
class GradCheckReport:
    max_rel_err: float
    per_tensor: dict  # name -> worst relative error among sampled coordinates

    def worst(self):
        name = max(self.per_tensor, key=self.per_tensor.get)
        return name, self.per_tensor[name]


def grad_check(
    model: VideoGuidedTransformer,
    batch: Batch,
    coords_per_tensor: int = 3,
    epsilon: float = 1e-4,
    seed: int = 0,
) -> GradCheckReport:
    """Compare autograd against central differences on sampled coordinates.

    The model is switched to double precision and eval mode (dropout off);
    every named parameter tensor gets up to coords_per_tensor randomly
    chosen entries perturbed by +/- epsilon.
    """
    model.double()
    model.eval()
    batch = batch.to(torch.float64)

    model.zero_grad()
    loss, _ = compute_losses(model, batch)
    loss.backward()
    grads = {
        name: p.grad.detach().clone()
        for name, p in model.named_parameters()
        if p.grad is not None
    }

    def loss_value() -> float:
        with torch.no_grad():
            value, _ = compute_losses(model, batch)
        return float(value.item())

    rng = random.Random(seed)
    per_tensor = {}
    for name, param in model.named_parameters():
        if name not in grads:
            continue
        flat = param.data.view(-1)
        numel = flat.shape[0]
        picked = rng.sample(range(numel), min(coords_per_tensor, numel))
        worst = 0.0
        for idx in picked:
            orig = flat[idx].item()
            flat[idx] = orig + epsilon
            f_plus = loss_value()
            flat[idx] = orig - epsilon
            f_minus = loss_value()
            flat[idx] = orig
            fd = (f_plus - f_minus) / (2.0 * epsilon)
            autograd = grads[name].view(-1)[idx].item()
            rel = abs(autograd - fd) / max(abs(autograd), abs(fd), 1e-8)
            worst = max(worst, rel)
        per_tensor[name] = worst
    return GradCheckReport(max_rel_err=max(per_tensor.values()), per_tensor=per_tensor)
