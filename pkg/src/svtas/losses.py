"""Training losses.

seg_loss: cross-entropy plus a truncated mean-squared smoothing penalty on
adjacent log-probabilities, the whole thing divided by the video's chunk
count so per-chunk losses sum to a per-video quantity independent of k.

clip_loss: symmetric InfoNCE between L2-normalized per-frame image and text
embeddings with in-chunk frames as the batch of pairs.
"""
import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

_LOG_PROB_FLOOR = math.log(1e-8)


@dataclass(frozen=True)
class LossConfig:
    lambda_smooth: float = 0.15
    tau_smooth: float = 4.0
    num_chunks_norm: int = 1

    @classmethod
    def for_video(cls, model_config, num_frames: int) -> "LossConfig":
        return cls(lambda_smooth=model_config.lambda_smooth,
                   tau_smooth=model_config.tau_smooth,
                   num_chunks_norm=model_config.num_chunks(num_frames))


def seg_loss(logits: torch.Tensor, labels: torch.Tensor, cfg: LossConfig) -> torch.Tensor:
    """logits [k, C], labels [k] -> scalar (CE + lambda * TMSE) / num_chunks."""
    if logits.ndim != 2 or labels.shape != logits.shape[:1]:
        raise ValueError(
            f"shape mismatch: logits {tuple(logits.shape)}, labels {tuple(labels.shape)}")
    if labels.numel() and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ValueError(
            f"labels out of range [0, {logits.shape[1]})")
    ce = F.cross_entropy(logits, labels)
    if logits.shape[0] > 1 and cfg.lambda_smooth > 0:
        logp = F.log_softmax(logits, dim=-1).clamp(min=_LOG_PROB_FLOOR)
        delta = (logp[1:] - logp[:-1].detach()).abs()
        tmse = delta.clamp(max=cfg.tau_smooth).pow(2).mean()
    else:
        tmse = logits.new_zeros(())
    return (ce + cfg.lambda_smooth * tmse) / cfg.num_chunks_norm


def clip_loss(img: torch.Tensor, txt: torch.Tensor, temperature: float) -> torch.Tensor:
    """img, txt [k, d] with L2-normalized rows -> scalar symmetric CE."""
    if img.shape != txt.shape or img.ndim != 2:
        raise ValueError(
            f"shape mismatch: img {tuple(img.shape)}, txt {tuple(txt.shape)}")
    for name, x in (("img", img), ("txt", txt)):
        norms = x.norm(dim=-1)
        if (norms == 0).any():
            raise ValueError(f"{name} has a zero-norm row; rows must be L2-normalized")
    sim = img @ txt.t() / temperature
    targets = torch.arange(img.shape[0], device=img.device)
    return 0.5 * (F.cross_entropy(sim, targets) + F.cross_entropy(sim.t(), targets))


def normalize_rows(x: torch.Tensor, eps: float = 1e-8) -> torch.Tensor:
    return x / x.norm(dim=-1, keepdim=True).clamp(min=eps)
