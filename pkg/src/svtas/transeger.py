"""Model assemblies.

SETE: frames -> shift-conv encoder -> spatial pool -> memory TCN -> logits.
METE: SETE's image path plus, at train time, a text path over prompts of the
      current window's labels; both project into a shared embedding space for
      the contrastive loss. Inference uses the image path alone.
Transeger: previous window's prompts (ground truth while training, own
      predictions while streaming) -> text features, time-reversed and
      concatenated with current pooled image features, into the memory TCN.

All modules take and return explicit cache state so a streaming session can
own it; nothing is hidden inside the model.
"""
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .config import VARIANTS, ModelConfig
from .encoder import ShiftConvEncoder, spatial_pool
from .errors import ConfigError
from .losses import LossConfig, normalize_rows, seg_loss
from .memory_tcn import MemoryCachedTCN
from .prompt import (PromptTextEncoder, PromptVocab, TextEncoderConfig,
                     generate_prompts, tokenize_window)


@dataclass
class ModelCaches:
    encoder: list
    tcn: list

    def detached(self) -> "ModelCaches":
        return ModelCaches([c.detach() for c in self.encoder],
                           [c.detach() for c in self.tcn])

    def tensors(self):
        return list(self.encoder) + list(self.tcn)


def time_reverse(x: torch.Tensor) -> torch.Tensor:
    """Reverse a feature sequence [B, k, d] along the temporal axis."""
    if x.ndim != 3:
        raise ValueError(f"expected [B, k, d], got {tuple(x.shape)}")
    return torch.flip(x, dims=[1])


def joint_net(prev_text: torch.Tensor, cur_image: torch.Tensor,
              tcn: MemoryCachedTCN, caches):
    """Fuse time-reversed previous-window text features with current pooled
    image features along the feature axis and classify with the memory TCN."""
    if prev_text.shape[:2] != cur_image.shape[:2]:
        raise ValueError(
            f"temporal shapes differ: text {tuple(prev_text.shape)}, "
            f"image {tuple(cur_image.shape)}")
    fused = torch.cat([time_reverse(prev_text), cur_image], dim=-1)
    return tcn(fused, caches)


def start_of_stream_labels(batch: int, k: int) -> np.ndarray:
    """The previous-window labels before any prediction exists: background."""
    return np.zeros((batch, k), dtype=np.int64)


class _StreamModel(nn.Module):
    """Shared plumbing: config/class bookkeeping, frame conversion, caches."""

    def __init__(self, config: ModelConfig, class_names):
        super().__init__()
        config.validate()
        if len(class_names) != config.num_classes:
            raise ConfigError(
                f"{len(class_names)} class names for num_classes={config.num_classes}")
        self.config = config
        self.class_names = list(class_names)
        self.encoder = ShiftConvEncoder(config)

    @property
    def dtype(self):
        return next(self.parameters()).dtype

    def frames_to_tensor(self, frames) -> torch.Tensor:
        """numpy [B, k, H, W, 3] (or [k, H, W, 3]) -> model-dtype tensor."""
        if isinstance(frames, np.ndarray):
            frames = torch.from_numpy(frames)
        if frames.ndim == 4:
            frames = frames[None]
        if frames.shape[2:] != (self.config.height, self.config.width, 3):
            raise ValueError(
                f"frame shape {tuple(frames.shape[2:])} does not match config "
                f"({self.config.height}, {self.config.width}, 3)")
        return frames.to(self.dtype)

    def initial_caches(self, batch: int = 1, device=None) -> ModelCaches:
        return ModelCaches(
            encoder=self.encoder.initial_cache(
                batch, self.config.height, self.config.width, device=device),
            tcn=self.tcn.initial_cache(batch, device=device))

    def _image_features(self, frames, caches):
        feat, enc_caches = self.encoder(frames, caches.encoder)
        return spatial_pool(feat), enc_caches


class SeteModel(_StreamModel):
    variant = "sete"

    def __init__(self, config, class_names):
        super().__init__(config, class_names)
        self.tcn = MemoryCachedTCN(config.image_dim, config.num_classes,
                                   config.tcn_layers, config.tcn_kernel,
                                   config.tcn_channels)

    def forward_chunk(self, frames, caches: ModelCaches):
        pooled, enc_caches = self._image_features(frames, caches)
        logits, tcn_caches = self.tcn(pooled, caches.tcn)
        return logits, ModelCaches(enc_caches, tcn_caches)


class _TextBearingModel(_StreamModel):
    def __init__(self, config, class_names):
        super().__init__(config, class_names)
        self.vocab = PromptVocab.build(class_names)
        self.text_encoder = PromptTextEncoder(TextEncoderConfig(
            vocab=self.vocab, max_tokens=config.max_tokens,
            embed_dim=config.text_dim, num_layers=config.text_layers,
            num_heads=config.text_heads))

    def encode_label_windows(self, label_windows: np.ndarray) -> torch.Tensor:
        """Integer labels [B, k] -> text features [B, k, text_dim], one
        prompt per frame, all windows encoded in a single batch."""
        label_windows = np.asarray(label_windows)
        if label_windows.ndim == 1:
            label_windows = label_windows[None]
        b, k = label_windows.shape
        prompts = []
        for row in label_windows:
            prompts.extend(generate_prompts(row, self.class_names))
        tokens, eos = tokenize_window(prompts, self.vocab, self.config.max_tokens)
        device = next(self.parameters()).device
        feats = self.text_encoder(tokens.to(device), eos.to(device))
        return feats.reshape(b, k, -1)


class MeteModel(_TextBearingModel):
    variant = "mete"

    def __init__(self, config, class_names):
        super().__init__(config, class_names)
        self.tcn = MemoryCachedTCN(config.image_dim, config.num_classes,
                                   config.tcn_layers, config.tcn_kernel,
                                   config.tcn_channels)
        self.img_head = nn.Linear(config.image_dim, config.clip_embed_dim)
        self.txt_head = nn.Linear(config.text_dim, config.clip_embed_dim)

    def forward_chunk(self, frames, caches: ModelCaches):
        """Inference path: image only, text branch is training supervision."""
        pooled, enc_caches = self._image_features(frames, caches)
        logits, tcn_caches = self.tcn(pooled, caches.tcn)
        return logits, ModelCaches(enc_caches, tcn_caches)

    def forward_train(self, frames, labels: np.ndarray, caches: ModelCaches):
        """Returns (logits, caches, img_emb, txt_emb); embeddings are
        L2-normalized rows [B, k, clip_embed_dim] for the contrastive loss."""
        if labels is None:
            raise ValueError("METE training requires labels for prompt generation")
        pooled, enc_caches = self._image_features(frames, caches)
        logits, tcn_caches = self.tcn(pooled, caches.tcn)
        txt = self.encode_label_windows(labels).to(pooled.dtype)
        img_emb = normalize_rows(self.img_head(pooled))
        txt_emb = normalize_rows(self.txt_head(txt))
        return logits, ModelCaches(enc_caches, tcn_caches), img_emb, txt_emb


class TransegerModel(_TextBearingModel):
    variant = "transeger"

    def __init__(self, config, class_names):
        super().__init__(config, class_names)
        self.tcn = MemoryCachedTCN(config.text_dim + config.image_dim,
                                   config.num_classes, config.tcn_layers,
                                   config.tcn_kernel, config.tcn_channels)

    def forward_chunk(self, frames, prev_labels: np.ndarray, caches: ModelCaches):
        """prev_labels [B, k]: the previous window's labels (ground truth
        when teacher forcing, own predictions when streaming)."""
        pooled, enc_caches = self._image_features(frames, caches)
        prev_text = self.encode_label_windows(prev_labels).to(pooled.dtype)
        logits, tcn_caches = joint_net(prev_text, pooled, self.tcn, caches.tcn)
        return logits, ModelCaches(enc_caches, tcn_caches)


def build_model(variant: str, config: ModelConfig, class_names,
                dtype=torch.float32, seed=None):
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    if seed is not None:
        torch.manual_seed(seed)
    cls = {"sete": SeteModel, "mete": MeteModel, "transeger": TransegerModel}[variant]
    return cls(config, class_names).to(dtype)


def transeger_train_step(model: TransegerModel, frames, labels_j, labels_jm1,
                         caches: ModelCaches, optimizer, loss_cfg: LossConfig):
    """One teacher-forced update on one chunk: prompts from the previous
    window's ground truth, seg_loss on the current window, one optimizer
    step. Returns (loss value, caches detached for the next chunk)."""
    frames = model.frames_to_tensor(frames)
    labels_j = torch.as_tensor(np.asarray(labels_j)).reshape(frames.shape[0], -1)
    logits, new_caches = model.forward_chunk(frames, labels_jm1, caches)
    loss = torch.stack([seg_loss(logits[b], labels_j[b], loss_cfg)
                        for b in range(logits.shape[0])]).mean()
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return loss.item(), new_caches.detached()
