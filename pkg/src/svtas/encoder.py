"""Frame encoder: strided conv blocks with a causal temporal shift.

The shift moves the first floor(C * shift_fraction) channels of each frame's
feature map back by one frame. Inside a chunk that is a plain roll; across
chunk boundaries the last frame's shifted channels are carried in a one-frame
cache so a stream of chunks behaves exactly like one long pass. Frame t only
ever sees channels from frames <= t.
"""
import math

import torch
from torch import nn

from .errors import ConfigError, StreamProtocolError


def shift_fold(channels: int, shift_fraction: float) -> int:
    fold = int(channels * shift_fraction)
    if fold < 1:
        raise ConfigError(
            f"shift_fraction {shift_fraction} shifts zero of {channels} channels")
    return fold


def temporal_shift(x: torch.Tensor, cache: torch.Tensor, shift_fraction: float):
    """x: [B, k, C, h, w], cache: [B, 1, fold, h, w] from the previous chunk.

    Returns (shifted x, new cache). The new cache is the pre-shift last frame
    of this chunk, so chaining chunks equals shifting the concatenated stream.
    """
    fold = shift_fold(x.shape[2], shift_fraction)
    expected = (x.shape[0], 1, fold) + x.shape[3:]
    if tuple(cache.shape) != expected:
        raise StreamProtocolError(
            f"shift cache shape {tuple(cache.shape)}, expected {expected}")
    out = x.clone()
    out[:, :, :fold] = torch.cat([cache, x[:, :-1, :fold]], dim=1)
    return out, x[:, -1:, :fold].clone()


class ShiftConvEncoder(nn.Module):
    """Stack of stride-2 3x3 conv + relu blocks, each preceded by the causal
    temporal shift of its input channels (except the raw RGB input).

    Input frames [B, k, H, W, 3] in [0, 1]; output feature maps
    [B, k, C_out, h, w] with h = ceil(H / 2^L).
    """

    def __init__(self, config):
        super().__init__()
        widths = tuple(config.encoder_channels) + (config.image_dim,)
        self.shift_fraction = config.shift_fraction
        self.folds = [shift_fold(c, config.shift_fraction) for c in widths]
        convs = []
        c_in = 3
        for c_out in widths:
            convs.append(nn.Conv2d(c_in, c_out, kernel_size=3, stride=2, padding=1))
            c_in = c_out
        self.convs = nn.ModuleList(convs)

    @property
    def num_blocks(self):
        return len(self.convs)

    def feature_hw(self, height, width):
        for _ in self.convs:
            height, width = math.ceil(height / 2), math.ceil(width / 2)
        return height, width

    def initial_cache(self, batch, height, width, device=None, dtype=None):
        dtype = dtype or next(self.parameters()).dtype
        caches = []
        h, w = height, width
        for fold in self.folds:
            h, w = math.ceil(h / 2), math.ceil(w / 2)
            caches.append(torch.zeros(batch, 1, fold, h, w, device=device, dtype=dtype))
        return caches

    def forward(self, frames: torch.Tensor, caches):
        """frames: [B, k, H, W, 3]. Returns ([B, k, C, h, w], new caches)."""
        if frames.ndim != 5 or frames.shape[-1] != 3:
            raise ValueError(f"expected frames [B, k, H, W, 3], got {tuple(frames.shape)}")
        if len(caches) != len(self.convs):
            raise StreamProtocolError(
                f"expected {len(self.convs)} shift caches, got {len(caches)}")
        b, k = frames.shape[:2]
        x = frames.permute(0, 1, 4, 2, 3).reshape(b * k, 3, *frames.shape[2:4])
        new_caches = []
        for conv, cache in zip(self.convs, caches):
            x = torch.relu(conv(x))
            x = x.reshape(b, k, *x.shape[1:])
            x, new_cache = temporal_shift(x, cache, self.shift_fraction)
            new_caches.append(new_cache)
            x = x.reshape(b * k, *x.shape[2:])
        return x.reshape(b, k, *x.shape[1:]), new_caches


def spatial_pool(features: torch.Tensor) -> torch.Tensor:
    """[B, k, C, h, w] -> [B, k, C] by mean over the spatial grid."""
    if features.ndim != 5:
        raise ValueError(f"expected [B, k, C, h, w], got {tuple(features.shape)}")
    return features.mean(dim=(-2, -1))
