"""Single-stage dilated causal TCN whose left padding is a per-layer cache of
the previous chunk's layer inputs ("memory cache").

With zero-initialized caches at stream start, processing a sequence chunk by
chunk is elementwise equal to processing it in one pass with zero left
padding: the cache holds exactly the dilation*(kernel-1) input frames each
dilated conv would otherwise re-read across the chunk boundary.

Feature layout is [B, C, T] inside this module (torch Conv1d convention).
"""
import torch
from torch import nn

from .errors import StreamProtocolError


def layer_tail(kernel: int, dilation: int) -> int:
    """Input frames a dilated causal conv needs from before the chunk."""
    return dilation * (kernel - 1)


def total_cache_frames(config) -> int:
    """Cache rows summed over layers: sum_l 2^l * (kernel - 1). Constant in T."""
    return sum(layer_tail(config.tcn_kernel, 2 ** l) for l in range(config.tcn_layers))


def dilated_causal_conv_step(x: torch.Tensor, cache: torch.Tensor, conv: nn.Conv1d):
    """x: [B, C_in, k], cache: [B, C_in, dilation*(kernel-1)].

    Returns (conv output [B, C_out, k], updated cache). The conv has no
    internal padding; the cache is the left context. The updated cache is the
    tail of cache++x, which equals the last tail rows of x whenever k >= tail
    and stays correct for shorter chunks.
    """
    tail = layer_tail(conv.kernel_size[0], conv.dilation[0])
    if cache.shape != (x.shape[0], x.shape[1], tail):
        raise StreamProtocolError(
            f"cache shape {tuple(cache.shape)}, expected "
            f"{(x.shape[0], x.shape[1], tail)}")
    xpad = torch.cat([cache, x], dim=-1)
    return conv(xpad), xpad[:, :, xpad.shape[-1] - tail:].clone()


class DilatedResidualBlock(nn.Module):
    def __init__(self, channels, kernel, dilation):
        super().__init__()
        self.conv_dilated = nn.Conv1d(channels, channels, kernel, dilation=dilation)
        self.conv_1x1 = nn.Conv1d(channels, channels, 1)

    def forward(self, x, cache):
        out, new_cache = dilated_causal_conv_step(x, cache, self.conv_dilated)
        out = self.conv_1x1(torch.relu(out))
        return x + out, new_cache


class MemoryCachedTCN(nn.Module):
    """1x1 input projection, residual dilated blocks (dilation 2^l), 1x1 head.

    forward takes features [B, k, in_dim] and the per-block cache list and
    returns (logits [B, k, num_classes], updated caches).
    """

    def __init__(self, in_dim, num_classes, num_layers=4, kernel=3, channels=64):
        super().__init__()
        self.channels = channels
        self.kernel = kernel
        self.conv_in = nn.Conv1d(in_dim, channels, 1)
        self.blocks = nn.ModuleList(
            DilatedResidualBlock(channels, kernel, 2 ** l) for l in range(num_layers))
        self.conv_out = nn.Conv1d(channels, num_classes, 1)

    def initial_cache(self, batch, device=None, dtype=None):
        dtype = dtype or next(self.parameters()).dtype
        return [torch.zeros(batch, self.channels,
                            layer_tail(self.kernel, block.conv_dilated.dilation[0]),
                            device=device, dtype=dtype)
                for block in self.blocks]

    def forward(self, features: torch.Tensor, caches):
        if features.ndim != 3:
            raise ValueError(f"expected [B, k, d], got {tuple(features.shape)}")
        if len(caches) != len(self.blocks):
            raise StreamProtocolError(
                f"expected {len(self.blocks)} caches, got {len(caches)}")
        x = self.conv_in(features.transpose(1, 2))
        new_caches = []
        for block, cache in zip(self.blocks, caches):
            x, new_cache = block(x, cache)
            new_caches.append(new_cache)
        return self.conv_out(x).transpose(1, 2), new_caches
