"""Chunked streaming over a video: decomposition, session state, step cost.

A video of T frames is consumed as ceil(T/k) non-overlapping chunks of k
frames; the last chunk is zero-padded and its predictions truncated to the
valid prefix. Temporal subsampling happens before chunking, so the session
always sees the model-rate stream; convenience wrappers re-expand predictions
to the original frame rate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np
import torch

from .datasets import list_frame_files, load_frame
from .errors import StreamProtocolError
from .transeger import (MeteModel, SeteModel, TransegerModel,
                        start_of_stream_labels)


@dataclass
class Chunk:
    """One fixed-length window of the stream.

    frames has shape [k, H, W, 3] with values in [0, 1]; positions at or
    beyond valid_count are zero-filled and exist only to keep the model
    input shape constant.
    """

    frames: np.ndarray
    chunk_index: int
    valid_count: int


def chunk_video(frames: np.ndarray, k: int) -> list[Chunk]:
    """Split [T, H, W, 3] into ceil(T/k) chunks, zero-padding the last."""
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    if frames.ndim != 4 or frames.shape[-1] != 3:
        raise ValueError(f"need frames of shape [T, H, W, 3], got {frames.shape}")
    return list(chunk_stream(iter(frames), k))


def chunk_stream(frames: Iterable[np.ndarray], k: int) -> Iterator[Chunk]:
    """Incremental chunk_video over an iterator of [H, W, 3] frames."""
    if k < 1:
        raise ValueError(f"need k >= 1, got {k}")
    buf: list[np.ndarray] = []
    shape: tuple[int, ...] | None = None
    index = 0
    for frame in frames:
        arr = np.asarray(frame)
        if arr.ndim != 3 or arr.shape[-1] != 3:
            raise ValueError(f"need frames of shape [H, W, 3], got {arr.shape}")
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise ValueError(f"frame shape changed mid-stream: {shape} then {arr.shape}")
        buf.append(arr)
        if len(buf) == k:
            yield Chunk(np.stack(buf), index, k)
            buf = []
            index += 1
    if buf:
        assert shape is not None
        padded = np.zeros((k,) + shape, dtype=buf[0].dtype)
        padded[: len(buf)] = np.stack(buf)
        yield Chunk(padded, index, len(buf))


def frame_dir_iterator(path) -> Iterator[np.ndarray]:
    """Yield [H, W, 3] float frames from a directory of frame_%06d.png files."""
    for file in list_frame_files(path):
        yield load_frame(file)


class StreamSession:
    """Strictly sequential single-video inference over one model.

    Holds the per-layer memory caches and, for the joint variant, the
    previous window's predicted labels; the start-of-stream previous window
    is all background. Total cache size depends only on the model
    configuration, never on how many chunks have been processed.
    """

    def __init__(self, model) -> None:
        self.model = model
        self.config = model.config
        self.caches = model.initial_caches(batch=1)
        self.chunks_processed = 0
        self.last_logits: np.ndarray | None = None
        self.prev_pred_labels: np.ndarray | None = None
        if isinstance(model, TransegerModel):
            self.prev_pred_labels = start_of_stream_labels(1, self.config.k)

    def step(self, chunk: Chunk) -> np.ndarray:
        """Process the next chunk, returning labels for its valid frames."""
        if chunk.chunk_index != self.chunks_processed:
            raise StreamProtocolError(
                f"expected chunk_index {self.chunks_processed}, got {chunk.chunk_index}"
            )
        if not 1 <= chunk.valid_count <= self.config.k:
            raise StreamProtocolError(
                f"valid_count {chunk.valid_count} outside [1, {self.config.k}]"
            )
        frames = self.model.frames_to_tensor(chunk.frames)
        if frames.shape[1] != self.config.k:
            raise ValueError(
                f"chunk has {frames.shape[1]} frames, config.k is {self.config.k}"
            )
        with torch.no_grad():
            if self.prev_pred_labels is not None:
                logits, self.caches = self.model.forward_chunk(
                    frames, self.prev_pred_labels, self.caches
                )
            else:
                logits, self.caches = self.model.forward_chunk(frames, self.caches)
        labels = np.argmax(logits[0].numpy(), axis=1)
        if self.prev_pred_labels is not None:
            self.prev_pred_labels = labels[np.newaxis, :]
        self.chunks_processed += 1
        self.last_logits = logits[0, : chunk.valid_count].numpy()
        return labels[: chunk.valid_count]

    def cache_bytes(self) -> int:
        """Total bytes held by all persistent per-step state."""
        total = sum(t.numel() * t.element_size() for t in self.caches.tensors())
        if self.prev_pred_labels is not None:
            total += self.prev_pred_labels.nbytes
        return total

    def tcn_cache_bytes(self) -> int:
        """Bytes held by the temporal-convolution tail caches alone."""
        return sum(t.numel() * t.element_size() for t in self.caches.tcn)


def session_step(session: StreamSession, chunk: Chunk) -> np.ndarray:
    """Functional alias for StreamSession.step."""
    return session.step(chunk)


def measure_step_cost(session: StreamSession, chunk: Chunk) -> tuple[float, int]:
    """Run one step, returning (wall_time_seconds, cache_bytes after it)."""
    start = time.perf_counter()
    session.step(chunk)
    elapsed = time.perf_counter() - start
    return elapsed, session.cache_bytes()


def subsample(frames: np.ndarray, sample_rate: int) -> np.ndarray:
    """Keep every sample_rate-th frame, starting from the first."""
    if sample_rate < 1:
        raise ValueError(f"need sample_rate >= 1, got {sample_rate}")
    return frames[::sample_rate]


def expand_predictions(labels: np.ndarray, sample_rate: int, num_frames: int) -> np.ndarray:
    """Repeat model-rate labels back to the original frame rate."""
    if sample_rate < 1:
        raise ValueError(f"need sample_rate >= 1, got {sample_rate}")
    expanded = np.repeat(np.asarray(labels), sample_rate)
    if expanded.shape[0] < num_frames:
        raise ValueError(
            f"{labels.shape[0]} model-rate labels cannot cover {num_frames} frames "
            f"at sample_rate {sample_rate}"
        )
    return expanded[:num_frames]


def segment_stream(model, frames: Iterable[np.ndarray], sample_rate: int = 1) -> np.ndarray:
    """Segment an iterator of frames, returning one label per input frame.

    Frames are consumed once and only k model-rate frames are buffered at a
    time, so arbitrarily long streams run in constant memory (plus the
    output labels themselves).
    """
    if sample_rate < 1:
        raise ValueError(f"need sample_rate >= 1, got {sample_rate}")
    session = StreamSession(model)
    total = 0

    def model_rate() -> Iterator[np.ndarray]:
        nonlocal total
        for i, frame in enumerate(frames):
            total = i + 1
            if i % sample_rate == 0:
                yield frame

    outputs = [session.step(c) for c in chunk_stream(model_rate(), model.config.k)]
    if not outputs:
        return np.zeros(0, dtype=np.int64)
    return expand_predictions(np.concatenate(outputs), sample_rate, total)


def segment_video(model, frames: np.ndarray, sample_rate: int = 1) -> np.ndarray:
    """Segment an in-memory [T, H, W, 3] video; labels come back per frame."""
    if frames.ndim != 4 or frames.shape[-1] != 3:
        raise ValueError(f"need frames of shape [T, H, W, 3], got {frames.shape}")
    return segment_stream(model, iter(frames), sample_rate)
