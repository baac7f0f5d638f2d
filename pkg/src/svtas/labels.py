"""Frame label sequences and their run-length segment form.

Labels are integer numpy arrays of shape [T], one class id per frame.
Segments use half-open frame ranges [start, end).
"""
import numpy as np


class ActionSegment:
    """A maximal run of one class: frames [start, end), optional confidence."""

    __slots__ = ("class_id", "start", "end", "confidence")

    def __init__(self, class_id: int, start: int, end: int, confidence: float = 1.0):
        if end <= start:
            raise ValueError(f"empty segment [{start}, {end})")
        self.class_id = int(class_id)
        self.start = int(start)
        self.end = int(end)
        self.confidence = float(confidence)

    def __len__(self):
        return self.end - self.start

    def __eq__(self, other):
        return (isinstance(other, ActionSegment)
                and (self.class_id, self.start, self.end) ==
                    (other.class_id, other.start, other.end))

    def __repr__(self):
        return (f"ActionSegment(class_id={self.class_id}, start={self.start}, "
                f"end={self.end}, confidence={self.confidence:g})")


def validate_labels(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ValueError(f"labels must be a non-empty 1-d array, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValueError(f"labels must be integers, got dtype {labels.dtype}")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ValueError(
            f"labels out of range [0, {num_classes}): "
            f"min {labels.min()}, max {labels.max()}")
    return labels


def run_length_encode(labels) -> list:
    """Labels [T] -> ordered list of maximal constant-class segments."""
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ValueError(f"labels must be a non-empty 1-d array, got shape {labels.shape}")
    boundaries = np.flatnonzero(np.diff(labels)) + 1
    starts = np.concatenate([[0], boundaries])
    ends = np.concatenate([boundaries, [len(labels)]])
    return [ActionSegment(labels[s], s, e) for s, e in zip(starts, ends)]


def segments_to_labels(segments, length: int) -> np.ndarray:
    """Inverse of run_length_encode. Segments must tile [0, length) exactly."""
    if length < 1:
        raise ValueError(f"length must be >= 1, got {length}")
    if not segments:
        raise ValueError("empty segment list cannot tile a non-empty sequence")
    labels = np.empty(length, dtype=np.int64)
    cursor = 0
    for seg in segments:
        if seg.start != cursor:
            raise ValueError(
                f"segments must be contiguous: expected start {cursor}, got {seg.start}")
        if seg.end > length:
            raise ValueError(f"segment [{seg.start}, {seg.end}) exceeds length {length}")
        labels[seg.start:seg.end] = seg.class_id
        cursor = seg.end
    if cursor != length:
        raise ValueError(f"segments end at {cursor}, expected {length}")
    return labels
