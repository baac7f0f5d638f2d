"""Dataset evaluation by streaming every video through a session.

Each video is consumed chunk by chunk exactly as a live stream would be
(the joint variant runs autoregressively on its own previous predictions),
predictions are re-expanded to the original frame rate, and the pooled
metric report is computed against the ground truth labels.
"""

from __future__ import annotations

import numpy as np

from .datasets import DatasetIndex
from .errors import ConfigError
from .metrics import evaluate_dataset, segments_from_predictions
from .streaming import StreamSession, chunk_video, expand_predictions, subsample


def predict_video(model, frames: np.ndarray) -> tuple[np.ndarray, list]:
    """Stream one [T, H, W, 3] video; returns (per-frame labels, segments).

    Labels and segments are at the original frame rate; segment confidences
    come from the softmax of the step logits, repeated to frame rate.
    """
    num_frames = frames.shape[0]
    session = StreamSession(model)
    chunks = chunk_video(subsample(frames, model.config.sample_rate),
                         model.config.k)
    labels = []
    logits = []
    for chunk in chunks:
        labels.append(session.step(chunk))
        logits.append(session.last_logits)
    model_labels = np.concatenate(labels)
    model_logits = np.concatenate(logits)
    rate = model.config.sample_rate
    full_labels = expand_predictions(model_labels, rate, num_frames)
    full_logits = np.repeat(model_logits, rate, axis=0)[:num_frames]
    return full_labels, segments_from_predictions(full_logits)


def evaluate_model(model, index: DatasetIndex) -> tuple[dict, dict]:
    """Stream every indexed video; returns (metric report, labels per video)."""
    if index.num_classes != model.config.num_classes:
        raise ConfigError(
            f"dataset has {index.num_classes} classes, model expects "
            f"{model.config.num_classes}")
    per_video = []
    predictions = {}
    for vid in index.video_ids:
        gt = index.labels(vid)
        pred_labels, pred_segments = predict_video(model, index.frames(vid))
        if pred_labels.shape != gt.shape:
            raise ConfigError(
                f"video {vid}: {pred_labels.shape[0]} predictions for "
                f"{gt.shape[0]} ground truth frames")
        per_video.append((vid, pred_labels, pred_segments, gt))
        predictions[vid] = pred_labels
    return evaluate_dataset(per_video), predictions
