"""End-to-end training over chunked videos.

Each video is consumed chunk by chunk exactly as at inference time: the
memory caches carry state across chunks (detached between optimizer steps)
and the joint variant is teacher-forced with the previous window's ground
truth labels. Videos of equal model-rate length are batched together so a
whole batch shares one chunk schedule.

The training log is line-delimited JSON: a header record with the config
hash, one record per optimizer step, one per epoch, and a final record.
"""

from __future__ import annotations

import json
import math

import numpy as np
import torch

from .config import RunConfig, config_hash
from .datasets import DatasetIndex
from .errors import ConfigError
from .losses import LossConfig, clip_loss, seg_loss
from .streaming import subsample
from .transeger import (MeteModel, TransegerModel, build_model,
                        start_of_stream_labels)


def _pad_chunk(arr: np.ndarray, start: int, k: int) -> tuple[np.ndarray, int]:
    """Slice [B, T, ...] at start, zero-padding the tail of a short chunk."""
    piece = arr[:, start:start + k]
    valid = piece.shape[1]
    if valid == k:
        return piece, valid
    padded = np.zeros(piece.shape[:1] + (k,) + piece.shape[2:], dtype=arr.dtype)
    padded[:, :valid] = piece
    return padded, valid


def make_batches(order, lengths, batch_size: int) -> list[list[int]]:
    """Group a shuffled video order into batches of equal model-rate length."""
    buckets: dict[int, list[int]] = {}
    batches: list[list[int]] = []
    for vid in order:
        bucket = buckets.setdefault(lengths[vid], [])
        bucket.append(vid)
        if len(bucket) == batch_size:
            batches.append(bucket.copy())
            bucket.clear()
    for bucket in buckets.values():
        if bucket:
            batches.append(bucket)
    return batches


def train_model(run: RunConfig, index: DatasetIndex, log_path=None):
    """Train run.variant on the indexed dataset; returns (model, history).

    history is the list of log records; when log_path is given each record
    is also appended there as one JSON line as soon as it exists.
    """
    run.validate()
    cfg = run.model
    if len(index) == 0:
        raise ConfigError("dataset is empty")
    if index.num_classes != cfg.num_classes:
        raise ConfigError(
            f"dataset has {index.num_classes} classes, config expects {cfg.num_classes}")

    model = build_model(run.variant, cfg, index.class_names, seed=run.seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate,
                                 weight_decay=cfg.weight_decay)

    frames = {}
    labels = {}
    lengths = {}
    for vid in index.video_ids:
        video = index.frames(vid)
        if video.shape[1:3] != (cfg.height, cfg.width):
            raise ConfigError(
                f"video {vid} frames are {video.shape[1:3]}, "
                f"config expects ({cfg.height}, {cfg.width})")
        frames[vid] = np.ascontiguousarray(subsample(video, cfg.sample_rate))
        labels[vid] = subsample(index.labels(vid), cfg.sample_rate)
        lengths[vid] = frames[vid].shape[0]

    history = []
    log_file = open(log_path, "w") if log_path is not None else None

    def emit(record):
        history.append(record)
        if log_file is not None:
            log_file.write(json.dumps(record) + "\n")
            log_file.flush()

    emit({"type": "header", "config_hash": config_hash(cfg),
          "variant": run.variant, "seed": run.seed, "epochs": run.epochs,
          "batch_size": run.batch_size, "num_videos": len(index)})

    teacher_forced = isinstance(model, TransegerModel)
    contrastive = isinstance(model, MeteModel)
    step = 0
    try:
        for epoch in range(run.epochs):
            perm = np.random.default_rng([run.seed, epoch]).permutation(len(index))
            order = [index.video_ids[i] for i in perm]
            epoch_losses = []
            correct = 0
            total = 0
            for batch in make_batches(order, lengths, run.batch_size):
                b = len(batch)
                batch_frames = np.stack([frames[v] for v in batch])
                batch_labels = np.stack([labels[v] for v in batch])
                t_model = lengths[batch[0]]
                num_chunks = math.ceil(t_model / cfg.k)
                loss_cfg = LossConfig(lambda_smooth=cfg.lambda_smooth,
                                      tau_smooth=cfg.tau_smooth,
                                      num_chunks_norm=num_chunks)
                caches = model.initial_caches(batch=b)
                prev = start_of_stream_labels(b, cfg.k)
                for j in range(num_chunks):
                    chunk, valid = _pad_chunk(batch_frames, j * cfg.k, cfg.k)
                    chunk_labels, _ = _pad_chunk(batch_labels, j * cfg.k, cfg.k)
                    frames_t = model.frames_to_tensor(chunk)
                    optimizer.zero_grad()
                    img_emb = txt_emb = None
                    if teacher_forced:
                        logits, caches = model.forward_chunk(frames_t, prev, caches)
                    elif contrastive:
                        logits, caches, img_emb, txt_emb = model.forward_train(
                            frames_t, chunk_labels, caches)
                    else:
                        logits, caches = model.forward_chunk(frames_t, caches)
                    target = torch.from_numpy(chunk_labels[:, :valid])
                    loss = torch.stack([
                        seg_loss(logits[i, :valid], target[i], loss_cfg)
                        for i in range(b)
                    ]).mean()
                    if contrastive:
                        dim = img_emb.shape[-1]
                        loss = loss + clip_loss(
                            img_emb[:, :valid].reshape(-1, dim),
                            txt_emb[:, :valid].reshape(-1, dim),
                            cfg.clip_temperature) / num_chunks
                    loss.backward()
                    optimizer.step()
                    caches = caches.detached()
                    prev = chunk_labels
                    with torch.no_grad():
                        pred = logits[:, :valid].argmax(dim=2)
                        correct += (pred == target).sum().item()
                        total += target.numel()
                    step += 1
                    loss_value = loss.item()
                    epoch_losses.append(loss_value)
                    emit({"type": "step", "step": step, "loss": loss_value,
                          "acc": (pred == target).float().mean().item()})
            epoch_loss = float(np.mean(epoch_losses))
            epoch_acc = correct / total
            emit({"type": "epoch", "epoch": epoch, "loss": epoch_loss,
                  "acc": epoch_acc})
            if run.early_stop_acc is not None and epoch_acc >= run.early_stop_acc:
                break
        emit({"type": "final", "loss": epoch_loss, "acc": epoch_acc,
              "epochs_run": epoch + 1, "steps": step})
    finally:
        if log_file is not None:
            log_file.close()
    return model, history
