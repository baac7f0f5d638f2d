"""Evaluation metrics: frame accuracy, segmental F1@IoU, mAP@IoU over
segment proposals, and the area under the average-recall vs
average-number-of-proposals curve.

Segment metrics treat every run-length segment alike; class id 0 is only
"background" by dataset convention and is not special-cased here. Dataset
level scores pool frames (accuracy), match counts (F1), ranked predictions
(mAP), and recalled segments (AUC) across videos.
"""
import numpy as np

from .labels import run_length_encode

DEFAULT_F1_THRESHOLDS = (0.1, 0.25, 0.5)
DEFAULT_IOU_GRID = tuple(np.linspace(0.5, 0.95, 10))
DEFAULT_AN_GRID = tuple(range(1, 101))


def frame_accuracy(pred, gt) -> float:
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape or pred.ndim != 1 or pred.size == 0:
        raise ValueError(f"bad label shapes {pred.shape} vs {gt.shape}")
    return float((pred == gt).mean())


def segment_iou(a, b) -> float:
    """IoU of two half-open frame ranges."""
    inter = max(0, min(a.end, b.end) - max(a.start, b.start))
    union = len(a) + len(b) - inter
    return inter / union


def f1_counts(pred_segments, gt_segments, iou_threshold):
    """Greedy counts: each predicted segment claims the unmatched ground-truth
    segment of its class with the highest IoU; ties go to the earliest."""
    matched = [False] * len(gt_segments)
    tp = fp = 0
    for p in pred_segments:
        best, best_iou = None, 0.0
        for gi, g in enumerate(gt_segments):
            if matched[gi] or g.class_id != p.class_id:
                continue
            iou = segment_iou(p, g)
            if iou > best_iou:
                best, best_iou = gi, iou
        if best is not None and best_iou >= iou_threshold:
            matched[best] = True
            tp += 1
        else:
            fp += 1
    fn = len(gt_segments) - sum(matched)
    return tp, fp, fn


def f1_from_counts(tp, fp, fn) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 1.0


def segmental_f1(pred, gt, iou_threshold) -> float:
    pred, gt = np.asarray(pred), np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"length mismatch {pred.shape} vs {gt.shape}")
    tp, fp, fn = f1_counts(run_length_encode(pred), run_length_encode(gt),
                           iou_threshold)
    return f1_from_counts(tp, fp, fn)


def _sort_by_confidence(entries):
    """entries: (video_key, segment). Deterministic rank order."""
    return sorted(entries, key=lambda e: (-e[1].confidence, e[0], e[1].start,
                                          e[1].end, e[1].class_id))


def _ap_all_points(tp_flags, num_gt) -> float:
    if num_gt == 0:
        raise ValueError("AP undefined without ground-truth segments")
    if not tp_flags:
        return 0.0
    tp = np.cumsum(tp_flags)
    precision = tp / np.arange(1, len(tp_flags) + 1)
    recall = tp / num_gt
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mrec = np.concatenate([[0.0], recall, [1.0]])
    for i in range(len(mpre) - 1, 0, -1):
        mpre[i - 1] = max(mpre[i - 1], mpre[i])
    idx = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[idx + 1] - mrec[idx]) * mpre[idx + 1]))


def _map_pooled(pred_by_video, gt_by_video, iou):
    classes = sorted({g.class_id for segs in gt_by_video.values() for g in segs})
    if not classes:
        raise ValueError("mAP undefined without ground-truth segments")
    aps = []
    for c in classes:
        preds = _sort_by_confidence(
            [(vid, p) for vid, segs in pred_by_video.items()
             for p in segs if p.class_id == c])
        gts = {vid: [g for g in segs if g.class_id == c]
               for vid, segs in gt_by_video.items()}
        matched = {vid: [False] * len(segs) for vid, segs in gts.items()}
        num_gt = sum(len(segs) for segs in gts.values())
        flags = []
        for vid, p in preds:
            best, best_iou = None, 0.0
            for gi, g in enumerate(gts.get(vid, [])):
                if matched[vid][gi]:
                    continue
                v = segment_iou(p, g)
                if v > best_iou:
                    best, best_iou = gi, v
            if best is not None and best_iou >= iou:
                matched[vid][best] = True
                flags.append(1)
            else:
                flags.append(0)
        aps.append(_ap_all_points(flags, num_gt))
    return float(np.mean(aps))


def map_at_iou(pred_segments, gt_segments, iou=0.5) -> float:
    return _map_pooled({0: list(pred_segments)}, {0: list(gt_segments)}, iou)


def _auc_pooled(pred_by_video, gt_by_video, an_grid, iou_grid):
    an_grid = list(an_grid)
    iou_grid = list(iou_grid)
    if an_grid != sorted(an_grid) or not an_grid:
        raise ValueError("an_grid must be non-empty and ascending")
    total_gt = sum(len(segs) for segs in gt_by_video.values())
    if total_gt == 0:
        raise ValueError("AUC undefined without ground-truth segments")
    # best IoU any of the top-n proposals reaches per GT segment, as a
    # running max over the confidence ranking (class-agnostic)
    recalled = np.zeros((len(an_grid), len(iou_grid)))
    for vid, gts in gt_by_video.items():
        if not gts:
            continue
        ranked = [p for _, p in _sort_by_confidence(
            [(vid, p) for p in pred_by_video.get(vid, [])])]
        best = np.zeros((len(ranked) + 1, len(gts)))
        for pi, p in enumerate(ranked):
            ious = np.array([segment_iou(p, g) for g in gts])
            best[pi + 1] = np.maximum(best[pi], ious)
        for ai, an in enumerate(an_grid):
            row = best[min(an, len(ranked))]
            for ti, thr in enumerate(iou_grid):
                recalled[ai, ti] += int((row >= thr).sum())
    ar = (recalled / total_gt).mean(axis=1)
    if len(an_grid) == 1:
        return float(ar[0])
    return float(np.trapezoid(ar, an_grid) / (an_grid[-1] - an_grid[0]))


def ar_an_auc(pred_segments, gt_segments, an_grid=DEFAULT_AN_GRID,
              iou_grid=DEFAULT_IOU_GRID) -> float:
    return _auc_pooled({0: list(pred_segments)}, {0: list(gt_segments)},
                       an_grid, iou_grid)


def segments_from_predictions(logits) -> list:
    """Per-frame logits [T, C] -> argmax segments with confidence = mean
    softmax probability of the segment's class. Argmax ties break low."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2 or logits.shape[0] == 0:
        raise ValueError(f"expected [T, C] logits, got {logits.shape}")
    shifted = logits - logits.max(axis=1, keepdims=True)
    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    labels = logits.argmax(axis=1)
    segments = run_length_encode(labels)
    for seg in segments:
        seg.confidence = float(probs[seg.start:seg.end, seg.class_id].mean())
    return segments


def evaluate_dataset(per_video, f1_thresholds=DEFAULT_F1_THRESHOLDS,
                     an_grid=DEFAULT_AN_GRID, iou_grid=DEFAULT_IOU_GRID) -> dict:
    """per_video: list of (video_id, pred_labels, pred_segments, gt_labels).

    Returns the report dict {acc, f1, map50, auc, per_video}; accuracy pools
    frames, F1 pools match counts, mAP and AUC pool segments across videos.
    """
    if not per_video:
        raise ValueError("nothing to evaluate")
    correct = total = 0
    counts = {thr: [0, 0, 0] for thr in f1_thresholds}
    pred_by_video, gt_by_video, rows = {}, {}, []
    for vid, pred_labels, pred_segments, gt_labels in per_video:
        pred_labels, gt_labels = np.asarray(pred_labels), np.asarray(gt_labels)
        if pred_labels.shape != gt_labels.shape:
            raise ValueError(f"{vid}: prediction/ground-truth length mismatch")
        gt_segments = run_length_encode(gt_labels)
        pred_by_video[vid] = list(pred_segments)
        gt_by_video[vid] = gt_segments
        correct += int((pred_labels == gt_labels).sum())
        total += len(gt_labels)
        row = {"video_id": vid,
               "acc": frame_accuracy(pred_labels, gt_labels),
               "f1": {}}
        pred_rle = run_length_encode(pred_labels)
        for thr in f1_thresholds:
            tp, fp, fn = f1_counts(pred_rle, gt_segments, thr)
            counts[thr][0] += tp
            counts[thr][1] += fp
            counts[thr][2] += fn
            row["f1"][str(thr)] = f1_from_counts(tp, fp, fn)
        row["map50"] = _map_pooled({vid: pred_by_video[vid]},
                                   {vid: gt_segments}, 0.5)
        row["auc"] = _auc_pooled({vid: pred_by_video[vid]},
                                 {vid: gt_segments}, an_grid, iou_grid)
        rows.append(row)
    return {
        "acc": correct / total,
        "f1": {str(thr): f1_from_counts(*counts[thr]) for thr in f1_thresholds},
        "map50": _map_pooled(pred_by_video, gt_by_video, 0.5),
        "auc": _auc_pooled(pred_by_video, gt_by_video, an_grid, iou_grid),
        "per_video": rows,
    }
