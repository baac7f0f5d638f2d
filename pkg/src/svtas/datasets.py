"""Datasets: a synthetic shape-and-motion corpus plus the on-disk layout.

Disk layout (shared by ground truth and written predictions):

    root/
      mapping.txt                    "<class_id> <class_name>" per line
      groundTruth/<video_id>.txt     one class name per frame
      frames/<video_id>/frame_%06d.png

Synthetic videos tile time with variable-length segments; each non-background
class renders a distinct (color, shape, motion) signature so frames are
unambiguous evidence of the class. Frames are float32 RGB in [0, 1].
"""
import math
import os
import re
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .config import SyntheticSpec
from .errors import DataError
from .labels import ActionSegment, run_length_encode

_SHAPES = ("square", "circle", "triangle", "cross")
_MOTIONS = ("slide", "drop", "diag", "orbit")
_COLOR_NAMES = ("red", "green", "blue", "yellow", "magenta", "cyan")
_COLORS = np.array([
    (0.90, 0.15, 0.15),
    (0.15, 0.85, 0.20),
    (0.20, 0.35, 0.95),
    (0.92, 0.85, 0.15),
    (0.88, 0.20, 0.85),
    (0.15, 0.85, 0.85),
], dtype=np.float32)
_BACKGROUND = 0.08
_FRAME_RE = re.compile(r"^frame_(\d{6})\.png$")


def class_signature(class_id: int):
    """(shape, motion, color index) for a non-background class."""
    i = class_id - 1
    return _SHAPES[i % 4], _MOTIONS[i % 4], i % 6


def synthetic_class_names(num_classes: int) -> list:
    names = ["background"]
    for c in range(1, num_classes):
        shape, motion, color = class_signature(c)
        name = f"{_COLOR_NAMES[color]}_{shape}_{motion}"
        if name in names:
            name = f"{name}_{c}"
        names.append(name)
    return names


def sample_segments(rng, num_frames: int, num_classes: int,
                    min_segment: int, max_segment: int) -> list:
    """Random maximal segments tiling [0, num_frames) with lengths in
    [min_segment, max_segment] and no two adjacent segments sharing a class.

    Each length is drawn only from choices that leave the remainder tileable.
    """
    segments = []
    start = 0
    prev_class = -1
    while start < num_frames:
        rem = num_frames - start
        feasible = [
            length for length in range(min_segment, min(max_segment, rem) + 1)
            if rem - length == 0
            or math.ceil((rem - length) / max_segment) <= (rem - length) // min_segment
        ]
        length = int(rng.choice(feasible))
        if prev_class == -1:
            c = int(rng.integers(0, num_classes))
        else:
            c = int(rng.integers(0, num_classes - 1))
            if c >= prev_class:
                c += 1
        segments.append(ActionSegment(c, start, start + length))
        start += length
        prev_class = c
    return segments


@dataclass
class _VideoScript:
    """Everything needed to render any single frame of one synthetic video."""
    height: int
    width: int
    segments: list
    jitters: list   # (dx, dy) per segment

    def labels(self) -> np.ndarray:
        out = np.empty(self.segments[-1].end, dtype=np.int64)
        for seg in self.segments:
            out[seg.start:seg.end] = seg.class_id
        return out

    def frame(self, i: int) -> np.ndarray:
        for seg, jitter in zip(self.segments, self.jitters):
            if seg.start <= i < seg.end:
                phase = (i - seg.start) / max(len(seg) - 1, 1)
                return _render(self.height, self.width, seg.class_id, phase, jitter)
        raise IndexError(f"frame {i} outside video of {self.segments[-1].end} frames")

    def frames(self) -> np.ndarray:
        return np.stack([self.frame(i) for i in range(self.segments[-1].end)])


def _render(height, width, class_id, phase, jitter):
    img = np.full((height, width, 3), _BACKGROUND, dtype=np.float32)
    if class_id == 0:
        return img
    shape, motion, color = class_signature(class_id)
    r = max(min(height, width) // 7, 2)
    margin = r + 1
    dx, dy = jitter
    if motion == "slide":
        cx = margin + phase * (width - 2 * margin)
        cy = height / 2 + dy
    elif motion == "drop":
        cx = width / 2 + dx
        cy = margin + phase * (height - 2 * margin)
    elif motion == "diag":
        cx = margin + phase * (width - 2 * margin)
        cy = margin + phase * (height - 2 * margin)
    else:  # orbit
        rad = min(height, width) / 2 - margin
        cx = width / 2 + rad * math.cos(2 * math.pi * phase) + dx
        cy = height / 2 + rad * math.sin(2 * math.pi * phase) + dy
    yy, xx = np.mgrid[0:height, 0:width]
    u, v = xx - cx, yy - cy
    if shape == "square":
        mask = np.maximum(np.abs(u), np.abs(v)) <= r
    elif shape == "circle":
        mask = u * u + v * v <= r * r
    elif shape == "triangle":
        mask = (v >= -r) & (v <= r) & (np.abs(u) <= (v + r) / 2)
    else:  # cross
        arm = max(r / 2.5, 1.0)
        mask = ((np.abs(u) <= arm) & (np.abs(v) <= r)) | \
               ((np.abs(v) <= arm) & (np.abs(u) <= r))
    img[mask] = _COLORS[color]
    return img


def _make_script(spec: SyntheticSpec, video_index: int) -> _VideoScript:
    rng = np.random.default_rng([spec.seed, video_index])
    segments = sample_segments(rng, spec.num_frames, spec.num_classes,
                               spec.min_segment, spec.max_segment)
    jitters = [(int(rng.integers(-3, 4)), int(rng.integers(-3, 4))) for _ in segments]
    return _VideoScript(spec.height, spec.width, segments, jitters)


class DatasetIndex:
    """Videos, per-frame ground truth, and lazy frame access."""

    def __init__(self, class_names, video_ids, labels, frame_fns):
        self.class_names = list(class_names)
        self.video_ids = list(video_ids)
        self._labels = dict(labels)
        self._frame_fns = dict(frame_fns)

    @property
    def num_classes(self):
        return len(self.class_names)

    def __len__(self):
        return len(self.video_ids)

    def labels(self, video_id) -> np.ndarray:
        return self._labels[video_id]

    def frames(self, video_id) -> np.ndarray:
        """[T, H, W, 3] float32 in [0, 1]."""
        return self._frame_fns[video_id]()


def make_synthetic_dataset(spec: SyntheticSpec) -> DatasetIndex:
    spec.validate()
    class_names = synthetic_class_names(spec.num_classes)
    video_ids, labels, frame_fns = [], {}, {}
    for i in range(spec.num_videos):
        vid = f"video_{i:03d}"
        script = _make_script(spec, i)
        video_ids.append(vid)
        labels[vid] = script.labels()
        frame_fns[vid] = script.frames
    return DatasetIndex(class_names, video_ids, labels, frame_fns)


def synthetic_stream(spec: SyntheticSpec, num_frames: int, video_index: int = 0):
    """(frame iterator, labels) for one lazily rendered video of num_frames.

    Used for long benchmark streams; no frame array is ever materialized.
    """
    stream_spec = SyntheticSpec(
        num_videos=1, num_frames=num_frames, height=spec.height, width=spec.width,
        num_classes=spec.num_classes, min_segment=spec.min_segment,
        max_segment=spec.max_segment, seed=spec.seed).validate()
    script = _make_script(stream_spec, video_index)

    def frames():
        for i in range(num_frames):
            yield script.frame(i)

    return frames(), script.labels()


def write_label_file(path, labels, class_names):
    """One class name per line; the same format ground truth uses."""
    lines = []
    for v in np.asarray(labels):
        if not 0 <= v < len(class_names):
            raise ValueError(f"label {v} out of range for {len(class_names)} classes")
        lines.append(class_names[v])
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_label_file(path, class_to_id) -> np.ndarray:
    try:
        with open(path) as f:
            names = f.read().splitlines()
    except OSError as e:
        raise DataError(f"cannot read label file {path}: {e}") from e
    names = [n for n in names if n.strip()]
    if not names:
        raise DataError(f"label file {path} is empty")
    out = np.empty(len(names), dtype=np.int64)
    for i, name in enumerate(names):
        if name not in class_to_id:
            raise DataError(f"{path}:{i + 1}: unknown class name {name!r}")
        out[i] = class_to_id[name]
    return out


def write_mapping(path, class_names):
    with open(path, "w") as f:
        for i, name in enumerate(class_names):
            f.write(f"{i} {name}\n")


def read_mapping(path) -> list:
    try:
        with open(path) as f:
            lines = [ln for ln in f.read().splitlines() if ln.strip()]
    except OSError as e:
        raise DataError(f"cannot read mapping file {path}: {e}") from e
    entries = {}
    for ln in lines:
        parts = ln.split(maxsplit=1)
        if len(parts) != 2 or not parts[0].lstrip("-").isdigit():
            raise DataError(f"bad mapping line {ln!r} in {path}")
        idx = int(parts[0])
        if idx in entries:
            raise DataError(f"duplicate class id {idx} in {path}")
        entries[idx] = parts[1].strip()
    if sorted(entries) != list(range(len(entries))) or not entries:
        raise DataError(f"class ids in {path} must be 0..N-1 with no gaps")
    names = [entries[i] for i in range(len(entries))]
    if len(set(names)) != len(names):
        raise DataError(f"duplicate class names in {path}")
    return names


def save_dataset(index: DatasetIndex, root, with_frames=True):
    os.makedirs(root, exist_ok=True)
    write_mapping(os.path.join(root, "mapping.txt"), index.class_names)
    gt_dir = os.path.join(root, "groundTruth")
    os.makedirs(gt_dir, exist_ok=True)
    for vid in index.video_ids:
        write_label_file(os.path.join(gt_dir, f"{vid}.txt"),
                         index.labels(vid), index.class_names)
        if not with_frames:
            continue
        frame_dir = os.path.join(root, "frames", vid)
        os.makedirs(frame_dir, exist_ok=True)
        for i, frame in enumerate(index.frames(vid)):
            save_frame(os.path.join(frame_dir, f"frame_{i:06d}.png"), frame)


def save_frame(path, frame):
    arr = (np.clip(frame, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
    Image.fromarray(arr).save(path)


def load_frame(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0


def list_frame_files(frame_dir) -> list:
    """Paths frame_000000.png.. in order; indices must be contiguous from 0."""
    if not os.path.isdir(frame_dir):
        raise DataError(f"missing frame directory {frame_dir}")
    found = {}
    for name in os.listdir(frame_dir):
        m = _FRAME_RE.match(name)
        if m:
            found[int(m.group(1))] = os.path.join(frame_dir, name)
    if not found:
        raise DataError(f"no frame_%06d.png files in {frame_dir}")
    if sorted(found) != list(range(len(found))):
        raise DataError(f"frame indices in {frame_dir} are not contiguous from 0")
    return [found[i] for i in range(len(found))]


def load_dataset(root, with_frames=True) -> DatasetIndex:
    mapping = os.path.join(root, "mapping.txt")
    if not os.path.isfile(mapping):
        raise DataError(f"missing {mapping}")
    class_names = read_mapping(mapping)
    class_to_id = {n: i for i, n in enumerate(class_names)}
    gt_dir = os.path.join(root, "groundTruth")
    if not os.path.isdir(gt_dir):
        raise DataError(f"missing {gt_dir}")
    video_ids = sorted(os.path.splitext(n)[0] for n in os.listdir(gt_dir)
                       if n.endswith(".txt"))
    if not video_ids:
        raise DataError(f"no ground truth files in {gt_dir}")
    labels, frame_fns = {}, {}
    for vid in video_ids:
        labels[vid] = read_label_file(os.path.join(gt_dir, f"{vid}.txt"), class_to_id)
        if with_frames:
            files = list_frame_files(os.path.join(root, "frames", vid))
            if len(files) != len(labels[vid]):
                raise DataError(
                    f"{vid}: {len(files)} frames but {len(labels[vid])} labels")
            frame_fns[vid] = _frame_loader(files)
        else:
            frame_fns[vid] = _missing_frames(vid)
    return DatasetIndex(class_names, video_ids, labels, frame_fns)


def _frame_loader(files):
    def load():
        return np.stack([load_frame(p) for p in files])
    return load


def _missing_frames(vid):
    def load():
        raise DataError(f"dataset was loaded without frames (video {vid})")
    return load
