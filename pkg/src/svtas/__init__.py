"""Streaming video temporal action segmentation.

Chunked end-to-end inference with memory-cached temporal convolutions, a
prompt-based text branch fused with image features, synthetic data for
desk-scale experiments, and the full metric suite.
"""

from .checkpoint import load_checkpoint, read_manifest, save_checkpoint
from .config import (VARIANTS, ModelConfig, RunConfig, SyntheticSpec,
                     config_hash)
from .datasets import (DatasetIndex, load_dataset, make_synthetic_dataset,
                       read_label_file, save_dataset, synthetic_class_names,
                       synthetic_stream, write_label_file)
from .errors import (ConfigError, DataError, StreamProtocolError, SvtasError,
                     VocabularyError)
from .evaluate import evaluate_model, predict_video
from .labels import ActionSegment, run_length_encode, segments_to_labels
from .losses import LossConfig, clip_loss, seg_loss
from .metrics import (ar_an_auc, evaluate_dataset, f1_counts, frame_accuracy,
                      map_at_iou, segmental_f1, segments_from_predictions)
from .prompt import (FramePrompt, PromptTextEncoder, PromptVocab, detokenize,
                     generate_prompts, tokenize, tokenize_window)
from .streaming import (Chunk, StreamSession, chunk_stream, chunk_video,
                        expand_predictions, measure_step_cost, segment_stream,
                        segment_video, session_step, subsample)
from .train import train_model
from .transeger import (MeteModel, SeteModel, TransegerModel, build_model,
                        joint_net, start_of_stream_labels, time_reverse,
                        transeger_train_step)

__version__ = "0.1.0"

__all__ = [
    "ActionSegment", "Chunk", "ConfigError", "DataError", "DatasetIndex",
    "FramePrompt", "LossConfig", "MeteModel", "ModelConfig", "PromptTextEncoder",
    "PromptVocab", "RunConfig", "SeteModel", "StreamProtocolError",
    "StreamSession", "SvtasError", "SyntheticSpec", "TransegerModel",
    "VARIANTS", "VocabularyError", "ar_an_auc", "build_model", "chunk_stream",
    "chunk_video", "clip_loss", "config_hash", "detokenize",
    "evaluate_dataset", "evaluate_model", "expand_predictions", "f1_counts",
    "frame_accuracy", "generate_prompts", "joint_net", "load_checkpoint",
    "load_dataset", "make_synthetic_dataset", "map_at_iou",
    "measure_step_cost", "predict_video", "read_label_file", "read_manifest",
    "run_length_encode", "save_checkpoint", "save_dataset", "seg_loss",
    "segment_stream", "segment_video", "segmental_f1",
    "segments_from_predictions", "segments_to_labels", "session_step",
    "start_of_stream_labels", "subsample", "synthetic_class_names",
    "synthetic_stream", "time_reverse", "tokenize", "tokenize_window",
    "train_model", "transeger_train_step", "write_label_file",
]
