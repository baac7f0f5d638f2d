import json

import numpy as np
import pytest

from svtas.config import ModelConfig, RunConfig, SyntheticSpec, config_hash
from svtas.datasets import make_synthetic_dataset
from svtas.errors import ConfigError
from svtas.train import make_batches, train_model


def tiny_run(**kw):
    model = ModelConfig(k=8, sample_rate=2, height=12, width=12,
                        encoder_channels=(8, 8), image_dim=8, text_dim=8,
                        text_layers=1, text_heads=2, num_classes=3,
                        tcn_layers=2, tcn_channels=8)
    spec = SyntheticSpec(num_videos=4, num_frames=32, height=12, width=12,
                         num_classes=3, min_segment=8, max_segment=16, seed=1)
    base = dict(model=model, variant="sete", seed=0, epochs=2, batch_size=2,
                synthetic=spec)
    base.update(kw)
    return RunConfig(**base).validate()


def test_make_batches_groups_equal_lengths():
    lengths = {0: 10, 1: 20, 2: 10, 3: 20, 4: 10}
    batches = make_batches([0, 1, 2, 3, 4], lengths, 2)
    assert [sorted(b) for b in batches[:2]] == [[0, 2], [1, 3]]
    assert batches[2] == [4]
    assert sorted(v for b in batches for v in b) == [0, 1, 2, 3, 4]
    assert all(len({lengths[v] for v in b}) == 1 for b in batches)


def test_make_batches_preserves_order_within_length():
    lengths = dict.fromkeys(range(6), 7)
    assert make_batches([5, 2, 0, 4, 1, 3], lengths, 3) == [[5, 2, 0], [4, 1, 3]]


@pytest.mark.parametrize("variant", ["sete", "mete", "transeger"])
def test_train_smoke_and_log_structure(tmp_path, variant):
    run = tiny_run(variant=variant, epochs=2)
    index = make_synthetic_dataset(run.synthetic)
    log_path = tmp_path / "train.log"
    model, history = train_model(run, index, log_path)

    lines = [json.loads(line) for line in log_path.read_text().splitlines()]
    assert [r for r in lines] == history
    header = history[0]
    assert header["type"] == "header"
    assert header["config_hash"] == config_hash(run.model)
    assert header["variant"] == variant

    steps = [r for r in history if r["type"] == "step"]
    epochs = [r for r in history if r["type"] == "epoch"]
    final = history[-1]
    # 4 videos, batch 2, 16 model-rate frames, k=8 -> 2 batches x 2 chunks
    assert len(steps) == 2 * 2 * 2
    assert [r["step"] for r in steps] == list(range(1, len(steps) + 1))
    assert all(np.isfinite(r["loss"]) and 0 <= r["acc"] <= 1 for r in steps)
    assert [r["epoch"] for r in epochs] == [0, 1]
    assert final["type"] == "final"
    assert final["epochs_run"] == 2
    assert final["loss"] == epochs[-1]["loss"]


def test_train_deterministic_final_loss():
    run = tiny_run(epochs=2)
    index = make_synthetic_dataset(run.synthetic)
    _, a = train_model(run, index)
    _, b = train_model(run, index)
    fa = a[-1]
    fb = b[-1]
    assert abs(fa["loss"] - fb["loss"]) < 1e-6
    assert fa["acc"] == fb["acc"]


def test_train_seed_changes_trajectory():
    index = make_synthetic_dataset(tiny_run().synthetic)
    _, a = train_model(tiny_run(epochs=1, seed=0), index)
    _, b = train_model(tiny_run(epochs=1, seed=7), index)
    assert a[-1]["loss"] != b[-1]["loss"]


def test_early_stop(tmp_path):
    run = tiny_run(epochs=10, early_stop_acc=0.0)
    index = make_synthetic_dataset(run.synthetic)
    _, history = train_model(run, index)
    assert history[-1]["epochs_run"] == 1


def test_loss_decreases_on_average():
    run = tiny_run(epochs=4, variant="sete")
    index = make_synthetic_dataset(run.synthetic)
    _, history = train_model(run, index)
    epochs = [r for r in history if r["type"] == "epoch"]
    assert epochs[-1]["loss"] < epochs[0]["loss"]


def test_class_count_mismatch_rejected():
    run = tiny_run()
    bad_spec = SyntheticSpec(num_videos=2, num_frames=32, height=12, width=12,
                             num_classes=4, min_segment=8, max_segment=16)
    index = make_synthetic_dataset(bad_spec)
    with pytest.raises(ConfigError):
        train_model(run, index)


def test_frame_size_mismatch_rejected():
    run = tiny_run()
    bad_spec = SyntheticSpec(num_videos=2, num_frames=32, height=16, width=12,
                             num_classes=3, min_segment=8, max_segment=16)
    index = make_synthetic_dataset(bad_spec)
    with pytest.raises(ConfigError):
        train_model(run, index)
