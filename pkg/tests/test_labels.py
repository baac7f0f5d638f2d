import numpy as np
import pytest

from svtas.labels import ActionSegment, run_length_encode, segments_to_labels, validate_labels


def test_round_trip_random_sequences():
    # decode(encode(x)) == x for 100 random label sequences
    rng = np.random.default_rng(1234)
    for _ in range(100):
        t = int(rng.integers(1, 400))
        labels = rng.integers(0, int(rng.integers(2, 8)), size=t)
        segments = run_length_encode(labels)
        back = segments_to_labels(segments, t)
        assert np.array_equal(back, labels)


def test_encode_merges_maximal_runs():
    labels = np.array([0, 0, 2, 2, 2, 1, 0, 0])
    segments = run_length_encode(labels)
    assert segments == [
        ActionSegment(0, 0, 2),
        ActionSegment(2, 2, 5),
        ActionSegment(1, 5, 6),
        ActionSegment(0, 6, 8),
    ]
    # adjacent segments never share a class
    for a, b in zip(segments, segments[1:]):
        assert a.class_id != b.class_id
        assert a.end == b.start


def test_encode_single_class():
    segments = run_length_encode(np.full(17, 3))
    assert segments == [ActionSegment(3, 0, 17)]


def test_encode_rejects_empty_and_2d():
    with pytest.raises(ValueError):
        run_length_encode(np.array([], dtype=np.int64))
    with pytest.raises(ValueError):
        run_length_encode(np.zeros((3, 3), dtype=np.int64))


def test_decode_rejects_gap():
    segs = [ActionSegment(1, 0, 3), ActionSegment(2, 4, 6)]
    with pytest.raises(ValueError):
        segments_to_labels(segs, 6)


def test_decode_rejects_overlap():
    segs = [ActionSegment(1, 0, 4), ActionSegment(2, 3, 6)]
    with pytest.raises(ValueError):
        segments_to_labels(segs, 6)


def test_decode_rejects_short_or_long_tiling():
    segs = [ActionSegment(1, 0, 4)]
    with pytest.raises(ValueError):
        segments_to_labels(segs, 6)
    with pytest.raises(ValueError):
        segments_to_labels(segs, 3)


def test_segment_rejects_empty_range():
    with pytest.raises(ValueError):
        ActionSegment(0, 5, 5)


def test_validate_labels_range():
    validate_labels(np.array([0, 1, 2]), 3)
    with pytest.raises(ValueError):
        validate_labels(np.array([0, 3]), 3)
    with pytest.raises(ValueError):
        validate_labels(np.array([-1, 0]), 3)
    with pytest.raises(ValueError):
        validate_labels(np.array([0.5, 1.0]), 3)
