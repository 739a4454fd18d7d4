import numpy as np
import pytest

from dcsteg.attacks import delete_frames
from dcsteg.codec import AuxiliaryPayload, PayloadEntry
from dcsteg.deletion import FrameDeletionReport, _allocate, detect_deletions, mssim_trace, remap_locations
from dcsteg.samples import pan_clip, static_clip


@pytest.fixture(scope="module")
def pan():
    return pan_clip(np.random.default_rng(11), frames=60)


def report(points, counts, n=100, trailing=0):
    return FrameDeletionReport(tuple(points), tuple(counts), (), (), {}, n, trailing)


def test_static_video_reveals_nothing():
    clip = static_clip(np.random.default_rng(0), frames=12)
    r = detect_deletions(delete_frames(clip, [5]))
    assert r.deleted_indices_detected == ()


def test_single_deletion_flagged(pan):
    r = detect_deletions(delete_frames(pan, [30]))
    # frames 29 and 31 are now received frames 29 and 30
    assert r.deleted_indices_detected == (29,)
    assert r.deleted_original_frames() == [30]


def test_control_is_clean(pan):
    r = detect_deletions(pan)
    assert len(r.deleted_indices_detected) <= 0.1 * len(pan)
    assert r.deleted_indices_detected == ()


def test_trace_shapes(pan):
    r = detect_deletions(pan[:10])
    assert len(r.mssim_trace) == 9 and len(r.feature_trace) == 8
    assert set(r.thresholds) == {"k1", "k2", "mean1", "std1", "mean2", "std2"}
    assert mssim_trace(pan[:3]).shape == (2,)


def test_too_few_frames(pan):
    with pytest.raises(ValueError):
        detect_deletions(pan[:3])


def test_counts_from_original_length(pan):
    att = delete_frames(pan, [20, 21, 40])
    r = detect_deletions(att, original_count=60)
    assert r.total_deleted == 3
    assert r.deleted_original_frames() == [20, 21, 40]


def test_more_frames_than_original(pan):
    with pytest.raises(ValueError):
        detect_deletions(pan[:10], original_count=5)


def test_indices_sorted_in_range(pan):
    r = detect_deletions(delete_frames(pan, [50, 10, 33]))
    assert list(r.deleted_indices_detected) == sorted(r.deleted_indices_detected)
    assert all(1 <= j <= 57 for j in r.deleted_indices_detected)


def test_allocate_surplus_to_tail():
    M = np.full(20, 0.6)
    M[4] = 0.17
    counts, trailing = _allocate(M, [5], 3)
    assert counts == {5: 1} and trailing == 2


def test_allocate_deep_splice_takes_surplus():
    M = np.full(30, 0.6)
    M[[4, 9, 14]] = 0.17
    M[19] = 0.1
    counts, trailing = _allocate(M, [20, 5, 10, 15], 6)
    assert counts == {5: 1, 10: 1, 15: 1, 20: 3} and trailing == 0


def test_allocate_drops_weakest_splices():
    M = np.full(10, 0.6)
    M[[2, 6]] = [0.1, 0.3]
    assert _allocate(M, [3, 7], 1) == ({3: 1}, 0)


def test_deleted_original_frames_with_tail():
    r = report([3, 10], [1, 2], n=20, trailing=1)
    # received 3 | gap 4 | ... received 10 is original 11 | gap 12, 13 | ... end 24
    assert r.deleted_original_frames() == [4, 12, 13, 24]
    assert r.total_deleted == 4


def payload(frames):
    return AuxiliaryPayload(8, 0, tuple(PayloadEntry(0, f, 1, 1) for f in frames), (1, 1, 7, 1), 0)


def test_remap_examples():
    p = payload([10, 5, 3])
    same, lost = remap_locations(p, {}, {"v": 100})
    assert same == p and lost == []
    r = report([4], [1])
    adj, lost = remap_locations(p, {"v": r}, {"v": 100})
    assert [e.frame for e in adj.segments] == [9, 5, 3]
    assert lost == [1]


def test_remap_only_touches_reported_video():
    p = AuxiliaryPayload(8, 0, (PayloadEntry(0, 10, 1, 1), PayloadEntry(1, 10, 1, 1)), (1, 1, 7, 1), 0)
    adj, _ = remap_locations(p, {"b": report([2], [3])}, {"a": 50, "b": 50})
    assert [e.frame for e in adj.segments] == [10, 7]
