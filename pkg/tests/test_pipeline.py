import numpy as np
import pytest

from dcsteg.dct import PartitionConfig
from dcsteg.errors import NotFoundError
from dcsteg.frames import ArraySource
from dcsteg.pipeline import DEFAULT_CONFIG, pipeline_demo

SECRET = "Hidden by choosing, not by changing.".encode()


def test_clean_run(sample_sources, key):
    r = pipeline_demo(sample_sources, SECRET, key)
    assert r.recovered == SECRET and r.recovered_ok
    assert r.accuracy == 100 and r.bit_errors == 0
    assert r.config.m == DEFAULT_CONFIG.m and 0.75 <= r.config.T <= 0.95
    assert r.segments == -(-len(SECRET) * 8 // DEFAULT_CONFIG.L)


def test_from_directory(sample_dir, key):
    r = pipeline_demo(sample_dir, SECRET, key)
    assert r.recovered_ok


def test_salt_pepper_run(sample_sources, key):
    r = pipeline_demo(sample_sources, SECRET, key, attack="salt-pepper:density=0.001", seed=0)
    # 48 segments is a small sample; the per-block rate is checked in the acceptance suite
    assert r.accuracy >= 85
    assert "salt-pepper" in r.text()


def test_deletion_run(sample_sources, key):
    # a payload on the pan only, then 3 interior frames deleted from every video
    pan = [s for s in sample_sources if s.id == "pan"]
    r = pipeline_demo(pan, SECRET, key, PartitionConfig(13, 7, 5), attack="frame-delete:indices=30;31;80")
    assert r.deletions["pan"].total_deleted == 3
    assert r.accuracy >= 100 * (1 - 3 / 120) - 5


def test_tiny_dataset_atomic_failure(key):
    flat = [ArraySource("flat", np.full((2, 64, 64), 100, np.uint8))]
    with pytest.raises(NotFoundError) as exc:
        pipeline_demo(flat, b"\x00", key, PartitionConfig(2, 2, 8), calibrate=False)
    assert exc.value.pattern == "00000000"


def test_empty_dataset(key):
    with pytest.raises(ValueError):
        pipeline_demo([], b"x", key)


def test_report_csv_deterministic(sample_sources, key):
    a = pipeline_demo(sample_sources, SECRET, key, attack="gauss-noise:sigma=0.001", seed=3)
    b = pipeline_demo(sample_sources, SECRET, key, attack="gauss-noise:sigma=0.001", seed=3)
    assert a.to_csv() == b.to_csv()
    assert a.index.to_bytes() == b.index.to_bytes()
    assert a.payload.to_bytes() == b.payload.to_bytes()
    assert a.sealed != b.sealed
