import numpy as np
import pytest

from dcsteg.ssim import mssim, ssim_map
from oracles import windowed_ssim


def test_identical_planes(rng):
    a = rng.integers(0, 256, (20, 24)).astype(np.uint8)
    assert mssim(a, a) == pytest.approx(1.0)


def test_matches_loop_oracle(rng):
    a = rng.integers(0, 256, (14, 17)).astype(float)
    b = np.clip(a + rng.normal(0, 20, a.shape), 0, 255)
    assert mssim(a, b) == pytest.approx(windowed_ssim(a, b), abs=1e-10)


def test_map_shape_and_symmetry(rng):
    a, b = rng.random((2, 16, 20)) * 255
    assert ssim_map(a, b).shape == (9, 13)
    assert mssim(a, b) == pytest.approx(mssim(b, a), abs=1e-12)


def test_errors():
    with pytest.raises(ValueError):
        mssim(np.zeros((8, 8)), np.zeros((8, 9)))
    with pytest.raises(ValueError):
        mssim(np.zeros((4, 4)), np.zeros((4, 4)))


def test_decreases_with_noise(rng):
    a = rng.integers(0, 256, (32, 32)).astype(float)
    vals = [mssim(a, np.clip(a + rng.normal(0, s, a.shape), 0, 255)) for s in (1, 10, 40)]
    assert vals == sorted(vals, reverse=True)
