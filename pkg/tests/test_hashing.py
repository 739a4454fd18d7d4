import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from dcsteg.dct import PartitionConfig
from dcsteg.hashing import (ADJACENT_DC, MAX_DC, THRESHOLD_GRID, HashSequence, calibrate_threshold,
                            decimal_to_hash, hash_adjacent_dc, hash_block, hash_max_dc,
                            hash_to_decimal, ones_fraction, raw_values, truncate)
from oracles import adjacent_dc_bits, brute_calibrate, decimal_table, max_dc_bits, power_sum_decimal

dc_vectors = arrays(np.float64, 16, elements=st.floats(0, 1e5))


def cfg(L=15, T=0.85):
    return PartitionConfig(1, 1, L, T)


def test_constant_block_all_ones():
    assert hash_max_dc(np.full(16, 7.0), cfg(8, 0.99)).bits == (1,) * 8


def test_one_low_entry():
    dc = np.full(16, 100.0)
    dc[1] = 80
    assert hash_max_dc(dc, cfg()).bits == (1, 0) + (1,) * 13


def test_ramp_vector():
    dc = 10.0 * np.arange(1, 17)
    assert hash_max_dc(dc, cfg()).bits == (0,) * 13 + (1, 1)
    assert max_dc_bits(dc, 0.85, 15) == (0,) * 13 + (1, 1)


def test_all_zero_block_is_all_ones():
    assert hash_max_dc(np.zeros(16), cfg(6)).bits == (1,) * 6


def test_adjacent_examples():
    assert hash_adjacent_dc(np.arange(16.0), cfg()).bits == (0,) * 15
    assert hash_adjacent_dc(np.arange(16.0)[::-1], cfg()).bits == (1,) * 15
    assert hash_adjacent_dc(np.full(16, 3.0), cfg()).bits == (0,) * 15


def test_first_l_bits_kept():
    dc = np.array([100, 10] * 8, dtype=float)
    assert hash_max_dc(dc, cfg(3)).bits == (1, 0, 1)
    assert hash_block(dc, cfg(3), ADJACENT_DC).bits == (1, 0, 1)
    with pytest.raises(ValueError):
        hash_block(dc, cfg(3), "nope")


@pytest.mark.parametrize("bits,value", [((0,) * 8, 0), ((1,) * 8, 255), ((1, 0, 0, 0, 0, 0, 0, 1), 129)])
def test_hash_to_decimal_examples(bits, value):
    assert hash_to_decimal(bits) == value


def test_hash_to_decimal_full_table():
    for value, bits in decimal_table(8).items():
        assert hash_to_decimal(bits) == value == power_sum_decimal(bits)
        assert decimal_to_hash(value, 8) == bits


def test_hash_to_decimal_rejects():
    for bad in ((), (0,) * 16, (0, 2)):
        with pytest.raises(ValueError):
            hash_to_decimal(bad)
    with pytest.raises(ValueError):
        decimal_to_hash(8, 3)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=15))
def test_decimal_roundtrip(bits):
    v = hash_to_decimal(bits)
    assert 0 <= v < 2 ** len(bits)
    assert decimal_to_hash(v, len(bits)) == tuple(bits)


def test_hash_sequence_value_and_str():
    h = HashSequence.from_bits([1, 0, 1])
    assert (h.value, h.L, str(h)) == (5, 3, "101")


@settings(max_examples=200)
@given(dc_vectors, st.sampled_from(list(THRESHOLD_GRID)), st.integers(1, 15))
def test_max_dc_matches_oracle(dc, T, L):
    assert hash_max_dc(dc, cfg(L, T)).bits == max_dc_bits(dc, T, L)


@settings(max_examples=200)
@given(dc_vectors, st.integers(1, 15))
def test_adjacent_matches_oracle(dc, L):
    assert hash_adjacent_dc(dc, cfg(L)).bits == adjacent_dc_bits(dc, L)


@settings(max_examples=150)
@given(dc_vectors, st.floats(1e-3, 1e3), st.floats(0.05, 0.95))
def test_scale_invariance(dc, a, T):
    # a positive rescaling of the DCT (or of the pixels) leaves the hash unchanged
    dc = np.round(dc)  # keep a*dc/a*max exactly comparable
    scaled = dc * 2.0 ** np.round(np.log2(a))
    assert hash_max_dc(scaled, cfg(15, T)).bits == hash_max_dc(dc, cfg(15, T)).bits


@settings(max_examples=100)
@given(dc_vectors, st.floats(0.05, 0.95))
def test_max_position_bit_is_one(dc, T):
    bits = hash_max_dc(dc, cfg(15, T)).bits
    for i in np.flatnonzero(dc == dc.max()):
        if i < 15:
            assert bits[i] == 1


def test_raw_values_and_truncate(rng):
    dc = rng.random((50, 16)) * 1000
    raw = raw_values(dc, 0.85)
    for L in (1, 8, 15):
        vals = truncate(raw, L)
        for row, v in zip(dc, vals):
            assert v == hash_to_decimal(hash_max_dc(row, cfg(L)).bits)
    adj = truncate(raw_values(dc, 0.85, ADJACENT_DC), 9)
    assert adj[0] == hash_to_decimal(hash_adjacent_dc(dc[0], cfg(9)).bits)


def test_calibrate_degenerate_tie():
    assert calibrate_threshold(np.full((10, 16), 5.0)) == 0.75


def test_calibrate_empty():
    with pytest.raises(ValueError):
        calibrate_threshold(np.empty((0, 16)))


def test_calibrate_uniform_ratios(rng):
    # ratios uniform on [0, 1]: fraction above T is 1 - T, so balance sits at the grid edge 0.75
    dc = rng.random((400, 16))
    dc[:, 15] = 1.0
    T = calibrate_threshold(dc)
    assert T == brute_calibrate(dc.tolist(), THRESHOLD_GRID.tolist())


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (12, 16), elements=st.floats(0, 255)))
def test_calibrate_matches_brute_force(dc):
    assert calibrate_threshold(dc) == brute_calibrate(dc.tolist(), THRESHOLD_GRID.tolist())


def test_calibrated_fraction_near_half(rng):
    # ratios concentrated near 0.85
    dc = np.clip(rng.normal(0.85, 0.08, (500, 16)), 0, 1) * 1000
    dc[:, 15] = 1000
    T = calibrate_threshold(dc)
    assert 0.8 <= T <= 0.9
    assert abs(ones_fraction(dc, T) - 0.5) < 0.02


def test_methods_named():
    assert MAX_DC == "max-dc" and ADJACENT_DC == "adj-dc"
