"""Per-block hash sequences from DC vectors.

Two rules produce 15 raw bits from the 16 DC-sums of a block:

* maximum-DC: bit i is 1 when ``DC_i / DC_max > T``;
* adjacent-DC (baseline): bit i is 1 when ``DC_i > DC_{i+1}``.

A hash of length ``L`` keeps the first ``L`` raw bits.  Bits are read
most-significant first, so the ``L``-bit value is the 15-bit raw value shifted
right by ``15 - L``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .dct import MAX_HASH_BITS, PartitionConfig

MAX_DC = "max-dc"
ADJACENT_DC = "adj-dc"
METHODS = (MAX_DC, ADJACENT_DC)

THRESHOLD_GRID = np.round(np.arange(0.750, 0.950 + 1e-9, 0.005), 3)


class Origin(NamedTuple):
    video_id: str
    frame: int
    x: int
    y: int


@dataclass(frozen=True)
class HashSequence:
    bits: tuple[int, ...]
    value: int
    origin: Origin | None = None

    @classmethod
    def from_bits(cls, bits: Sequence[int], origin: Origin | None = None) -> "HashSequence":
        bits = tuple(int(b) for b in bits)
        return cls(bits, hash_to_decimal(bits), origin)

    @property
    def L(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join(map(str, self.bits))


def dc_ratios(dc: np.ndarray) -> np.ndarray:
    """``DC_i / DC_max`` over the last axis; all ones where ``DC_max == 0``."""
    dc = np.asarray(dc, dtype=np.float64)
    dmax = dc.max(axis=-1, keepdims=True)
    safe = np.where(dmax > 0, dmax, 1.0)
    return np.where(dmax > 0, dc / safe, 1.0)


def raw_bits_max_dc(dc: np.ndarray, T: float) -> np.ndarray:
    """15 raw bits of the maximum-DC rule, shape ``(..., 15)`` bool."""
    return dc_ratios(dc)[..., :MAX_HASH_BITS] > T


def raw_bits_adjacent_dc(dc: np.ndarray) -> np.ndarray:
    dc = np.asarray(dc, dtype=np.float64)
    return dc[..., :-1] > dc[..., 1:]


def raw_bits(dc: np.ndarray, T: float, method: str = MAX_DC) -> np.ndarray:
    if method == MAX_DC:
        return raw_bits_max_dc(dc, T)
    if method == ADJACENT_DC:
        return raw_bits_adjacent_dc(dc)
    raise ValueError(f"unknown hash method {method!r}")


_WEIGHTS = 1 << np.arange(MAX_HASH_BITS - 1, -1, -1, dtype=np.int64)


def bits_to_raw_values(bits: np.ndarray) -> np.ndarray:
    """Pack ``(..., 15)`` raw bits into 15-bit integers, MSB first."""
    return (np.asarray(bits, dtype=np.int64) * _WEIGHTS).sum(axis=-1)


def raw_values(dc: np.ndarray, T: float, method: str = MAX_DC) -> np.ndarray:
    return bits_to_raw_values(raw_bits(dc, T, method))


def truncate(raw: np.ndarray | int, L: int):
    """Keep the first ``L`` of 15 raw bits."""
    return raw >> (MAX_HASH_BITS - L)


def hash_to_decimal(bits: Sequence[int]) -> int:
    """MSB-first binary to integer."""
    if not 1 <= len(bits) <= MAX_HASH_BITS:
        raise ValueError(f"hash length must be in [1, {MAX_HASH_BITS}], got {len(bits)}")
    value = 0
    for b in bits:
        if b not in (0, 1, True, False):
            raise ValueError(f"not a bit: {b!r}")
        value = (value << 1) | int(b)
    return value


def decimal_to_hash(value: int, L: int) -> tuple[int, ...]:
    if not 0 <= value < (1 << L):
        raise ValueError(f"{value} does not fit in {L} bits")
    return tuple((value >> (L - 1 - j)) & 1 for j in range(L))


def hash_max_dc(dcv: np.ndarray, cfg: PartitionConfig, origin: Origin | None = None) -> HashSequence:
    bits = raw_bits_max_dc(dcv, cfg.T)[: cfg.L]
    return HashSequence.from_bits(bits, origin)


def hash_adjacent_dc(dcv: np.ndarray, cfg: PartitionConfig, origin: Origin | None = None) -> HashSequence:
    bits = raw_bits_adjacent_dc(dcv)[: cfg.L]
    return HashSequence.from_bits(bits, origin)


def hash_block(dcv: np.ndarray, cfg: PartitionConfig, method: str = MAX_DC,
               origin: Origin | None = None) -> HashSequence:
    if method == MAX_DC:
        return hash_max_dc(dcv, cfg, origin)
    if method == ADJACENT_DC:
        return hash_adjacent_dc(dcv, cfg, origin)
    raise ValueError(f"unknown hash method {method!r}")


def ones_fraction(dc: np.ndarray, T: float) -> float:
    return float(raw_bits_max_dc(dc, T).mean())


def calibrate_threshold(dc: np.ndarray, grid: np.ndarray = THRESHOLD_GRID) -> float:
    """Grid threshold whose max-DC raw bits are closest to half ones.

    ``dc`` is any array of DC vectors with the 16 DC-sums on the last axis.
    Ties go to the smaller threshold.
    """
    dc = np.asarray(dc, dtype=np.float64)
    if dc.size == 0:
        raise ValueError("cannot calibrate a threshold on an empty dataset")
    ratios = np.sort(dc_ratios(dc.reshape(-1, 16))[:, :MAX_HASH_BITS].ravel())
    # count of ratios strictly greater than each T
    ones = ratios.size - np.searchsorted(ratios, grid, side="right")
    gap = np.abs(ones / ratios.size - 0.5)
    return float(grid[int(np.argmin(gap))])
