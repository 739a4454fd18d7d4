"""Two-level block partitioning and DC-sum features.

A (cropped) frame is split into an ``m x n`` grid of blocks; each block into a
4x4 grid of sub-blocks; each sub-block into 8x8 tiles.  The feature of a
sub-block is the sum of the orthonormal DCT-II DC coefficients of its tiles.

For an 8x8 tile the orthonormal DC coefficient is ``sum(tile) / 8`` exactly, so
the features are computed in that closed form: integer pixel sums divided by a
power of two are exact in float64, which keeps the ratio comparisons of the
hash stable across runs and platforms.  :func:`dct2` (the full transform) is
used by the compression surrogate and by the tests that cross-check the DC.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft

TILE = 8
SUBBLOCKS = 4  # per side; 16 sub-blocks per block
MAX_HASH_BITS = 15


@dataclass(frozen=True)
class PartitionConfig:
    """Hash geometry: ``m`` x ``n`` blocks per frame, ``L`` bits, threshold ``T``."""

    m: int
    n: int
    L: int = 8
    T: float = 0.85

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError(f"m and n must be >= 1, got m={self.m}, n={self.n}")
        if not 1 <= self.L <= MAX_HASH_BITS:
            raise ValueError(f"L must be in [1, {MAX_HASH_BITS}], got {self.L}")
        if not 0.0 < self.T < 1.0:
            raise ValueError(f"T must be in (0, 1), got {self.T}")

    def replace(self, **changes) -> "PartitionConfig":
        fields = dict(m=self.m, n=self.n, L=self.L, T=self.T)
        fields.update(changes)
        return PartitionConfig(**fields)

    def block_shape(self, height: int, width: int) -> tuple[int, int]:
        """(rows, columns) of one block for a cropped ``height x width`` plane."""
        return height // self.n, width // self.m


def dct2(tiles: np.ndarray) -> np.ndarray:
    """Orthonormal 2-D DCT-II over the last two axes."""
    return fft.dctn(np.asarray(tiles, dtype=np.float64), type=2, axes=(-2, -1), norm="ortho")


def idct2(coeffs: np.ndarray) -> np.ndarray:
    return fft.idctn(coeffs, type=2, axes=(-2, -1), norm="ortho")


def to_tiles(plane: np.ndarray) -> np.ndarray:
    """View a plane (multiple of 8 on both sides) as ``(rows/8, cols/8, 8, 8)`` tiles."""
    h, w = plane.shape
    if h % TILE or w % TILE:
        raise ValueError(f"plane {w}x{h} is not tiled by 8x8")
    return plane.reshape(h // TILE, TILE, w // TILE, TILE).swapaxes(1, 2)


def tile_dc(plane: np.ndarray) -> np.ndarray:
    """Orthonormal DCT DC coefficient of every 8x8 tile, shape ``(rows/8, cols/8)``."""
    tiles = to_tiles(np.asarray(plane))
    return tiles.sum(axis=(2, 3), dtype=np.int64 if tiles.dtype.kind in "ui" else np.float64) / 8.0


def _check_aligned(plane: np.ndarray, cfg: PartitionConfig) -> None:
    h, w = plane.shape
    if w % (32 * cfg.m) or h % (32 * cfg.n):
        raise ValueError(
            f"plane {w}x{h} is not a multiple of {32 * cfg.m}x{32 * cfg.n}; crop it first")


def partition_blocks(plane: np.ndarray, cfg: PartitionConfig) -> list[np.ndarray]:
    """Blocks of an aligned plane in raster order (left to right, top to bottom)."""
    _check_aligned(plane, cfg)
    bh, bw = cfg.block_shape(*plane.shape)
    return [plane[y * bh:(y + 1) * bh, x * bw:(x + 1) * bw]
            for y in range(cfg.n) for x in range(cfg.m)]


def block_at(plane: np.ndarray, cfg: PartitionConfig, x: int, y: int) -> np.ndarray:
    """Block at 1-based grid coordinate ``(x, y)``."""
    _check_aligned(plane, cfg)
    if not (1 <= x <= cfg.m and 1 <= y <= cfg.n):
        raise IndexError(f"block ({x}, {y}) outside the {cfg.m}x{cfg.n} grid")
    bh, bw = cfg.block_shape(*plane.shape)
    return plane[(y - 1) * bh:y * bh, (x - 1) * bw:x * bw]


def subblock_dc_vector(block: np.ndarray) -> np.ndarray:
    """The 16 DC-sums of a block's 4x4 sub-blocks, raster order."""
    bh, bw = block.shape
    if bh % 32 or bw % 32:
        raise ValueError(f"block {bw}x{bh} is not a multiple of 32x32")
    dc = tile_dc(block)
    th, tw = dc.shape
    sums = dc.reshape(SUBBLOCKS, th // SUBBLOCKS, SUBBLOCKS, tw // SUBBLOCKS).sum(axis=(1, 3))
    return sums.reshape(16)


def frame_dc_vectors(plane: np.ndarray, cfg: PartitionConfig) -> np.ndarray:
    """DC vectors of every block of an aligned plane, shape ``(n, m, 16)``.

    Entry ``[y-1, x-1]`` is the vector of block ``(x, y)``.
    """
    _check_aligned(plane, cfg)
    dc = tile_dc(plane)
    th, tw = dc.shape
    # tile rows -> (block row, sub-block row, tiles per sub-block)
    sums = dc.reshape(cfg.n, SUBBLOCKS, th // (cfg.n * SUBBLOCKS),
                      cfg.m, SUBBLOCKS, tw // (cfg.m * SUBBLOCKS)).sum(axis=(2, 5))
    return sums.transpose(0, 2, 1, 3).reshape(cfg.n, cfg.m, 16)
