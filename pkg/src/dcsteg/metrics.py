"""Accuracy, capacity and DC change-rate statistics, plus their CSV forms."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dct import MAX_HASH_BITS, PartitionConfig, frame_dc_vectors
from .frames import crop_for_hashing

EPS = 1e-6


def _same(a, b) -> bool:
    if a is None or b is None:
        return False
    if isinstance(a, (int, np.integer)) or isinstance(b, (int, np.integer)):
        return int(a) == int(b)
    return tuple(int(v) for v in a) == tuple(int(v) for v in b)


def extraction_accuracy(original_hashes: Sequence, attacked_hashes: Sequence) -> float:
    """Percentage of positions whose whole hash sequence survived.

    Items may be bit sequences or decimal values; ``None`` (an unrecoverable
    block) never matches.
    """
    if len(original_hashes) != len(attacked_hashes):
        raise ValueError(f"length mismatch: {len(original_hashes)} vs {len(attacked_hashes)}")
    if not original_hashes:
        raise ValueError("accuracy needs at least one hash")
    hits = sum(_same(a, b) for a, b in zip(original_hashes, attacked_hashes))
    return 100.0 * hits / len(original_hashes)


def array_accuracy(original: np.ndarray, attacked: np.ndarray) -> float:
    """Vectorised :func:`extraction_accuracy` over arrays of decimal hash values."""
    original, attacked = np.asarray(original), np.asarray(attacked)
    if original.shape != attacked.shape:
        raise ValueError(f"shape mismatch: {original.shape} vs {attacked.shape}")
    if original.size == 0:
        raise ValueError("accuracy needs at least one hash")
    return 100.0 * float(np.mean(original == attacked))


@dataclass(frozen=True)
class CapacityReport:
    L: int
    distinct_values: int
    theoretical_max: int
    aux_bits: int = 0
    scope: str = "dataset"

    @property
    def relative(self) -> float:
        return relative_effective_capacity(self.distinct_values, self.aux_bits) if self.aux_bits else 0.0


def effective_capacity(stream, L: int, aux_bits: int = 0, scope: str = "dataset") -> CapacityReport:
    """Number of distinct ``L``-bit hash values in ``stream``.

    ``stream`` is an iterable of decimal values or an index database (then
    every non-empty bucket counts once).
    """
    if not 1 <= L <= MAX_HASH_BITS:
        raise ValueError(f"L must be in [1, {MAX_HASH_BITS}], got {L}")
    buckets = getattr(stream, "buckets", None)
    if buckets is not None:
        if stream.config.L != L:
            raise ValueError(f"index has L={stream.config.L}, asked for L={L}")
        distinct = sum(1 for b in buckets if b)
    else:
        values = np.unique(np.asarray(list(stream), dtype=np.int64))
        if values.size and (values[0] < 0 or values[-1] >= 1 << L):
            raise ValueError(f"hash value outside [0, 2^{L})")
        distinct = int(values.size)
    return CapacityReport(L, distinct, 1 << L, aux_bits, scope)


def video_capacities(db, aux_bits: int = 0) -> dict[str, CapacityReport]:
    """Per-video effective capacity of an index."""
    seen: dict[str, set[int]] = {vid: set() for vid in db.video_meta}
    for value, bucket in enumerate(db.buckets):
        for loc in bucket:
            seen[loc.video_id].add(value)
    L = db.config.L
    return {vid: CapacityReport(L, len(vals), 1 << L, aux_bits, vid) for vid, vals in seen.items()}


def aux_bits(widths: Iterable[int]) -> int:
    """``L_a``: bits of auxiliary information per segment (x, y, frame, video)."""
    return int(sum(widths))


def relative_effective_capacity(capacity, aux: int | Iterable[int]) -> float:
    """``C_E / L_a``; ``capacity`` is a count or a :class:`CapacityReport`."""
    ce = capacity.distinct_values if isinstance(capacity, CapacityReport) else int(capacity)
    la = aux if isinstance(aux, (int, np.integer)) else aux_bits(aux)
    if la <= 0:
        raise ValueError("auxiliary bit count must be positive")
    return ce / la


def carriers_needed(secret_bytes: int, L: int) -> int:
    if not 1 <= L <= MAX_HASH_BITS:
        raise ValueError(f"L must be in [1, {MAX_HASH_BITS}], got {L}")
    return -(-8 * secret_bytes // L)


def ideal_capacity_range(secret_bytes: int, L: int | Iterable[int] = range(1, MAX_HASH_BITS + 1)):
    """Carriers needed for a secret of ``secret_bytes`` bytes.

    For a single ``L`` returns one count; over a range of lengths returns
    ``(fewest, most)``.
    """
    if secret_bytes < 0:
        raise ValueError("secret size must be non-negative")
    if isinstance(L, (int, np.integer)):
        return carriers_needed(secret_bytes, int(L))
    counts = [carriers_needed(secret_bytes, l) for l in L]
    return min(counts), max(counts)


@dataclass(frozen=True)
class RateSample:
    rate1: np.ndarray
    rate2: np.ndarray
    excluded_count: int


def _rates(new: np.ndarray, old: np.ndarray, eps: float) -> tuple[np.ndarray, int]:
    ok = np.abs(old) > eps
    return (new[ok] - old[ok]) / old[ok], int(np.count_nonzero(~ok))


def change_rates(original_frames, degraded_frames, cfg: PartitionConfig, eps: float = EPS) -> RateSample:
    """Relative change of every sub-block DC sum (Rate1) and of each block's maximum (Rate2)."""
    original_frames, degraded_frames = list(original_frames), list(degraded_frames)
    if len(original_frames) != len(degraded_frames):
        raise ValueError("original and degraded sequences differ in length")
    r1, r2, excluded = [], [], 0
    for a, b in zip(original_frames, degraded_frames):
        a = crop_for_hashing(np.asarray(a, dtype=np.float64), cfg)
        b = crop_for_hashing(np.asarray(b, dtype=np.float64), cfg)
        if a.shape != b.shape:
            raise ValueError(f"misaligned frame pair {a.shape} vs {b.shape}")
        dc, dc2 = frame_dc_vectors(a, cfg), frame_dc_vectors(b, cfg)
        rates, skipped = _rates(dc2.ravel(), dc.ravel(), eps)
        r1.append(rates)
        excluded += skipped
        rates, skipped = _rates(dc2.max(axis=-1).ravel(), dc.max(axis=-1).ravel(), eps)
        r2.append(rates)
        excluded += skipped
    return RateSample(np.concatenate(r1) if r1 else np.empty(0),
                      np.concatenate(r2) if r2 else np.empty(0), excluded)


@dataclass(frozen=True)
class GaussianFit:
    mu: float
    sigma: float
    n: int

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.sigma == 0:
            raise ValueError("degenerate fit (sigma = 0) has no density")
        z = (x - self.mu) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi))


def fit_gaussian(samples) -> GaussianFit:
    """Sample mean and standard deviation (``n - 1`` denominator)."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise ValueError(f"need at least 2 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    return GaussianFit(float(x.mean()), float(x.std(ddof=1)), int(x.size))


def emit_pdf_curve(fit: GaussianFit, x_range: tuple[float, float] | None = None,
                   steps: int = 1201) -> list[tuple[float, float]]:
    """``(x, f(x))`` on a uniform grid; the default range is ``mu +- 6 sigma``."""
    if steps < 2:
        raise ValueError("steps must be at least 2")
    if x_range is None:
        x_range = (fit.mu - 6 * fit.sigma, fit.mu + 6 * fit.sigma)
    xs = np.linspace(x_range[0], x_range[1], steps)
    return list(zip(xs.tolist(), fit.pdf(xs).tolist()))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(round(v, 10))
    return str(v)


def to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def capacity_csv(reports: Iterable[CapacityReport]) -> str:
    return to_csv(["scope", "L", "C_E", "max", "L_a", "C_RE"],
                  ((r.scope, r.L, r.distinct_values, r.theoretical_max, r.aux_bits, r.relative)
                   for r in reports))


def accuracy_csv(rows: Iterable[tuple[str, str, str, str, int, float]]) -> str:
    """Rows of ``(attack, params, block grid, method, seed, ACC %)``."""
    return to_csv(["attack", "params", "blocks", "method", "seed", "acc"], rows)


def pdf_csv(curves: Mapping[str, Sequence[tuple[float, float]]]) -> str:
    return to_csv(["series", "x", "f"],
                  ((name, x, f) for name, pts in curves.items() for x, f in pts))
