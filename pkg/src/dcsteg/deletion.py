"""Frame-deletion localisation from MSSIM quotients, and payload remapping.

Consecutive frames of natural video are about equally similar, so the ratio
``q_i = M_i / M_{i+1}`` of neighbouring MSSIM values ``M_i = MSSIM(f_i, f_{i+1})``
stays near 1.  A splice left by deleted frames between ``f_j`` and ``f_{j+1}``
makes ``M_j`` drop, which pushes ``q_{j-1}`` up and ``q_j`` down.  Outliers are
found with two Chebyshev-style passes: the second recomputes the statistics
without the first pass's outliers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .codec import AuxiliaryPayload, PayloadEntry
from .ssim import mssim

DEFAULT_K1 = 3.0
DEFAULT_K2 = 3.0
# a splice dipping below this fraction of the median splice MSSIM hides several frames
MULTI_GAP = 0.8


@dataclass(frozen=True)
class FrameDeletionReport:
    """Detected splices of one received video.

    ``deleted_indices_detected`` holds received-frame indices ``j`` (1-based)
    such that frames are missing between ``j`` and ``j + 1``; ``deleted_counts``
    gives how many original frames each splice removed, and
    ``trailing_deleted`` how many are presumed cut from the end.
    """

    deleted_indices_detected: tuple[int, ...]
    deleted_counts: tuple[int, ...]
    feature_trace: tuple[float, ...]
    mssim_trace: tuple[float, ...]
    thresholds: dict = field(default_factory=dict)
    frame_count: int = 0
    trailing_deleted: int = 0

    @property
    def total_deleted(self) -> int:
        return sum(self.deleted_counts) + self.trailing_deleted

    def deleted_original_frames(self) -> list[int]:
        """Original frame indices (1-based) removed by the detected splices.

        Deletions not attributed to any splice are assumed to have removed
        the last frames of the clip.
        """
        out, before = [], 0
        for j, c in zip(self.deleted_indices_detected, self.deleted_counts):
            start = j + before
            out.extend(range(start + 1, start + c + 1))
            before += c
        total = self.frame_count + self.total_deleted
        out.extend(range(total - self.trailing_deleted + 1, total + 1))
        return out


def mssim_trace(frames) -> np.ndarray:
    """``M_i`` for i = 1..N-1."""
    frames = list(frames)
    return np.array([mssim(a, b) for a, b in zip(frames, frames[1:])])


def _outliers(q: np.ndarray, mask: np.ndarray, k: float) -> tuple[np.ndarray, float, float]:
    ref = q[mask]
    mu = float(ref.mean())
    sd = float(ref.std())
    return np.abs(q - mu) > k * sd, mu, sd


def detect_deletions(frames: Sequence[np.ndarray], k1: float = DEFAULT_K1, k2: float = DEFAULT_K2,
                     original_count: int | None = None) -> FrameDeletionReport:
    """Locate frame-deletion splices in a received frame sequence.

    When ``original_count`` is known (the index records every video's frame
    count), the number of deleted frames is split over the detected splices:
    one per splice, surplus to unusually deep dips (or the clip's end), and
    surplus splices beyond the deleted total are dropped weakest first.
    """
    frames = list(frames)
    n = len(frames)
    if n < 4:
        raise ValueError(f"deletion detection needs at least 4 frames, got {n}")
    M = mssim_trace(frames)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = M[:-1] / M[1:]
    q = np.where(np.isfinite(q), q, 1.0)

    everything = np.ones(q.size, dtype=bool)
    flag1, mu1, sd1 = _outliers(q, everything, k1)
    keep = ~flag1 if (~flag1).sum() >= 2 else everything
    flag2, mu2, sd2 = _outliers(q, keep, k2)
    flagged = flag1 | flag2

    splices = set()
    for i in np.flatnonzero(flagged).tolist():  # q index i (0-based) is q_{i+1}
        if q[i] > mu2:
            splices.add(i + 2)  # M_{i+2} dipped: splice after received frame i+2
        else:
            splices.add(i + 1)
    # strongest splices first: lowest MSSIM across the splice
    ranked = sorted(splices, key=lambda j: (M[j - 1], j))
    counts: dict[int, int] = {j: 1 for j in ranked}
    trailing = 0
    if original_count is not None:
        counts, trailing = _allocate(M, ranked, original_count - n)
    points = tuple(sorted(counts))
    return FrameDeletionReport(
        deleted_indices_detected=points,
        deleted_counts=tuple(counts[j] for j in points),
        feature_trace=tuple(float(v) for v in q),
        mssim_trace=tuple(float(v) for v in M),
        thresholds={"k1": k1, "k2": k2, "mean1": mu1, "std1": sd1, "mean2": mu2, "std2": sd2},
        frame_count=n,
        trailing_deleted=trailing,
    )


def _allocate(M: np.ndarray, ranked: list[int], missing: int) -> tuple[dict[int, int], int]:
    """Spread a known number of deleted frames over splice points.

    Detected splices get one frame each (weakest dropped if there are too
    many).  A surplus goes, in order, to

    1. undetected positions whose MSSIM dips below the midpoint between
       typical and detected-splice MSSIM (splices at the clip edge or next to
       another splice show only one outlier quotient);
    2. splices whose MSSIM is well below the typical splice, deepest first;
    3. otherwise the end of the clip, where a deletion leaves no splice.

    Returns ``(counts, trailing)``.
    """
    if missing < 0:
        raise ValueError(f"received {M.size + 1} frames, more than the original")
    ranked = ranked[:missing]
    counts = {j: 1 for j in ranked}
    extra = missing - len(ranked)
    if extra <= 0 or not ranked:
        return counts, extra
    typical = float(np.median(M))
    single = float(np.median(M[np.array(ranked) - 1]))
    cut = 0.5 * (typical + single)
    for j0 in np.argsort(M, kind="stable").tolist():
        if extra == 0 or M[j0] >= cut:
            break
        if j0 + 1 not in counts:
            counts[j0 + 1] = 1
            extra -= 1
    # longer gaps dip further, but MSSIM soon bottoms out, so depth only
    # separates one missing frame from several
    deep = [j for j in sorted(counts, key=lambda j: (M[j - 1], j)) if M[j - 1] < MULTI_GAP * single]
    for i in range(extra if deep else 0):
        counts[deep[i % len(deep)]] += 1
    return counts, 0 if deep else extra


def remap_locations(payload: AuxiliaryPayload, reports: Mapping[str, FrameDeletionReport],
                    video_meta: Mapping[str, int]) -> tuple[AuxiliaryPayload, list[int]]:
    """Shift payload frame indices to the received (post-deletion) numbering.

    ``video_meta`` is the index's ``{video_id: original frame count}`` table
    (its order defines the payload's video indices).  Returns the adjusted
    payload and the segment positions whose frame was deleted; those stay
    in the payload unchanged and must be treated as unrecoverable.
    """
    ids = list(video_meta)
    deleted = {vid: np.array(r.deleted_original_frames(), dtype=np.int64)
               for vid, r in reports.items()}
    entries, lost = [], []
    for pos, e in enumerate(payload.segments):
        gone = deleted.get(ids[e.video])
        if gone is None or gone.size == 0:
            entries.append(e)
            continue
        if np.any(gone == e.frame):
            lost.append(pos)
            entries.append(e)
            continue
        shift = int(np.count_nonzero(gone < e.frame))
        entries.append(PayloadEntry(e.video, e.frame - shift, e.x, e.y))
    adjusted = AuxiliaryPayload(payload.L, payload.padding_zeros, tuple(entries),
                                payload.widths, payload.index_fingerprint, payload.version)
    return adjusted, lost
