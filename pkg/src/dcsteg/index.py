"""Video index database: hash value -> carrier block locations.

The database is a direct-addressed table with one bucket per ``L``-bit hash
value.  Locations inside a bucket keep insertion order: video (input order),
then frame ascending, then block raster order.

File layout (integers little-endian)::

    magic  b"CVSI"        4 bytes
    version               u16
    L                     u8
    hash method           u8   (0 = max-dc, 1 = adj-dc)
    m, n                  u16, u16
    T                     f64
    video count V         u32
    V x (id length u16, id utf-8, frame count u32)
    2^L x (count u32, count x (video u32, frame u32, x u16, y u16))
    crc32 of all preceding bytes   u32
"""

from __future__ import annotations

import struct
import zlib
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .dct import PartitionConfig, frame_dc_vectors
from .errors import FrameError, IndexFormatError, NotFoundError
from .frames import VideoSource, crop_for_hashing
from .hashing import (ADJACENT_DC, MAX_DC, METHODS, calibrate_threshold, decimal_to_hash,
                      raw_values, truncate)

MAGIC = b"CVSI"
FORMAT_VERSION = 1
_METHOD_CODES = {MAX_DC: 0, ADJACENT_DC: 1}
_RECORD = np.dtype([("video", "<u4"), ("frame", "<u4"), ("x", "<u2"), ("y", "<u2")])


class CarrierLocation(NamedTuple):
    video_id: str
    frame: int
    x: int
    y: int


@dataclass
class IndexDatabase:
    config: PartitionConfig
    method: str
    buckets: list[list[CarrierLocation]]
    video_meta: dict[str, int] = field(default_factory=dict)
    _fingerprint: int | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown hash method {self.method!r}")
        if len(self.buckets) != 1 << self.config.L:
            raise ValueError("bucket table size must be 2^L")

    @property
    def video_ids(self) -> list[str]:
        return list(self.video_meta)

    @property
    def max_frame_count(self) -> int:
        return max(self.video_meta.values(), default=0)

    def __len__(self) -> int:
        return sum(len(b) for b in self.buckets)

    def bucket(self, value: int) -> list[CarrierLocation]:
        return self.buckets[value]

    def occupancy(self) -> np.ndarray:
        return np.array([len(b) for b in self.buckets], dtype=np.int64)

    def to_bytes(self) -> bytes:
        return dumps(self)

    def fingerprint(self) -> int:
        """The index file's checksum; ties payloads to the index they were built on.

        Computed once: an index is not meant to change after it is built.
        """
        if self._fingerprint is None:
            (self._fingerprint,) = struct.unpack("<I", self.to_bytes()[-4:])
        return self._fingerprint


def hash_frame(plane: np.ndarray, cfg: PartitionConfig, method: str = MAX_DC) -> np.ndarray:
    """15-bit raw hash values of every block, shape ``(n, m)``."""
    dc = frame_dc_vectors(crop_for_hashing(plane, cfg), cfg)
    return raw_values(dc, cfg.T, method)


def _map_frames(fn, source: VideoSource, threads: int | None) -> np.ndarray:
    indices = range(1, source.frame_count + 1)
    if threads == 1:
        return np.stack([fn(source.read_luma(i)) for i in indices])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.stack(list(pool.map(lambda i: fn(source.read_luma(i)), indices)))


def video_dc(source: VideoSource, cfg: PartitionConfig, threads: int | None = None) -> np.ndarray:
    """DC vectors of a whole video, shape ``(frames, n, m, 16)``."""
    return _map_frames(lambda p: frame_dc_vectors(crop_for_hashing(p, cfg), cfg), source, threads)


def hash_video(source: VideoSource, cfg: PartitionConfig, method: str = MAX_DC,
               threads: int | None = None) -> np.ndarray:
    """Raw hash values of a whole video, shape ``(frames, n, m)``."""
    return _map_frames(lambda p: hash_frame(p, cfg, method), source, threads)


def index_from_hashes(raw: dict[str, np.ndarray], cfg: PartitionConfig,
                      method: str = MAX_DC) -> IndexDatabase:
    """Build an index from precomputed raw hashes ``{video_id: (frames, n, m)}``.

    Raw 15-bit values are truncated to ``cfg.L`` bits, so one hashing pass can
    serve indexes of every length.
    """
    buckets: list[list[CarrierLocation]] = [[] for _ in range(1 << cfg.L)]
    meta: dict[str, int] = {}
    for vid, values in raw.items():
        values = np.asarray(values)
        frames, n, m = values.shape
        if (n, m) != (cfg.n, cfg.m):
            raise ValueError(f"{vid}: hash grid {m}x{n} does not match config {cfg.m}x{cfg.n}")
        meta[vid] = frames
        keys = truncate(values, cfg.L).ravel()
        # ravel order is (frame, y, x): frame ascending, then raster order
        for flat, key in enumerate(keys.tolist()):
            f, rem = divmod(flat, n * m)
            y, x = divmod(rem, m)
            buckets[key].append(CarrierLocation(vid, f + 1, x + 1, y + 1))
    return IndexDatabase(cfg, method, buckets, meta)


def build_index(sources: Sequence[VideoSource], cfg: PartitionConfig, method: str = MAX_DC,
                threads: int | None = None, calibrate: bool = False) -> IndexDatabase:
    """Hash every block of every frame of every source and index it.

    With ``calibrate`` the threshold is first fitted to the whole dataset
    (see :func:`~dcsteg.hashing.calibrate_threshold`) and stored in the index.
    """
    if method not in METHODS:
        raise ValueError(f"unknown hash method {method!r}")
    dcs = {}
    for src in sources:
        if src.id in dcs:
            raise ValueError(f"duplicate video id {src.id!r}")
        try:
            dcs[src.id] = video_dc(src, cfg, threads)
        except (OSError, FrameError) as exc:
            raise FrameError(f"cannot index video {src.id!r}: {exc}") from exc
    if not dcs:
        raise ValueError("no videos to index")
    if calibrate:
        cfg = cfg.replace(T=calibrate_threshold(np.concatenate([d.reshape(-1, 16) for d in dcs.values()])))
    raw = {vid: raw_values(d, cfg.T, method) for vid, d in dcs.items()}
    return index_from_hashes(raw, cfg, method)


def _as_key(db: IndexDatabase, segment) -> tuple[int, str]:
    L = db.config.L
    if isinstance(segment, (int, np.integer)):
        if not 0 <= segment < (1 << L):
            raise ValueError(f"segment value {segment} does not fit in L={L} bits")
        value = int(segment)
        return value, "".join(map(str, decimal_to_hash(value, L)))
    bits = [int(b) for b in segment]
    if len(bits) != L:
        raise ValueError(f"segment has {len(bits)} bits, index expects L={L}")
    value = 0
    for b in bits:
        value = (value << 1) | b
    return value, "".join(map(str, bits))


def rank_key(loc: CarrierLocation, exclusions: Iterable[str], affinity: str | None) -> int:
    """Preference tier of a location: lower is better.

    0: in the affinity video and not excluded; 1: neither; 2: excluded
    affinity video; 3: other excluded video.
    """
    excluded = loc.video_id in exclusions
    preferred = affinity is not None and loc.video_id == affinity
    return 2 * excluded + (0 if preferred else 1)


def lookup(db: IndexDatabase, segment, exclusions: Iterable[str] = (),
           affinity: str | None = None) -> CarrierLocation:
    """First location of the segment's bucket under the preference tiers.

    Ties inside a tier keep insertion order.  Exclusion only demotes a video.
    """
    value, pattern = _as_key(db, segment)
    bucket = db.buckets[value]
    if not bucket:
        raise NotFoundError(pattern)
    exclusions = frozenset(exclusions)
    best, best_rank = None, 4
    for loc in bucket:
        r = rank_key(loc, exclusions, affinity)
        if r < best_rank:
            best, best_rank = loc, r
            if r == 0:
                break
    return best


@dataclass
class AuditReport:
    checked: int
    mismatches: list[tuple[CarrierLocation, int, int]]  # (location, indexed, recomputed)

    @property
    def mismatch_rate(self) -> float:
        return len(self.mismatches) / self.checked if self.checked else 0.0


def audit(db: IndexDatabase, sources: Sequence[VideoSource], sample: int | None = None,
          seed: int = 0) -> AuditReport:
    """Recompute hashes of indexed locations (all, or a seeded random sample)."""
    entries = [(value, loc) for value, bucket in enumerate(db.buckets) for loc in bucket]
    if sample is not None and sample < len(entries):
        rng = np.random.default_rng(seed)
        picks = np.sort(rng.choice(len(entries), size=sample, replace=False))
        entries = [entries[i] for i in picks]
    by_id = {s.id: s for s in sources}
    by_frame = defaultdict(list)
    for value, loc in entries:
        by_frame[(loc.video_id, loc.frame)].append((value, loc))
    mismatches = []
    for (vid, frame), items in by_frame.items():
        src = by_id.get(vid)
        if src is None or frame > src.frame_count:
            mismatches.extend((loc, value, -1) for value, loc in items)
            continue
        keys = truncate(hash_frame(src.read_luma(frame), db.config, db.method), db.config.L)
        for value, loc in items:
            got = int(keys[loc.y - 1, loc.x - 1])
            if got != value:
                mismatches.append((loc, value, got))
    mismatches.sort(key=lambda t: (db.video_ids.index(t[0].video_id), t[0].frame, t[0].y, t[0].x))
    return AuditReport(len(entries), mismatches)


def dumps(db: IndexDatabase) -> bytes:
    cfg = db.config
    parts = [MAGIC, struct.pack("<HBBHHdI", FORMAT_VERSION, cfg.L, _METHOD_CODES[db.method],
                                cfg.m, cfg.n, cfg.T, len(db.video_meta))]
    order = {}
    for k, (vid, frames) in enumerate(db.video_meta.items()):
        raw_id = vid.encode("utf-8")
        parts.append(struct.pack("<H", len(raw_id)) + raw_id + struct.pack("<I", frames))
        order[vid] = k
    for bucket in db.buckets:
        rec = np.array([(order[l.video_id], l.frame, l.x, l.y) for l in bucket], dtype=_RECORD)
        parts.append(struct.pack("<I", len(bucket)))
        parts.append(rec.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def loads(data: bytes) -> IndexDatabase:
    if len(data) < 8 or data[:4] != MAGIC:
        raise IndexFormatError("not an index file (bad magic)")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise IndexFormatError("index checksum failure (file truncated or corrupt)")
    try:
        version, L, method_code, m, n, T, nvid = struct.unpack_from("<HBBHHdI", body, 4)
        if version != FORMAT_VERSION:
            raise IndexFormatError(f"unsupported index version {version}, expected {FORMAT_VERSION}")
        method = {v: k for k, v in _METHOD_CODES.items()}[method_code]
        cfg = PartitionConfig(m, n, L, T)
        pos = 4 + struct.calcsize("<HBBHHdI")
        meta, ids = {}, []
        for _ in range(nvid):
            (ln,) = struct.unpack_from("<H", body, pos)
            vid = body[pos + 2:pos + 2 + ln].decode("utf-8")
            (frames,) = struct.unpack_from("<I", body, pos + 2 + ln)
            pos += 2 + ln + 4
            meta[vid] = frames
            ids.append(vid)
        buckets = []
        for _ in range(1 << L):
            (count,) = struct.unpack_from("<I", body, pos)
            pos += 4
            rec = np.frombuffer(body, dtype=_RECORD, count=count, offset=pos)
            pos += count * _RECORD.itemsize
            buckets.append([CarrierLocation(ids[v], int(f), int(x), int(y))
                            for v, f, x, y in rec.tolist()])
    except (struct.error, KeyError, ValueError, IndexError) as exc:
        if isinstance(exc, IndexFormatError):
            raise
        raise IndexFormatError(f"malformed index file: {exc}") from exc
    if pos != len(body):
        raise IndexFormatError("trailing bytes after bucket table")
    return IndexDatabase(cfg, method, buckets, meta)


def save(db: IndexDatabase, path: str | Path) -> None:
    Path(path).write_bytes(dumps(db))


def load(path: str | Path) -> IndexDatabase:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IndexFormatError(f"{path}: {exc}") from exc
    return loads(data)


def occupancy_csv(db: IndexDatabase) -> str:
    """Per-bucket occupancy: ``value,bits,count`` rows for every hash value."""
    L = db.config.L
    rows = ["value,bits,count"]
    for value, bucket in enumerate(db.buckets):
        rows.append(f"{value},{value:0{L}b},{len(bucket)}")
    return "\n".join(rows) + "\n"
