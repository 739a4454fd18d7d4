"""Hiding by carrier selection and extraction from received videos.

Hiding never touches a video.  The secret bit string is cut into ``L``-bit
segments, each segment is matched to an indexed block whose hash equals it,
and the block locations travel to the receiver as an encrypted auxiliary
payload.  The receiver re-hashes those blocks to rebuild the secret.

Auxiliary payload layout before encryption (integers big-endian)::

    b"CVSA"  version:u8  L:u8  padding_zeros:u8  S:u16
    width_x:u8  width_y:u8  width_frame:u8  width_video:u8
    index_fingerprint:u32
    S packed records (x-1, y-1, frame-1, video index), MSB first,
    zero-padded to a byte boundary

Field widths are ``ceil(log2(count))`` bits for ``m``, ``n``, the largest
frame count and the number of videos of the index.  Sealed payloads are
``nonce(12) || AES-256-GCM ciphertext || tag(16)``.
"""

from __future__ import annotations

import json
import math
import os
import struct
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .dct import block_at, subblock_dc_vector
from .errors import MissingVideoError, NotFoundError, PayloadAuthError, PayloadError
from .frames import VideoSource, crop_for_hashing
from .hashing import hash_block
from .index import CarrierLocation, IndexDatabase, lookup

PAYLOAD_MAGIC = b"CVSA"
PAYLOAD_VERSION = 1
_HEADER = struct.Struct(">4sBBBH4BI")
NONCE_BYTES = 12
KEY_BYTES = 32


def bytes_to_bits(data: bytes) -> list[int]:
    """MSB-first bits of ``data``."""
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8)).tolist()


def bits_to_bytes(bits: Sequence[int]) -> bytes:
    """Pack bits MSB first; a ragged tail is zero-padded."""
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def segment_secret(bits: Sequence[int], L: int) -> tuple[list[tuple[int, ...]], int]:
    """Cut ``bits`` into ``ceil(h/L)`` segments; the last is right-padded with zeros.

    Returns ``(segments, padding_zeros)``.
    """
    if not 1 <= L <= 15:
        raise ValueError(f"L must be in [1, 15], got {L}")
    bits = [int(b) for b in bits]
    if not bits:
        raise ValueError("secret must contain at least one bit")
    padding = -len(bits) % L
    bits = bits + [0] * padding
    return [tuple(bits[i:i + L]) for i in range(0, len(bits), L)], padding


def _width(count: int) -> int:
    return math.ceil(math.log2(count)) if count > 1 else 0


class PayloadEntry(NamedTuple):
    """A carrier location with the video given by its position in the index's video table."""

    video: int
    frame: int
    x: int
    y: int


@dataclass(frozen=True)
class AuxiliaryPayload:
    L: int
    padding_zeros: int
    segments: tuple[PayloadEntry, ...]
    widths: tuple[int, int, int, int]  # x, y, frame, video
    index_fingerprint: int
    version: int = PAYLOAD_VERSION

    def __post_init__(self):
        if not self.segments:
            raise PayloadError("payload has no segments")
        if not 0 <= self.padding_zeros < self.L:
            raise PayloadError(f"padding {self.padding_zeros} not in [0, L-1]")
        if len(self.segments) > 0xFFFF:
            raise PayloadError(f"{len(self.segments)} segments exceed the u16 limit")

    @property
    def S(self) -> int:
        return len(self.segments)

    @property
    def record_bits(self) -> int:
        """Auxiliary bits per segment (``L_a``)."""
        return sum(self.widths)

    @property
    def secret_length(self) -> int:
        return self.S * self.L - self.padding_zeros

    def locations(self, db: IndexDatabase) -> list[CarrierLocation]:
        ids = db.video_ids
        try:
            return [CarrierLocation(ids[e.video], e.frame, e.x, e.y) for e in self.segments]
        except IndexError:
            raise PayloadError("payload refers to a video outside the index") from None

    def to_bytes(self) -> bytes:
        header = _HEADER.pack(PAYLOAD_MAGIC, self.version, self.L, self.padding_zeros,
                              self.S, *self.widths, self.index_fingerprint)
        wx, wy, wf, wv = self.widths
        bits: list[int] = []
        for e in self.segments:
            for value, width in ((e.x - 1, wx), (e.y - 1, wy), (e.frame - 1, wf), (e.video, wv)):
                if not 0 <= value < (1 << width) and not (width == 0 and value == 0):
                    raise PayloadError(f"field value {value} does not fit in {width} bits")
                bits.extend((value >> (width - 1 - j)) & 1 for j in range(width))
        return header + bits_to_bytes(bits)

    @classmethod
    def from_bytes(cls, data: bytes) -> "AuxiliaryPayload":
        if len(data) < _HEADER.size:
            raise PayloadError("payload shorter than its header")
        magic, version, L, padding, S, wx, wy, wf, wv, fp = _HEADER.unpack_from(data)
        if magic != PAYLOAD_MAGIC:
            raise PayloadError("bad payload magic")
        if version != PAYLOAD_VERSION:
            raise PayloadError(f"unsupported payload version {version}")
        widths = (wx, wy, wf, wv)
        body = bytes_to_bits(data[_HEADER.size:])
        need = S * sum(widths)
        if len(body) < need or len(data) - _HEADER.size != (need + 7) // 8:
            raise PayloadError("payload body length does not match its header")
        entries, pos = [], 0
        for _ in range(S):
            vals = []
            for width in widths:
                v = 0
                for b in body[pos:pos + width]:
                    v = (v << 1) | b
                vals.append(v)
                pos += width
            x, y, f, vid = vals
            entries.append(PayloadEntry(vid, f + 1, x + 1, y + 1))
        return cls(L, padding, tuple(entries), widths, fp, version)


def payload_widths(db: IndexDatabase) -> tuple[int, int, int, int]:
    return (_width(db.config.m), _width(db.config.n), _width(db.max_frame_count),
            _width(len(db.video_meta)))


@dataclass
class TransmissionHistory:
    """Videos already used for each segment pattern in earlier transmissions."""

    used: dict[str, set[str]] = field(default_factory=lambda: defaultdict(set))

    def exclusions(self, pattern: str) -> frozenset[str]:
        return frozenset(self.used.get(pattern, ()))

    def record(self, pattern: str, video_id: str) -> None:
        self.used.setdefault(pattern, set()).add(video_id)

    def to_json(self) -> str:
        return json.dumps({k: sorted(v) for k, v in sorted(self.used.items())}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "TransmissionHistory":
        return cls(defaultdict(set, {k: set(v) for k, v in json.loads(text).items()}))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "TransmissionHistory":
        path = Path(path)
        return cls.from_json(path.read_text()) if path.exists() else cls()


def _pattern(segment: Sequence[int]) -> str:
    return "".join(map(str, segment))


def hide(bits: Sequence[int], db: IndexDatabase,
         history: TransmissionHistory | None = None) -> tuple[AuxiliaryPayload, list[str]]:
    """Select a carrier block for every segment of ``bits``.

    * a segment repeated within this transmission reuses the same location;
    * new segments prefer the first video already chosen in this transmission;
    * videos used for the same pattern in earlier transmissions are demoted.

    All segments are resolved before ``history`` is touched, so an unfillable
    segment raises :class:`NotFoundError` and leaves no trace.  Returns the
    payload and the selected video ids in first-use order.
    """
    history = history if history is not None else TransmissionHistory()
    L = db.config.L
    segments, padding = segment_secret(bits, L)
    chosen: dict[str, CarrierLocation] = {}
    selected: list[str] = []
    order: list[CarrierLocation] = []
    for seg in segments:
        pattern = _pattern(seg)
        loc = chosen.get(pattern)
        if loc is None:
            affinity = selected[0] if selected else None
            loc = lookup(db, seg, history.exclusions(pattern), affinity)
            chosen[pattern] = loc
            if loc.video_id not in selected:
                selected.append(loc.video_id)
        order.append(loc)
    for pattern, loc in chosen.items():
        history.record(pattern, loc.video_id)
    position = {vid: k for k, vid in enumerate(db.video_meta)}
    entries = tuple(PayloadEntry(position[l.video_id], l.frame, l.x, l.y) for l in order)
    payload = AuxiliaryPayload(L, padding, entries, payload_widths(db), db.fingerprint())
    return payload, selected


def seal_payload(payload: AuxiliaryPayload, key: bytes) -> bytes:
    """Encrypt with AES-256-GCM under a fresh random nonce."""
    if len(key) != KEY_BYTES:
        raise ValueError("key must be 256 bits (32 bytes)")
    nonce = os.urandom(NONCE_BYTES)
    return nonce + AESGCM(key).encrypt(nonce, payload.to_bytes(), PAYLOAD_MAGIC)


def open_payload(ciphertext: bytes, key: bytes) -> AuxiliaryPayload:
    if len(key) != KEY_BYTES:
        raise ValueError("key must be 256 bits (32 bytes)")
    if len(ciphertext) < NONCE_BYTES + 16:
        raise PayloadAuthError()
    nonce, body = ciphertext[:NONCE_BYTES], ciphertext[NONCE_BYTES:]
    try:
        plain = AESGCM(key).decrypt(nonce, body, PAYLOAD_MAGIC)
    except InvalidTag:
        raise PayloadAuthError() from None
    return AuxiliaryPayload.from_bytes(plain)


def _sources_by_id(sources) -> dict[str, VideoSource]:
    if isinstance(sources, Mapping):
        return dict(sources)
    return {s.id: s for s in sources}


def recover_segments(payload: AuxiliaryPayload, db: IndexDatabase, sources,
                     lost: Iterable[int] = ()) -> list[tuple[int, ...] | None]:
    """Hash sequence at every payload location, ``None`` for positions in ``lost``."""
    if payload.L != db.config.L:
        raise PayloadError(f"payload L={payload.L} does not match index L={db.config.L}")
    cfg = db.config
    by_id = _sources_by_id(sources)
    lost = set(lost)
    cache: dict[tuple[str, int], np.ndarray] = {}
    out: list[tuple[int, ...] | None] = []
    for pos, loc in enumerate(payload.locations(db)):
        if pos in lost:
            out.append(None)
            continue
        src = by_id.get(loc.video_id)
        if src is None:
            raise MissingVideoError(f"video {loc.video_id!r} not among the received videos")
        if loc.frame > src.frame_count:
            raise MissingVideoError(
                f"video {loc.video_id!r} has {src.frame_count} frames, payload needs frame {loc.frame}")
        key = (loc.video_id, loc.frame)
        plane = cache.get(key)
        if plane is None:
            plane = cache[key] = crop_for_hashing(src.read_luma(loc.frame), cfg)
        dcv = subblock_dc_vector(block_at(plane, cfg, loc.x, loc.y))
        out.append(hash_block(dcv, cfg, db.method).bits)
    return out


def extract(payload: AuxiliaryPayload, db: IndexDatabase, sources,
            lost: Iterable[int] = (), check_fingerprint: bool = True) -> list[int]:
    """Recover the secret bits from the received ``sources``.

    ``lost`` lists segment positions known to be unrecoverable (for example
    blocks in deleted frames); their bits come back as zeros.
    """
    if check_fingerprint and payload.index_fingerprint != db.fingerprint():
        raise PayloadError("payload was built against a different index")
    bits: list[int] = []
    for seq in recover_segments(payload, db, sources, lost):
        bits.extend(seq if seq is not None else (0,) * payload.L)
    return bits[:len(bits) - payload.padding_zeros]
