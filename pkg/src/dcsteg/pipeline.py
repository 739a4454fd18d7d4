"""End-to-end run: build index, hide, seal, attack, detect deletions, extract, score."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .attacks import AttackSpec, attack_sources, external_compress, parse_spec
from .codec import (AuxiliaryPayload, TransmissionHistory, bits_to_bytes, bytes_to_bits, hide,
                    open_payload, recover_segments, seal_payload, segment_secret)
from .dct import PartitionConfig
from .deletion import FrameDeletionReport, detect_deletions, remap_locations
from .errors import AttackError
from .frames import VideoSource, Y4M, discover_sources
from .hashing import MAX_DC
from .index import IndexDatabase, build_index
from .metrics import extraction_accuracy, to_csv

DEFAULT_CONFIG = PartitionConfig(m=13, n=7, L=6)


@dataclass
class PipelineReport:
    config: PartitionConfig
    method: str
    video_ids: list[str]
    index_locations: int
    index_fingerprint: int
    segments: int
    padding_zeros: int
    selected_videos: list[str]
    attack: str | None
    seed: int
    accuracy: float
    bit_errors: int
    recovered_ok: bool
    lost_segments: list[int] = field(default_factory=list)
    deletions: dict[str, FrameDeletionReport] = field(default_factory=dict)
    # artefacts
    index: IndexDatabase | None = field(default=None, repr=False)
    payload: AuxiliaryPayload | None = field(default=None, repr=False)
    sealed: bytes = field(default=b"", repr=False)
    recovered: bytes = field(default=b"", repr=False)

    def summary(self) -> dict:
        return {
            "m": self.config.m, "n": self.config.n, "L": self.config.L, "T": self.config.T,
            "method": self.method, "videos": len(self.video_ids),
            "index_locations": self.index_locations,
            "index_fingerprint": f"{self.index_fingerprint:08x}",
            "segments": self.segments, "padding_zeros": self.padding_zeros,
            "selected_videos": ";".join(self.selected_videos),
            "attack": self.attack or "none", "seed": self.seed,
            "deleted_frames_detected": sum(r.total_deleted for r in self.deletions.values()),
            "lost_segments": len(self.lost_segments),
            "accuracy": self.accuracy, "bit_errors": self.bit_errors,
            "recovered_ok": self.recovered_ok,
        }

    def to_csv(self) -> str:
        return to_csv(["key", "value"], self.summary().items())

    def text(self) -> str:
        s = self.summary()
        width = max(map(len, s))
        lines = ["coverless hiding pipeline", "=" * 25]
        lines += [f"{k.ljust(width)}  {v}" for k, v in s.items()]
        return "\n".join(lines) + "\n"


def _load(dataset, fmt: str) -> list[VideoSource]:
    if isinstance(dataset, (str, os.PathLike)):
        return discover_sources(Path(dataset), fmt)
    return list(dataset)


def _received(sources: Sequence[VideoSource], spec: AttackSpec | None, seed: int,
              workdir) -> list[VideoSource]:
    if spec is None:
        return list(sources)
    if spec.kind == "external-compress":
        results = external_compress(sources, spec.params["command"], workdir)
        bad = [f"{r.video_id}: {r.error or r.returncode}" for r in results if not r.ok]
        if bad:
            raise AttackError("external tool failed for " + "; ".join(bad))
        return [r.source for r in results]
    return attack_sources(sources, spec, seed)


def pipeline_demo(dataset, secret: bytes, key: bytes, cfg: PartitionConfig = DEFAULT_CONFIG,
                  method: str = MAX_DC, attack: AttackSpec | str | None = None, seed: int = 0,
                  calibrate: bool = True, threads: int | None = None,
                  history: TransmissionHistory | None = None, fmt: str = Y4M,
                  workdir=None) -> PipelineReport:
    """Hide ``secret`` in ``dataset`` (directory or sources), optionally attack, then extract.

    Frame-count changes in the received videos trigger deletion detection
    and payload remapping.  Accuracy is scored per segment: a segment counts
    only if its whole hash sequence is recovered.
    """
    sources = _load(dataset, fmt)
    if not sources:
        raise ValueError("dataset is empty")
    spec = parse_spec(attack) if isinstance(attack, str) else attack
    db = build_index(sources, cfg, method, threads, calibrate=calibrate)
    bits = bytes_to_bits(secret)
    payload, selected = hide(bits, db, history)
    sealed = seal_payload(payload, key)

    received = _received(sources, spec, seed, workdir)
    opened = open_payload(sealed, key)
    reports = {}
    for src in received:
        original = db.video_meta.get(src.id)
        if original is not None and src.frame_count < original:
            reports[src.id] = detect_deletions(list(src.frames()), original_count=original)
    lost: list[int] = []
    if reports:
        opened, lost = remap_locations(opened, reports, db.video_meta)

    got = recover_segments(opened, db, received, lost)
    expected, _ = segment_secret(bits, db.config.L)
    acc = extraction_accuracy(expected, got)
    flat = [b for seq in got for b in (seq if seq is not None else (0,) * db.config.L)]
    flat = flat[:len(flat) - payload.padding_zeros]
    bit_errors = sum(a != b for a, b in zip(bits, flat))
    recovered = bits_to_bytes(flat)
    return PipelineReport(
        config=db.config, method=method, video_ids=db.video_ids, index_locations=len(db),
        index_fingerprint=db.fingerprint(), segments=payload.S,
        padding_zeros=payload.padding_zeros, selected_videos=selected,
        attack=str(spec) if spec else None, seed=seed, accuracy=acc, bit_errors=bit_errors,
        recovered_ok=recovered == bytes(secret), lost_segments=lost, deletions=reports,
        index=db, payload=payload, sealed=sealed, recovered=recovered)
