"""Frame ingestion for codec-free video containers.

Every source exposes its frames as 2-D ``uint8`` luma planes (rows x columns),
1-based frame indices, and nothing else: chroma is never decoded.

Supported containers:

* Y4M (``C420*`` chroma only),
* raw planar YUV 4:2:0 with caller-supplied dimensions,
* directories of PNG/PPM/BMP images, ordered lexicographically,
* in-memory arrays (used by the attack harness and the tests).
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from PIL import Image

from .errors import FrameError

Y4M = "y4m"
RAW_YUV420 = "yuv"
IMAGE_DIR = "imgdir"
ARRAY = "array"

IMAGE_SUFFIXES = (".png", ".ppm", ".pgm", ".bmp")
_Y4M_MAGIC = b"YUV4MPEG2"
_FRAME_TAG = b"FRAME"


def rgb_to_luma(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma, ``round(0.299 R + 0.587 G + 0.114 B)``, half rounded up."""
    rgb = np.asarray(rgb, dtype=np.float64)
    y = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


class VideoSource:
    """Base class: an ordered, read-only collection of luma frames."""

    format = ARRAY

    def __init__(self, video_id: str, width: int, height: int, frame_count: int):
        if frame_count < 1:
            raise FrameError(f"{video_id}: video has no frames")
        self.id = video_id
        self.width = width
        self.height = height
        self.frame_count = frame_count

    def __len__(self) -> int:
        return self.frame_count

    def __repr__(self) -> str:
        return (f"{type(self).__name__}(id={self.id!r}, {self.width}x{self.height}, "
                f"frames={self.frame_count})")

    def _check_index(self, frame_index: int) -> None:
        if not 1 <= frame_index <= self.frame_count:
            raise IndexError(
                f"{self.id}: frame {frame_index} outside 1..{self.frame_count}")

    def read_luma(self, frame_index: int) -> np.ndarray:
        """Return the Y plane of frame ``frame_index`` (1-based)."""
        self._check_index(frame_index)
        return self._read(frame_index)

    def _read(self, frame_index: int) -> np.ndarray:
        raise NotImplementedError

    def frames(self) -> Iterator[np.ndarray]:
        for i in range(1, self.frame_count + 1):
            yield self._read(i)

    def to_array(self) -> np.ndarray:
        """All luma frames stacked as ``(frames, height, width)``."""
        return np.stack(list(self.frames()))


class ArraySource(VideoSource):
    """Frames held in memory, shape ``(frames, height, width)``."""

    format = ARRAY

    def __init__(self, video_id: str, frames: np.ndarray | Sequence[np.ndarray]):
        arr = np.asarray(frames)
        if arr.ndim != 3:
            raise FrameError(f"{video_id}: expected (frames, height, width), got {arr.shape}")
        if arr.dtype != np.uint8:
            arr = np.clip(np.floor(arr + 0.5), 0, 255).astype(np.uint8)
        self._frames = arr
        super().__init__(video_id, arr.shape[2], arr.shape[1], arr.shape[0])

    def _read(self, frame_index: int) -> np.ndarray:
        return self._frames[frame_index - 1]

    def to_array(self) -> np.ndarray:
        return self._frames


class RawYUVSource(VideoSource):
    format = RAW_YUV420

    def __init__(self, path: str | os.PathLike, width: int, height: int,
                 video_id: str | None = None):
        path = Path(path)
        if width <= 0 or height <= 0 or width % 2 or height % 2:
            raise FrameError(f"invalid 4:2:0 dimensions {width}x{height}")
        self.path = path
        self._frame_bytes = width * height * 3 // 2
        size = _file_size(path)
        if size == 0 or size % self._frame_bytes:
            raise FrameError(
                f"{path}: size {size} is not a multiple of the {width}x{height} "
                f"4:2:0 frame size {self._frame_bytes}")
        super().__init__(video_id or path.stem, width, height, size // self._frame_bytes)

    def _read(self, frame_index: int) -> np.ndarray:
        offset = (frame_index - 1) * self._frame_bytes
        y = np.fromfile(self.path, dtype=np.uint8, count=self.width * self.height,
                        offset=offset)
        return y.reshape(self.height, self.width)


class Y4MSource(VideoSource):
    format = Y4M

    def __init__(self, path: str | os.PathLike, video_id: str | None = None):
        path = Path(path)
        self.path = path
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise FrameError(f"{path}: {exc}") from exc
        header_end = data.find(b"\n")
        if not data.startswith(_Y4M_MAGIC) or header_end < 0:
            raise FrameError(f"{path}: not a YUV4MPEG2 stream")
        self.params = parse_y4m_header(data[:header_end])
        width, height = self.params["W"], self.params["H"]
        colorspace = self.params.get("C", "420jpeg")
        if not colorspace.startswith("420"):
            raise FrameError(f"{path}: unsupported colorspace C{colorspace}, only 4:2:0")
        frame_bytes = width * height + 2 * ((width + 1) // 2) * ((height + 1) // 2)
        self._offsets = []
        pos = header_end + 1
        while pos < len(data):
            if not data.startswith(_FRAME_TAG, pos):
                raise FrameError(f"{path}: missing FRAME marker at byte {pos}")
            eol = data.find(b"\n", pos)
            if eol < 0 or eol + 1 + frame_bytes > len(data):
                raise FrameError(f"{path}: truncated frame at byte {pos}")
            self._offsets.append(eol + 1)
            pos = eol + 1 + frame_bytes
        super().__init__(video_id or path.stem, width, height, len(self._offsets))

    def _read(self, frame_index: int) -> np.ndarray:
        y = np.fromfile(self.path, dtype=np.uint8, count=self.width * self.height,
                        offset=self._offsets[frame_index - 1])
        return y.reshape(self.height, self.width)


def parse_y4m_header(line: bytes) -> dict:
    tokens = line.decode("ascii").split()
    if not tokens or tokens[0] != "YUV4MPEG2":
        raise FrameError("bad Y4M signature")
    params: dict = {}
    for tok in tokens[1:]:
        key, value = tok[0], tok[1:]
        params[key] = int(value) if key in "WH" else value
    if "W" not in params or "H" not in params:
        raise FrameError("Y4M header lacks W/H")
    return params


class ImageDirSource(VideoSource):
    format = IMAGE_DIR

    def __init__(self, path: str | os.PathLike, video_id: str | None = None):
        path = Path(path)
        if not path.is_dir():
            raise FrameError(f"{path}: not a directory")
        self.path = path
        self._files = sorted(p for p in path.iterdir()
                             if p.suffix.lower() in IMAGE_SUFFIXES)
        if not self._files:
            raise FrameError(f"{path}: no PNG/PPM/BMP frames")
        first = self._load(self._files[0])
        super().__init__(video_id or path.name, first.shape[1], first.shape[0],
                         len(self._files))

    @staticmethod
    def _load(file: Path) -> np.ndarray:
        try:
            with Image.open(file) as im:
                if im.mode in ("L", "1"):
                    return np.array(im.convert("L"), dtype=np.uint8)
                arr = np.array(im.convert("RGB"))
        except OSError as exc:
            raise FrameError(f"{file}: {exc}") from exc
        return rgb_to_luma(arr)

    def _read(self, frame_index: int) -> np.ndarray:
        plane = self._load(self._files[frame_index - 1])
        if plane.shape != (self.height, self.width):
            raise FrameError(f"{self._files[frame_index - 1]}: frame size changed")
        return plane


def _file_size(path: Path) -> int:
    try:
        return path.stat().st_size
    except OSError as exc:
        raise FrameError(f"{path}: {exc}") from exc


def open_source(path: str | os.PathLike, fmt: str | None = None,
                width: int | None = None, height: int | None = None,
                video_id: str | None = None) -> VideoSource:
    """Open a video by path; ``fmt`` is inferred from the suffix when omitted."""
    path = Path(path)
    if not path.exists():
        raise FrameError(f"{path}: no such file or directory")
    if fmt is None:
        if path.is_dir():
            fmt = IMAGE_DIR
        elif path.suffix.lower() == ".y4m":
            fmt = Y4M
        elif path.suffix.lower() == ".yuv":
            fmt = RAW_YUV420
        else:
            raise FrameError(f"{path}: cannot infer format")
    if fmt == Y4M:
        return Y4MSource(path, video_id)
    if fmt == RAW_YUV420:
        if width is None or height is None:
            raise FrameError(f"{path}: raw YUV input needs width and height")
        return RawYUVSource(path, width, height, video_id)
    if fmt == IMAGE_DIR:
        return ImageDirSource(path, video_id)
    raise FrameError(f"unknown format {fmt!r}")


def discover_sources(directory: str | os.PathLike, fmt: str,
                     width: int | None = None, height: int | None = None) -> list[VideoSource]:
    """Open every video of one format inside ``directory``, sorted by name."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FrameError(f"{directory}: not a directory")
    if fmt == IMAGE_DIR:
        entries = [p for p in directory.iterdir() if p.is_dir()]
    else:
        entries = [p for p in directory.iterdir() if p.suffix.lower() == "." + fmt]
    if not entries:
        raise FrameError(f"{directory}: no {fmt} videos found")
    return [open_source(p, fmt, width, height) for p in sorted(entries)]


def write_y4m(path: str | os.PathLike, frames: Sequence[np.ndarray] | np.ndarray,
              fps: str = "30:1") -> None:
    """Write luma frames as a C420jpeg Y4M file with neutral (128) chroma."""
    frames = np.asarray(frames, dtype=np.uint8)
    _, h, w = frames.shape
    chroma = np.full(2 * ((w + 1) // 2) * ((h + 1) // 2), 128, np.uint8).tobytes()
    with open(path, "wb") as fh:
        fh.write(f"YUV4MPEG2 W{w} H{h} F{fps} Ip A1:1 C420jpeg\n".encode("ascii"))
        for frame in frames:
            fh.write(_FRAME_TAG + b"\n")
            fh.write(np.ascontiguousarray(frame).tobytes())
            fh.write(chroma)


def write_yuv(path: str | os.PathLike, frames: Sequence[np.ndarray] | np.ndarray) -> None:
    frames = np.asarray(frames, dtype=np.uint8)
    _, h, w = frames.shape
    chroma = np.full(2 * (w // 2) * (h // 2), 128, np.uint8).tobytes()
    with open(path, "wb") as fh:
        for frame in frames:
            fh.write(np.ascontiguousarray(frame).tobytes())
            fh.write(chroma)


def write_image_dir(path: str | os.PathLike, frames: Sequence[np.ndarray] | np.ndarray) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames, start=1):
        Image.fromarray(np.asarray(frame, dtype=np.uint8), mode="L").save(
            path / f"frame_{i:05d}.png")


def crop_for_hashing(plane: np.ndarray, cfg) -> np.ndarray:
    """Top-left crop to the largest multiple of ``32m`` x ``32n`` (``cfg`` has ``m``, ``n``)."""
    h, w = plane.shape
    bw, bh = 32 * cfg.m, 32 * cfg.n
    if w < bw or h < bh:
        raise FrameError(f"plane {w}x{h} smaller than the {bw}x{bh} hashing grid")
    return plane[: bh * (h // bh), : bw * (w // bw)]
