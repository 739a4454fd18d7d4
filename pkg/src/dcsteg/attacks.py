"""Attack suite applied to carrier videos before extraction.

Attacks act on luma planes only.  Specs use a small text syntax,
``name:key=val,key=val`` (for example ``gauss-noise:sigma=0.005`` or
``translate:dx=80,dy=50``), parsed by :func:`parse_spec`.

Conventions, where the usual attack definitions leave room:

* noise strengths follow the MATLAB ``imnoise`` parameterisation on the
  [0, 1] intensity scale: ``sigma`` of ``gauss-noise`` and ``speckle`` is the
  noise *variance*, ``density`` of ``salt-pepper`` the affected fraction;
* speckle is multiplicative, ``p * (1 + eta)`` with Gaussian ``eta``;
* geometric attacks keep the frame size and fill uncovered pixels with 0;
* ``scale`` resizes bilinearly by ``factor`` and back to the original size;
* ``center-crop`` blacks out a centred rectangle covering ``fraction`` of the
  area, ``edge-crop`` blacks out a border band covering ``fraction``;
* ``gauss-filter`` uses a k x k kernel with the OpenCV default sigma for k
  unless ``sigma`` is given.
"""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from .dct import TILE, dct2, idct2, to_tiles
from .errors import AttackError, FrameError
from .frames import ArraySource, VideoSource, Y4MSource, write_y4m

ATTACKS: dict[str, dict] = {
    # name: default parameters (None means required)
    "gauss-noise": {"sigma": None},
    "salt-pepper": {"density": None},
    "speckle": {"sigma": None},
    "median-filter": {"k": None},
    "mean-filter": {"k": None},
    "gauss-filter": {"k": None, "sigma": None},
    "center-crop": {"fraction": None},
    "edge-crop": {"fraction": None},
    "rotate": {"degrees": None},
    "translate": {"dx": None, "dy": None},
    "scale": {"factor": None},
    "gamma": {"gamma": None},
    "hist-eq": {},
    "quantize-dct": {"step": None},
    "frame-delete": {"indices": None},
    "external-compress": {"command": None},
}
STOCHASTIC = {"gauss-noise", "salt-pepper", "speckle"}
_OPTIONAL = {("gauss-filter", "sigma")}


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ATTACKS:
            raise AttackError(f"unknown attack {self.kind!r}; choose from {sorted(ATTACKS)}")
        for key in self.params:
            if key not in ATTACKS[self.kind]:
                raise AttackError(f"{self.kind}: unexpected parameter {key!r}")
        for key in ATTACKS[self.kind]:
            if key not in self.params and (self.kind, key) not in _OPTIONAL:
                raise AttackError(f"{self.kind}: missing parameter {key!r}")
        _validate(self.kind, self.params)

    def __str__(self) -> str:
        if not self.params:
            return self.kind
        def fmt(v):
            if isinstance(v, (list, tuple)):
                return ";".join(str(i) for i in v)
            return str(v)
        return self.kind + ":" + ",".join(f"{k}={fmt(v)}" for k, v in self.params.items())

    @property
    def stochastic(self) -> bool:
        return self.kind in STOCHASTIC


def _validate(kind: str, p: dict) -> None:
    def need(cond, msg):
        if not cond:
            raise AttackError(f"{kind}: {msg}")

    if kind in ("gauss-noise", "speckle"):
        need(p["sigma"] >= 0, "sigma must be >= 0")
    elif kind == "salt-pepper":
        need(0 <= p["density"] <= 1, "density must be in [0, 1]")
    elif kind in ("median-filter", "mean-filter", "gauss-filter"):
        k = p["k"]
        need(int(k) == k and k >= 3 and k % 2 == 1, "k must be an odd integer >= 3")
        if p.get("sigma") is not None:
            need(p["sigma"] > 0, "sigma must be > 0")
    elif kind in ("center-crop", "edge-crop"):
        need(0 < p["fraction"] < 1, "fraction must be in (0, 1)")
    elif kind == "scale":
        need(p["factor"] > 0, "factor must be > 0")
    elif kind == "gamma":
        need(p["gamma"] > 0, "gamma must be > 0")
    elif kind == "quantize-dct":
        need(p["step"] >= 1, "step must be >= 1")
    elif kind == "frame-delete":
        need(all(int(i) == i and i >= 1 for i in p["indices"]), "indices must be >= 1")
    elif kind == "external-compress":
        cmd = p["command"]
        need("{in}" in cmd and "{out}" in cmd, "command needs {in} and {out} placeholders")


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def parse_spec(text: str) -> AttackSpec:
    """Parse ``name:key=val,...``; ``frame-delete`` indices are ``;``-separated."""
    name, _, rest = text.strip().partition(":")
    name = name.strip().lower().replace("_", "-")
    params: dict = {}
    if name == "external-compress":
        if not rest.startswith("command="):
            raise AttackError("external-compress expects command=<template>")
        params["command"] = rest[len("command="):]
        return AttackSpec(name, params)
    if rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise AttackError(f"malformed parameter {item!r} in {text!r}")
            key, value = key.strip(), value.strip()
            if name == "frame-delete" and key == "indices":
                params[key] = tuple(int(v) for v in value.split(";") if v)
            else:
                try:
                    params[key] = _number(value)
                except ValueError:
                    raise AttackError(f"{name}: {key}={value!r} is not a number") from None
    return AttackSpec(name, params)


def _round_u8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def gauss_noise(plane, variance, rng):
    if variance == 0:
        return plane.copy()
    noisy = plane / 255.0 + rng.normal(0.0, np.sqrt(variance), plane.shape)
    return _round_u8(np.clip(noisy, 0, 1) * 255.0)


def salt_pepper(plane, density, rng):
    out = plane.copy()
    r = rng.random(plane.shape)
    out[r < density / 2] = 0
    out[(r >= density / 2) & (r < density)] = 255
    return out


def speckle(plane, variance, rng):
    if variance == 0:
        return plane.copy()
    eta = rng.normal(0.0, np.sqrt(variance), plane.shape)
    return _round_u8(plane * (1.0 + eta))


def median_filter(plane, k):
    return ndimage.median_filter(plane, size=int(k), mode="reflect")


def mean_filter(plane, k):
    return _round_u8(ndimage.uniform_filter(plane.astype(np.float64), size=int(k), mode="reflect"))


def gauss_filter(plane, k, sigma=None):
    k = int(k)
    if sigma is None:
        sigma = 0.3 * ((k - 1) * 0.5 - 1) + 0.8
    radius = (k - 1) // 2
    out = ndimage.gaussian_filter(plane.astype(np.float64), sigma, mode="reflect",
                                  truncate=radius / sigma)
    return _round_u8(out)


def _centered_box(h, w, scale):
    bh, bw = int(round(h * scale)), int(round(w * scale))
    top, left = (h - bh) // 2, (w - bw) // 2
    return slice(top, top + bh), slice(left, left + bw)


def center_crop(plane, fraction):
    out = plane.copy()
    out[_centered_box(*plane.shape, np.sqrt(fraction))] = 0
    return out


def edge_crop(plane, fraction):
    out = np.zeros_like(plane)
    box = _centered_box(*plane.shape, np.sqrt(1.0 - fraction))
    out[box] = plane[box]
    return out


def rotate(plane, degrees):
    if degrees % 360 == 0:
        return plane.copy()
    out = ndimage.rotate(plane.astype(np.float64), degrees, reshape=False, order=1,
                         mode="constant", cval=0.0)
    return _round_u8(out)


def translate(plane, dx, dy):
    """Shift content right by ``dx`` and down by ``dy`` pixels."""
    dx, dy = int(dx), int(dy)
    h, w = plane.shape
    out = np.zeros_like(plane)
    if abs(dx) >= w or abs(dy) >= h:
        return out
    src = plane[max(0, -dy):h - max(0, dy), max(0, -dx):w - max(0, dx)]
    out[max(0, dy):max(0, dy) + src.shape[0], max(0, dx):max(0, dx) + src.shape[1]] = src
    return out


def scale(plane, factor):
    if factor == 1:
        return plane.copy()
    h, w = plane.shape
    size = (max(1, int(round(w * factor))), max(1, int(round(h * factor))))
    im = Image.fromarray(plane).resize(size, Image.BILINEAR).resize((w, h), Image.BILINEAR)
    return np.array(im)


def gamma(plane, g):
    if g == 1:
        return plane.copy()
    return _round_u8(255.0 * (plane / 255.0) ** g)


def hist_eq(plane):
    hist = np.bincount(plane.ravel(), minlength=256)
    cdf = np.cumsum(hist)
    cdf_min = cdf[np.nonzero(hist)[0][0]]
    total = plane.size
    if total == cdf_min:
        return plane.copy()
    lut = _round_u8(255.0 * (cdf - cdf_min) / (total - cdf_min))
    return lut[plane]


def quantize_dct(plane, step):
    """Per-8x8-tile DCT, uniform quantisation of every coefficient, inverse DCT.

    Rows/columns beyond the last whole tile are left untouched.
    """
    h, w = plane.shape
    th, tw = h - h % TILE, w - w % TILE
    out = plane.copy()
    if th == 0 or tw == 0:
        return out
    tiles = to_tiles(plane[:th, :tw].astype(np.float64))
    coeffs = np.round(dct2(tiles) / step) * step
    rec = idct2(coeffs).swapaxes(1, 2).reshape(th, tw)
    out[:th, :tw] = _round_u8(rec)
    return out


_PLANE_ATTACKS: dict[str, Callable] = {
    "gauss-noise": lambda p, a, rng: gauss_noise(p, a["sigma"], rng),
    "salt-pepper": lambda p, a, rng: salt_pepper(p, a["density"], rng),
    "speckle": lambda p, a, rng: speckle(p, a["sigma"], rng),
    "median-filter": lambda p, a, rng: median_filter(p, a["k"]),
    "mean-filter": lambda p, a, rng: mean_filter(p, a["k"]),
    "gauss-filter": lambda p, a, rng: gauss_filter(p, a["k"], a.get("sigma")),
    "center-crop": lambda p, a, rng: center_crop(p, a["fraction"]),
    "edge-crop": lambda p, a, rng: edge_crop(p, a["fraction"]),
    "rotate": lambda p, a, rng: rotate(p, a["degrees"]),
    "translate": lambda p, a, rng: translate(p, a["dx"], a["dy"]),
    "scale": lambda p, a, rng: scale(p, a["factor"]),
    "gamma": lambda p, a, rng: gamma(p, a["gamma"]),
    "hist-eq": lambda p, a, rng: hist_eq(p),
    "quantize-dct": lambda p, a, rng: quantize_dct(p, a["step"]),
}


def apply_attack(frames: np.ndarray, spec: AttackSpec | str, seed: int = 0) -> np.ndarray:
    """Attack a single plane ``(H, W)`` or a clip ``(F, H, W)``.

    Stochastic attacks draw frame ``i`` from the ``i``-th child of
    ``SeedSequence(seed)``, so results do not depend on processing order.
    """
    if isinstance(spec, str):
        spec = parse_spec(spec)
    frames = np.asarray(frames, dtype=np.uint8)
    single = frames.ndim == 2
    clip = frames[None] if single else frames
    if spec.kind == "frame-delete":
        if single:
            raise AttackError("frame-delete needs a clip, not a single plane")
        return delete_frames(clip, spec.params["indices"])
    if spec.kind == "external-compress":
        raise AttackError("external-compress runs on whole videos; use external_compress()")
    fn = _PLANE_ATTACKS[spec.kind]
    children = np.random.SeedSequence(seed).spawn(len(clip))
    out = np.stack([fn(plane, spec.params, np.random.default_rng(child))
                    for plane, child in zip(clip, children)])
    return out[0] if single else out


def delete_frames(frames: np.ndarray, indices: Sequence[int]) -> np.ndarray:
    """Remove 1-based frame ``indices``; survivors are renumbered consecutively."""
    frames = np.asarray(frames)
    idx = sorted(set(int(i) for i in indices))
    if idx and (idx[0] < 1 or idx[-1] > len(frames)):
        raise AttackError(f"frame indices must lie in 1..{len(frames)}")
    if len(idx) >= len(frames):
        raise AttackError("cannot delete every frame")
    return np.delete(frames, [i - 1 for i in idx], axis=0)


def attack_source(source: VideoSource, spec: AttackSpec | str, seed: int = 0) -> ArraySource:
    return ArraySource(source.id, apply_attack(source.to_array(), spec, seed))


def attack_sources(sources: Sequence[VideoSource], spec: AttackSpec | str,
                   seed: int = 0) -> list[ArraySource]:
    """Attack every video; video ``k`` uses the ``k``-th child seed of ``seed``.

    ``frame-delete`` indices beyond a video's length are ignored for that video.
    """
    if isinstance(spec, str):
        spec = parse_spec(spec)
    seeds = np.random.SeedSequence(seed).generate_state(len(sources))
    out = []
    for src, s in zip(sources, seeds):
        if spec.kind == "frame-delete":
            idx = tuple(i for i in spec.params["indices"] if i <= src.frame_count)
            out.append(ArraySource(src.id, delete_frames(src.to_array(), idx)))
        else:
            out.append(attack_source(src, spec, int(s)))
    return out


@dataclass
class CompressResult:
    video_id: str
    returncode: int | None
    source: VideoSource | None
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.source is not None


def external_compress(sources: Sequence[VideoSource], command_template: str,
                      workdir: str | Path | None = None, timeout: float | None = None
                      ) -> list[CompressResult]:
    """Round-trip each video through an external tool.

    ``command_template`` gets ``{in}`` (a Y4M file written from the source) and
    ``{out}`` (the Y4M file the tool must produce).  Failures are recorded per
    video and never stop the run.
    """
    if "{in}" not in command_template or "{out}" not in command_template:
        raise AttackError("command template needs {in} and {out} placeholders")
    owned = workdir is None
    workdir = Path(tempfile.mkdtemp(prefix="dcsteg-")) if owned else Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    results = []
    for src in sources:
        inp = workdir / f"{src.id}.in.y4m"
        out = workdir / f"{src.id}.out.y4m"
        write_y4m(inp, src.to_array())
        argv = shlex.split(command_template.replace("{in}", shlex.quote(str(inp)))
                           .replace("{out}", shlex.quote(str(out))))
        try:
            proc = subprocess.run(argv, capture_output=True, timeout=timeout)
        except (OSError, subprocess.SubprocessError) as exc:
            results.append(CompressResult(src.id, None, None, str(exc)))
            continue
        if proc.returncode != 0:
            msg = proc.stderr.decode(errors="replace").strip()
            results.append(CompressResult(src.id, proc.returncode, None, msg))
            continue
        try:
            decoded = Y4MSource(out, src.id)
            results.append(CompressResult(src.id, 0, ArraySource(src.id, decoded.to_array())))
        except FrameError as exc:
            results.append(CompressResult(src.id, 0, None, str(exc)))
    return results
