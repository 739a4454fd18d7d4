"""Deterministic synthetic sample videos (416x240) for demos and tests.

Three clips, all generated from power-law (1/f^beta) noise, which has the
second-order statistics of natural images:

``static``   one textured scene, every frame identical;
``pan``      a smooth horizontal camera pan across a wide textured scene;
``texture``  a natural texture drifting through independent fields.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from scipy import ndimage

from .frames import write_y4m

WIDTH, HEIGHT = 416, 240
SAMPLE_IDS = ("pan", "static", "texture")


def power_law_noise(shape: tuple[int, int], beta: float, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean, unit-variance field with power spectrum ~ 1/f^beta."""
    h, w = shape
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    f = np.hypot(fx, fy)
    f[0, 0] = 1.0
    spectrum = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / f ** (beta / 2)
    spectrum[0, 0] = 0.0
    field = np.fft.ifft2(spectrum).real
    return field / field.std()


def _to_uint8(x: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(x + 0.5), 0, 255).astype(np.uint8)


def detail_noise(shape: tuple[int, int], rng: np.random.Generator, width: float = 1.5) -> np.ndarray:
    """Unit-variance Gaussian-smoothed white noise (correlation length ~``width`` px)."""
    field = ndimage.gaussian_filter(rng.standard_normal(shape), width, mode="wrap")
    return field / field.std()


def natural_scene(shape: tuple[int, int], rng: np.random.Generator,
                  beta: float = 3.5, contrast: float = 45.0, grain: float = 4.0,
                  mean: float = 128.0, detail: float = 0.0) -> np.ndarray:
    """Float scene: smooth power-law structure plus fine static grain.

    ``detail`` adds a mid-frequency texture layer of that amplitude; it makes
    local structure decorrelate within a few pixels of motion.
    """
    base = power_law_noise(shape, beta, rng)
    fine = power_law_noise(shape, 1.0, rng)
    scene = mean + contrast * base + grain * fine
    if detail:
        scene = scene + detail * detail_noise(shape, rng)
    return scene


def static_clip(rng: np.random.Generator, frames: int = 30) -> np.ndarray:
    scene = _to_uint8(natural_scene((HEIGHT, WIDTH), rng))
    return np.repeat(scene[None], frames, axis=0)


def pan_clip(rng: np.random.Generator, frames: int = 120, speed: int = 2,
             detail: float = 18.0) -> np.ndarray:
    """Camera pans ``speed`` pixels per frame to the right over a detailed scene."""
    scene = _to_uint8(natural_scene((HEIGHT, WIDTH + speed * frames), rng, detail=detail))
    return np.stack([scene[:, t * speed:t * speed + WIDTH] for t in range(frames)])


def texture_clip(rng: np.random.Generator, frames: int = 60, hold: int = 6) -> np.ndarray:
    """Texture drifting through a chain of independent fields.

    Every ``hold`` frames the clip has rotated from one field into the next
    (``cos``/``sin`` blending keeps the variance constant).
    """
    shape = (HEIGHT, WIDTH)
    fields = [natural_scene(shape, rng, mean=0.0) for _ in range(frames // hold + 2)]
    out = []
    for t in range(frames):
        k, r = divmod(t, hold)
        phase = 0.5 * np.pi * r / hold
        out.append(_to_uint8(128.0 + np.cos(phase) * fields[k] + np.sin(phase) * fields[k + 1]))
    return np.stack(out)


def make_sample_videos(seed: int = 0) -> dict[str, np.ndarray]:
    """The bundled clips as ``{video_id: (frames, 240, 416) uint8}``, sorted by id."""
    root = np.random.SeedSequence(seed)
    pan_seq, static_seq, texture_seq = root.spawn(3)
    return {
        "pan": pan_clip(np.random.default_rng(pan_seq)),
        "static": static_clip(np.random.default_rng(static_seq)),
        "texture": texture_clip(np.random.default_rng(texture_seq)),
    }


def write_sample_set(directory: str | os.PathLike, seed: int = 0) -> list[Path]:
    """Write the bundled clips as Y4M files; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for vid, frames in make_sample_videos(seed).items():
        path = directory / f"{vid}.y4m"
        write_y4m(path, frames)
        paths.append(path)
    return paths
