"""How often a block's hash survives common signal-processing attacks.

Max-DC bits are ratios to the brightest sub-block, so a uniform gain leaves
them alone, but tone curves (gamma, histogram equalisation) push ratios
across the threshold where the adjacent-DC ordering survives.

    python3 demos/robustness.py
"""

import numpy as np

from dcsteg.attacks import attack_sources, parse_spec
from dcsteg.dct import PartitionConfig
from dcsteg.frames import ArraySource
from dcsteg.hashing import ADJACENT_DC, MAX_DC, truncate
from dcsteg.index import build_index, hash_video
from dcsteg.metrics import array_accuracy
from dcsteg.samples import make_sample_videos

ATTACKS = ["gauss-noise:sigma=0.001", "salt-pepper:density=0.001", "speckle:sigma=0.01",
           "median-filter:k=3", "gauss-filter:k=3", "gamma:gamma=0.8", "hist-eq",
           "scale:factor=0.5", "quantize-dct:step=32", "rotate:degrees=1"]

videos = [ArraySource(vid, frames) for vid, frames in make_sample_videos(0).items()]
base = PartitionConfig(6, 3, 8)

configs = {m: build_index(videos, base, m, calibrate=True).config for m in (MAX_DC, ADJACENT_DC)}


def hashes(sources, method):
    cfg = configs[method]
    return np.concatenate([truncate(hash_video(s, cfg, method), cfg.L).ravel() for s in sources])


clean = {m: hashes(videos, m) for m in configs}
print(f"{'attack':28s} {'max-DC':>7s} {'adj-DC':>7s}")
for text in ATTACKS:
    attacked = attack_sources(videos, parse_spec(text), seed=0)
    row = [array_accuracy(clean[m], hashes(attacked, m)) for m in configs]
    print(f"{text:28s} {row[0]:6.1f}% {row[1]:6.1f}%")
