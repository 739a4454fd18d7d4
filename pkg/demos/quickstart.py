"""Hide a short message in the bundled clips without touching a single pixel.

    python3 demos/quickstart.py
"""

import os

from dcsteg.codec import bytes_to_bits, bits_to_bytes, extract, hide, open_payload, seal_payload
from dcsteg.dct import PartitionConfig
from dcsteg.frames import ArraySource
from dcsteg.index import build_index
from dcsteg.samples import make_sample_videos

videos = [ArraySource(vid, frames) for vid, frames in make_sample_videos(0).items()]
for v in videos:
    print(f"{v.id:8s} {v.frame_count:4d} frames of {v.width}x{v.height}")

# one index over every block of every frame; T is fitted to the dataset
db = build_index(videos, PartitionConfig(m=13, n=7, L=6), calibrate=True)
print(f"\nindex: {len(db)} blocks, T={db.config.T}, {sum(1 for b in db.buckets if b)}/64 buckets filled")

secret = b"meet at dawn"
payload, used = hide(bytes_to_bits(secret), db)
print(f"{payload.S} segments of {payload.L} bits, carriers from {used}")
for e in payload.segments[:4]:
    print(f"  video {e.video} frame {e.frame:3d} block ({e.x}, {e.y})")

key = os.urandom(32)
sealed = seal_payload(payload, key)
print(f"sealed payload: {len(sealed)} bytes")

# the receiver holds the same videos, the index and the key
bits = extract(open_payload(sealed, key), db, videos)
print("recovered:", bits_to_bytes(bits))
