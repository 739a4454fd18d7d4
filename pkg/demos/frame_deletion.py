"""Delete frames from a clip, find where they went, and still read the payload.

    python3 demos/frame_deletion.py
"""

from dcsteg.attacks import attack_sources, parse_spec
from dcsteg.codec import bits_to_bytes, bytes_to_bits, extract, hide
from dcsteg.dct import PartitionConfig
from dcsteg.deletion import detect_deletions, remap_locations
from dcsteg.frames import ArraySource
from dcsteg.index import build_index
from dcsteg.samples import make_sample_videos

pan = ArraySource("pan", make_sample_videos(0)["pan"])
db = build_index([pan], PartitionConfig(13, 7, 6), calibrate=True)
secret = b"frames may go missing"
payload, _ = hide(bytes_to_bits(secret), db)

used = sorted({e.frame for e in payload.segments})
print("carrier frames:", used)
# a run of three frames before the last carrier, one more after it
gone = [used[-1] - 10, used[-1] - 9, used[-1] - 8, used[-1] + 20]
received = attack_sources([pan], parse_spec("frame-delete:indices=" + ";".join(map(str, gone))))[0]
print(f"sent {pan.frame_count} frames, received {received.frame_count}")

naive = bits_to_bytes(extract(payload, db, [received]))
print("without remapping:", naive)

report = detect_deletions(list(received.frames()), original_count=pan.frame_count)
print("splices after received frames", report.deleted_indices_detected,
      "removing", report.deleted_counts)
print("deleted original frames:", report.deleted_original_frames(), "(truth:", gone, ")")

adjusted, lost = remap_locations(payload, {"pan": report}, db.video_meta)
bits = extract(adjusted, db, [received], lost)
print(f"{len(lost)} segments lived in deleted frames")
print("with remapping:   ", bits_to_bytes(bits))
