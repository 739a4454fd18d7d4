"""Coverless video steganography by maximum-DC block hashing.

Secrets are never embedded.  Every block of every frame in a video collection
is hashed to a short bit string; a secret is split into segments of the same
length and each segment is "sent" by naming an unmodified block whose hash
equals it.
"""

__version__ = "0.1.0"

from .attacks import AttackSpec, apply_attack, attack_sources, delete_frames, external_compress, parse_spec
from .codec import (AuxiliaryPayload, TransmissionHistory, bits_to_bytes, bytes_to_bits, extract, hide,
                    open_payload, recover_segments, seal_payload, segment_secret)
from .dct import PartitionConfig, dct2, frame_dc_vectors, idct2, subblock_dc_vector, tile_dc
from .deletion import FrameDeletionReport, detect_deletions, remap_locations
from .errors import (AttackError, DcstegError, FrameError, IndexFormatError, MissingVideoError,
                     NotFoundError, PayloadAuthError, PayloadError)
from .frames import ArraySource, VideoSource, discover_sources, open_source
from .hashing import (ADJACENT_DC, MAX_DC, HashSequence, calibrate_threshold, decimal_to_hash,
                      hash_adjacent_dc, hash_block, hash_max_dc, hash_to_decimal)
from .index import CarrierLocation, IndexDatabase, build_index, lookup
from .metrics import (CapacityReport, GaussianFit, RateSample, change_rates, effective_capacity,
                      emit_pdf_curve, extraction_accuracy, fit_gaussian, ideal_capacity_range,
                      relative_effective_capacity)
from .pipeline import pipeline_demo
