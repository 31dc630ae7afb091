"""Walsh-coded pixels and a noiseless round trip.

Every DMD pixel is keyed by one row of a Sylvester Hadamard matrix. Rows
are mutually orthogonal and, apart from row 0, zero-mean, so correlating
the photodetector's per-bit amplitudes against a pixel's code isolates
that pixel's light.
"""

import numpy as np

from caoscam import SimConfig, WalshCodebook, build_hadamard, decode_trace, encode

# a small Hadamard matrix: +1/-1 entries, H H^T = K I
h = build_hadamard(8)
print(h)
print("H H^T == 8 I:", np.array_equal(h.astype(int) @ h.T.astype(int), 8 * np.eye(8, dtype=int)))

# pixel j gets code j + 1; row 0 (all ones) is never handed out
book = WalshCodebook.for_pixels(63, 64)
print("first assigned codes:", book.assignment[:5], "row sums:", book.pixel_codes()[:5].sum(axis=1))

# encode a random 7x9 scene and decode it back without noise or quantization
rng = np.random.default_rng(1)
scene = rng.uniform(0, 1, (7, 9))
cfg = SimConfig(cycles_per_bit=4, samples_per_bit=64, detector_gain=0.02)
trace = encode(scene, book, cfg, quantize_output=False)
print("trace:", trace.channels.shape, "samples,", trace.bits, "bits")

decoded = decode_trace(trace, book, shape=scene.shape)
err = np.max(np.abs(decoded.values - scene))
print(f"max round-trip error: {err:.2e}")  # float rounding only
