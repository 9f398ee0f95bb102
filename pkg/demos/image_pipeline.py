"""Render a 720-bit snapshot as a noisy, drifting image and read it back."""

import numpy as np

from snapshot_attack import llsi_image as li

rng = np.random.default_rng(4)
bits = li.bits_to_grid(rng.integers(0, 2, 720), 30)
ref_bits = li.bits_to_grid(rng.integers(0, 2, 720), 30)
clean = li.ImagingConfig(alternate_flip=True)
reference = li.render_snapshot(ref_bits, clean)
templates = li.templates_from_reference(reference, ref_bits, clean)

cfg = li.ImagingConfig(alternate_flip=True, drift=(4, -3), noise_sigma=0.2)
ex = li.extract_bits(li.render_snapshot(bits, cfg, rng), templates, cfg, reference)
print("estimated drift", ex.shift)
print("bit errors     ", int((ex.bits != bits).sum()), "of", bits.size)

levels = [0.0, 0.3, 0.6, 0.9, 1.2]
for s, acc in zip(levels, li.accuracy_sweep(levels, 5, clean, seed=1)):
    print(f"noise {s:.1f}: accuracy {acc:.4f}")
