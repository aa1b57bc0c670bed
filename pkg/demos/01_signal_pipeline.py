"""From raw multichannel recordings to windowed, labeled, split datasets.

Generates a small synthetic motor dataset (three phase currents at 2 kHz
plus vibration at 512 Hz), resamples everything to 512 Hz, cuts 512-step
windows, and produces stratified train/test splits plus a scarce-label
subset.
"""

import numpy as np

from motordiag.pipeline import align_and_stack, fault_ratio, split, subset, window
from motordiag.synthetic import SynthConfig, generate
from motordiag.workflows import synth_windows

print("Fault severity from the bypass-resistor model:")
for r_bypass in (0.0, 1.0, 4.0, 9.0):
    print(f"  R=1 ohm, R_bypass={r_bypass:>3} ohm -> FR = {fault_ratio(1.0, r_bypass):5.1f} %")

config = SynthConfig(
    classes=(("normal", 0.0), ("inter-turn", 50.0), ("inter-coil", 80.0)),
    per_class=10,
    duration_s=4.0,
    noise_sigma=0.02,
    seed=0,
)
records = generate(config)
print(f"\nGenerated {len(records)} records; per-channel rates of the first: "
      f"{[ch.rate_hz for ch in records[0].channels]}")

aligned = align_and_stack(records[0], dst_rate=512.0, expected_channels=4)
print(f"After alignment: {aligned.data.shape[0]} channels x {aligned.data.shape[1]} samples @ 512 Hz")

per_record = window(aligned, length=512, num_classes=config.num_classes)
print(f"One record yields {len(per_record)} non-overlapping 512-step windows")

dataset = synth_windows(config)
train, test = split(dataset, (0.8, 0.2), seed=0)
tiny = subset(train, ratio=0.05, seed=0)
counts = np.bincount(tiny.labels, minlength=config.num_classes)
print(f"\nFull dataset: {len(dataset)} windows -> train {len(train)} / test {len(test)}")
print(f"5% subset keeps {len(tiny)} windows, per class {counts.tolist()} "
      f"(lineage: split={tiny.lineage.split!r}, ratio={tiny.lineage.ratio}, seed={tiny.lineage.seed})")
