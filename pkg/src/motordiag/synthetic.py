"""Synthetic PMSM-like signal generator for desk-scale experiments.

Stator-winding shorts divert part of the drive current, so the generator
models a fault of severity FR (percent) as a weakened faulted phase plus a
second-harmonic distortion riding on a kind-dependent pair of phases, with
an FR-proportional sideband pair on the vibration channel. The coefficients
below are fixed, documented choices so tests can integrate the waveform
analytically; no attempt is made to match any real bench's distributions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import ChannelSpec, DatasetManifest, ManifestRecord
from .pipeline import Channel, LabelMeta, SignalRecord

# Signal-model coefficients.
AMPLITUDE_SLOPE = 0.5  # faulted-phase amplitude = 1 - 0.5 * FR/100
HARMONIC_SLOPE = 0.3  # second harmonic = 0.3 * FR/100 of the carrying phase's amplitude
SIDEBAND_SLOPE = 0.4  # vibration sideband amplitude = 0.4 * FR/100
SIDEBAND_OFFSET_HZ = 5.0
VIBRATION_HARMONICS = ((1, 1.0), (2, 0.5), (5, 0.25))

# Which phase pair carries the second harmonic for each fault kind. The
# faulted (amplitude-scaled) phase is always phase 0; the partner phase
# distinguishes the kind. Within the pair the harmonic scales with the
# carrier's own amplitude, so the faulted/partner RMS ratio stays exactly
# 1 - 0.5 * FR/100 (the harmonic adds in quadrature to both).
HARMONIC_PHASES = {"normal": (), "inter-turn": (0, 1), "inter-coil": (0, 2)}

# Every record starts at an arbitrary trigger phase drawn from this many
# evenly spaced angles. A discrete grid keeps raw waveform templates
# recurring across records (so flattening-based baselines are learnable
# with enough labels) while still denying any single-window template a
# free match at tiny label budgets.
PHASE_BINS = 8

DEFAULT_RATES = (2000.0, 2000.0, 2000.0, 512.0)


@dataclass(frozen=True)
class SynthConfig:
    """Classes to generate and the sampling/noise setup shared by all records."""

    classes: tuple[tuple[str, float], ...]
    per_class: int = 10
    duration_s: float = 4.0
    fundamental_hz: float = 50.0
    rates_hz: tuple[float, ...] = DEFAULT_RATES
    noise_sigma: float = 0.02
    power_kw: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not self.classes:
            raise ValueError("at least one class is required")
        for kind, ratio in self.classes:
            if kind not in HARMONIC_PHASES:
                raise ValueError(f"unknown fault kind {kind!r}")
            if not 0.0 <= ratio <= 100.0:
                raise ValueError(f"fault ratio must be in [0, 100], got {ratio}")
            if kind == "normal" and ratio != 0.0:
                raise ValueError("the normal class must have fault ratio 0")
        if self.per_class < 1:
            raise ValueError("per_class must be at least 1")
        if self.duration_s <= 0:
            raise ValueError("duration must be positive")
        if self.fundamental_hz <= 0:
            raise ValueError("fundamental frequency must be positive")
        if len(self.rates_hz) != 4 or any(r <= 0 for r in self.rates_hz):
            raise ValueError("rates_hz must list four positive per-channel rates")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthConfig":
        return cls(
            classes=tuple((str(k), float(r)) for k, r in doc["classes"]),
            per_class=int(doc.get("per_class", 10)),
            duration_s=float(doc.get("duration_s", 4.0)),
            fundamental_hz=float(doc.get("fundamental_hz", 50.0)),
            rates_hz=tuple(float(r) for r in doc.get("rates_hz", DEFAULT_RATES)),
            noise_sigma=float(doc.get("noise_sigma", 0.02)),
            power_kw=float(doc.get("power_kw", 1.0)),
            seed=int(doc.get("seed", 0)),
        )


def _record_channels(
    config: SynthConfig, kind: str, ratio_pct: float, rng: np.random.Generator
) -> list[Channel]:
    severity = ratio_pct / 100.0
    f0 = config.fundamental_hz
    phase0 = 2.0 * np.pi * rng.integers(PHASE_BINS) / PHASE_BINS  # per-record trigger phase
    harmonic_on = HARMONIC_PHASES[kind] if severity > 0 else ()

    channels = []
    for j in range(3):
        rate = config.rates_hz[j]
        t = np.arange(int(round(config.duration_s * rate))) / rate
        shift = phase0 - 2.0 * np.pi * j / 3.0
        amplitude = 1.0 - AMPLITUDE_SLOPE * severity if j == 0 else 1.0
        signal = amplitude * np.sin(2.0 * np.pi * f0 * t + shift)
        if j in harmonic_on:
            harm = HARMONIC_SLOPE * severity * amplitude
            signal = signal + harm * np.sin(2.0 * (2.0 * np.pi * f0 * t + shift))
        if config.noise_sigma > 0:
            signal = signal + config.noise_sigma * rng.standard_normal(t.size)
        channels.append(Channel(signal, rate))

    rate = config.rates_hz[3]
    t = np.arange(int(round(config.duration_s * rate))) / rate
    vib = np.zeros(t.size)
    for mult, amp in VIBRATION_HARMONICS:
        vib += amp * np.sin(mult * (2.0 * np.pi * f0 * t + phase0))
    if severity > 0:
        side = SIDEBAND_SLOPE * severity
        vib += side * np.sin(2.0 * np.pi * (f0 + SIDEBAND_OFFSET_HZ) * t + phase0)
        vib += side * np.sin(2.0 * np.pi * (f0 - SIDEBAND_OFFSET_HZ) * t + phase0)
    if config.noise_sigma > 0:
        vib = vib + config.noise_sigma * rng.standard_normal(t.size)
    channels.append(Channel(vib, rate))
    return channels


def generate(config: SynthConfig) -> list[SignalRecord]:
    """Generate ``per_class`` labeled records for every configured class.

    Fully deterministic: record i draws from a generator seeded with
    ``config.seed ^ i``, so records are independent of generation order.
    """
    records = []
    index = 0
    for class_id, (kind, ratio) in enumerate(config.classes):
        for _ in range(config.per_class):
            rng = np.random.default_rng(config.seed ^ index)
            channels = _record_channels(config, kind, ratio, rng)
            meta = LabelMeta(power_kw=config.power_kw, fault_kind=kind, fault_ratio_pct=ratio)
            records.append(SignalRecord(tuple(channels), class_id, meta))
            index += 1
    return records


def save_records(records: list[SignalRecord], config: SynthConfig, out_dir) -> Path:
    """Write per-record ``.npz`` channel stores plus a manifest; returns its path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    class_map = {
        (float(config.power_kw), kind, float(ratio)): class_id
        for class_id, (kind, ratio) in enumerate(config.classes)
    }
    manifest_records = []
    for i, rec in enumerate(records):
        name = f"record_{i:04d}.npz"
        arrays = {f"ch{j}": ch.samples for j, ch in enumerate(rec.channels)}
        np.savez(out / name, **arrays)
        manifest_records.append(
            ManifestRecord(
                path=name,
                channels=tuple(
                    ChannelSpec(f"ch{j}", ch.rate_hz) for j, ch in enumerate(rec.channels)
                ),
                label=rec.meta,
            )
        )
    manifest = DatasetManifest(manifest_records, class_map)
    manifest_path = out / "manifest.json"
    manifest.to_json(manifest_path)
    (out / "synth_config.json").write_text(
        json.dumps(
            {
                "classes": [[k, r] for k, r in config.classes],
                "per_class": config.per_class,
                "duration_s": config.duration_s,
                "fundamental_hz": config.fundamental_hz,
                "rates_hz": list(config.rates_hz),
                "noise_sigma": config.noise_sigma,
                "power_kw": config.power_kw,
                "seed": config.seed,
            },
            indent=2,
        ),
        encoding="utf-8",
    )
    return manifest_path
