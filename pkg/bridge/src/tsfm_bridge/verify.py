"""Structural validation of FBND bundle files."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .formats import FBND_MAGIC, VERSION


@dataclass
class VerifyReport:
    path: str
    ok: bool
    violations: list[str] = field(default_factory=list)
    n: int | None = None
    dim: int | None = None
    num_classes: int | None = None
    extractor_id: str | None = None

    def summary(self) -> str:
        if self.ok:
            return (
                f"OK: {self.path} n={self.n} D={self.dim} K={self.num_classes} "
                f"extractor={self.extractor_id!r}"
            )
        lines = [f"INVALID: {self.path}"] + [f"  - {v}" for v in self.violations]
        return "\n".join(lines)


def verify_bundle(path) -> VerifyReport:
    """Check every FBND invariant and list all violations found."""
    report = VerifyReport(path=str(path), ok=False)
    raw = Path(path).read_bytes()
    if len(raw) < 37:
        report.violations.append(f"file is {len(raw)} bytes, shorter than any valid header")
        return report
    if raw[:4] != FBND_MAGIC:
        report.violations.append(f"bad magic {raw[:4]!r}, expected {FBND_MAGIC!r}")
    if raw[4] != VERSION:
        report.violations.append(f"unsupported version {raw[4]}")
    if report.violations:
        return report

    n, dim, num_classes = struct.unpack_from("<QQQ", raw, 5)
    (id_len,) = struct.unpack_from("<Q", raw, 29)
    report.n, report.dim, report.num_classes = n, dim, num_classes
    expected = 37 + id_len + 32 + 8 * n * dim + 4 * n
    if len(raw) != expected:
        report.violations.append(f"size {len(raw)} does not match header-implied {expected}")
        return report

    offset = 37
    try:
        report.extractor_id = raw[offset : offset + id_len].decode("utf-8")
    except UnicodeDecodeError:
        report.violations.append("extractor id is not valid UTF-8")
    offset += id_len + 32
    features = np.frombuffer(raw, dtype="<f8", count=n * dim, offset=offset)
    if not np.all(np.isfinite(features)):
        report.violations.append("features contain non-finite values")
    offset += 8 * n * dim
    labels = np.frombuffer(raw, dtype="<u4", count=n, offset=offset)
    if labels.size and labels.max() >= num_classes:
        report.violations.append(
            f"label {int(labels.max())} out of range for K={num_classes}"
        )
    if num_classes < 1:
        report.violations.append("num_classes must be at least 1")

    report.ok = not report.violations
    return report
