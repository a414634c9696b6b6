"""Baseline profiles: expected per-level distributions of entropy deviations.

The deviation random variable is the absolute window-to-window entropy change
of a source, clamped to [0, 8] bits. A profile holds one smoothed 64-bin
distribution per level plus a prior probability of attack, and round-trips
through a single JSON document with an embedded CRC-32 checksum. Profiles are
immutable after fit/load and safe to share between threads.
"""

from __future__ import annotations

import json
import time
import zlib
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .entropy import BinnedDistribution, MAX_ENTROPY_BITS, smooth_probabilities
from .errors import (
    CorruptProfile,
    EmptyWindow,
    InvalidPrior,
    IoFailure,
    TooFewSamples,
    UnsupportedVersion,
)

PROFILE_VERSION = 1
DEFAULT_BIN_COUNT = 64
DEVIATION_SUPPORT = (0.0, MAX_ENTROPY_BITS)
MIN_FIT_SAMPLES = 30
DEFAULT_PRIOR = 0.01


@dataclass(frozen=True)
class BaselineProfile:
    version: int
    prior: float
    created_at: float
    per_level: dict[str, BinnedDistribution]
    sample_counts: dict[str, int]
    inputs: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not 0.0 <= self.prior <= 1.0:
            raise InvalidPrior(f"prior must be in [0, 1], got {self.prior}")
        object.__setattr__(self, "inputs", tuple(self.inputs))


def _bin_counts(samples: Sequence[float], lo: float, hi: float, bin_count: int) -> np.ndarray:
    arr = np.asarray(list(samples), dtype=np.float64)
    idx = ((arr - lo) / (hi - lo) * bin_count).astype(np.int64)
    idx = np.clip(idx, 0, bin_count - 1)
    return np.bincount(idx, minlength=bin_count).astype(np.float64)


def empirical_distribution(window_samples: Sequence[float],
                           lo: float = DEVIATION_SUPPORT[0],
                           hi: float = DEVIATION_SUPPORT[1],
                           bin_count: int = DEFAULT_BIN_COUNT) -> BinnedDistribution:
    """Normalized histogram of an observation window, no smoothing applied."""
    samples = list(window_samples)
    if not samples:
        raise EmptyWindow("empirical distribution needs at least one sample")
    counts = _bin_counts(samples, lo, hi, bin_count)
    return BinnedDistribution(lo, hi, counts / counts.sum())


def fit_baseline(benign_samples: Mapping[str, Sequence[float]],
                 prior: float = DEFAULT_PRIOR,
                 created_at: float | None = None,
                 inputs: Sequence[str] = (),
                 bin_count: int = DEFAULT_BIN_COUNT) -> BaselineProfile:
    """Fit per-level smoothed deviation distributions from benign observations.

    Every level present in ``benign_samples`` must carry at least
    MIN_FIT_SAMPLES observations; short levels produce degenerate single-bin
    baselines and are rejected.
    """
    if not 0.0 <= prior <= 1.0:
        raise InvalidPrior(f"prior must be in [0, 1], got {prior}")
    lo, hi = DEVIATION_SUPPORT
    per_level: dict[str, BinnedDistribution] = {}
    sample_counts: dict[str, int] = {}
    for level_id in sorted(benign_samples):
        samples = list(benign_samples[level_id])
        if len(samples) < MIN_FIT_SAMPLES:
            raise TooFewSamples(
                f"level {level_id!r} has {len(samples)} samples, fitting needs {MIN_FIT_SAMPLES}"
            )
        counts = _bin_counts(samples, lo, hi, bin_count)
        per_level[level_id] = BinnedDistribution(lo, hi, smooth_probabilities(counts / counts.sum()))
        sample_counts[level_id] = len(samples)
    return BaselineProfile(
        version=PROFILE_VERSION,
        prior=prior,
        created_at=time.time() if created_at is None else created_at,
        per_level=per_level,
        sample_counts=sample_counts,
        inputs=tuple(inputs),
    )


def _profile_document(profile: BaselineProfile) -> dict:
    return {
        "version": profile.version,
        "prior": profile.prior,
        "created_at": profile.created_at,
        "inputs": list(profile.inputs),
        "levels": [
            {
                "level_id": level_id,
                "lo": dist.lo,
                "hi": dist.hi,
                "bins": [float(b) for b in dist.bins],
                "sample_count": profile.sample_counts.get(level_id, 0),
            }
            for level_id, dist in sorted(profile.per_level.items())
        ],
    }


def _checksum(doc: dict) -> int:
    payload = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return zlib.crc32(payload) & 0xFFFFFFFF


def save_profile(profile: BaselineProfile, path) -> None:
    """Write the profile as an indented JSON document with a CRC-32 field."""
    doc = _profile_document(profile)
    doc["crc32"] = _checksum(doc)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write profile to {path}: {exc}") from exc


def load_profile(path) -> BaselineProfile:
    """Read a profile back; checksum and version are verified before use."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read profile from {path}: {exc}") from exc
    try:
        doc = json.loads(raw)
    except ValueError as exc:
        raise CorruptProfile(f"profile {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "crc32" not in doc:
        raise CorruptProfile(f"profile {path} is missing its checksum field")
    stored = doc.pop("crc32")
    if stored != _checksum(doc):
        raise CorruptProfile(f"profile {path} failed its CRC-32 check")
    version = doc.get("version")
    if version != PROFILE_VERSION:
        raise UnsupportedVersion(f"profile version {version!r} is not supported (expected {PROFILE_VERSION})")
    try:
        per_level = {}
        sample_counts = {}
        for entry in doc["levels"]:
            dist = BinnedDistribution(entry["lo"], entry["hi"], np.asarray(entry["bins"], dtype=np.float64))
            per_level[entry["level_id"]] = dist
            sample_counts[entry["level_id"]] = int(entry["sample_count"])
        return BaselineProfile(
            version=version,
            prior=float(doc["prior"]),
            created_at=float(doc["created_at"]),
            per_level=per_level,
            sample_counts=sample_counts,
            inputs=tuple(doc.get("inputs", ())),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptProfile(f"profile {path} has an invalid structure: {exc}") from exc
