"""Byte-level Shannon entropy, windowed series, finite differences, KL divergence.

Conventions used throughout the package:

* Entropy is measured in bits per byte over the 256-symbol byte alphabet,
  so values live in [0, 8]. An empty histogram has entropy 0 by definition,
  which keeps stream starts total.
* First differences are rates (bits/second) over the two most recent
  samples; second differences use the three most recent samples and require
  near-uniform spacing (each gap within 10% of their mean).
* KL divergence is computed in bits. Zero reference-bins are floored at
  ``EPSILON_MASS`` before the ratio so the divergence stays finite; the
  result is clamped at 0 to absorb the tiny negative drift the floor can
  introduce. Identical distributions therefore score exactly 0.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSamples, IrregularSpacing, ShapeMismatch

MAX_ENTROPY_BITS = 8.0

# Floor applied to zero probability masses before ratios/logs.
EPSILON_MASS = 1e-9

# Maximum per-gap deviation from the mean gap for second differences.
SPACING_TOLERANCE = 0.10


class ByteHistogram:
    """256-bucket count vector over byte values.

    ``total`` is kept equal to ``counts.sum()``; the invariant is re-checked
    on every merge. Instances are plain mutable accumulators and must not be
    shared between concurrent writers.
    """

    __slots__ = ("counts", "total")

    def __init__(self, counts=None):
        if counts is None:
            self.counts = np.zeros(256, dtype=np.int64)
            self.total = 0
            return
        arr = np.asarray(counts, dtype=np.int64)
        if arr.shape != (256,):
            raise ValueError(f"histogram needs exactly 256 buckets, got shape {arr.shape}")
        if (arr < 0).any():
            raise ValueError("histogram counts must be non-negative")
        self.counts = arr.copy()
        self.total = int(arr.sum())

    def merge(self, other: "ByteHistogram") -> None:
        """Bucket-wise accumulate ``other`` into this histogram."""
        self.counts += other.counts
        self.total += other.total
        if self.total != int(self.counts.sum()):
            raise ValueError("histogram total drifted from bucket sum on merge")

    def copy(self) -> "ByteHistogram":
        out = ByteHistogram()
        out.counts = self.counts.copy()
        out.total = self.total
        return out

    def nonzero_items(self):
        """(byte value, count) pairs for the occupied buckets, ascending."""
        for b in np.flatnonzero(self.counts):
            yield int(b), int(self.counts[b])

    def __eq__(self, other):
        if not isinstance(other, ByteHistogram):
            return NotImplemented
        return self.total == other.total and bool(np.array_equal(self.counts, other.counts))

    def __repr__(self):
        return f"ByteHistogram(total={self.total}, distinct={int(np.count_nonzero(self.counts))})"


def histogram_from_bytes(data: bytes) -> ByteHistogram:
    """Count byte-value occurrences in ``data``. Empty input yields all zeros."""
    hist = ByteHistogram()
    if data:
        arr = np.frombuffer(data, dtype=np.uint8)
        hist.counts = np.bincount(arr, minlength=256).astype(np.int64)
        hist.total = len(data)
    return hist


def shannon_entropy(hist: ByteHistogram) -> float:
    """Shannon entropy of the histogram in bits/byte, 0 for an empty histogram."""
    if hist.total == 0:
        return 0.0
    counts = hist.counts[hist.counts > 0]
    p = counts / hist.total
    value = float(-(p * np.log2(p)).sum())
    # Clamp float summation noise; the true value is within [0, 8].
    return min(max(value, 0.0), MAX_ENTROPY_BITS)


@dataclass(frozen=True)
class EntropySample:
    """One entropy observation: seconds since trace start, bits/byte."""

    timestamp: float
    value: float

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError(f"timestamp must be non-negative, got {self.timestamp}")
        if not 0.0 <= self.value <= MAX_ENTROPY_BITS:
            raise ValueError(f"entropy out of [0, 8]: {self.value}")


@dataclass(frozen=True)
class WindowConfig:
    """Retention and nominal sampling interval for an entropy series."""

    capacity: int = 256
    dt: float = 1.0

    def __post_init__(self):
        if self.capacity < 3:
            raise ValueError("capacity must be >= 3 (second differences need three points)")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


class EntropySeries:
    """Time-ordered entropy samples for one source, bounded by the window capacity.

    Timestamps must be strictly increasing. Single-writer: a series must not
    be mutated concurrently, though distinct series are independent.
    """

    def __init__(self, source_id: str, level_id: str, window: WindowConfig | None = None):
        self.source_id = source_id
        self.level_id = level_id
        self.window = window if window is not None else WindowConfig()
        self._samples: deque[EntropySample] = deque(maxlen=self.window.capacity)

    def append(self, timestamp: float, value: float) -> EntropySample:
        if self._samples and timestamp <= self._samples[-1].timestamp:
            raise ValueError(
                f"timestamps must be strictly increasing: {timestamp} after {self._samples[-1].timestamp}"
            )
        sample = EntropySample(timestamp, value)
        self._samples.append(sample)
        return sample

    @property
    def samples(self) -> tuple[EntropySample, ...]:
        return tuple(self._samples)

    def values(self) -> list[float]:
        return [s.value for s in self._samples]

    def __len__(self):
        return len(self._samples)

    def __repr__(self):
        return f"EntropySeries({self.source_id!r}, level={self.level_id!r}, n={len(self)})"


def first_difference(series: EntropySeries) -> float:
    """Rate of entropy change (bits/second) over the two most recent samples."""
    if len(series) < 2:
        raise InsufficientSamples(f"first difference needs 2 samples, series has {len(series)}")
    a, b = series.samples[-2], series.samples[-1]
    return (b.value - a.value) / (b.timestamp - a.timestamp)


def _second_diff_triple(t0, v0, t1, v1, t2, v2) -> float:
    """Central second difference over one sample triple, ignoring spacing drift."""
    mean_dt = (t2 - t0) / 2.0
    return (v2 - 2.0 * v1 + v0) / (mean_dt * mean_dt)


def second_difference(series: EntropySeries) -> float:
    """Discrete second derivative (bits/second^2) over the three most recent samples.

    Raises IrregularSpacing when either gap deviates from the mean gap by
    more than 10%; trace timestamps are nominal, not hard-real-time.
    """
    if len(series) < 3:
        raise InsufficientSamples(f"second difference needs 3 samples, series has {len(series)}")
    s0, s1, s2 = series.samples[-3], series.samples[-2], series.samples[-1]
    dt1 = s1.timestamp - s0.timestamp
    dt2 = s2.timestamp - s1.timestamp
    mean_dt = (dt1 + dt2) / 2.0
    if abs(dt1 - mean_dt) > SPACING_TOLERANCE * mean_dt:
        raise IrregularSpacing(
            f"sample gaps {dt1:.6g}s/{dt2:.6g}s deviate more than "
            f"{SPACING_TOLERANCE:.0%} from their mean"
        )
    return _second_diff_triple(s0.timestamp, s0.value, s1.timestamp, s1.value, s2.timestamp, s2.value)


@dataclass(eq=False)
class BinnedDistribution:
    """Probability masses over uniform bins spanning [lo, hi]."""

    lo: float
    hi: float
    bins: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=np.float64)
        if self.lo >= self.hi:
            raise ValueError(f"support bounds must satisfy lo < hi, got [{self.lo}, {self.hi}]")
        if self.bins.ndim != 1 or self.bins.size == 0:
            raise ValueError("bins must be a non-empty 1-d sequence")
        if (self.bins < 0).any():
            raise ValueError("bin masses must be non-negative")
        total = float(self.bins.sum())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"bin masses must sum to 1 within 1e-9, got {total!r}")

    @property
    def bin_count(self) -> int:
        return int(self.bins.size)

    def bin_index(self, value: float) -> int:
        """Bin containing ``value``; the upper bound maps into the last bin."""
        span = self.hi - self.lo
        idx = int((value - self.lo) / span * self.bin_count)
        return min(max(idx, 0), self.bin_count - 1)

    def same_binning(self, other: "BinnedDistribution") -> bool:
        return self.lo == other.lo and self.hi == other.hi and self.bin_count == other.bin_count

    def __eq__(self, other):
        if not isinstance(other, BinnedDistribution):
            return NotImplemented
        return self.same_binning(other) and bool(np.array_equal(self.bins, other.bins))

    def __repr__(self):
        return f"BinnedDistribution([{self.lo}, {self.hi}], bins={self.bin_count})"


def smooth_probabilities(raw: np.ndarray, eps: float = EPSILON_MASS) -> np.ndarray:
    """Floor zero masses at ``eps`` and renormalize to a proper distribution."""
    floored = np.maximum(np.asarray(raw, dtype=np.float64), eps)
    return floored / floored.sum()


def kl_divergence(p: BinnedDistribution, q: BinnedDistribution) -> float:
    """D(p || q) in bits with the zero bins of ``q`` floored at EPSILON_MASS.

    The result is non-negative and 0 exactly when p equals q bin-wise. Bins
    where p carries no mass contribute nothing regardless of q.
    """
    if not p.same_binning(q):
        raise ShapeMismatch(
            f"distributions disagree on binning: [{p.lo}, {p.hi}]x{p.bin_count} "
            f"vs [{q.lo}, {q.hi}]x{q.bin_count}"
        )
    q_floored = np.maximum(q.bins, EPSILON_MASS)
    mask = p.bins > 0
    if not mask.any():
        return 0.0
    value = float((p.bins[mask] * np.log2(p.bins[mask] / q_floored[mask])).sum())
    return max(value, 0.0)


def uniform_distribution(lo: float = 0.0, hi: float = MAX_ENTROPY_BITS, bin_count: int = 64) -> BinnedDistribution:
    return BinnedDistribution(lo, hi, np.full(bin_count, 1.0 / bin_count))


def series_from_values(values, dt: float = 1.0, source_id: str = "s", level_id: str = "L",
                       t0: float = 0.0, capacity: int | None = None) -> EntropySeries:
    """Build a uniformly spaced series from raw values. Test/tooling helper."""
    values = list(values)
    cap = capacity if capacity is not None else max(3, len(values))
    series = EntropySeries(source_id, level_id, WindowConfig(capacity=cap, dt=dt))
    for i, v in enumerate(values):
        series.append(t0 + i * dt, v)
    return series
