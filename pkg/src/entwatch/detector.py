"""Score fusion and decision logic.

Per-source evidence is combined in two stages:

1. A two-hypothesis Bayes update turns the likelihood ratio of the observed
   entropy deviation (attack model vs baseline) into a posterior.
2. The posterior is blended with the clustering outlier score,
   ``fused = (1 - w) * posterior + w * outlier``, and a source is labelled
   ransomware only when the fused confidence clears the decision threshold
   AND a corroborating gate holds: KL divergence of its recent deviation
   window above the KL threshold, or a sustained positive second derivative
   of level entropy (the convexity signal).

Labels are monotone within a run (once ransomware, always ransomware) and at
most one alert is raised per source. Decision state is per-source with a
single writer.
"""

from __future__ import annotations

from dataclasses import dataclass

from .entropy import BinnedDistribution, MAX_ENTROPY_BITS, EPSILON_MASS, _second_diff_triple
from .errors import InsufficientSamples, MissingOnset, ShapeMismatch
from .hierarchy import LevelState

BENIGN = "benign"
RANSOMWARE = "ransomware"


@dataclass(frozen=True)
class DetectorConfig:
    """Decision thresholds. Defaults are tuned on the synthetic corpus."""

    kl_threshold: float = 1.0
    posterior_threshold: float = 0.9
    convexity_run: int = 3
    window_seconds: float = 1.0
    outlier_weight: float = 0.2

    def __post_init__(self):
        if self.kl_threshold < 0:
            raise ValueError(f"kl_threshold must be non-negative, got {self.kl_threshold}")
        if not 0.0 < self.posterior_threshold < 1.0:
            raise ValueError(f"posterior_threshold must be in (0, 1), got {self.posterior_threshold}")
        if self.convexity_run < 1:
            raise ValueError(f"convexity_run must be a positive integer, got {self.convexity_run}")
        if self.window_seconds <= 0:
            raise ValueError(f"window_seconds must be positive, got {self.window_seconds}")
        if not 0.0 <= self.outlier_weight <= 1.0:
            raise ValueError(f"outlier_weight must be in [0, 1], got {self.outlier_weight}")


@dataclass(frozen=True)
class DeviationScore:
    """Joint evidence snapshot for one source at one window close."""

    source_id: str
    timestamp: float
    kl: float
    d2h: float
    posterior: float
    outlier: float

    def __post_init__(self):
        if self.kl < 0:
            raise ValueError(f"kl must be non-negative, got {self.kl}")
        if not 0.0 <= self.posterior <= 1.0:
            raise ValueError(f"posterior out of [0, 1]: {self.posterior}")
        if not 0.0 <= self.outlier <= 1.0:
            raise ValueError(f"outlier score out of [0, 1]: {self.outlier}")


@dataclass(frozen=True)
class Alert:
    """First ransomware flag for a source, with latency bookkeeping."""

    source_id: str
    raised_at: float
    score: DeviationScore
    onset_at: float | None = None
    latency_ms: float | None = None

    def __post_init__(self):
        if (self.onset_at is None) != (self.latency_ms is None):
            raise ValueError("latency_ms must be present exactly when onset_at is")
        if self.latency_ms is not None and self.latency_ms < 0:
            raise ValueError(f"latency must be non-negative, got {self.latency_ms}")

    @classmethod
    def create(cls, source_id: str, raised_at: float, score: DeviationScore,
               onset_at: float | None = None) -> "Alert":
        latency = None if onset_at is None else (raised_at - onset_at) * 1000.0
        return cls(source_id, raised_at, score, onset_at, latency)


@dataclass(frozen=True)
class Verdict:
    source_id: str
    label: str
    confidence: float

    def __post_init__(self):
        if self.label not in (BENIGN, RANSOMWARE):
            raise ValueError(f"label must be benign or ransomware, got {self.label!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of [0, 1]: {self.confidence}")


def likelihood_ratio(deviation: float, baseline: BinnedDistribution,
                     attack_model: BinnedDistribution) -> float:
    """Attack-vs-baseline mass ratio at the deviation's bin, both floored.

    Symmetric flooring means a bin empty in both models scores exactly 1
    (uninformative), and scaling both models by the same constant leaves the
    ratio unchanged.
    """
    if not 0.0 <= deviation <= MAX_ENTROPY_BITS:
        raise ValueError(f"deviation out of [0, 8]: {deviation}")
    if not baseline.same_binning(attack_model):
        raise ShapeMismatch(
            f"baseline and attack model disagree on binning: "
            f"[{baseline.lo}, {baseline.hi}]x{baseline.bin_count} vs "
            f"[{attack_model.lo}, {attack_model.hi}]x{attack_model.bin_count}"
        )
    idx = baseline.bin_index(deviation)
    num = max(float(attack_model.bins[idx]), EPSILON_MASS)
    den = max(float(baseline.bins[idx]), EPSILON_MASS)
    return num / den


def posterior(prior: float, lr: float) -> float:
    """Two-hypothesis Bayes update, monotone in both arguments."""
    if not 0.0 <= prior <= 1.0:
        raise ValueError(f"prior out of [0, 1]: {prior}")
    if lr < 0:
        raise ValueError(f"likelihood ratio must be non-negative, got {lr}")
    if prior == 1.0:
        return 1.0
    return prior * lr / (prior * lr + (1.0 - prior))


def convexity_signal(level_state: LevelState, m: int) -> bool:
    """True when the last ``m`` consecutive second differences are all > 0."""
    if m < 1:
        raise ValueError(f"run length must be positive, got {m}")
    samples = level_state.series.samples
    if len(samples) < m + 2:
        raise InsufficientSamples(
            f"convexity over {m} windows needs {m + 2} samples, level "
            f"{level_state.level_id!r} has {len(samples)}"
        )
    for end in range(len(samples) - m, len(samples)):
        s0, s1, s2 = samples[end - 2], samples[end - 1], samples[end]
        accel = _second_diff_triple(s0.timestamp, s0.value, s1.timestamp, s1.value,
                                    s2.timestamp, s2.value)
        if accel <= 0:
            return False
    return True


def fused_confidence(score: DeviationScore, config: DetectorConfig) -> float:
    return (1.0 - config.outlier_weight) * score.posterior + config.outlier_weight * score.outlier


def fuse_and_decide(score: DeviationScore, config: DetectorConfig, convexity: bool,
                    previously_flagged: bool = False,
                    onset_at: float | None = None) -> tuple[Verdict, Alert | None]:
    """Label a source from its fused confidence, gated on KL or convexity.

    Returns the verdict plus an alert when this call is the source's first
    benign-to-ransomware transition. A known ground-truth onset is attached
    to the alert only when it does not postdate the alert itself.
    """
    fused = fused_confidence(score, config)
    is_attack = fused >= config.posterior_threshold and (
        score.kl >= config.kl_threshold or convexity
    )
    verdict = Verdict(score.source_id, RANSOMWARE if is_attack else BENIGN, fused)
    alert = None
    if is_attack and not previously_flagged:
        usable_onset = onset_at if onset_at is not None and onset_at <= score.timestamp else None
        alert = Alert.create(score.source_id, score.timestamp, score, usable_onset)
    return verdict, alert


def detection_latency(alert: Alert) -> float:
    """Milliseconds from ground-truth onset to the alert."""
    if alert.onset_at is None or alert.latency_ms is None:
        raise MissingOnset(f"alert for {alert.source_id!r} has no ground-truth onset")
    return alert.latency_ms
