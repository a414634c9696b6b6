"""Streaming detection over event records.

Records are consumed in timestamp order and bucketed into fixed windows of
``DetectorConfig.window_seconds``. At each window close:

1. every source with payload activity gets one entropy sample (entropy of its
   merged window histogram), and sources with two or more samples yield an
   absolute entropy deviation |dH|;
2. each level's series receives the mean of its members' latest entropies,
   and the weighted across-level aggregate is extended (over the levels that
   have data so far);
3. per deviation: KL of the source's recent deviation window against its
   level baseline, and a Bayes update of the source posterior by the
   attack-vs-baseline likelihood ratio of the new deviation;
4. sources are clustered in feature space and outlier-scored whenever that
   could change a label this window, then fused verdicts are emitted.

Labels latch (benign -> ransomware only) and each source alerts at most once.
One processor handles one trace; processors share nothing and may run
concurrently on distinct traces.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .baseline import (
    BaselineProfile,
    DEFAULT_BIN_COUNT,
    DEVIATION_SUPPORT,
    empirical_distribution,
)
from .clustering import FeatureVector, OutlierReport, agglomerate, outliers
from .detector import (
    Alert,
    BENIGN,
    DetectorConfig,
    DeviationScore,
    RANSOMWARE,
    Verdict,
    convexity_signal,
    fuse_and_decide,
    fused_confidence,
    likelihood_ratio,
    posterior,
)
from .entropy import (
    BinnedDistribution,
    ByteHistogram,
    EntropySeries,
    WindowConfig,
    _second_diff_triple,
    kl_divergence,
    shannon_entropy,
    smooth_probabilities,
)
from .errors import InsufficientSamples
from .hierarchy import HierarchyConfig, LevelState, default_hierarchy, route_kind, route_source
from .simulate import ScenarioSpec, simulate_scenario
from .traces import EventRecord

# How many recent deviations form the per-source empirical distribution.
DEVIATION_HISTORY = 16

# Quantile used for the flagged set of the outlier report.
OUTLIER_QUANTILE = 0.9

# Posterior clamp; keeps sequential updates recoverable in both directions.
POSTERIOR_FLOOR = 1e-6

SOURCE_SERIES_CAPACITY = 256
AGGREGATE_SERIES_ID = "__aggregate__"

# Seeded encryptor runs used to fit the attack-conditional deviation model.
ATTACK_MODEL_SEEDS = (9101, 9102, 9103)
ATTACK_FIT_DURATION = 60.0


@dataclass
class SourceTrack:
    source_id: str
    level_id: str
    series: EntropySeries
    pending: ByteHistogram | None = None
    deviations: deque = field(default_factory=lambda: deque(maxlen=DEVIATION_HISTORY))
    posterior: float = 0.0
    kl: float = 0.0
    outlier: float = 0.0
    max_abs_delta: float = 0.0
    max_accel: float = 0.0
    flagged: bool = False
    verdict: Verdict | None = None
    new_deviation: float | None = None


@dataclass
class TraceResult:
    """Outcome of streaming one trace through the detector."""

    trace: str
    label: str | None
    verdict: str
    confidence: float
    alerts: list[Alert]
    per_source: dict[str, Verdict]
    outlier_report: OutlierReport | None
    level_samples: list[tuple[str, float, float]]
    convexity_true_at: list[float]
    records_seen: int
    post_onset_total: int
    post_onset_at_alert: int | None

    @property
    def first_alert(self) -> Alert | None:
        return self.alerts[0] if self.alerts else None

    @property
    def latency_ms(self) -> float | None:
        alert = self.first_alert
        return None if alert is None or alert.latency_ms is None else alert.latency_ms


class TraceProcessor:
    """Single-trace streaming state. Feed records in order, then call finish()."""

    def __init__(self, hierarchy: HierarchyConfig | None = None,
                 detector: DetectorConfig | None = None,
                 profile: BaselineProfile | None = None,
                 attack_model: BinnedDistribution | None = None,
                 trace_name: str = "", label: str | None = None,
                 onset_at: float | None = None,
                 collect_deviations: bool = False):
        self.hierarchy = hierarchy if hierarchy is not None else default_hierarchy()
        self.detector = detector if detector is not None else DetectorConfig()
        self.profile = profile
        self.attack_model = attack_model
        if profile is not None and attack_model is None:
            self.attack_model = fit_attack_model()
        self.trace_name = trace_name
        self.label = label
        self.onset_at = onset_at
        self.collecting = collect_deviations

        self._window = self.detector.window_seconds
        self._win_index: int | None = None
        self._source_window = WindowConfig(capacity=SOURCE_SERIES_CAPACITY, dt=self._window)
        self.sources: dict[str, SourceTrack] = {}
        self.levels: dict[str, LevelState] = {}
        self._level_members: dict[str, list[str]] = {}
        self._latest_entropy: dict[str, float] = {}
        self._aggregate = LevelState(
            AGGREGATE_SERIES_ID,
            EntropySeries(AGGREGATE_SERIES_ID, AGGREGATE_SERIES_ID, self._source_window),
        )
        self.collected: dict[str, list[tuple[float, float]]] = {}
        self.alerts: list[Alert] = []
        self.level_samples: list[tuple[str, float, float]] = []
        self.convexity_true_at: list[float] = []
        self.outlier_report: OutlierReport | None = None
        self.records_seen = 0
        self.post_onset_seen = 0
        self._post_onset_at_alert: int | None = None
        self._finished = False

    # -- ingestion ---------------------------------------------------------

    def process_record(self, rec: EventRecord) -> None:
        if self._finished:
            raise RuntimeError("processor already finished")
        self.records_seen += 1
        if self.onset_at is not None and rec.timestamp >= self.onset_at:
            self.post_onset_seen += 1

        idx = int(rec.timestamp // self._window)
        if self._win_index is None:
            self._win_index = idx
        while idx > self._win_index:
            self._close_window()

        track = self.sources.get(rec.source_path)
        if track is None:
            track = self._new_track(rec)
        if rec.bytes > 0:
            if track.pending is None:
                track.pending = rec.histogram.copy()
            else:
                track.pending.merge(rec.histogram)

    def process(self, records) -> "TraceProcessor":
        for rec in records:
            self.process_record(rec)
        return self

    def _new_track(self, rec: EventRecord) -> SourceTrack:
        level_id = None
        if rec.level_hint is not None:
            level_id = route_kind(self.hierarchy, rec.level_hint)
        if level_id is None:
            level_id = route_source(self.hierarchy, rec.source_path)
        prior = self.profile.prior if self.profile is not None else 0.0
        track = SourceTrack(
            source_id=rec.source_path,
            level_id=level_id,
            series=EntropySeries(rec.source_path, level_id, self._source_window),
            posterior=prior,
        )
        self.sources[rec.source_path] = track
        self._level_members.setdefault(level_id, []).append(rec.source_path)
        return track

    # -- window close ------------------------------------------------------

    def _close_window(self) -> None:
        t_end = (self._win_index + 1) * self._window
        fresh: list[SourceTrack] = []
        for track in self.sources.values():
            if track.pending is None:
                continue
            value = shannon_entropy(track.pending)
            track.pending = None
            track.series.append(t_end, value)
            self._latest_entropy[track.source_id] = value
            track.new_deviation = None
            if len(track.series) >= 2:
                samples = track.series.samples
                dev = min(abs(samples[-1].value - samples[-2].value), 8.0)
                track.deviations.append(dev)
                track.new_deviation = dev
                track.max_abs_delta = max(track.max_abs_delta, dev)
                if self.collecting:
                    self.collected.setdefault(track.level_id, []).append((t_end, dev))
            if len(track.series) >= 3:
                self._update_accel(track)
            fresh.append(track)

        if self.profile is not None and fresh:
            self._update_levels(t_end)
            self._score_and_decide(t_end, fresh)

        self._win_index += 1

    def _update_accel(self, track: SourceTrack) -> None:
        s0, s1, s2 = track.series.samples[-3:]
        dt1 = s1.timestamp - s0.timestamp
        dt2 = s2.timestamp - s1.timestamp
        mean_dt = (dt1 + dt2) / 2.0
        if abs(dt1 - mean_dt) <= 0.10 * mean_dt:
            accel = _second_diff_triple(s0.timestamp, s0.value, s1.timestamp, s1.value,
                                        s2.timestamp, s2.value)
            track.max_accel = max(track.max_accel, accel)

    def _update_levels(self, t_end: float) -> None:
        values: dict[str, float] = {}
        for lvl in self.hierarchy.levels:
            members = self._level_members.get(lvl.level_id)
            if not members:
                continue
            mean = sum(self._latest_entropy[sid] for sid in members) / len(members)
            values[lvl.level_id] = mean
            state = self.levels.get(lvl.level_id)
            if state is None:
                state = LevelState.create(lvl.level_id, self._source_window)
                self.levels[lvl.level_id] = state
            state.series.append(t_end, mean)
            state.source_count = len(members)
            self.level_samples.append((lvl.level_id, t_end - self._window, mean))

        # Aggregate over the levels that have data; weights renormalize over
        # that subset when the hierarchy is normalized.
        active = self.hierarchy.subset(values.keys())
        if active.levels:
            try:
                weights = active.effective_weights()
            except ValueError:
                return
            total = sum(weights[k] * values[k] for k in weights)
            self._aggregate.series.append(t_end, min(max(total, 0.0), 8.0))

    def _aggregate_accel(self) -> float:
        samples = self._aggregate.series.samples
        if len(samples) < 3:
            return 0.0
        s0, s1, s2 = samples[-3:]
        return _second_diff_triple(s0.timestamp, s0.value, s1.timestamp, s1.value,
                                   s2.timestamp, s2.value)

    def _convexity(self) -> bool:
        try:
            return convexity_signal(self._aggregate, self.detector.convexity_run)
        except InsufficientSamples:
            return False

    def _feature_vectors(self) -> list[FeatureVector]:
        vectors = []
        for track in self.sources.values():
            if len(track.series) == 0:
                continue
            mean_entropy = sum(track.series.values()) / len(track.series)
            vectors.append(FeatureVector(
                track.source_id,
                (mean_entropy, track.max_abs_delta, track.max_accel, track.kl),
            ))
        return vectors

    def _refresh_outliers(self) -> None:
        vectors = self._feature_vectors()
        if len(vectors) < 2:
            return
        report = outliers(agglomerate(vectors), vectors, OUTLIER_QUANTILE)
        self.outlier_report = report
        for sid, score in report.scores.items():
            self.sources[sid].outlier = score

    def _score_and_decide(self, t_end: float, fresh: list[SourceTrack]) -> None:
        cfg = self.detector
        convex = self._convexity()
        if convex:
            self.convexity_true_at.append(t_end)
        d2h = self._aggregate_accel()

        scored: list[SourceTrack] = []
        for track in fresh:
            if track.new_deviation is None:
                continue
            q = self.profile.per_level.get(track.level_id)
            if q is not None:
                emp = empirical_distribution(list(track.deviations), q.lo, q.hi, q.bin_count)
                track.kl = kl_divergence(emp, q)
                lr = likelihood_ratio(track.new_deviation, q, self.attack_model)
                updated = posterior(track.posterior, lr)
                track.posterior = min(max(updated, POSTERIOR_FLOOR), 1.0 - POSTERIOR_FLOOR)
            scored.append(track)

        # Outlier scores can only flip a label for a source whose fused
        # confidence could clear the threshold even at outlier = 1; skip the
        # clustering pass entirely when no such source exists this window.
        w = cfg.outlier_weight
        needs_outliers = any(
            not t.flagged
            and (1.0 - w) * t.posterior + w >= cfg.posterior_threshold
            and (t.kl >= cfg.kl_threshold or convex)
            for t in scored
        )
        if needs_outliers:
            self._refresh_outliers()

        for track in scored:
            score = DeviationScore(
                source_id=track.source_id,
                timestamp=t_end,
                kl=track.kl,
                d2h=d2h,
                posterior=track.posterior,
                outlier=track.outlier,
            )
            verdict, alert = fuse_and_decide(
                score, cfg, convex,
                previously_flagged=track.flagged,
                onset_at=self.onset_at,
            )
            if alert is not None:
                self.alerts.append(alert)
                if self._post_onset_at_alert is None:
                    self._post_onset_at_alert = self.post_onset_seen
            if track.flagged:
                continue  # label and confidence latched at flag time
            track.verdict = verdict
            if verdict.label == RANSOMWARE:
                track.flagged = True

    # -- completion --------------------------------------------------------

    def finish(self) -> TraceResult:
        if self._finished:
            raise RuntimeError("processor already finished")
        if self._win_index is not None:
            self._close_window()
        if self.profile is not None:
            self._refresh_outliers()
        self._finished = True

        per_source: dict[str, Verdict] = {}
        for sid, track in self.sources.items():
            if track.flagged and track.verdict is not None:
                per_source[sid] = track.verdict
            else:
                fused = (1.0 - self.detector.outlier_weight) * track.posterior \
                    + self.detector.outlier_weight * track.outlier
                per_source[sid] = Verdict(sid, BENIGN, min(max(fused, 0.0), 1.0))

        any_flagged = any(v.label == RANSOMWARE for v in per_source.values())
        confidence = max((v.confidence for v in per_source.values()), default=0.0)
        return TraceResult(
            trace=self.trace_name,
            label=self.label,
            verdict=RANSOMWARE if any_flagged else BENIGN,
            confidence=confidence,
            alerts=list(self.alerts),
            per_source=per_source,
            outlier_report=self.outlier_report,
            level_samples=list(self.level_samples),
            convexity_true_at=list(self.convexity_true_at),
            records_seen=self.records_seen,
            post_onset_total=self.post_onset_seen,
            post_onset_at_alert=self._post_onset_at_alert,
        )


def collect_trace_deviations(records, hierarchy: HierarchyConfig | None = None,
                             detector: DetectorConfig | None = None,
                             onset_at: float | None = None,
                             after_onset_only: bool = False) -> dict[str, list[float]]:
    """Per-level deviation samples from a record stream, for profile fitting."""
    proc = TraceProcessor(hierarchy, detector, collect_deviations=True, onset_at=onset_at)
    proc.process(records)
    proc.finish()
    out: dict[str, list[float]] = {}
    for level_id, pairs in proc.collected.items():
        if after_onset_only and onset_at is not None:
            out[level_id] = [d for t, d in pairs if t > onset_at]
        else:
            out[level_id] = [d for _, d in pairs]
    return out


_attack_model_cache: dict[int, BinnedDistribution] = {}


def fit_attack_model(bin_count: int = DEFAULT_BIN_COUNT) -> BinnedDistribution:
    """Deviation distribution under encryption, fit from seeded simulator runs.

    The encryptor scenarios behind this model are fixed, so the result is a
    process-wide constant; repeated calls are cached.
    """
    cached = _attack_model_cache.get(bin_count)
    if cached is not None:
        return cached

    lo, hi = DEVIATION_SUPPORT
    pooled: list[float] = []
    for seed in ATTACK_MODEL_SEEDS:
        trace = simulate_scenario(ScenarioSpec("ransomware", seed, duration=ATTACK_FIT_DURATION))
        per_level = collect_trace_deviations(
            trace.records, onset_at=trace.meta.onset_at, after_onset_only=True,
        )
        for devs in per_level.values():
            pooled.extend(devs)

    arr = np.asarray(pooled, dtype=np.float64)
    idx = np.clip(((arr - lo) / (hi - lo) * bin_count).astype(np.int64), 0, bin_count - 1)
    counts = np.bincount(idx, minlength=bin_count).astype(np.float64)
    model = BinnedDistribution(lo, hi, smooth_probabilities(counts / counts.sum()))
    _attack_model_cache[bin_count] = model
    return model
