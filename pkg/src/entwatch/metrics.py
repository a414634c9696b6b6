"""Run metrics and report files: report.csv, metrics.json, heatmap.csv."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

from .errors import EmptyInput
from .traces import LABEL_BENIGN, LABEL_RANSOMWARE

VERDICT_ERROR = "error"

REPORT_COLUMNS = ("trace", "label", "verdict", "confidence", "latency_ms")


@dataclass(frozen=True)
class PerTraceRow:
    trace: str
    label: str | None
    verdict: str
    confidence: float
    latency_ms: float | None


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    fpr: float
    fnr: float
    mean_latency_ms: float | None
    wall_time_ms: float
    peak_rss_estimate: int
    per_trace: tuple[PerTraceRow, ...]


def compute_metrics(rows, wall_time_ms: float = 0.0, peak_rss_estimate: int = 0) -> MetricsReport:
    """Confusion-matrix aggregates over labeled rows.

    Rows with an unknown label or an error verdict stay in the report but are
    excluded from the confusion counts. Degenerate 0/0 rates are defined as 0.
    Mean latency runs over true positives that carry one; input order does
    not matter.
    """
    rows = tuple(rows)
    if not rows:
        raise EmptyInput("metrics need at least one per-trace row")

    tp = tn = fp = fn = 0
    latencies = []
    for row in rows:
        if row.label not in (LABEL_BENIGN, LABEL_RANSOMWARE) or row.verdict == VERDICT_ERROR:
            continue
        positive_truth = row.label == LABEL_RANSOMWARE
        positive_pred = row.verdict == LABEL_RANSOMWARE
        if positive_truth and positive_pred:
            tp += 1
            if row.latency_ms is not None:
                latencies.append(row.latency_ms)
        elif positive_truth:
            fn += 1
        elif positive_pred:
            fp += 1
        else:
            tn += 1

    total = tp + tn + fp + fn
    accuracy = (tp + tn) / total if total else 0.0
    fpr = fp / (fp + tn) if (fp + tn) else 0.0
    fnr = fn / (fn + tp) if (fn + tp) else 0.0
    mean_latency = sum(latencies) / len(latencies) if latencies else None
    return MetricsReport(
        accuracy=accuracy,
        fpr=fpr,
        fnr=fnr,
        mean_latency_ms=mean_latency,
        wall_time_ms=wall_time_ms,
        peak_rss_estimate=peak_rss_estimate,
        per_trace=rows,
    )


def write_report_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            writer.writerow([
                row.trace,
                row.label if row.label is not None else "unknown",
                row.verdict,
                f"{row.confidence:.6f}",
                "" if row.latency_ms is None else f"{row.latency_ms:.3f}",
            ])


def read_report_csv(path) -> list[PerTraceRow]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for entry in reader:
            label = entry["label"]
            latency = entry["latency_ms"]
            rows.append(PerTraceRow(
                trace=entry["trace"],
                label=None if label == "unknown" else label,
                verdict=entry["verdict"],
                confidence=float(entry["confidence"]),
                latency_ms=float(latency) if latency else None,
            ))
    return rows


def write_metrics_json(path, report: MetricsReport) -> None:
    doc = {
        "accuracy": report.accuracy,
        "fpr": report.fpr,
        "fnr": report.fnr,
        "mean_latency_ms": report.mean_latency_ms,
        "wall_time_ms": report.wall_time_ms,
        "peak_rss_estimate": report.peak_rss_estimate,
        "per_trace": [
            {
                "trace": row.trace,
                "label": row.label,
                "verdict": row.verdict,
                "confidence": row.confidence,
                "latency_ms": row.latency_ms,
            }
            for row in report.per_trace
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_heatmap_csv(path, level_samples) -> None:
    """Level x 1-second-bucket matrix of mean level entropy.

    ``level_samples`` are (level_id, window_start_seconds, entropy) triples,
    typically pooled across every trace of a run. Cells with no samples stay
    blank.
    """
    cells: dict[tuple[str, int], list[float]] = {}
    max_bucket = -1
    for level_id, window_start, value in level_samples:
        bucket = int(window_start // 1.0)
        cells.setdefault((level_id, bucket), []).append(value)
        max_bucket = max(max_bucket, bucket)

    levels = sorted({key[0] for key in cells})
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["level"] + [str(b) for b in range(max_bucket + 1)])
        for level_id in levels:
            row = [level_id]
            for bucket in range(max_bucket + 1):
                values = cells.get((level_id, bucket))
                row.append(f"{sum(values) / len(values):.6f}" if values else "")
            writer.writerow(row)
