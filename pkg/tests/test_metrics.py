import random

import pytest

from entwatch.errors import EmptyInput
from entwatch.metrics import (
    MetricsReport,
    PerTraceRow,
    compute_metrics,
    read_report_csv,
    write_heatmap_csv,
    write_metrics_json,
    write_report_csv,
)


def row(label, verdict, latency=None, trace="t", confidence=0.5):
    return PerTraceRow(trace, label, verdict, confidence, latency)


class TestComputeMetrics:
    def test_all_benign_correct(self):
        rows = [row("benign", "benign") for _ in range(5)]
        report = compute_metrics(rows)
        assert report.accuracy == 1.0
        assert report.fpr == 0.0
        assert report.fnr == 0.0
        assert report.mean_latency_ms is None

    def test_confusion_arithmetic(self):
        rows = (
            [row("ransomware", "ransomware", latency=100.0)] * 9
            + [row("ransomware", "benign")]
            + [row("benign", "ransomware")]
            + [row("benign", "benign")] * 9
        )
        report = compute_metrics(rows)
        assert report.accuracy == pytest.approx(0.90)
        assert report.fpr == pytest.approx(0.10)
        assert report.fnr == pytest.approx(0.10)

    def test_single_true_positive_latency(self):
        report = compute_metrics([row("ransomware", "ransomware", latency=390.0)])
        assert report.mean_latency_ms == pytest.approx(390.0)

    def test_order_invariance(self):
        rows = (
            [row("ransomware", "ransomware", latency=100.0)] * 4
            + [row("ransomware", "benign")] * 2
            + [row("benign", "benign")] * 6
            + [row("benign", "ransomware")] * 1
        )
        shuffled = rows[:]
        random.Random(7).shuffle(shuffled)
        a, b = compute_metrics(rows), compute_metrics(shuffled)
        assert (a.accuracy, a.fpr, a.fnr, a.mean_latency_ms) == (b.accuracy, b.fpr, b.fnr, b.mean_latency_ms)

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            compute_metrics([])

    def test_unknown_labels_and_errors_excluded(self):
        rows = [
            row("benign", "benign"),
            row(None, "ransomware"),
            row("ransomware", "error"),
        ]
        report = compute_metrics(rows)
        assert report.accuracy == 1.0
        assert len(report.per_trace) == 3

    def test_latency_only_over_true_positives(self):
        rows = [
            row("ransomware", "ransomware", latency=100.0),
            row("benign", "ransomware", latency=999.0),  # FP latencies ignored
        ]
        assert compute_metrics(rows).mean_latency_ms == pytest.approx(100.0)


class TestReportFiles:
    def test_report_csv_round_trip(self, tmp_path):
        rows = [
            PerTraceRow("a.jsonl", "ransomware", "ransomware", 0.987654, 1000.0),
            PerTraceRow("b.jsonl", "benign", "benign", 0.125, None),
            PerTraceRow("c", None, "error", 0.0, None),
        ]
        path = tmp_path / "report.csv"
        write_report_csv(path, rows)
        loaded = read_report_csv(path)
        assert [r.trace for r in loaded] == ["a.jsonl", "b.jsonl", "c"]
        assert loaded[0].latency_ms == pytest.approx(1000.0)
        assert loaded[1].label == "benign"
        assert loaded[2].label is None
        header = path.read_text().splitlines()[0]
        assert header == "trace,label,verdict,confidence,latency_ms"

    def test_metrics_json_mirrors_report(self, tmp_path):
        import json

        report = compute_metrics([row("benign", "benign", trace="x")],
                                 wall_time_ms=12.5, peak_rss_estimate=1024)
        path = tmp_path / "metrics.json"
        write_metrics_json(path, report)
        doc = json.loads(path.read_text())
        assert doc["accuracy"] == 1.0
        assert doc["fpr"] == 0.0
        assert doc["wall_time_ms"] == 12.5
        assert doc["peak_rss_estimate"] == 1024
        assert doc["per_trace"][0]["trace"] == "x"

    def test_metric_identities_recomputable_from_rows(self, tmp_path):
        rows = (
            [row("ransomware", "ransomware", latency=50.0, trace="r")] * 3
            + [row("benign", "benign", trace="b")] * 5
            + [row("benign", "ransomware", trace="fp")]
        )
        path = tmp_path / "report.csv"
        write_report_csv(path, rows)
        recomputed = compute_metrics(read_report_csv(path))
        original = compute_metrics(rows)
        assert recomputed.accuracy == pytest.approx(original.accuracy)
        assert recomputed.fpr == pytest.approx(original.fpr)
        assert recomputed.fnr == pytest.approx(original.fnr)

    def test_heatmap_matrix(self, tmp_path):
        samples = [
            ("fs-user", 0.0, 4.0),
            ("fs-user", 0.5, 5.0),
            ("fs-user", 2.0, 6.0),
            ("net", 1.0, 1.5),
        ]
        path = tmp_path / "heatmap.csv"
        write_heatmap_csv(path, samples)
        lines = path.read_text().splitlines()
        assert lines[0] == "level,0,1,2"
        assert lines[1] == "fs-user,4.500000,,6.000000"
        assert lines[2] == "net,,1.500000,"
