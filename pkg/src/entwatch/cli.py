"""Command-line surface: profile, detect, simulate, report.

Exit status contract: 0 for a clean run, 1 when the run completed but some
inputs failed, 2 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

from .baseline import DEFAULT_PRIOR, fit_baseline, load_profile, save_profile
from .config import RunConfig, load_run_config
from .detector import DetectorConfig
from .errors import EntwatchError, ConfigError, InvalidSpec
from .hierarchy import default_hierarchy
from .metrics import (
    PerTraceRow,
    VERDICT_ERROR,
    compute_metrics,
    read_report_csv,
    write_heatmap_csv,
    write_metrics_json,
    write_report_csv,
)
from .pipeline import TraceProcessor, collect_trace_deviations, fit_attack_model
from .simulate import DEFAULT_RAMP, SCENARIO_KINDS, ScenarioSpec, simulate_scenario
from .traces import LABEL_BENIGN, iter_trace, scan_directory, write_trace

DEFAULT_CHUNK_BYTES = 4096


def _peak_rss_bytes() -> int:
    try:
        import resource
    except ImportError:
        return 0
    # ru_maxrss is kilobytes on Linux.
    return int(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss) * 1024


def _input_records(path: str, chunk_bytes: int):
    """(label, onset_at, record iterator, skipped count) for one input."""
    p = Path(path)
    if p.is_dir():
        result = scan_directory(p, chunk_bytes)
        return None, None, iter(result.records), len(result.skipped)
    meta, records = iter_trace(path)
    return meta.label, meta.onset_at, records, 0


def cmd_profile(args) -> int:
    if not args.inputs:
        print("profile: at least one benign trace or directory is required", file=sys.stderr)
        return 2
    hierarchy = default_hierarchy()
    detector = DetectorConfig()
    if args.config:
        run_cfg = load_run_config(args.config)
        hierarchy, detector = run_cfg.hierarchy, run_cfg.detector

    pooled: dict[str, list[float]] = {}
    for path in sorted(args.inputs):
        label, onset, records, skipped = _input_records(path, args.chunk_bytes)
        if label is not None and label != LABEL_BENIGN:
            print(f"profile: input {path} is labeled {label}, profiling needs benign inputs",
                  file=sys.stderr)
            return 2
        if skipped:
            print(f"profile: skipped {skipped} unreadable files under {path}", file=sys.stderr)
        per_level = collect_trace_deviations(records, hierarchy, detector)
        for level_id, devs in per_level.items():
            pooled.setdefault(level_id, []).extend(devs)

    profile = fit_baseline(
        pooled,
        prior=args.prior,
        created_at=0.0 if args.frozen_clock else None,
        inputs=tuple(sorted(args.inputs)),
    )
    save_profile(profile, args.out)
    for level_id in sorted(profile.sample_counts):
        print(f"level {level_id}: {profile.sample_counts[level_id]} deviation samples")
    print(f"profile written to {args.out}")
    return 0


def cmd_detect(args) -> int:
    hierarchy = default_hierarchy()
    detector = DetectorConfig()
    baseline_path = args.baseline
    inputs = list(args.inputs)
    report_dir = args.out
    if args.config:
        run_cfg = load_run_config(args.config)
        hierarchy, detector = run_cfg.hierarchy, run_cfg.detector
        baseline_path = baseline_path or run_cfg.baseline_path
        inputs = inputs or list(run_cfg.inputs)
        report_dir = report_dir or run_cfg.report_dir

    if not baseline_path:
        print("detect: a baseline profile is required (--baseline or config)", file=sys.stderr)
        return 2
    if not inputs:
        print("detect: at least one trace file or directory is required", file=sys.stderr)
        return 2
    if not report_dir:
        print("detect: a report directory is required (--out or config)", file=sys.stderr)
        return 2
    missing = [p for p in inputs if not os.path.exists(p)]
    if missing:
        print(f"detect: inputs do not exist: {', '.join(missing)}", file=sys.stderr)
        return 2

    profile = load_profile(baseline_path)
    attack_model = fit_attack_model()
    os.makedirs(report_dir, exist_ok=True)

    started = time.perf_counter()
    rows: list[PerTraceRow] = []
    level_samples: list[tuple[str, float, float]] = []
    failures = 0
    for path in sorted(inputs):
        try:
            label, onset, records, skipped = _input_records(path, args.chunk_bytes)
            if skipped:
                print(f"detect: skipped {skipped} unreadable files under {path}", file=sys.stderr)
            proc = TraceProcessor(
                hierarchy, detector, profile=profile, attack_model=attack_model,
                trace_name=path, label=label, onset_at=onset,
            )
            proc.process(records)
            result = proc.finish()
            for alert in result.alerts:
                latency = "" if alert.latency_ms is None else f" latency_ms={alert.latency_ms:.0f}"
                print(
                    f"ALERT trace={path} source={alert.source_id} "
                    f"raised_at={alert.raised_at:.3f}s kl={alert.score.kl:.3f} "
                    f"posterior={alert.score.posterior:.4f}{latency}"
                )
            rows.append(PerTraceRow(path, result.label, result.verdict,
                                    result.confidence, result.latency_ms))
            level_samples.extend(result.level_samples)
        except EntwatchError as exc:
            print(f"detect: input {path} failed: {exc}", file=sys.stderr)
            rows.append(PerTraceRow(path, None, VERDICT_ERROR, 0.0, None))
            failures += 1

    wall_ms = 0.0 if args.frozen_clock else (time.perf_counter() - started) * 1000.0
    rss = 0 if args.frozen_clock else _peak_rss_bytes()
    report = compute_metrics(rows, wall_time_ms=wall_ms, peak_rss_estimate=rss)

    write_report_csv(os.path.join(report_dir, "report.csv"), report.per_trace)
    write_metrics_json(os.path.join(report_dir, "metrics.json"), report)
    write_heatmap_csv(os.path.join(report_dir, "heatmap.csv"), level_samples)

    latency = "n/a" if report.mean_latency_ms is None else f"{report.mean_latency_ms:.0f}ms"
    print(
        f"processed {len(rows)} inputs: accuracy={report.accuracy:.3f} "
        f"fpr={report.fpr:.3f} fnr={report.fnr:.3f} mean_latency={latency}"
    )
    return 1 if failures else 0


def cmd_simulate(args) -> int:
    extra = {}
    if args.target_dir:
        extra["target_dirs"] = tuple(args.target_dir)
    spec = ScenarioSpec(
        kind=args.kind,
        seed=args.seed,
        duration=args.duration,
        file_count=args.file_count,
        ramp=(args.ramp_start, args.ramp_end),
        **extra,
    )
    trace = simulate_scenario(spec)
    write_trace(trace, args.out)
    onset = "none" if trace.meta.onset_at is None else f"{trace.meta.onset_at:.3f}s"
    print(f"wrote {len(trace.records)} records to {args.out} (onset_at={onset})")
    return 0


def cmd_report(args) -> int:
    rows = read_report_csv(args.report_csv)
    report = compute_metrics(rows)
    latency = "n/a" if report.mean_latency_ms is None else f"{report.mean_latency_ms:.0f}ms"
    print(f"accuracy={report.accuracy:.3f} fpr={report.fpr:.3f} fnr={report.fnr:.3f} "
          f"mean_latency={latency} traces={len(rows)}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_metrics_json(os.path.join(args.out, "metrics.json"), report)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entwatch",
        description="Entropy-disruption detector for ransomware-like encryption behavior.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="fit a baseline profile from benign traces or directories")
    p.add_argument("inputs", nargs="*", help="benign trace files or directories")
    p.add_argument("--out", required=True, help="profile output path")
    p.add_argument("--prior", type=float, default=DEFAULT_PRIOR, help="prior attack probability")
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--chunk-bytes", type=int, default=DEFAULT_CHUNK_BYTES)
    p.add_argument("--frozen-clock", action="store_true", help="deterministic timestamps")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("detect", help="run detection over traces or directories")
    p.add_argument("inputs", nargs="*", help="trace files or directories")
    p.add_argument("--baseline", help="baseline profile path")
    p.add_argument("--out", help="report directory")
    p.add_argument("--config", help="run config JSON")
    p.add_argument("--chunk-bytes", type=int, default=DEFAULT_CHUNK_BYTES)
    p.add_argument("--frozen-clock", action="store_true",
                   help="zero out wall time and RSS for byte-stable reports")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("simulate", help="generate a synthetic workload trace")
    p.add_argument("--kind", required=True, choices=SCENARIO_KINDS)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--duration", type=float, default=100.0)
    p.add_argument("--file-count", type=int, default=None)
    p.add_argument("--target-dir", action="append", default=None)
    p.add_argument("--ramp-start", type=float, default=DEFAULT_RAMP[0])
    p.add_argument("--ramp-end", type=float, default=DEFAULT_RAMP[1])
    p.add_argument("--out", required=True, help="trace output path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="recompute metrics from an existing report.csv")
    p.add_argument("report_csv")
    p.add_argument("--out", help="directory for a recomputed metrics.json")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidSpec) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EntwatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
