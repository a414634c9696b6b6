"""Replayable event traces: line-delimited JSON records plus directory scanning.

File layout: line 1 is the metadata object, every following line is one event
record. Histograms are serialized as sparse ``{"byte": count}`` maps of the
nonzero buckets only; raw payload bytes are never stored. All integers are
decimal; timestamps are decimal seconds written with at least three
fractional digits and exactly enough precision to round-trip the float.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Iterator

from .entropy import ByteHistogram, histogram_from_bytes
from .errors import IoFailure, MalformedRecord
from .hierarchy import LEVEL_KINDS

OPS = ("write", "read", "rename", "delete", "net_tx")

LABEL_BENIGN = "benign"
LABEL_RANSOMWARE = "ransomware"


def format_seconds(ts: float) -> str:
    """Shortest decimal that round-trips ``ts``, padded to >= 3 fraction digits."""
    if ts < 0:
        raise ValueError(f"timestamps are non-negative, got {ts}")
    text = repr(float(ts))
    if "e" in text or "E" in text:
        # repr falls back to scientific notation below 1e-4; expand exactly.
        text = format(Decimal(float(ts)), "f")
    if "." not in text:
        return text + ".000"
    fraction = len(text) - text.index(".") - 1
    return text + "0" * max(0, 3 - fraction)


@dataclass(frozen=True)
class EventRecord:
    """One observed operation; carries the payload's byte histogram, not bytes."""

    timestamp: float
    source_path: str
    op: str
    histogram: ByteHistogram
    bytes: int
    level_hint: str | None = None

    def __post_init__(self):
        if self.timestamp < 0:
            raise ValueError(f"timestamp must be non-negative, got {self.timestamp}")
        if self.op not in OPS:
            raise ValueError(f"unknown op {self.op!r}, expected one of {OPS}")
        if self.histogram.total != self.bytes:
            raise ValueError(
                f"histogram total {self.histogram.total} does not match payload length {self.bytes}"
            )
        if self.level_hint is not None and self.level_hint not in LEVEL_KINDS:
            raise ValueError(f"level hint must be one of {LEVEL_KINDS}, got {self.level_hint!r}")


@dataclass(frozen=True)
class TraceMeta:
    scenario: str
    seed: int
    label: str
    created_at: float = 0.0
    duration: float | None = None
    onset_at: float | None = None
    ramp: tuple[float, float] | None = None
    file_count: int | None = None
    target_dirs: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.label not in (LABEL_BENIGN, LABEL_RANSOMWARE):
            raise ValueError(f"label must be benign or ransomware, got {self.label!r}")
        if self.label == LABEL_RANSOMWARE and self.onset_at is None:
            raise ValueError("ransomware traces must carry onset_at")
        if self.ramp is not None:
            object.__setattr__(self, "ramp", (float(self.ramp[0]), float(self.ramp[1])))
        if self.target_dirs is not None:
            object.__setattr__(self, "target_dirs", tuple(self.target_dirs))


@dataclass(frozen=True)
class Trace:
    meta: TraceMeta
    records: tuple[EventRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        for prev, cur in zip(self.records, self.records[1:]):
            if cur.timestamp < prev.timestamp:
                raise ValueError("trace records must be sorted by timestamp")


def _meta_line(meta: TraceMeta) -> str:
    parts = [
        f'"scenario":{json.dumps(meta.scenario)}',
        f'"seed":{meta.seed}',
        f'"label":{json.dumps(meta.label)}',
        f'"created_at":{format_seconds(meta.created_at)}',
    ]
    if meta.duration is not None:
        parts.append(f'"duration":{json.dumps(meta.duration)}')
    if meta.onset_at is not None:
        parts.append(f'"onset_at":{format_seconds(meta.onset_at)}')
    if meta.ramp is not None:
        parts.append(f'"ramp":[{json.dumps(meta.ramp[0])},{json.dumps(meta.ramp[1])}]')
    if meta.file_count is not None:
        parts.append(f'"file_count":{meta.file_count}')
    if meta.target_dirs is not None:
        parts.append(f'"target_dirs":{json.dumps(list(meta.target_dirs))}')
    return "{" + ",".join(parts) + "}"


def _record_line(rec: EventRecord) -> str:
    parts = [
        f'"timestamp":{format_seconds(rec.timestamp)}',
        f'"source_path":{json.dumps(rec.source_path)}',
    ]
    if rec.level_hint is not None:
        parts.append(f'"level_hint":{json.dumps(rec.level_hint)}')
    parts.append(f'"op":{json.dumps(rec.op)}')
    parts.append(f'"bytes":{rec.bytes}')
    hist = ",".join(f'"{b}":{c}' for b, c in rec.histogram.nonzero_items())
    parts.append('"histogram":{' + hist + "}")
    return "{" + ",".join(parts) + "}"


def write_trace(trace: Trace, path) -> None:
    """Stream the trace to disk one line per record."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(_meta_line(trace.meta) + "\n")
            for rec in trace.records:
                fh.write(_record_line(rec) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write trace to {path}: {exc}") from exc


def _parse_meta(obj: dict, line_number: int) -> TraceMeta:
    try:
        ramp = obj.get("ramp")
        target_dirs = obj.get("target_dirs")
        return TraceMeta(
            scenario=obj["scenario"],
            seed=int(obj["seed"]),
            label=obj["label"],
            created_at=float(obj.get("created_at", 0.0)),
            duration=None if obj.get("duration") is None else float(obj["duration"]),
            onset_at=None if obj.get("onset_at") is None else float(obj["onset_at"]),
            ramp=None if ramp is None else (float(ramp[0]), float(ramp[1])),
            file_count=None if obj.get("file_count") is None else int(obj["file_count"]),
            target_dirs=None if target_dirs is None else tuple(target_dirs),
        )
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise MalformedRecord(f"line {line_number}: invalid trace metadata: {exc}", line_number) from exc


def _parse_record(obj: dict, line_number: int) -> EventRecord:
    try:
        hist = ByteHistogram()
        for key, count in obj.get("histogram", {}).items():
            bucket = int(key)
            if not 0 <= bucket <= 255:
                raise ValueError(f"byte bucket out of range: {bucket}")
            hist.counts[bucket] = int(count)
        hist.total = int(hist.counts.sum())
        return EventRecord(
            timestamp=float(obj["timestamp"]),
            source_path=obj["source_path"],
            op=obj["op"],
            histogram=hist,
            bytes=int(obj["bytes"]),
            level_hint=obj.get("level_hint"),
        )
    except MalformedRecord:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedRecord(f"line {line_number}: invalid event record: {exc}", line_number) from exc


def iter_trace(path) -> tuple[TraceMeta, Iterator[EventRecord]]:
    """Metadata plus a lazy record iterator; the file is never fully buffered."""
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read trace from {path}: {exc}") from exc

    first = fh.readline()
    if not first.strip():
        fh.close()
        raise MalformedRecord("line 1: trace file has no metadata line", 1)
    try:
        meta_obj = json.loads(first)
    except ValueError as exc:
        fh.close()
        raise MalformedRecord(f"line 1: metadata is not valid JSON: {exc}", 1) from exc
    meta = _parse_meta(meta_obj, 1)

    def records() -> Iterator[EventRecord]:
        last_ts = -1.0
        try:
            for line_number, line in enumerate(fh, start=2):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except ValueError as exc:
                    raise MalformedRecord(
                        f"line {line_number}: record is not valid JSON: {exc}", line_number
                    ) from exc
                rec = _parse_record(obj, line_number)
                if rec.timestamp < last_ts:
                    raise MalformedRecord(
                        f"line {line_number}: timestamps regress ({rec.timestamp} after {last_ts})",
                        line_number,
                    )
                last_ts = rec.timestamp
                yield rec
        finally:
            fh.close()

    return meta, records()


def read_trace(path) -> Trace:
    """Materialize a whole trace; inverse of write_trace."""
    meta, records = iter_trace(path)
    return Trace(meta, tuple(records))


@dataclass
class ScanResult:
    """Records produced by a directory scan plus the files that could not be read."""

    records: list[EventRecord] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)


def scan_directory(root, chunk_bytes: int) -> ScanResult:
    """One read record per fixed-size chunk of every regular file under ``root``.

    Files are visited in lexicographic path order, chunks in offset order, and
    the record timestamp is the global scan index in seconds, so repeated
    scans of an unchanged tree produce identical sequences. Unreadable files
    are skipped and reported, not fatal.
    """
    if chunk_bytes <= 0:
        raise ValueError(f"chunk_bytes must be positive, got {chunk_bytes}")
    root = Path(root)
    if not root.is_dir():
        raise IoFailure(f"scan root {root} is not a readable directory")

    files = sorted(p for p in root.rglob("*") if p.is_file() and not p.is_symlink())
    result = ScanResult()
    index = 0
    for path in files:
        try:
            with open(path, "rb") as fh:
                while True:
                    chunk = fh.read(chunk_bytes)
                    if not chunk:
                        break
                    result.records.append(EventRecord(
                        timestamp=float(index),
                        source_path=str(path),
                        op="read",
                        histogram=histogram_from_bytes(chunk),
                        bytes=len(chunk),
                    ))
                    index += 1
        except OSError:
            result.skipped.append(str(path))
    return result
