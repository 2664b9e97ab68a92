"""Stream file I/O: load, validate, origin-normalize, mask, and write artifacts.

Internal time is float64 seconds relative to the stream origin; capture
files store int64 absolute microseconds, so loading is exact and writing
round-trips to the microsecond. Derived artifacts (corrected streams,
annotations, overlays) store decimal microseconds at full float precision.

CSV schemas:
    frame stream      index,ts_us
    sensor stream     ts_us,value
    exclusions        start_us,end_us          (stream-relative)
    annotations       frame_index,frame_ts_us,dejittered_ts_us,label,sensor_ts_us
    processed signal  ts_us,raw,smoothed,filtered
    overlay           series,t_us,value
"""

from __future__ import annotations

import csv
import os
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

MICROS_PER_SECOND = 1_000_000

FRAME_HEADER = ["index", "ts_us"]
SENSOR_HEADER = ["ts_us", "value"]
EXCLUSION_HEADER = ["start_us", "end_us"]
ANNOTATION_HEADER = ["frame_index", "frame_ts_us", "dejittered_ts_us",
                     "label", "sensor_ts_us"]


@dataclass(frozen=True)
class StreamOrigin:
    """Absolute time of the first raw sample, integer microseconds."""
    epoch_us: int

    def to_absolute_us(self, t):
        """Map origin-relative seconds back to absolute integer microseconds."""
        return self.epoch_us + np.rint(np.asarray(t) * MICROS_PER_SECOND).astype(np.int64)


@dataclass(frozen=True)
class SampleStream:
    """Timestamps (and optional values) of one acquisition stream.

    Timestamps are origin-relative seconds, nondecreasing, length >= 2.
    ``indices`` carries the frame-file index column when present.
    """
    kind: str
    origin: StreamOrigin
    timestamps: np.ndarray
    values: np.ndarray | None = None
    indices: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("frame", "sensor"):
            raise DataError(f"unknown stream kind {self.kind!r}")
        ts = np.ascontiguousarray(self.timestamps, dtype=np.float64)
        object.__setattr__(self, "timestamps", ts)
        if len(ts) < 2:
            raise DataError("stream has fewer than 2 samples")
        if not np.isfinite(ts).all():
            raise DataError("stream contains non-finite timestamps")
        if (np.diff(ts) < 0).any():
            raise DataError("stream timestamps are decreasing")
        if self.values is not None:
            vals = np.ascontiguousarray(self.values, dtype=np.float64)
            object.__setattr__(self, "values", vals)
            if len(vals) != len(ts):
                raise DataError("values length does not match timestamps")
            if not np.isfinite(vals).all():
                raise DataError("stream contains non-finite values")
        if self.indices is not None:
            object.__setattr__(
                self, "indices", np.ascontiguousarray(self.indices, dtype=np.int64))

    def __len__(self):
        return len(self.timestamps)


@dataclass(frozen=True)
class ExclusionList:
    """Half-open [start, end) intervals to drop, stream-relative seconds.

    Overlapping or touching intervals are merged on construction.
    """
    intervals: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))

    def __post_init__(self):
        iv = np.asarray(self.intervals, dtype=np.float64).reshape(-1, 2)
        if len(iv) and (iv[:, 0] >= iv[:, 1]).any():
            bad = int(np.nonzero(iv[:, 0] >= iv[:, 1])[0][0])
            raise DataError(f"exclusion interval {bad} has start >= end")
        if len(iv):
            iv = iv[np.argsort(iv[:, 0], kind="stable")]
            merged = [iv[0]]
            for s, e in iv[1:]:
                if s <= merged[-1][1]:
                    merged[-1] = (merged[-1][0], max(merged[-1][1], e))
                else:
                    merged.append((s, e))
            iv = np.asarray(merged, dtype=np.float64).reshape(-1, 2)
        object.__setattr__(self, "intervals", iv)

    def __len__(self):
        return len(self.intervals)

    def contains(self, t):
        """Boolean mask: which times fall inside any [start, end)."""
        t = np.asarray(t, dtype=np.float64)
        if not len(self.intervals):
            return np.zeros(t.shape, dtype=bool)
        pos = np.searchsorted(self.intervals[:, 0], t, side="right") - 1
        inside = pos >= 0
        inside[inside] &= t[inside] < self.intervals[pos[inside], 1]
        return inside


# annotate.AnnotatedFrame is serialized here; import at use sites to avoid
# a module cycle.


def _parse_number(text, line_no, column, path):
    try:
        return float(text)
    except ValueError:
        raise DataError(
            f"{path}: malformed row at line {line_no}: bad {column} {text!r}"
        ) from None


def load_stream(path, kind):
    """Load a frame or sensor CSV and origin-normalize its timestamps.

    Raises DataError with the offending 1-based line number on malformed
    rows or decreasing timestamps.
    """
    expected = FRAME_HEADER if kind == "frame" else SENSOR_HEADER
    if kind not in ("frame", "sensor"):
        raise DataError(f"unknown stream kind {kind!r}")
    ts_us = []
    values = []
    indices = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if [h.strip() for h in header] != expected:
            raise DataError(
                f"{path}: expected header {','.join(expected)!r}, got {','.join(header)!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(expected):
                raise DataError(
                    f"{path}: malformed row at line {line_no}: "
                    f"expected {len(expected)} fields, got {len(row)}")
            if kind == "frame":
                idx = _parse_number(row[0], line_no, "index", path)
                if idx < 0 or idx != int(idx):
                    raise DataError(
                        f"{path}: malformed row at line {line_no}: "
                        f"bad index {row[0]!r}")
                t = _parse_number(row[1], line_no, "ts_us", path)
                indices.append(int(idx))
            else:
                t = _parse_number(row[0], line_no, "ts_us", path)
                values.append(_parse_number(row[1], line_no, "value", path))
            if ts_us and t < ts_us[-1]:
                raise DataError(f"{path}: decreasing timestamp at line {line_no}")
            ts_us.append(t)
    if len(ts_us) < 2:
        raise DataError(f"{path}: stream has fewer than 2 samples")
    ts_us = np.asarray(ts_us, dtype=np.float64)
    epoch_us = int(round(ts_us[0]))
    rel = (ts_us - ts_us[0]) / MICROS_PER_SECOND
    return SampleStream(
        kind=kind,
        origin=StreamOrigin(epoch_us),
        timestamps=rel,
        values=np.asarray(values) if kind == "sensor" else None,
        indices=np.asarray(indices, dtype=np.int64) if kind == "frame" else None,
    )


def load_exclusions(path):
    """Load an exclusion CSV (stream-relative integer microseconds)."""
    pairs = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if [h.strip() for h in header] != EXCLUSION_HEADER:
            raise DataError(
                f"{path}: expected header {','.join(EXCLUSION_HEADER)!r}")
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise DataError(f"{path}: malformed row at line {line_no}")
            s = _parse_number(row[0], line_no, "start_us", path)
            e = _parse_number(row[1], line_no, "end_us", path)
            pairs.append((s / MICROS_PER_SECOND, e / MICROS_PER_SECOND))
    return ExclusionList(np.asarray(pairs, dtype=np.float64).reshape(-1, 2))


def apply_exclusions(stream, exclusions):
    """Drop samples inside any exclusion interval.

    Returns (masked stream, removed count). The time origin is kept even if
    the first sample is removed; downstream operations are origin-agnostic.
    """
    inside = exclusions.contains(stream.timestamps)
    removed = int(inside.sum())
    if removed == 0:
        return stream, 0
    keep = ~inside
    if keep.sum() < 2:
        raise DataError("exclusions leave fewer than 2 samples")
    return SampleStream(
        kind=stream.kind,
        origin=stream.origin,
        timestamps=stream.timestamps[keep],
        values=stream.values[keep] if stream.values is not None else None,
        indices=stream.indices[keep] if stream.indices is not None else None,
    ), removed


@contextmanager
def atomic_writer(path):
    """Write to a temp file in the target directory, then rename into place."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x):
    return format(float(x), ".17g")


def write_stream(path, stream, decimal=False):
    """Write a stream back to its capture CSV schema.

    decimal=True keeps sub-microsecond precision (corrected streams);
    the default emits the int64 schema for raw capture data.
    """
    abs_us = stream.origin.epoch_us + stream.timestamps * MICROS_PER_SECOND
    with atomic_writer(path) as fh:
        w = csv.writer(fh)
        if stream.kind == "frame":
            w.writerow(FRAME_HEADER)
            idx = (stream.indices if stream.indices is not None
                   else np.arange(len(stream), dtype=np.int64))
            for i, t in zip(idx, abs_us):
                w.writerow([int(i), _fmt(t) if decimal else int(round(t))])
        else:
            w.writerow(SENSOR_HEADER)
            for t, v in zip(abs_us, stream.values):
                w.writerow([_fmt(t) if decimal else int(round(t)), _fmt(v)])


def write_annotations(path, annotations):
    """Write annotations; timestamps as decimal microseconds (see module doc)."""
    annotations = list(annotations)
    if not annotations:
        raise DataError("refusing to write an empty annotation set")
    with atomic_writer(path) as fh:
        w = csv.writer(fh)
        w.writerow(ANNOTATION_HEADER)
        for a in annotations:
            w.writerow([
                a.frame_index,
                _fmt(a.frame_raw_ts * MICROS_PER_SECOND),
                _fmt(a.frame_ts * MICROS_PER_SECOND),
                _fmt(a.label),
                _fmt(a.sensor_ts * MICROS_PER_SECOND),
            ])


def read_annotations(path):
    """Read an annotation CSV back. sensor_index is not serialized (-1)."""
    from .annotate import AnnotatedFrame

    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ANNOTATION_HEADER:
            raise DataError(
                f"{path}: expected header {','.join(ANNOTATION_HEADER)!r}")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 5:
                raise DataError(f"{path}: malformed row at line {line_no}")
            out.append(AnnotatedFrame(
                frame_index=int(_parse_number(row[0], line_no, "frame_index", path)),
                frame_ts=_parse_number(row[2], line_no, "dejittered_ts_us", path)
                / MICROS_PER_SECOND,
                label=_parse_number(row[3], line_no, "label", path),
                sensor_index=-1,
                sensor_ts=_parse_number(row[4], line_no, "sensor_ts_us", path)
                / MICROS_PER_SECOND,
                frame_raw_ts=_parse_number(row[1], line_no, "frame_ts_us", path)
                / MICROS_PER_SECOND,
            ))
    return out


def write_processed_signal(path, processed):
    """Fig.-5-style CSV of the full-rate signal chain."""
    with atomic_writer(path) as fh:
        w = csv.writer(fh)
        w.writerow(["ts_us", "raw", "smoothed", "filtered"])
        for t, r, s, f in zip(processed.timestamps, processed.raw,
                              processed.smoothed, processed.filtered):
            w.writerow([_fmt(t * MICROS_PER_SECOND), _fmt(r), _fmt(s), _fmt(f)])


def read_processed_signal(path):
    """Read a processed-signal CSV back (times in seconds)."""
    from .sigproc import ProcessedSignal

    cols = ([], [], [], [])
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["ts_us", "raw", "smoothed", "filtered"]:
            raise DataError(f"{path}: expected header 'ts_us,raw,smoothed,filtered'")
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise DataError(f"{path}: malformed row at line {line_no}")
            for col, cell, name in zip(cols, row,
                                       ("ts_us", "raw", "smoothed", "filtered")):
                col.append(_parse_number(cell, line_no, name, path))
    ts, raw, smoothed, filtered = (np.asarray(c, dtype=np.float64) for c in cols)
    return ProcessedSignal(timestamps=ts / MICROS_PER_SECOND, raw=raw,
                           smoothed=smoothed, filtered=filtered)


def write_overlay(path, rows):
    """Long-format overlay table (series, t_us, value)."""
    with atomic_writer(path) as fh:
        w = csv.writer(fh)
        w.writerow(["series", "t_us", "value"])
        for series, t, v in rows:
            w.writerow([series, _fmt(t * MICROS_PER_SECOND), _fmt(v)])
