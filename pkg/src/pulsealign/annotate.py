"""Per-frame labeling: each camera frame takes the processed sensor value
with the greatest timestamp not after the frame's timestamp.

Sensor streams run much faster than cameras, so this is a downsampling
as-of join. A cursor into the sensor stream advances monotonically across
frames, bounding total work by frames + sensor samples; the quadratic
per-frame scan is kept as the correctness oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import cursor_join
from .errors import DataError


@dataclass(frozen=True)
class AnnotatedFrame:
    """One camera frame joined with its nearest-preceding sensor value.

    frame_ts is the de-jittered frame timestamp; frame_raw_ts keeps the
    recorded one for the annotation file (equal when no raw is supplied).
    sensor_index is -1 on frames read back from CSV (not serialized).
    """
    frame_index: int
    frame_ts: float
    label: float
    sensor_index: int
    sensor_ts: float
    frame_raw_ts: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.frame_raw_ts is None:
            object.__setattr__(self, "frame_raw_ts", self.frame_ts)


def _check_strictly_increasing(ts, what):
    if len(ts) and (np.diff(ts) <= 0).any():
        raise DataError(f"{what} timestamps must be strictly increasing")


def _build(frame_ts, sensor, idx, frame_indices, frame_raw_ts):
    filtered = sensor.filtered
    sensor_ts = sensor.timestamps
    out = []
    for i, j in enumerate(idx):
        if j < 0:
            continue
        out.append(AnnotatedFrame(
            frame_index=int(frame_indices[i]),
            frame_ts=float(frame_ts[i]),
            label=float(filtered[j]),
            sensor_index=int(j),
            sensor_ts=float(sensor_ts[j]),
            frame_raw_ts=float(frame_raw_ts[i]),
        ))
    return out


def annotate_frames(frame_ts, sensor, frame_indices=None, frame_raw_ts=None,
                    return_visits=False):
    """Cursor-based annotation of every frame.

    Returns (annotations, skipped_head); frames before the first sensor
    sample are skipped and counted. With return_visits=True a third element
    reports how many sensor elements the cursor inspected.
    """
    frame_ts = np.ascontiguousarray(frame_ts, dtype=np.float64)
    sensor_ts = np.ascontiguousarray(sensor.timestamps, dtype=np.float64)
    _check_strictly_increasing(frame_ts, "frame")
    _check_strictly_increasing(sensor_ts, "sensor")
    idx, skipped, visits = cursor_join(frame_ts, sensor_ts)
    if skipped == len(frame_ts):
        raise DataError("no frame has any preceding sensor sample")
    if frame_indices is None:
        frame_indices = np.arange(len(frame_ts))
    if frame_raw_ts is None:
        frame_raw_ts = frame_ts
    annotations = _build(frame_ts, sensor, idx, frame_indices, frame_raw_ts)
    if return_visits:
        return annotations, int(skipped), int(visits)
    return annotations, int(skipped)


def annotate_brute(frame_ts, sensor, frame_indices=None, frame_raw_ts=None):
    """Reference implementation: full sensor scan per frame, O(n*m)."""
    frame_ts = np.ascontiguousarray(frame_ts, dtype=np.float64)
    sensor_ts = np.ascontiguousarray(sensor.timestamps, dtype=np.float64)
    _check_strictly_increasing(frame_ts, "frame")
    _check_strictly_increasing(sensor_ts, "sensor")
    idx = np.empty(len(frame_ts), dtype=np.int64)
    for i, ft in enumerate(frame_ts):
        candidates = np.nonzero(sensor_ts <= ft)[0]
        idx[i] = candidates[-1] if len(candidates) else -1
    if (idx < 0).all():
        raise DataError("no frame has any preceding sensor sample")
    if frame_indices is None:
        frame_indices = np.arange(len(frame_ts))
    if frame_raw_ts is None:
        frame_raw_ts = frame_ts
    return _build(frame_ts, sensor, idx, frame_indices, frame_raw_ts)


def overlay_export(annotations, sensor):
    """Long-format rows overlaying the full-rate filtered signal against the
    per-frame labels, for the downsampling-alignment eyeball check."""
    annotations = list(annotations)
    if not annotations:
        raise DataError("no annotations to export")
    rows = [("sensor", float(t), float(v))
            for t, v in zip(sensor.timestamps, sensor.filtered)]
    rows.extend(("frame_labels", a.frame_ts, a.label) for a in annotations)
    return rows
