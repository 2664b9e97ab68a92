"""Kalman-filter timestamp-correction baseline and method comparison.

Reconstruction of the constant-period Kalman approach this toolkit is
compared against: state (event time, period), transition t <- t + T,
the raw timestamp as the measurement. Heavier timegap jitter degrades it
noticeably, which is exactly what the comparison table demonstrates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kalman_track
from .errors import DataError
from .timebase import DejitterConfig, GapStats, dejitter, robust_timestep, timegap_stats

MONOTONE_EPS = 1e-9


@dataclass(frozen=True)
class KalmanConfig:
    """Process/measurement noise variances (s^2) and the initial period (s).

    Any field left as None is derived from the stream: the initial period
    from the robust timestep T, q_t = (0.1 T)^2, q_T = (0.001 T)^2, and r as
    the raw gap variance.
    """
    q_t: float | None = None
    q_T: float | None = None
    r: float | None = None
    initial_period: float | None = None

    def resolved(self, timestamps):
        est = None
        if self.initial_period is None or self.r is None:
            est = robust_timestep(timestamps)
        T = self.initial_period if self.initial_period is not None else est.T
        q_t = self.q_t if self.q_t is not None else (0.1 * T) ** 2
        q_T = self.q_T if self.q_T is not None else (0.001 * T) ** 2
        r = self.r if self.r is not None else max(est.raw_std ** 2, 1e-18)
        for name, v in (("q_t", q_t), ("q_T", q_T), ("r", r)):
            if not v > 0:
                raise DataError(f"kalman variance {name} must be positive")
        if not T > 0:
            raise DataError("kalman initial period must be positive")
        return KalmanConfig(q_t=q_t, q_T=q_T, r=r, initial_period=T)


def kalman_correct(timestamps, config=None):
    """Filtered event-time sequence, forced nondecreasing.

    Raises DataError with the step index if the recursion goes non-finite.
    """
    ts = np.ascontiguousarray(
        getattr(timestamps, "timestamps", timestamps), dtype=np.float64)
    if len(ts) < 3:
        raise DataError("need at least 3 timestamps for the kalman baseline")
    cfg = (config or KalmanConfig()).resolved(ts)
    out = kalman_track(ts, float(ts[0]), cfg.initial_period,
                       cfg.q_t, cfg.q_T, cfg.r,
                       cfg.r, (0.1 * cfg.initial_period) ** 2)
    finite = np.isfinite(out)
    if not finite.all():
        step = int(np.nonzero(~finite)[0][0])
        raise DataError(f"kalman recursion diverged at step {step}")
    return _enforce_monotone(out)


def _enforce_monotone(out):
    """Clamp t[k] to max(t[k], t[k-1] + eps); annotation needs order."""
    bad = np.nonzero(np.diff(out) < MONOTONE_EPS)[0]
    if len(bad) == 0:
        return out
    vals = out.tolist()
    for i in range(int(bad[0]) + 1, len(vals)):
        floor = vals[i - 1] + MONOTONE_EPS
        if vals[i] < floor:
            vals[i] = floor
    return np.asarray(vals)


@dataclass(frozen=True)
class ComparisonReport:
    """Gap statistics per correction method, comparison-table shaped."""
    raw: GapStats
    kalman: GapStats
    dejitter: GapStats
    theoretical: GapStats           # (estimated T, 0)
    dejitter_drop_adjusted_mean: float
    drop_count: int

    def rows(self):
        """(method, mean_s, std_s) rows in table order. The de-jitter row
        reports the drop-adjusted mean, matching how the method's result
        is quoted against the theoretical optimum."""
        return [
            ("raw", self.raw.mean, self.raw.std),
            ("kalman", self.kalman.mean, self.kalman.std),
            ("dejitter", self.dejitter_drop_adjusted_mean, self.dejitter.std),
            ("theoretical", self.theoretical.mean, self.theoretical.std),
        ]

    def to_dict(self):
        return {
            "rows": [
                {"method": m, "mean_ms": mean * 1e3, "std_ms": std * 1e3}
                for m, mean, std in self.rows()
            ],
            "dejitter_plain_mean_ms": self.dejitter.mean * 1e3,
            "drop_count": self.drop_count,
        }


def compare_methods(timestamps, dejitter_config=None, kalman_config=None):
    """Run both corrections on one stream and tabulate gap statistics."""
    ts = np.ascontiguousarray(
        getattr(timestamps, "timestamps", timestamps), dtype=np.float64)
    raw_stats = timegap_stats(ts)
    kal = timegap_stats(kalman_correct(ts, kalman_config))
    dj = dejitter(ts, dejitter_config or DejitterConfig())
    return ComparisonReport(
        raw=raw_stats,
        kalman=kal,
        dejitter=dj.gaps_after,
        theoretical=GapStats(mean=dj.estimate.T, std=0.0, n=dj.gaps_after.n),
        dejitter_drop_adjusted_mean=dj.drop_adjusted_mean,
        drop_count=dj.drops.count,
    )
