"""Timestamp de-jittering.

Capture timestamps carry software delays and jitter. The correction maps
each recorded timestamp onto an evenly spaced synthetic grid:

1. estimate the true timestep as the mean gap after excluding outlier gaps
   beyond m standard deviations (single pass),
2. generate grid points anchor + k*T around the mean raw timestamp, covering
   the recording plus a pre-extension delta below the first timestamp,
3. traverse raw timestamps end to start, mapping each to the largest
   non-allocated grid point with an equal or lower value.

A recorded timestamp can only be late, never early, so corrections always
move timestamps down. Interior grid points left unallocated mark dropped
frames/readings and surface as double-width gaps in the corrected stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import allocate_grid
from .errors import DataError, GridUnderflowError


@dataclass(frozen=True)
class DejitterConfig:
    """m: outlier threshold in standard deviations; delta: grid pre-extension
    below the first timestamp, seconds."""
    m: float = 3.0
    delta: float = 0.100

    def __post_init__(self):
        if not self.m > 0:
            raise DataError("m must be positive")
        if self.delta < 0:
            raise DataError("delta must be nonnegative")


@dataclass(frozen=True)
class GapStats:
    """Mean and population standard deviation of consecutive timestamp gaps."""
    mean: float
    std: float
    n: int


@dataclass(frozen=True)
class TimestepEstimate:
    T: float            # mean surviving gap, seconds
    rate: float         # 1/T, Hz
    n_gaps: int
    n_excluded: int
    raw_mean: float     # gap mean before exclusion
    raw_std: float      # gap std before exclusion (population)


@dataclass(frozen=True)
class SyntheticGrid:
    """Evenly spaced timestamp lattice: point(k) = anchor + k*T for
    k_min <= k <= k_max."""
    anchor: float
    T: float
    k_min: int
    k_max: int

    def point(self, k):
        return self.anchor + np.asarray(k) * self.T

    def __len__(self):
        return self.k_max - self.k_min + 1


@dataclass(frozen=True)
class DejitterMapping:
    """One grid index per raw timestamp, strictly increasing."""
    alloc: np.ndarray

    def __len__(self):
        return len(self.alloc)


@dataclass(frozen=True)
class DropReport:
    """Unallocated grid indices strictly between the first and last
    allocated points."""
    dropped_k: np.ndarray
    count: int


@dataclass(frozen=True)
class DejitterResult:
    estimate: TimestepEstimate
    grid: SyntheticGrid
    mapping: DejitterMapping
    corrected: np.ndarray
    drops: DropReport
    gaps_before: GapStats
    gaps_after: GapStats
    config: DejitterConfig = field(default_factory=DejitterConfig)

    @property
    def drop_adjusted_mean(self):
        """Mean gap counting each dropped slot as one extra gap; equals the
        estimated timestep exactly."""
        span_slots = int(self.mapping.alloc[-1] - self.mapping.alloc[0])
        return float((self.corrected[-1] - self.corrected[0]) / span_slots)

    def report(self):
        """De-jitter report dict (stable keys; emitted as JSON by the CLI)."""
        return {
            "T_s": self.estimate.T,
            "rate_hz": self.estimate.rate,
            "n_excluded": self.estimate.n_excluded,
            "delta_s": self.config.delta,
            "drops": [
                {"k": int(k), "t_s": float(self.grid.point(k))}
                for k in self.drops.dropped_k
            ],
            "gaps_before": {"mean_ms": self.gaps_before.mean * 1e3,
                            "std_ms": self.gaps_before.std * 1e3},
            "gaps_after": {"mean_ms": self.gaps_after.mean * 1e3,
                           "std_ms": self.gaps_after.std * 1e3},
            "drop_count": self.drops.count,
            "drop_adjusted_mean_ms": self.drop_adjusted_mean * 1e3,
        }


def _timestamps_of(stream_or_array):
    ts = getattr(stream_or_array, "timestamps", stream_or_array)
    return np.ascontiguousarray(ts, dtype=np.float64)


def timegap_stats(timestamps):
    """Mean/population-std of consecutive gaps. Needs >= 2 timestamps."""
    ts = _timestamps_of(timestamps)
    if len(ts) < 2:
        raise DataError("need at least 2 timestamps for gap statistics")
    gaps = np.diff(ts)
    return GapStats(mean=float(gaps.mean()), std=float(gaps.std()), n=len(gaps))


def robust_timestep(timestamps, m=3.0):
    """Mean timestep after one pass of m-sigma gap exclusion.

    The sampling rate is 1/T; it usually lands slightly below the advertised
    device rate.
    """
    ts = _timestamps_of(timestamps)
    if len(ts) < 3:
        raise DataError("need at least 3 timestamps to estimate the timestep")
    gaps = np.diff(ts)
    mu = float(gaps.mean())
    sigma = float(gaps.std())
    keep = np.abs(gaps - mu) <= m * sigma
    n_excluded = int((~keep).sum())
    if n_excluded == len(gaps):
        raise DataError("timestep estimation degenerate: all gaps excluded")
    T = float(gaps[keep].mean())
    if T <= 0:
        raise DataError("timestep estimation degenerate: nonpositive mean gap")
    return TimestepEstimate(T=T, rate=1.0 / T, n_gaps=len(gaps),
                            n_excluded=n_excluded, raw_mean=mu, raw_std=sigma)


def _floor_index(t, anchor, T):
    """Largest integer k with anchor + k*T <= t, exact under floating point."""
    k = int(np.floor((t - anchor) / T))
    while anchor + k * T > t:
        k -= 1
    while anchor + (k + 1) * T <= t:
        k += 1
    return k


def synthesize_grid(timestamps, T, delta=0.100):
    """Grid anchored at the mean raw timestamp with spacing T, from just
    below (first timestamp - delta) up to the last timestamp."""
    ts = _timestamps_of(timestamps)
    if not T > 0:
        raise DataError("grid timestep must be positive")
    anchor = float(ts.mean())
    k_min = _floor_index(ts[0] - delta, anchor, T)
    k_max = _floor_index(ts[-1], anchor, T)
    return SyntheticGrid(anchor=anchor, T=T, k_min=k_min, k_max=k_max)


def allocate(timestamps, grid):
    """Map each raw timestamp to its synthetic grid index, end to start.

    Each timestamp takes the largest not-yet-allocated grid index whose
    point is <= the timestamp; equality allocates. O(N) via the closed form
    k_i = min(floor_k(t_i), k_{i+1} - 1).
    """
    ts = _timestamps_of(timestamps)
    if len(ts) == 0:
        raise DataError("nothing to allocate")
    alloc = allocate_grid(ts, grid.anchor, grid.T)
    if alloc[0] < grid.k_min:
        bad = int(np.searchsorted(alloc, grid.k_min) - 1)
        raise GridUnderflowError(
            f"grid underflow at raw index {bad}; increase delta")
    return DejitterMapping(alloc=alloc)


def detect_drops(mapping, grid):
    """Unallocated grid indices strictly inside the allocated span."""
    alloc = mapping.alloc
    if alloc[0] < grid.k_min or alloc[-1] > grid.k_max:
        raise DataError("mapping does not lie on the grid")
    full = np.arange(alloc[0], alloc[-1] + 1, dtype=np.int64)
    dropped = np.setdiff1d(full, alloc, assume_unique=True)
    return DropReport(dropped_k=dropped, count=len(dropped))


def dejitter(stream, config=None):
    """Full de-jittering: estimate, grid, allocation, drops, gap stats."""
    cfg = config or DejitterConfig()
    ts = _timestamps_of(stream)
    if len(ts) < 3:
        raise DataError("need at least 3 timestamps to de-jitter")
    est = robust_timestep(ts, m=cfg.m)
    grid = synthesize_grid(ts, est.T, delta=cfg.delta)
    mapping = allocate(ts, grid)
    corrected = grid.point(mapping.alloc)
    drops = detect_drops(mapping, grid)
    return DejitterResult(
        estimate=est,
        grid=grid,
        mapping=mapping,
        corrected=corrected,
        drops=drops,
        gaps_before=timegap_stats(ts),
        gaps_after=timegap_stats(corrected),
        config=cfg,
    )
