"""Synthetic stream generation with known ground truth.

Jittered timestamps are ideal grid times plus nonnegative software delays
(a recorded timestamp is never earlier than its event); slots drop out with
i.i.d. Bernoulli probability. A pulse-like waveform stands in for acquired
ECG. Everything is driven by numpy's seeded PCG64 generator, so identical
inputs reproduce bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

DELAY_MODELS = ("half_normal", "uniform")


@dataclass(frozen=True)
class JitterModel:
    """T_true: ideal timestep (s); delay_scale: sigma of the half-normal or
    the upper bound of the uniform delay (s); drop_rate: per-slot drop
    probability; monotone: clamp timestamps FIFO-style so the stream is a
    valid nondecreasing capture file (the literal event+delay default can
    invert ordering when delays exceed the timestep)."""
    T_true: float
    delay_model: str = "half_normal"
    delay_scale: float = 0.0
    drop_rate: float = 0.0
    seed: int = 0
    monotone: bool = False

    def __post_init__(self):
        if not self.T_true > 0:
            raise DataError("T_true must be positive")
        if self.delay_model not in DELAY_MODELS:
            raise DataError(f"delay_model must be one of {DELAY_MODELS}")
        if self.delay_scale < 0:
            raise DataError("delay_scale must be nonnegative")
        if not 0 <= self.drop_rate < 1:
            raise DataError("drop_rate must be in [0, 1)")


@dataclass(frozen=True)
class SynthTruth:
    """Ground truth: ideal event times of emitted samples plus the dropped
    slot indices. Emitted slots and dropped slots partition the ideal grid."""
    event_times: np.ndarray
    emitted_slots: np.ndarray
    dropped_slots: np.ndarray


def half_normal_scale_for_gap_std(target_std):
    """Delay sigma such that consecutive-gap jitter has the target std.

    Gaps of event+delay streams are T + (d[i+1] - d[i]); the difference of
    two independent half-normals has variance 2*(1 - 2/pi)*sigma^2.
    """
    return target_std / math.sqrt(2.0 * (1.0 - 2.0 / math.pi))


def gen_timestamps(n_ideal, model, dropped_slots=None):
    """Jittered timestamps for n_ideal grid slots.

    raw[i] = event_time[i] + delay[i] per emitted slot. dropped_slots
    overrides the Bernoulli drops with an explicit slot list (test
    injection hook); deterministic for a given (inputs, seed).
    """
    if n_ideal < 3:
        raise DataError("need at least 3 ideal slots")
    rng = np.random.default_rng(model.seed)
    keep = np.ones(n_ideal, dtype=bool)
    if dropped_slots is not None:
        dropped = np.asarray(sorted(set(int(s) for s in dropped_slots)),
                             dtype=np.int64)
        if len(dropped) and (dropped[0] < 0 or dropped[-1] >= n_ideal):
            raise DataError("dropped slot out of range")
        keep[dropped] = False
        rng.random(n_ideal)  # keep the delay draw aligned with Bernoulli mode
    else:
        keep = rng.random(n_ideal) >= model.drop_rate
    if not keep.any():
        raise DataError("all samples dropped")
    slots = np.nonzero(keep)[0].astype(np.int64)
    events = slots * model.T_true
    if model.delay_model == "half_normal":
        delays = np.abs(rng.normal(0.0, model.delay_scale, len(events)))
    else:
        delays = rng.uniform(0.0, model.delay_scale, len(events))
    raw = events + delays
    if model.monotone:
        # FIFO clamp: a sample cannot be timestamped before its predecessor
        raw = np.maximum.accumulate(raw)
    truth = SynthTruth(event_times=events, emitted_slots=slots,
                       dropped_slots=np.nonzero(~keep)[0].astype(np.int64))
    return raw, truth


def gen_pulse_signal(duration_s, fs_hz, hr_bpm, noise_std=0.0, seed=0):
    """Sharp-peaked periodic waveform (fundamental + 2 harmonics) at the
    given heart rate, plus white noise. Stand-in for an acquired ECG."""
    if not fs_hz > 0 or not duration_s > 0:
        raise DataError("fs and duration must be positive")
    n = int(round(duration_s * fs_hz))
    t = np.arange(n) / fs_hz
    f0 = hr_bpm / 60.0
    clean = (np.cos(2 * np.pi * f0 * t)
             + 0.5 * np.cos(2 * np.pi * 2 * f0 * t)
             + 0.25 * np.cos(2 * np.pi * 3 * f0 * t))
    if noise_std > 0:
        rng = np.random.default_rng(seed)
        return clean + rng.normal(0.0, noise_std, n)
    return clean


def pulse_at(times, hr_bpm):
    """The clean pulse waveform evaluated at arbitrary times (used to sample
    the physical signal at the true event instants)."""
    t = np.asarray(times, dtype=np.float64)
    f0 = hr_bpm / 60.0
    return (np.cos(2 * np.pi * f0 * t)
            + 0.5 * np.cos(2 * np.pi * 2 * f0 * t)
            + 0.25 * np.cos(2 * np.pi * 3 * f0 * t))


def sample_pulse_values(event_times, hr_bpm, noise_std=0.0, seed=0):
    """Pulse waveform sampled at the true event instants plus sensor noise.
    The device samples the physical signal on its own clock; only the
    timestamps pick up jitter downstream."""
    values = pulse_at(event_times, hr_bpm)
    if noise_std > 0:
        rng = np.random.default_rng(seed)
        values = values + rng.normal(0.0, noise_std, len(values))
    return values
