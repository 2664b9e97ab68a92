"""Signal chain: Savitzky-Golay smoothing, then a zero-phase Butterworth
bandpass over the heart-rate band. The filtered output is what frames get
annotated with, so the chain must not time-shift features: the bandpass is
applied forward and backward (net zero phase), and the smoother is the
symmetric center-point polynomial fit.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from ._backend import sos_filter
from .errors import DataError


@dataclass(frozen=True)
class SavGolConfig:
    """Center-point least-squares smoothing: odd window, polynomial degree."""
    window: int = 101
    polyorder: int = 2

    def __post_init__(self):
        if self.window % 2 == 0 or self.window < 1:
            raise DataError("savgol window must be odd and positive")
        if not 0 <= self.polyorder < self.window:
            raise DataError("savgol polyorder must satisfy 0 <= p < window")


@dataclass(frozen=True)
class BandpassConfig:
    """Butterworth bandpass: cutoffs in Hz, sampling rate, prototype order.

    The default order-2 prototype doubles to a 4th-order bandpass.
    """
    low_hz: float = 0.7
    high_hz: float = 2.5
    fs_hz: float = 1000.0
    order: int = 2

    def __post_init__(self):
        if not (0 < self.low_hz < self.high_hz < self.fs_hz / 2):
            raise DataError(
                f"bandpass cutoffs must satisfy 0 < {self.low_hz} < "
                f"{self.high_hz} < fs/2 = {self.fs_hz / 2}")
        if self.order < 1:
            raise DataError("bandpass prototype order must be >= 1")


@dataclass(frozen=True)
class BiquadSection:
    """Second-order section, a0 normalized to 1. Poles must be stable."""
    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    def __post_init__(self):
        # Jury criterion for z^2 + a1 z + a2
        if not (abs(self.a2) < 1 and abs(self.a1) < 1 + self.a2):
            raise DataError(
                f"unstable biquad: a1={self.a1}, a2={self.a2}")


@dataclass(frozen=True)
class ProcessedSignal:
    """Label-ready signal: de-jittered timestamps, raw/smoothed/filtered values."""
    timestamps: np.ndarray
    raw: np.ndarray
    smoothed: np.ndarray
    filtered: np.ndarray


def savgol_coefficients(window, polyorder):
    """Convolution weights of the center-point degree-p least-squares fit.

    Solves the normal equations on centered abscissae (partial-pivot LU);
    the weights are symmetric and sum to 1.
    """
    SavGolConfig(window, polyorder)  # validate
    x = np.arange(window, dtype=np.float64) - window // 2
    V = np.vander(x, polyorder + 1, increasing=True)
    e0 = np.zeros(polyorder + 1)
    e0[0] = 1.0
    z = np.linalg.solve(V.T @ V, e0)
    w = V @ z
    if abs(w.sum() - 1.0) > 1e-12:
        raise DataError("savgol weights failed the sum-to-one check")
    return w


def _fit_at(x, y, polyorder, x0):
    """Least-squares degree-p fit of (x, y), evaluated at x0."""
    degree = min(polyorder, len(x) - 1)
    V = np.vander(np.asarray(x, dtype=np.float64) - x0, degree + 1,
                  increasing=True)
    coef, *_ = np.linalg.lstsq(V, y, rcond=None)
    return coef[0]


def savgol_smooth(signal, config=None):
    """Smooth by sliding center-point polynomial fits.

    Interior points are the convolution with the precomputed weights; near
    the edges the fit is redone over the truncated available window (no
    padding, so a polynomial input stays a fixed point everywhere).
    """
    cfg = config or SavGolConfig()
    x = np.ascontiguousarray(signal, dtype=np.float64)
    n = len(x)
    if n < cfg.window:
        raise DataError(f"signal length {n} is shorter than the "
                        f"smoothing window {cfg.window}")
    half = cfg.window // 2
    out = np.empty(n)
    weights = savgol_coefficients(cfg.window, cfg.polyorder)
    out[half:n - half] = np.convolve(x, weights[::-1], mode="valid")
    for i in range(half):
        lo, hi = 0, i + half + 1
        out[i] = _fit_at(np.arange(lo, hi), x[lo:hi], cfg.polyorder, i)
        j = n - 1 - i
        lo, hi = j - half, n
        out[j] = _fit_at(np.arange(lo, hi), x[lo:hi], cfg.polyorder, j)
    return out


def _butter_prototype(order):
    """Left-half-plane poles of the unit-cutoff analog Butterworth lowpass."""
    return [cmath.exp(1j * math.pi * (2 * k + order - 1) / (2 * order))
            for k in range(1, order + 1)]


def design_bandpass(config=None):
    """Analog Butterworth prototype -> bandpass transform -> prewarped
    bilinear transform -> cascaded biquads.

    Sections are ordered by ascending Q of the analog pole pair so the
    cascade is bit-reproducible; the overall gain sits in the first section.
    """
    cfg = config or BandpassConfig()
    fs = cfg.fs_hz
    # prewarp the cutoffs so they map exactly through the bilinear transform
    w1 = 2 * fs * math.tan(math.pi * cfg.low_hz / fs)
    w2 = 2 * fs * math.tan(math.pi * cfg.high_hz / fs)
    bw, w0sq = w2 - w1, w1 * w2
    # lowpass->bandpass: each prototype pole p yields the roots of
    # s^2 - p*bw*s + w0^2; n zeros appear at s = 0
    poles = []
    for p in _butter_prototype(cfg.order):
        pb = p * bw
        disc = cmath.sqrt(pb * pb - 4 * w0sq)
        poles += [(pb + disc) / 2, (pb - disc) / 2]
    gain = bw ** cfg.order

    fs2 = 2.0 * fs
    # bilinear gain: k * prod(fs2 - z) / prod(fs2 - p) over analog zeros/poles
    denom = 1.0 + 0.0j
    for p in poles:
        denom *= fs2 - p
    k_digital = (gain * fs2 ** cfg.order / denom).real

    # group into conjugate pairs; a real prototype pole can yield two real
    # bandpass poles when the band is wide, so pair leftover reals by sort
    pairs = [(p, p.conjugate()) for p in poles if p.imag > 1e-12 * abs(p)]
    reals = sorted(p.real for p in poles if abs(p.imag) <= 1e-12 * abs(p))
    pairs += [(complex(a, 0.0), complex(b, 0.0))
              for a, b in zip(reals[0::2], reals[1::2])]

    def pair_q(pair):
        # Q of the analog pair s^2 + (w0/Q) s + w0^2
        p, q = pair
        return math.sqrt(abs(p * q)) / abs((p + q).real)

    pairs.sort(key=pair_q)

    sections = []
    for i, (p, q) in enumerate(pairs):
        pz = (fs2 + p) / (fs2 - p)
        qz = (fs2 + q) / (fs2 - q)
        a1, a2 = (-(pz + qz)).real, (pz * qz).real
        scale = k_digital if i == 0 else 1.0
        # numerator (z - 1)(z + 1): one grid zero at DC, one at Nyquist
        sections.append(BiquadSection(b0=scale, b1=0.0, b2=-scale,
                                      a1=a1, a2=a2))
    return sections


def _sections_array(sections):
    return np.asarray([[s.b0, s.b1, s.b2, s.a1, s.a2] for s in sections],
                      dtype=np.float64)


def _steady_state_zi(sections, x0):
    """Per-section initial state equal to the steady-state response to a
    constant input x0, propagated through the cascade's DC gains. Suppresses
    the startup step transient so the short odd-reflection padding suffices."""
    zi = np.zeros((len(sections), 2))
    level = float(x0)
    for s, sec in enumerate(sections):
        dc = (sec.b0 + sec.b1 + sec.b2) / (1.0 + sec.a1 + sec.a2)
        z2 = sec.b2 - sec.a2 * dc
        z1 = sec.b1 - sec.a1 * dc + z2
        zi[s, 0] = z1 * level
        zi[s, 1] = z2 * level
        level *= dc
    return zi


def filter_forward(sections, signal):
    """Single causal pass through the cascade (steady-state initialized)."""
    x = np.ascontiguousarray(signal, dtype=np.float64)
    sos = _sections_array(sections)
    return sos_filter(sos, x, _steady_state_zi(sections, x[0] if len(x) else 0.0))


def filtfilt(sections, signal):
    """Zero-phase application: filter, reverse, filter again, reverse.

    The input is extended by odd reflection over 3x the filter order at both
    ends; the extension is removed afterwards.
    """
    x = np.ascontiguousarray(signal, dtype=np.float64)
    pad = 3 * (2 * len(sections))
    if len(x) <= pad:
        raise DataError(
            f"signal length {len(x)} too short for zero-phase filtering "
            f"(needs more than {pad} samples)")
    left = 2 * x[0] - x[1:pad + 1][::-1]
    right = 2 * x[-1] - x[-pad - 1:-1][::-1]
    ext = np.concatenate([left, x, right])
    y = filter_forward(sections, ext)[::-1]
    y = filter_forward(sections, y)[::-1]
    return y[pad:pad + len(x)]


def process_signal(values, timestamps, savgol_config=None, bandpass_config=None):
    """Smoothing then zero-phase bandpass; fs comes from the caller's
    timestep estimate via bandpass_config."""
    ts = np.ascontiguousarray(timestamps, dtype=np.float64)
    raw = np.ascontiguousarray(values, dtype=np.float64)
    if len(ts) != len(raw):
        raise DataError("values and timestamps differ in length")
    smoothed = savgol_smooth(raw, savgol_config)
    filtered = filtfilt(design_bandpass(bandpass_config), smoothed)
    return ProcessedSignal(timestamps=ts, raw=raw, smoothed=smoothed,
                           filtered=filtered)
