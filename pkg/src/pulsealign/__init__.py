"""pulsealign: align camera frames with physiological sensor readings.

Turns raw, jittery, drop-afflicted frame and sensor recordings into a
time-aligned, per-frame-annotated dataset: timestamp de-jittering onto a
synthetic grid, Savitzky-Golay smoothing plus a zero-phase Butterworth
bandpass, nearest-preceding-sample frame labeling, and a Kalman-filter
baseline for comparison.
"""

from ._backend import USING_COMPILED, backend_name
from .annotate import AnnotatedFrame, annotate_brute, annotate_frames, overlay_export
from .baseline import ComparisonReport, KalmanConfig, compare_methods, kalman_correct
from .errors import DataError, GridUnderflowError
from .ingest import (
    ExclusionList,
    SampleStream,
    StreamOrigin,
    apply_exclusions,
    load_exclusions,
    load_stream,
    read_annotations,
    write_annotations,
    write_stream,
)
from .sigproc import (
    BandpassConfig,
    BiquadSection,
    ProcessedSignal,
    SavGolConfig,
    design_bandpass,
    filtfilt,
    process_signal,
    savgol_coefficients,
    savgol_smooth,
)
from .synth import JitterModel, SynthTruth, gen_pulse_signal, gen_timestamps
from .timebase import (
    DejitterConfig,
    DejitterResult,
    DropReport,
    GapStats,
    SyntheticGrid,
    TimestepEstimate,
    allocate,
    dejitter,
    detect_drops,
    robust_timestep,
    synthesize_grid,
    timegap_stats,
)

__version__ = "0.1.0"
