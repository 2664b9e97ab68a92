"""pulsealign command-line front end.

Subcommands wrap the library operations 1:1 on file inputs/outputs:

    stats     gap statistics of a stream CSV (mean/std in ms)
    dejitter  correct one stream's timestamps (optionally masking exclusions)
    compare   raw / kalman / dejitter / theoretical gap-stat table
    filter    smoothing + zero-phase bandpass of a sensor stream
    annotate  join frames to the nearest preceding processed sensor value
    synth     generate synthetic streams with a ground-truth sidecar
    pipeline  the staged composition: dejitter both streams, filter, annotate

`pipeline` literally runs the stage functions on intermediate files in the
output directory, so its artifacts are byte-identical to running the
subcommands in sequence. Every artifact is written to a temporary name and
atomically renamed. Exit codes: 0 success, 1 data error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import annotate as annotate_mod
from . import ingest, synth
from ._backend import backend_name
from .baseline import KalmanConfig, compare_methods
from .errors import DataError
from .ingest import MICROS_PER_SECOND, SampleStream, atomic_writer
from .sigproc import BandpassConfig, SavGolConfig, process_signal
from .timebase import DejitterConfig, dejitter, robust_timestep, timegap_stats


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class PipelineConfig:
    frames_csv: str = ""
    sensor_csv: str = ""
    out_dir: str = "."
    frame_exclusions_csv: str | None = None
    sensor_exclusions_csv: str | None = None
    frame_dejitter: DejitterConfig = field(default_factory=DejitterConfig)
    sensor_dejitter: DejitterConfig = field(default_factory=DejitterConfig)
    savgol: SavGolConfig = field(default_factory=SavGolConfig)
    band_low_hz: float = 0.7
    band_high_hz: float = 2.5
    band_order: int = 2
    kalman: KalmanConfig = field(default_factory=KalmanConfig)


_CONFIG_KEYS = {
    "frames_csv", "sensor_csv", "out_dir", "frame_exclusions_csv",
    "sensor_exclusions_csv", "frame_dejitter", "sensor_dejitter", "savgol",
    "band_low_hz", "band_high_hz", "band_order", "kalman",
}


def load_config(path):
    with open(path) as fh:
        data = json.load(fh)
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise DataError(f"{path}: unknown config keys {sorted(unknown)}")

    def dj(section):
        d = data.get(section, {})
        return DejitterConfig(m=d.get("m", 3.0),
                              delta=d.get("delta_ms", 100.0) / 1e3)

    sg = data.get("savgol", {})
    ka = data.get("kalman", {})
    ip = ka.get("initial_period_ms")
    return PipelineConfig(
        frames_csv=data.get("frames_csv", ""),
        sensor_csv=data.get("sensor_csv", ""),
        out_dir=data.get("out_dir", "."),
        frame_exclusions_csv=data.get("frame_exclusions_csv"),
        sensor_exclusions_csv=data.get("sensor_exclusions_csv"),
        frame_dejitter=dj("frame_dejitter"),
        sensor_dejitter=dj("sensor_dejitter"),
        savgol=SavGolConfig(window=sg.get("window", 101),
                            polyorder=sg.get("polyorder", 2)),
        band_low_hz=data.get("band_low_hz", 0.7),
        band_high_hz=data.get("band_high_hz", 2.5),
        band_order=data.get("band_order", 2),
        kalman=KalmanConfig(q_t=ka.get("q_t"), q_T=ka.get("q_T"),
                            r=ka.get("r"),
                            initial_period=None if ip is None else ip / 1e3),
    )


def _apply_overrides(cfg, args):
    """Command-line flags win over config-file fields."""
    if getattr(args, "m", None) is not None:
        cfg = replace(cfg,
                      frame_dejitter=replace(cfg.frame_dejitter, m=args.m),
                      sensor_dejitter=replace(cfg.sensor_dejitter, m=args.m))
    if getattr(args, "delta_ms", None) is not None:
        d = args.delta_ms / 1e3
        cfg = replace(cfg,
                      frame_dejitter=replace(cfg.frame_dejitter, delta=d),
                      sensor_dejitter=replace(cfg.sensor_dejitter, delta=d))
    if getattr(args, "sg_window", None) is not None:
        cfg = replace(cfg, savgol=replace(cfg.savgol, window=args.sg_window))
    if getattr(args, "sg_order", None) is not None:
        cfg = replace(cfg, savgol=replace(cfg.savgol, polyorder=args.sg_order))
    if getattr(args, "band_low_hz", None) is not None:
        cfg = replace(cfg, band_low_hz=args.band_low_hz)
    if getattr(args, "band_high_hz", None) is not None:
        cfg = replace(cfg, band_high_hz=args.band_high_hz)
    if getattr(args, "order", None) is not None:
        cfg = replace(cfg, band_order=args.order)
    return cfg


def _dejitter_cfg(args):
    return DejitterConfig(
        m=args.m if args.m is not None else 3.0,
        delta=(args.delta_ms if args.delta_ms is not None else 100.0) / 1e3)


def _write_json(path, payload):
    with atomic_writer(path) as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _abs_seconds(stream):
    return stream.origin.epoch_us / MICROS_PER_SECOND + stream.timestamps


# ---------------------------------------------------------------- stages

def stage_dejitter(stream_path, kind, cfg, exclusions_path=None,
                   out_csv=None, report_json=None):
    """Load -> mask -> de-jitter one stream; optionally write the corrected
    stream (decimal microseconds) and the JSON report."""
    stream = ingest.load_stream(stream_path, kind)
    removed = 0
    if exclusions_path:
        stream, removed = ingest.apply_exclusions(
            stream, ingest.load_exclusions(exclusions_path))
    result = dejitter(stream.timestamps, cfg)
    corrected = SampleStream(kind=kind, origin=stream.origin,
                             timestamps=result.corrected,
                             values=stream.values, indices=stream.indices)
    report = dict(result.report())
    report["n_samples"] = len(stream)
    report["removed_by_exclusions"] = removed
    if out_csv:
        ingest.write_stream(out_csv, corrected, decimal=True)
    if report_json:
        _write_json(report_json, report)
    return corrected, result, report


def stage_filter(sensor_path, savgol_cfg, band_low, band_high, band_order,
                 out_csv=None):
    """Filter a (de-jittered) sensor stream; fs comes from its timestep."""
    stream = ingest.load_stream(sensor_path, "sensor")
    est = robust_timestep(stream.timestamps)
    bp = BandpassConfig(low_hz=band_low, high_hz=band_high,
                        fs_hz=est.rate, order=band_order)
    processed = process_signal(stream.values, _abs_seconds(stream),
                               savgol_cfg, bp)
    if out_csv:
        ingest.write_processed_signal(out_csv, processed)
    return processed, est


def stage_annotate(frames_path, processed_path, raw_frames_path=None,
                   out_csv=None, overlay_csv=None):
    """Join de-jittered frames to the processed signal (absolute time base)."""
    frames = ingest.load_stream(frames_path, "frame")
    processed = ingest.read_processed_signal(processed_path)
    frame_ts = _abs_seconds(frames)
    raw_ts = None
    if raw_frames_path:
        raw_stream = ingest.load_stream(raw_frames_path, "frame")
        raw_abs = _abs_seconds(raw_stream)
        by_index = dict(zip(raw_stream.indices.tolist(), raw_abs.tolist()))
        try:
            raw_ts = np.asarray([by_index[int(i)] for i in frames.indices])
        except KeyError as exc:
            raise DataError(
                f"frame index {exc.args[0]} not present in {raw_frames_path}")
    annotations, skipped = annotate_mod.annotate_frames(
        frame_ts, processed, frame_indices=frames.indices, frame_raw_ts=raw_ts)
    if out_csv:
        ingest.write_annotations(out_csv, annotations)
    if overlay_csv:
        ingest.write_overlay(overlay_csv,
                             annotate_mod.overlay_export(annotations, processed))
    return annotations, skipped


def run_pipeline(cfg):
    """Clean -> de-jitter -> filter -> annotate, through intermediate files.

    Writes the corrected streams, both de-jitter reports, the processed
    signal, annotations, the overlay table, and a summary JSON into
    cfg.out_dir. Raises DataError (or OSError) tagged with the failing stage.
    """
    os.makedirs(cfg.out_dir, exist_ok=True)
    paths = pipeline_paths(cfg.out_dir)

    def stage(name, fn, *a, **kw):
        try:
            return fn(*a, **kw)
        except (DataError, OSError, ValueError) as exc:
            raise DataError(f"stage {name}: {exc}") from exc

    _, f_result, f_report = stage(
        "dejitter-frames", stage_dejitter, cfg.frames_csv, "frame",
        cfg.frame_dejitter, cfg.frame_exclusions_csv,
        paths["frames_dejittered"], paths["frame_report"])
    _, s_result, s_report = stage(
        "dejitter-sensor", stage_dejitter, cfg.sensor_csv, "sensor",
        cfg.sensor_dejitter, cfg.sensor_exclusions_csv,
        paths["sensor_dejittered"], paths["sensor_report"])
    _, est = stage(
        "filter", stage_filter, paths["sensor_dejittered"], cfg.savgol,
        cfg.band_low_hz, cfg.band_high_hz, cfg.band_order,
        paths["processed"])
    annotations, skipped = stage(
        "annotate", stage_annotate, paths["frames_dejittered"],
        paths["processed"], cfg.frames_csv,
        paths["annotations"], paths["overlay"])

    def table_row(report):
        return {
            "raw": report["gaps_before"],
            "dejittered": report["gaps_after"],
            "drop_adjusted_mean_ms": report["drop_adjusted_mean_ms"],
            "theoretical": {"mean_ms": report["T_s"] * 1e3, "std_ms": 0.0},
            "drop_count": report["drop_count"],
        }

    summary = {
        "backend": backend_name(),
        "gap_statistics": {"frame": table_row(f_report),
                           "sensor": table_row(s_report)},
        "sensor_rate_hz": est.rate,
        "annotations": {"count": len(annotations), "skipped_head": skipped},
        "artifacts": paths,
    }
    stage("report", _write_json, paths["summary"], summary)
    return summary


def pipeline_paths(out_dir):
    names = {
        "frames_dejittered": "frames_dejittered.csv",
        "sensor_dejittered": "sensor_dejittered.csv",
        "frame_report": "frame_dejitter_report.json",
        "sensor_report": "sensor_dejitter_report.json",
        "processed": "processed_signal.csv",
        "annotations": "annotations.csv",
        "overlay": "overlay.csv",
        "summary": "summary.json",
    }
    return {k: os.path.join(out_dir, v) for k, v in names.items()}


# ------------------------------------------------------------- commands

def cmd_stats(args):
    stream = ingest.load_stream(args.stream, args.kind)
    stats = timegap_stats(stream.timestamps)
    print("mean_ms std_ms n_gaps")
    print(f"{stats.mean * 1e3:.3f} {stats.std * 1e3:.3f} {stats.n}")
    return 0


def cmd_dejitter(args):
    _, result, report = stage_dejitter(
        args.stream, args.kind, _dejitter_cfg(args),
        exclusions_path=args.exclusions, out_csv=args.out,
        report_json=args.report)
    print(f"T_ms={report['T_s'] * 1e3:.3f} rate_hz={report['rate_hz']:.3f} "
          f"n_excluded={report['n_excluded']} drops={report['drop_count']} "
          f"std_before_ms={report['gaps_before']['std_ms']:.3f} "
          f"std_after_ms={report['gaps_after']['std_ms']:.3f}")
    if args.report_drops:
        for d in report["drops"]:
            print(f"drop k={d['k']} t_s={d['t_s']:.6f}")
    return 0


def cmd_compare(args):
    stream = ingest.load_stream(args.stream, args.kind)
    kalman_cfg = KalmanConfig()
    if args.config:
        kalman_cfg = load_config(args.config).kalman
    report = compare_methods(stream.timestamps, _dejitter_cfg(args), kalman_cfg)
    lines = ["method,mean_ms,std_ms"]
    lines += [f"{m},{mean * 1e3:.3f},{std * 1e3:.3f}"
              for m, mean, std in report.rows()]
    text = "\n".join(lines) + "\n"
    if args.out:
        with atomic_writer(args.out) as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.json:
        _write_json(args.json, report.to_dict())
    return 0


def cmd_filter(args):
    cfg = load_config(args.config) if args.config else PipelineConfig()
    cfg = _apply_overrides(cfg, args)
    _, est = stage_filter(args.stream, cfg.savgol, cfg.band_low_hz,
                          cfg.band_high_hz, cfg.band_order, out_csv=args.out)
    print(f"fs_hz={est.rate:.3f} out={args.out}")
    return 0


def cmd_annotate(args):
    annotations, skipped = stage_annotate(
        args.frames, args.processed, raw_frames_path=args.raw_frames,
        out_csv=args.out, overlay_csv=args.overlay)
    print(f"annotations={len(annotations)} skipped_head={skipped}")
    return 0


def cmd_synth(args):
    target_std = args.jitter_std_ms / 1e3
    if args.delay_model == "half_normal":
        scale = synth.half_normal_scale_for_gap_std(target_std)
    else:
        # uniform [0, J] delay differences have std J/sqrt(6)
        scale = target_std * np.sqrt(6.0)
    model = synth.JitterModel(
        T_true=1.0 / args.rate_hz, delay_model=args.delay_model,
        delay_scale=scale, drop_rate=args.drop_rate, seed=args.seed,
        monotone=not args.no_monotone)
    raw, truth = synth.gen_timestamps(args.n, model)
    origin = ingest.StreamOrigin(args.epoch_us)
    if args.kind == "frame":
        stream = SampleStream(kind="frame", origin=origin, timestamps=raw,
                              indices=np.arange(len(raw)))
    else:
        values = synth.sample_pulse_values(truth.event_times, args.hr_bpm,
                                           args.noise_std, args.seed)
        stream = SampleStream(kind="sensor", origin=origin, timestamps=raw,
                              values=values)
    ingest.write_stream(args.out, stream)
    if args.truth:
        _write_json(args.truth, {
            "T_true_s": model.T_true,
            "n_ideal": args.n,
            "seed": args.seed,
            "delay_model": model.delay_model,
            "delay_scale_s": model.delay_scale,
            "drop_rate": args.drop_rate,
            "monotone": model.monotone,
            "epoch_us": args.epoch_us,
            "hr_bpm": args.hr_bpm if args.kind == "sensor" else None,
            "dropped_slots": truth.dropped_slots.tolist(),
        })
    print(f"wrote {len(raw)} samples to {args.out} "
          f"(dropped {len(truth.dropped_slots)} of {args.n} slots)")
    return 0


def cmd_pipeline(args):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = PipelineConfig()
    if args.frames:
        cfg = replace(cfg, frames_csv=args.frames)
    if args.sensor:
        cfg = replace(cfg, sensor_csv=args.sensor)
    if args.out_dir:
        cfg = replace(cfg, out_dir=args.out_dir)
    cfg = _apply_overrides(cfg, args)
    if not cfg.frames_csv or not cfg.sensor_csv:
        raise DataError("pipeline needs frames and sensor CSV paths "
                        "(--frames/--sensor or config file)")
    summary = run_pipeline(cfg)
    counts = summary["annotations"]
    print(f"pipeline ok: {counts['count']} annotations "
          f"({counts['skipped_head']} frames before first sensor sample); "
          f"artifacts in {cfg.out_dir}")
    return 0


# ---------------------------------------------------------------- parser

def _add_dejitter_flags(p):
    p.add_argument("--m", type=float, default=None,
                   help="outlier threshold in standard deviations (default 3)")
    p.add_argument("--delta-ms", type=float, default=None,
                   help="grid pre-extension before the first timestamp "
                        "(default 100)")


def _add_filter_flags(p):
    p.add_argument("--sg-window", type=int, default=None,
                   help="Savitzky-Golay window length (odd, default 101)")
    p.add_argument("--sg-order", type=int, default=None,
                   help="Savitzky-Golay polynomial degree (default 2)")
    p.add_argument("--band-low-hz", type=float, default=None,
                   help="bandpass low cutoff (default 0.7)")
    p.add_argument("--band-high-hz", type=float, default=None,
                   help="bandpass high cutoff (default 2.5)")
    p.add_argument("--order", type=int, default=None,
                   help="Butterworth prototype order (default 2)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pulsealign",
        description="Timestamp de-jittering, signal filtering, and "
                    "frame annotation for camera + sensor recordings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="gap statistics of a stream CSV")
    p.add_argument("stream")
    p.add_argument("--kind", choices=["frame", "sensor"], required=True)
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("dejitter", help="correct one stream's timestamps")
    p.add_argument("stream")
    p.add_argument("--kind", choices=["frame", "sensor"], required=True)
    p.add_argument("--exclusions", help="exclusion CSV (stream-relative us)")
    p.add_argument("--out", help="corrected stream CSV (decimal us)")
    p.add_argument("--report", help="de-jitter report JSON")
    p.add_argument("--report-drops", action="store_true",
                   help="print one line per detected drop")
    _add_dejitter_flags(p)
    p.set_defaults(fn=cmd_dejitter)

    p = sub.add_parser("compare",
                       help="raw/kalman/dejitter/theoretical comparison")
    p.add_argument("stream")
    p.add_argument("--kind", choices=["frame", "sensor"], required=True)
    p.add_argument("--config", help="pipeline config JSON (kalman section)")
    p.add_argument("--out", help="write the CSV table here instead of stdout")
    p.add_argument("--json", help="write the full-precision report JSON here")
    _add_dejitter_flags(p)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("filter", help="smooth + bandpass a sensor stream")
    p.add_argument("stream", help="sensor CSV (ideally de-jittered)")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--out", required=True, help="processed-signal CSV")
    _add_filter_flags(p)
    p.set_defaults(fn=cmd_filter)

    p = sub.add_parser("annotate",
                       help="label frames with the nearest preceding "
                            "processed sensor value")
    p.add_argument("frames", help="de-jittered frame stream CSV")
    p.add_argument("processed", help="processed-signal CSV from `filter`")
    p.add_argument("--raw-frames",
                   help="original capture CSV (fills the raw frame_ts_us "
                        "column; joined on the index column)")
    p.add_argument("--out", required=True, help="annotation CSV")
    p.add_argument("--overlay", help="long-format overlay CSV")
    p.set_defaults(fn=cmd_annotate)

    p = sub.add_parser("synth", help="generate a synthetic stream")
    p.add_argument("--kind", choices=["frame", "sensor"], required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="ground-truth sidecar JSON")
    p.add_argument("--n", type=int, required=True, help="ideal slot count")
    p.add_argument("--rate-hz", type=float, required=True)
    p.add_argument("--jitter-std-ms", type=float, default=0.0,
                   help="target raw gap standard deviation")
    p.add_argument("--delay-model", choices=list(synth.DELAY_MODELS),
                   default="half_normal")
    p.add_argument("--drop-rate", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epoch-us", type=int, default=1_000_000)
    p.add_argument("--no-monotone", action="store_true",
                   help="emit literal event+delay timestamps even if that "
                        "breaks monotonicity (such files may not load)")
    p.add_argument("--hr-bpm", type=float, default=72.0)
    p.add_argument("--noise-std", type=float, default=0.0)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("pipeline", help="full clean/dejitter/filter/annotate run")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--frames", help="frame capture CSV")
    p.add_argument("--sensor", help="sensor capture CSV")
    p.add_argument("--out-dir", help="artifact directory")
    _add_dejitter_flags(p)
    _add_filter_flags(p)
    p.set_defaults(fn=cmd_pipeline)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (DataError, OSError) as exc:
        print(f"pulsealign: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
