import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pulsealign.annotate import AnnotatedFrame
from pulsealign.errors import DataError
from pulsealign.ingest import (
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


def write_frame_csv(path, rows):
    path.write_text("index,ts_us\n" + "".join(f"{i},{t}\n" for i, t in rows))


def write_sensor_csv(path, rows):
    path.write_text("ts_us,value\n" + "".join(f"{t},{v}\n" for t, v in rows))


class TestLoadStream:
    def test_origin_normalization(self, tmp_path):
        p = tmp_path / "f.csv"
        write_frame_csv(p, [(0, 1_000_000), (1, 1_033_333)])
        s = load_stream(p, "frame")
        assert s.origin.epoch_us == 1_000_000
        assert s.timestamps[0] == 0.0
        assert s.timestamps[1] == pytest.approx(0.033333, abs=1e-12)
        assert list(s.indices) == [0, 1]

    def test_decreasing_timestamp_reports_line(self, tmp_path):
        p = tmp_path / "f.csv"
        write_frame_csv(p, [(0, 5), (1, 3)])
        with pytest.raises(DataError, match="decreasing timestamp at line 3"):
            load_stream(p, "frame")

    def test_malformed_row_reports_line(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("ts_us,value\n100,1.0\nnot_a_number,2.0\n")
        with pytest.raises(DataError, match="line 3"):
            load_stream(p, "sensor")

    def test_wrong_field_count(self, tmp_path):
        p = tmp_path / "s.csv"
        p.write_text("ts_us,value\n100\n")
        with pytest.raises(DataError, match="line 2"):
            load_stream(p, "sensor")

    def test_too_few_samples(self, tmp_path):
        p = tmp_path / "f.csv"
        write_frame_csv(p, [(0, 5)])
        with pytest.raises(DataError, match="fewer than 2"):
            load_stream(p, "frame")

    def test_wrong_header(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("ts_us,value\n1,2\n3,4\n")
        with pytest.raises(DataError, match="expected header"):
            load_stream(p, "frame")

    def test_ecg_round_trip_bit_exact(self, tmp_path):
        # 1200 rows at ~1 ms spacing, values preserved through write/read
        rng = np.random.default_rng(3)
        ts_us = 7_000_000 + np.cumsum(rng.integers(900, 1100, 1200))
        values = rng.normal(0.0, 1.5, 1200)
        stream = SampleStream(
            kind="sensor", origin=StreamOrigin(int(ts_us[0])),
            timestamps=(ts_us - ts_us[0]) / 1e6, values=values)
        p = tmp_path / "ecg.csv"
        write_stream(p, stream)
        back = load_stream(p, "sensor")
        assert back.origin.epoch_us == int(ts_us[0])
        # integer-microsecond storage round-trips timestamps exactly
        us_back = back.origin.epoch_us + np.rint(back.timestamps * 1e6)
        assert np.array_equal(us_back.astype(np.int64), ts_us)
        assert np.array_equal(back.values, values)

    def test_gaps_survive_normalization(self, tmp_path):
        # origin normalization never changes a timegap
        p = tmp_path / "f.csv"
        ts_us = [123_456_789, 123_490_122, 123_523_455, 123_556_788]
        write_frame_csv(p, list(enumerate(ts_us)))
        s = load_stream(p, "frame")
        raw_gaps = np.diff(np.asarray(ts_us)) * 1e-6
        assert np.allclose(np.diff(s.timestamps), raw_gaps, atol=1e-12)


class TestExclusions:
    def test_interval_membership(self):
        stream = SampleStream(
            kind="frame", origin=StreamOrigin(0),
            timestamps=np.array([0.0, 1.0, 2.0, 3.0]))
        out, removed = apply_exclusions(
            stream, ExclusionList([(0.5, 2.5)]))
        assert list(out.timestamps) == [0.0, 3.0]
        assert removed == 2

    def test_empty_exclusions_identity(self):
        stream = SampleStream(
            kind="frame", origin=StreamOrigin(0),
            timestamps=np.array([0.0, 1.0, 2.0]))
        out, removed = apply_exclusions(stream, ExclusionList())
        assert removed == 0
        assert np.array_equal(out.timestamps, stream.timestamps)

    def test_half_open_boundary(self):
        # a sample exactly at `end` is retained, one at `start` is dropped
        stream = SampleStream(
            kind="frame", origin=StreamOrigin(0),
            timestamps=np.array([0.0, 1.0, 2.0, 3.0]))
        out, removed = apply_exclusions(stream, ExclusionList([(1.0, 2.0)]))
        assert list(out.timestamps) == [0.0, 2.0, 3.0]
        assert removed == 1

    def test_overlapping_intervals_merge(self):
        excl = ExclusionList([(1.0, 2.0), (1.5, 3.0), (3.0, 4.0)])
        assert excl.intervals.shape == (1, 2)
        assert excl.intervals[0, 0] == 1.0 and excl.intervals[0, 1] == 4.0

    def test_invalid_interval(self):
        with pytest.raises(DataError, match="start >= end"):
            ExclusionList([(2.0, 1.0)])

    def test_result_too_short(self):
        stream = SampleStream(
            kind="frame", origin=StreamOrigin(0),
            timestamps=np.array([0.0, 1.0, 2.0]))
        with pytest.raises(DataError, match="fewer than 2"):
            apply_exclusions(stream, ExclusionList([(0.5, 5.0)]))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_matches_predicate_oracle(self, seed):
        rng = np.random.default_rng(seed)
        ts = np.sort(rng.uniform(0, 100, 60))
        pairs = np.sort(rng.uniform(0, 100, (4, 2)), axis=1)
        pairs = pairs[pairs[:, 0] < pairs[:, 1]]
        excl = ExclusionList(pairs)
        stream = SampleStream(kind="frame", origin=StreamOrigin(0),
                              timestamps=ts)
        keep_oracle = np.array(
            [not any(s <= t < e for s, e in pairs) for t in ts])
        if keep_oracle.sum() < 2:
            return
        out, removed = apply_exclusions(stream, excl)
        assert np.array_equal(out.timestamps, ts[keep_oracle])
        assert removed == int((~keep_oracle).sum())

    def test_idempotent(self):
        rng = np.random.default_rng(11)
        ts = np.sort(rng.uniform(0, 50, 40))
        excl = ExclusionList([(3.0, 7.0), (20.0, 21.5)])
        stream = SampleStream(kind="frame", origin=StreamOrigin(0),
                              timestamps=ts)
        once, r1 = apply_exclusions(stream, excl)
        twice, r2 = apply_exclusions(once, excl)
        assert np.array_equal(once.timestamps, twice.timestamps)
        assert r2 == 0

    def test_load_exclusions(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("start_us,end_us\n500000,2500000\n2000000,3000000\n")
        excl = load_exclusions(p)
        assert excl.intervals.shape == (1, 2)
        assert excl.intervals[0, 0] == pytest.approx(0.5)
        assert excl.intervals[0, 1] == pytest.approx(3.0)


class TestAnnotationsIO:
    def _annotations(self):
        return [
            AnnotatedFrame(frame_index=i, frame_ts=0.1 * i + 0.013,
                           label=np.sin(i * 0.7), sensor_index=5 * i,
                           sensor_ts=0.1 * i + 0.0129,
                           frame_raw_ts=0.1 * i + 0.019)
            for i in range(3)
        ]

    def test_row_count(self, tmp_path):
        p = tmp_path / "a.csv"
        write_annotations(p, self._annotations())
        assert len(p.read_text().strip().splitlines()) == 4  # header + 3

    def test_round_trip(self, tmp_path):
        p = tmp_path / "a.csv"
        annos = self._annotations()
        write_annotations(p, annos)
        back = read_annotations(p)
        assert len(back) == len(annos)
        for a, b in zip(annos, back):
            assert b.frame_index == a.frame_index
            assert b.frame_ts == pytest.approx(a.frame_ts, abs=1e-9)
            assert b.frame_raw_ts == pytest.approx(a.frame_raw_ts, abs=1e-9)
            assert b.sensor_ts == pytest.approx(a.sensor_ts, abs=1e-9)
            assert b.label == pytest.approx(a.label, abs=1e-9)
            assert b.sensor_index == -1  # not serialized

    def test_empty_errors(self, tmp_path):
        with pytest.raises(DataError, match="empty"):
            write_annotations(tmp_path / "a.csv", [])


class TestSampleStreamInvariants:
    def test_rejects_decreasing(self):
        with pytest.raises(DataError):
            SampleStream(kind="frame", origin=StreamOrigin(0),
                         timestamps=np.array([0.0, 2.0, 1.0]))

    def test_rejects_nonfinite_values(self):
        with pytest.raises(DataError):
            SampleStream(kind="sensor", origin=StreamOrigin(0),
                         timestamps=np.array([0.0, 1.0]),
                         values=np.array([1.0, np.nan]))

    def test_rejects_length_mismatch(self):
        with pytest.raises(DataError):
            SampleStream(kind="sensor", origin=StreamOrigin(0),
                         timestamps=np.array([0.0, 1.0]),
                         values=np.array([1.0]))
