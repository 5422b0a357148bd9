"""Tests de flujos de spikes, E/S en CSV y sub-flujos aleatorios."""

import numpy as np
import pytest

from models.spikes import Pattern, SpikeStream, merge_streams
from utils.exceptions import ConstraintViolationError, InvalidFileFormatError, MissingColumnsError
from utils.rng import Purpose, master_stream
from utils.spike_csv import SpikeStreamIO


def _random_stream(seed: int, n_events: int = 200, n_afferents: int = 50, duration: float = 1.0) -> SpikeStream:
    rng = np.random.default_rng(seed)
    return SpikeStream.from_unsorted(
        rng.integers(0, n_afferents, n_events), rng.uniform(0, duration, n_events), duration, n_afferents,
    )


class TestSpikeStream:
    def test_arrays_are_read_only(self):
        stream = _random_stream(0)
        with pytest.raises(ValueError):
            stream.times[0] = 0.5

    def test_unsorted_times_rejected(self):
        with pytest.raises(ConstraintViolationError):
            SpikeStream(np.array([0, 1]), np.array([0.2, 0.1]), 1.0, 2)

    def test_out_of_range_rejected(self):
        with pytest.raises(ConstraintViolationError):
            SpikeStream(np.array([0]), np.array([1.5]), 1.0, 2)
        with pytest.raises(ConstraintViolationError):
            SpikeStream(np.array([2]), np.array([0.5]), 1.0, 2)

    def test_select_and_counts(self):
        stream = SpikeStream(np.array([0, 1, 0, 2]), np.array([0.1, 0.2, 0.3, 0.4]), 1.0, 3)
        assert stream.counts().tolist() == [2, 1, 1]
        kept = stream.select(np.array([True, False, True]))
        assert kept.afferents.tolist() == [0, 0, 2]
        assert len(SpikeStream.empty(1.0, 3)) == 0

    def test_pattern_is_a_stream(self):
        pattern = Pattern(np.array([0]), np.array([0.01]), 0.02, 1, pattern_id=3)
        assert isinstance(pattern, SpikeStream)
        assert pattern.pattern_id == 3


class TestMergeStreams:
    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_merge_is_sorted_union(self, seed):
        a, b = _random_stream(seed), _random_stream(seed + 100, n_events=77)
        merged = merge_streams(a, b)
        assert len(merged) == len(a) + len(b)
        assert np.all(np.diff(merged.times) >= 0)
        expected = sorted(zip(np.concatenate([a.times, b.times]), np.concatenate([a.afferents, b.afferents])))
        assert sorted(zip(merged.times, merged.afferents)) == expected

    def test_merge_requires_same_n(self):
        with pytest.raises(ConstraintViolationError):
            merge_streams(_random_stream(0, n_afferents=10), _random_stream(1, n_afferents=20))


class TestSpikeStreamIO:
    def test_write_then_read_is_identity(self, tmp_path):
        stream = _random_stream(5)
        path = SpikeStreamIO.write_csv(stream, tmp_path / "spikes.csv")
        back = SpikeStreamIO.read_csv(path, duration=stream.duration, n_afferents=stream.n_afferents)
        assert back.equals(stream)

    def test_header(self, tmp_path):
        path = SpikeStreamIO.write_csv(_random_stream(6), tmp_path / "s.csv")
        assert path.read_text(encoding="utf-8").splitlines()[0] == "afferent_id,time_s"

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("afferent_id,t\n0,0.1\n", encoding="utf-8")
        with pytest.raises(MissingColumnsError) as exc:
            SpikeStreamIO.read_csv(path)
        assert exc.value.missing_columns == ["time_s"]

    def test_unsorted_file(self, tmp_path):
        path = tmp_path / "unsorted.csv"
        path.write_text("afferent_id,time_s\n0,0.5\n1,0.1\n", encoding="utf-8")
        with pytest.raises(InvalidFileFormatError):
            SpikeStreamIO.read_csv(path, duration=1.0)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidFileFormatError):
            SpikeStreamIO.read_csv(tmp_path / "nada.csv")


class TestRngStream:
    def test_same_path_same_draws(self):
        a = master_stream(42).spawn(Purpose.TRIAL, 3).generator.random(5)
        b = master_stream(42).spawn(Purpose.TRIAL, 3).generator.random(5)
        np.testing.assert_array_equal(a, b)

    def test_purposes_are_independent(self):
        root = master_stream(42)
        a = root.spawn(Purpose.PATTERN, 0).generator.random(5)
        b = root.spawn(Purpose.BACKGROUND, 0).generator.random(5)
        c = root.spawn(Purpose.PATTERN, 1).generator.random(5)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_spawn_many(self):
        streams = master_stream(1).spawn_many(Purpose.CELL, 4)
        assert [s.stream_id for s in streams] == [0, 1, 2, 3]
        assert streams[2].path == (int(Purpose.CELL), 2)
