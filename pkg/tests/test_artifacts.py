"""Tests for fairweight.artifacts: locks, atomic writers and run directories."""

import threading
import time

import pytest

from fairweight.artifacts import (
    FileLock,
    create_run_dir,
    fmt,
    locked_read_json,
    locked_write_csv,
    locked_write_json,
    read_csv_dicts,
    require_files,
)
from fairweight.errors import MissingArtifacts, RunExists


class TestFileLock:
    def test_lock_file_sits_next_to_target(self, tmp_path):
        lock = FileLock(tmp_path / "weights.csv")
        assert lock.lock_path == tmp_path / "weights.csv.lock"

    def test_exclusive_waits_for_holder(self, tmp_path):
        target = tmp_path / "plan.json"
        events = []

        def hold():
            with FileLock(target):
                events.append("held")
                time.sleep(0.3)
                events.append("released")

        t = threading.Thread(target=hold)
        t.start()
        time.sleep(0.05)
        with FileLock(target, timeout=2.0):
            events.append("acquired")
        t.join()
        assert events.index("released") < events.index("acquired")

    def test_timeout_raises(self, tmp_path):
        target = tmp_path / "plan.json"

        def hold():
            with FileLock(target):
                time.sleep(0.8)

        t = threading.Thread(target=hold)
        t.start()
        time.sleep(0.05)
        with pytest.raises(TimeoutError):
            with FileLock(target, timeout=0.1):
                pass
        t.join()

    def test_shared_locks_coexist(self, tmp_path):
        target = tmp_path / "metrics.json"
        with FileLock(target, exclusive=False):
            with FileLock(target, exclusive=False, timeout=0.5):
                pass


class TestJsonWriters:
    def test_round_trip_with_trailing_newline(self, tmp_path):
        path = tmp_path / "metrics.json"
        locked_write_json(path, {"acc": 0.75, "warnings": []})
        assert path.read_text().endswith("}\n")
        assert locked_read_json(path) == {"acc": 0.75, "warnings": []}

    def test_missing_or_corrupt_returns_default(self, tmp_path):
        assert locked_read_json(tmp_path / "none.json", default={}) == {}
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert locked_read_json(bad, default="fallback") == "fallback"

    def test_no_temp_files_left(self, tmp_path):
        locked_write_json(tmp_path / "a.json", {"x": 1})
        assert list(tmp_path.glob("*.tmp")) == []

    def test_concurrent_writers_leave_valid_json(self, tmp_path):
        path = tmp_path / "shared.json"
        errors = []

        def writer(k):
            try:
                for i in range(10):
                    locked_write_json(path, {"writer": k, "i": i})
            except Exception as e:  # pragma: no cover
                errors.append(e)

        threads = [threading.Thread(target=writer, args=(k,)) for k in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        assert set(locked_read_json(path)) == {"writer", "i"}


class TestCsvWriters:
    def test_header_and_rows(self, tmp_path):
        path = tmp_path / "weights.csv"
        locked_write_csv(path, ["index", "weight"], [[0, "1"], [1, "0.5"]])
        assert path.read_text() == "index,weight\n0,1\n1,0.5\n"
        assert read_csv_dicts(path) == [{"index": "0", "weight": "1"}, {"index": "1", "weight": "0.5"}]

    def test_read_missing_is_empty(self, tmp_path):
        assert read_csv_dicts(tmp_path / "none.csv") == []


class TestRunDirectories:
    def test_create_refuses_existing(self, tmp_path):
        run = create_run_dir(tmp_path / "run1")
        assert run.is_dir()
        with pytest.raises(RunExists):
            create_run_dir(tmp_path / "run1")

    def test_require_files_lists_missing(self, tmp_path):
        (tmp_path / "config.json").write_text("{}")
        with pytest.raises(MissingArtifacts, match="metrics_after.json"):
            require_files(tmp_path, ["config.json", "metrics_after.json"])
        assert require_files(tmp_path, ["config.json"]) == tmp_path


class TestFmt:
    def test_round_trips_doubles(self):
        for v in (0.1, 1 / 3, -2.5e-17, 123456789.123456789):
            assert float(fmt(v)) == v

    def test_integers_stay_short(self):
        assert fmt(1.0) == "1"
        assert fmt(0.0) == "0"
