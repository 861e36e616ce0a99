"""Run artifacts: locked, atomic JSON/CSV writes and append-only run directories.

Writers take an exclusive ``fcntl.flock`` on a sibling ``.lock`` file and
replace the target via tempfile + os.replace, so concurrent sweep workers
never observe a half-written file.
"""

import csv
import fcntl
import json
import logging
import os
import tempfile
import time
from collections.abc import Sequence
from pathlib import Path

from fairweight.errors import MissingArtifacts, RunExists

logger = logging.getLogger(__name__)


class FileLock:
    """Exclusive or shared lock on ``<path>.lock``.

    Usage:
        with FileLock(Path("weights.csv")):
            ...
    """

    def __init__(self, path: Path | str, exclusive: bool = True, timeout: float = 5.0):
        self.path = Path(path)
        self.lock_path = self.path.parent / (self.path.name + ".lock")
        self.exclusive = exclusive
        self.timeout = timeout
        self._fd = None

    def __enter__(self):
        self.lock_path.parent.mkdir(parents=True, exist_ok=True)
        self._fd = open(self.lock_path, "w")
        mode = fcntl.LOCK_EX if self.exclusive else fcntl.LOCK_SH
        deadline = time.monotonic() + self.timeout
        while True:
            try:
                fcntl.flock(self._fd, mode | fcntl.LOCK_NB)
                return self
            except BlockingIOError:
                if time.monotonic() >= deadline:
                    self._fd.close()
                    self._fd = None
                    raise TimeoutError(f"Could not lock {self.lock_path} within {self.timeout}s")
                time.sleep(0.05)

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self._fd is not None:
            try:
                fcntl.flock(self._fd, fcntl.LOCK_UN)
            finally:
                self._fd.close()
                self._fd = None
        return False


def _atomic_write(path: Path, write) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with FileLock(path, exclusive=True):
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="", encoding="utf-8") as f:
                write(f)
            os.replace(tmp, path)
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise


def locked_write_json(path: Path | str, data, *, default=str) -> None:
    def write(f):
        json.dump(data, f, indent=2, default=default)
        f.write("\n")

    _atomic_write(Path(path), write)


def locked_read_json(path: Path | str, default=None):
    path = Path(path)
    if not path.exists():
        return default
    with FileLock(path, exclusive=False):
        try:
            return json.loads(path.read_text())
        except (json.JSONDecodeError, OSError):
            return default


def locked_write_csv(path: Path | str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    def write(f):
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)

    _atomic_write(Path(path), write)


def read_csv_dicts(path: Path | str) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    with FileLock(path, exclusive=False):
        with open(path, newline="", encoding="utf-8") as f:
            return list(csv.DictReader(f))


def create_run_dir(path: Path | str) -> Path:
    """Create a fresh run directory; existing directories are never reused."""
    path = Path(path)
    if path.exists():
        raise RunExists(f"Run directory {path} already exists; choose a new --out")
    path.mkdir(parents=True)
    return path


def require_files(run_dir: Path | str, names: Sequence[str]) -> Path:
    run_dir = Path(run_dir)
    missing = [n for n in names if not (run_dir / n).exists()]
    if missing:
        raise MissingArtifacts(f"{run_dir} is missing: {', '.join(missing)}")
    return run_dir


def fmt(value: float) -> str:
    """17 significant digits, enough to round-trip a double."""
    return f"{value:.17g}"
