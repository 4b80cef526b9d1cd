import sys
import os
import datetime
import io
import threading
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional, TextIO

from mssk.utils.config import Config


class Tee:
    """
    Writes to a primary stream (the terminal) and copies every write to mirror streams
    (the session log file, capture buffers). Replica workers may print from threads, so
    writes are serialized. A mirror that fails is dropped; the primary always gets the data.
    """

    def __init__(self, primary: TextIO, *mirrors: TextIO):
        self.primary = primary
        self.mirrors: List[TextIO] = list(mirrors)
        self._lock = threading.Lock()

    def write(self, data: str) -> int:
        with self._lock:
            self.primary.write(data)
            for mirror in list(self.mirrors):
                try:
                    mirror.write(data)
                except (OSError, ValueError):
                    self.mirrors.remove(mirror)
        return len(data)

    def flush(self) -> None:
        with self._lock:
            for stream in (self.primary, *self.mirrors):
                try:
                    stream.flush()
                except (OSError, ValueError):
                    pass

    def add_mirror(self, stream: TextIO) -> None:
        with self._lock:
            if stream not in self.mirrors:
                self.mirrors.append(stream)

    def remove_mirror(self, stream: TextIO) -> None:
        with self._lock:
            if stream in self.mirrors:
                self.mirrors.remove(stream)

    def isatty(self) -> bool:
        return hasattr(self.primary, "isatty") and self.primary.isatty()

    def fileno(self) -> int:
        return self.primary.fileno()


# Session tees installed by setup_logging()
_stdout_tee = None
_stderr_tee = None
_log_file = None


def setup_logging(log_dir: Optional[Path] = None) -> Path:
    """
    Opens a log file under <log_dir>/terminal and redirects sys.stdout and
    sys.stderr to it, while also maintaining output to the terminal.
    """
    global _stdout_tee, _stderr_tee, _log_file

    if log_dir is None:
        log_dir = Config.get_project_root() / Config.get("logging.log_dir", "logs")
    logs_dir = Path(log_dir) / "terminal"

    if not logs_dir.exists():
        os.makedirs(logs_dir)

    # mssk_YYYYMMDD_HHMMSS_<PID>.log
    now = datetime.datetime.now()
    timestamp = now.strftime("%Y%m%d_%H%M%S")
    log_path = logs_dir / f"mssk_{timestamp}_{os.getpid()}.log"

    if _stdout_tee is not None:
        teardown_logging()

    _log_file = open(log_path, "a", encoding="utf-8")
    _stdout_tee = Tee(sys.stdout, _log_file)
    _stderr_tee = Tee(sys.stderr, _log_file)

    sys.stdout = _stdout_tee
    sys.stderr = _stderr_tee

    print(f"--- Process started: {now.isoformat()} ---")
    print(f"--- Logging to: {log_path} ---")
    return log_path


def teardown_logging():
    """Restores the original streams and closes the log file."""
    global _stdout_tee, _stderr_tee, _log_file
    if _stdout_tee is not None:
        sys.stdout = _stdout_tee.primary
    if _stderr_tee is not None:
        sys.stderr = _stderr_tee.primary
    if _log_file is not None:
        _log_file.close()
    _stdout_tee = _stderr_tee = _log_file = None


@contextmanager
def capture_session() -> Iterator[io.StringIO]:
    """
    Collects everything printed inside the block. Rides on the session Tees when
    setup_logging() is active, otherwise wraps stdout and stderr for the duration.
    """
    buffer = io.StringIO()
    if _stdout_tee is not None and _stderr_tee is not None:
        _stdout_tee.add_mirror(buffer)
        _stderr_tee.add_mirror(buffer)
        try:
            yield buffer
        finally:
            _stdout_tee.remove_mirror(buffer)
            _stderr_tee.remove_mirror(buffer)
        return

    saved = sys.stdout, sys.stderr
    sys.stdout, sys.stderr = Tee(saved[0], buffer), Tee(saved[1], buffer)
    try:
        yield buffer
    finally:
        sys.stdout, sys.stderr = saved
