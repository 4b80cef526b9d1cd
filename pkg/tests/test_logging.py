"""
Tests for the terminal transcript and the event log.

Tests cover:
- Tee copies to mirrors and drops a mirror that fails
- capture_session with and without an active session log
- setup_logging / teardown_logging restore the original streams
- RunLogger writes INFO always and DEBUG only when verbose
"""

import sys
import io
import json
import threading
import pytest
from pathlib import Path

# Add src to path
sys.path.append(str(Path(__file__).parent.parent / "src"))

from mssk.utils.config import Config
Config.load()

from mssk.utils.logger import Tee, capture_session, setup_logging, teardown_logging
from mssk.utils.run_logger import RunLogger


class _Broken(io.StringIO):
    def write(self, data):
        raise ValueError("closed")


# ==================== Tee ====================

class TestTee:
    """Primary stream plus mirrors."""

    def test_copies_to_mirrors(self):
        primary, mirror = io.StringIO(), io.StringIO()
        tee = Tee(primary, mirror)
        assert tee.write("N=4\n") == 4
        assert primary.getvalue() == mirror.getvalue() == "N=4\n"

    def test_failing_mirror_is_dropped(self):
        primary, broken = io.StringIO(), _Broken()
        tee = Tee(primary, broken)
        tee.write("a")
        tee.write("b")
        assert primary.getvalue() == "ab"
        assert tee.mirrors == []

    def test_add_and_remove_mirror(self):
        primary, mirror = io.StringIO(), io.StringIO()
        tee = Tee(primary)
        tee.add_mirror(mirror)
        tee.add_mirror(mirror)
        tee.write("x")
        tee.remove_mirror(mirror)
        tee.write("y")
        assert mirror.getvalue() == "x"
        assert primary.getvalue() == "xy"

    def test_concurrent_writes_stay_whole(self):
        """Lines written from several threads are never interleaved mid-line."""
        primary = io.StringIO()
        tee = Tee(primary)

        def worker(tag):
            for _ in range(200):
                tee.write(f"[{tag}] replica chunk done\n")

        threads = [threading.Thread(target=worker, args=(t,)) for t in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        lines = primary.getvalue().splitlines()
        assert len(lines) == 800
        assert all(line.endswith("replica chunk done") for line in lines)


# ==================== Sessions ====================

class TestCaptureSession:
    """Output captured inside a block."""

    def test_without_session_log(self):
        with capture_session() as output:
            print("[selftest] inside")
        print("[selftest] outside")
        assert output.getvalue() == "[selftest] inside\n"

    def test_with_session_log(self, tmp_path):
        original = sys.stdout
        log_path = setup_logging(tmp_path)
        try:
            with capture_session() as output:
                print("[pressure] N=2")
            print("[pressure] after")
        finally:
            teardown_logging()
        assert sys.stdout is original
        assert output.getvalue() == "[pressure] N=2\n"
        transcript = log_path.read_text(encoding="utf-8")
        assert "[pressure] N=2" in transcript
        assert "[pressure] after" in transcript
        assert log_path.parent == tmp_path / "terminal"


# ==================== Event Log ====================

class TestRunLogger:
    """JSON-lines events gated by verbosity."""

    def _events(self, log_dir):
        path = log_dir / "events.log"
        if not path.exists():
            return []
        return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]

    def test_debug_dropped_when_quiet(self, tmp_path):
        logger = RunLogger(tmp_path)
        logger.configure(verbose=False)
        logger.log_event("pressure_direct_start", {"n": 4})
        logger.log_event("pressure_direct_done", {"n": 4}, level="INFO")
        events = self._events(tmp_path)
        assert [e["event"] for e in events] == ["PRESSURE_DIRECT_DONE"]
        assert events[0]["details"] == {"n": 4}

    def test_debug_written_when_verbose(self, tmp_path):
        logger = RunLogger(tmp_path)
        logger.configure(verbose=True)
        logger.log_event("cascade_sampled", {"width": 8})
        assert [e["level"] for e in self._events(tmp_path)] == ["DEBUG"]


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
