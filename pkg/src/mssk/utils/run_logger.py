import os
import datetime
import json
import sys
from pathlib import Path
from typing import Optional

from mssk.utils.config import Config


class RunLogger:
    """JSON-lines event log for estimator runs, gated by logging.verbose for DEBUG events."""

    def __init__(self, log_dir: Optional[Path] = None):
        self._log_dir = Path(log_dir) if log_dir is not None else None
        self._verbose_checked = False
        self._is_verbose = False

    @property
    def log_file(self) -> Path:
        if self._log_dir is None:
            self._log_dir = Config.get_project_root() / Config.get("logging.log_dir", "logs")
        return self._log_dir / "events.log"

    def configure(self, log_dir: Optional[Path] = None, verbose: Optional[bool] = None):
        if log_dir is not None:
            self._log_dir = Path(log_dir)
        if verbose is not None:
            self._is_verbose = verbose
            self._verbose_checked = True

    def log_event(self, event_type: str, details: dict = None, level: str = "DEBUG"):
        """Log an estimator event with its details."""
        if details is None:
            details = {}

        if level == "DEBUG":
            if not self._verbose_checked:
                self._is_verbose = bool(Config.get("logging.verbose", False))
                self._verbose_checked = True
            if not self._is_verbose:
                return

        log_entry = {
            "timestamp": datetime.datetime.now().isoformat(),
            "level": level,
            "event": event_type.upper(),
            "details": details,
        }
        try:
            log_file = self.log_file
            if not log_file.parent.exists():
                os.makedirs(log_file.parent)
            with open(log_file, "a", encoding="utf-8") as f:
                f.write(json.dumps(log_entry, default=str) + "\n")
        except Exception as e:
            sys.stderr.write(f"Failed to write to event log: {e}\n")


# Global instance for easy access
run_logger = RunLogger()
