import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, List, Optional

from mssk.core.errors import ArtifactConflict


def _plain(value: Any) -> Any:
    if hasattr(value, "tolist"):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def render_json(summary: Dict[str, Any]) -> str:
    return json.dumps(summary, indent=2, sort_keys=True, default=_plain) + "\n"


def render_csv(rows: List[Dict[str, Any]]) -> str:
    buffer = io.StringIO()
    if rows:
        columns: List[str] = []
        for row in rows:
            columns.extend(c for c in row if c not in columns)
        writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buffer.getvalue()


def _write_once(path: Path, content: str) -> None:
    if path.exists():
        if path.read_text(encoding="utf-8") == content:
            return
        raise ArtifactConflict(f"{path} exists with different content; refusing to overwrite")
    path.write_text(content, encoding="utf-8")


def write_artifacts(out_dir: Path, command: str, config_hash: str, summary: Dict[str, Any],
                    rows: Optional[List[Dict[str, Any]]] = None) -> List[Path]:
    """<out>/<command>_<hash16>.json and, when rows are given, the matching .csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{command}_{config_hash[:16]}"
    written = []

    json_path = out_dir / f"{stem}.json"
    _write_once(json_path, render_json({"command": command, "config_hash": config_hash, **summary}))
    written.append(json_path)

    if rows is not None:
        csv_path = out_dir / f"{stem}.csv"
        _write_once(csv_path, render_csv([{"config_hash": config_hash[:16], **row} for row in rows]))
        written.append(csv_path)
    return written
