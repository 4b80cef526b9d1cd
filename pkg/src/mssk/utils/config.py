import json
from pathlib import Path
from typing import Any, Optional

from mssk.core.errors import ConfigError


class Config:
    data = {}
    _root = None
    _path = None

    @classmethod
    def load(cls, path: Optional[Path] = None, force: bool = False):
        """Loads the given config document, or config.json at the project root."""
        if cls.data and not force and path is None:
            return
        # Move up from src/mssk/utils/ to project root
        cls._root = Path(__file__).resolve().parents[3]
        config_path = Path(path) if path is not None else cls._root / "config.json"

        if config_path.exists():
            try:
                with open(config_path, "r", encoding="utf-8") as f:
                    cls.data = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{config_path} is not valid JSON: {e}") from e
            cls._path = config_path
        elif path is not None:
            raise ConfigError(f"config file not found: {config_path}")
        else:
            print(f"Warning: config.json not found at {config_path}")
            cls.data = {}
            cls._path = None

    @classmethod
    def reset(cls):
        cls.data = {}
        cls._path = None

    @classmethod
    def get(cls, key_path: str, default: Any = None) -> Any:
        """Retrieves values using dot notation (e.g., 'cascade.width')"""
        keys = key_path.split('.')
        value = cls.data
        try:
            for k in keys:
                value = value[k]
            return value
        except (KeyError, TypeError):
            return default

    @classmethod
    def source(cls) -> Optional[Path]:
        return cls._path

    @classmethod
    def get_project_root(cls) -> Path:
        """Returns the project root path."""
        if cls._root is None:
            cls._root = Path(__file__).resolve().parents[3]
        return cls._root
