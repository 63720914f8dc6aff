"""
Result files for RiskTrack experiments

CSV tables start with one comment line carrying the library version and the
config hash, followed by the fixed header. JSON tables mirror the columns as
field names under "rows". Nothing time-dependent is written, so re-running a
manifest reproduces every file byte for byte.

Each run leaves manifest_<run>.json next to its tables (run is the command,
or trajectories_<mode>), holding the canonical config and the command
arguments; read_manifest turns one back into a runnable command.
"""

import csv
import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from src import __version__
from src.errors import ConfigError
from src.utils.config import ExperimentConfig, config_hash, parse_config, render_config
from src.utils.logger import setup_logger

logger = setup_logger("output")

MANIFEST_PREFIX = "manifest_"
MANIFEST_KEYS = ("command", "arguments", "config")


def _plain(value: Any) -> Any:
    """JSON-safe copy: arrays to lists, non-finite floats to None"""
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


class ResultWriter:
    """Writes tables and documents for one command run into an output directory"""

    def __init__(self, directory: str, fmt: str, config: ExperimentConfig,
                 command: str, arguments: Optional[Dict[str, Any]] = None,
                 run_name: Optional[str] = None):
        self.directory = Path(directory)
        self.format = fmt
        self.config = config
        self.command = command
        self.arguments = dict(arguments or {})
        self.run_name = run_name or command.replace("-", "_")
        self.config_sha256 = config_hash(config)
        self.files: List[str] = []
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, name: str) -> Path:
        path = self.directory / name
        self.files.append(path.name)
        return path

    def write_table(self, stem: str, columns: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
        """Write rows (dicts keyed by column) as <stem>.csv or <stem>.json"""
        rows = list(rows)
        if self.format == "json":
            path = self._path(f"{stem}.json")
            document = {
                "risktrack_version": __version__,
                "config_sha256": self.config_sha256,
                "columns": list(columns),
                "rows": [{column: _plain(row.get(column)) for column in columns} for row in rows],
            }
            path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
        else:
            path = self._path(f"{stem}.csv")
            with open(path, "w", newline="", encoding="utf-8") as f:
                f.write(f"# risktrack={__version__} config_sha256={self.config_sha256}\n")
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(columns)
                for row in rows:
                    writer.writerow([_cell(row.get(column)) for column in columns])
        logger.info(f"Wrote {len(rows)} rows to {path}")
        return path

    def write_document(self, name: str, payload: Dict[str, Any]) -> Path:
        """JSON document stamped with version and config hash"""
        path = self._path(name)
        document = {"risktrack_version": __version__, "config_sha256": self.config_sha256}
        document.update(_plain(payload))
        path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
        logger.info(f"Wrote {path}")
        return path

    @property
    def manifest_path(self) -> Path:
        return self.directory / f"{MANIFEST_PREFIX}{self.run_name}.json"

    def write_manifest(self, extra: Optional[Dict[str, Any]] = None) -> Path:
        """manifest_<run>.json: version, config and its hash, seed, arguments, files written"""
        manifest = {
            "risktrack_version": __version__,
            "command": self.command,
            "arguments": _plain(self.arguments),
            "seed": self.config.sim.seed,
            "config_sha256": self.config_sha256,
            "files": sorted(self.files),
            "config": render_config(self.config),
        }
        manifest.update(_plain(extra or {}))
        path = self.manifest_path
        path.write_text(json.dumps(manifest, indent=2, sort_keys=False) + "\n", encoding="utf-8")
        return path


def read_manifest(path: str):
    """
    (command, config, arguments) recorded in a run manifest

    Raises:
        ConfigError: unreadable manifest, missing keys or an invalid config
    """
    try:
        manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read manifest {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: malformed manifest: {e.msg}", line=e.lineno) from None
    if not isinstance(manifest, dict):
        raise ConfigError(f"{path}: manifest must be a JSON object")
    missing = [key for key in MANIFEST_KEYS if key not in manifest]
    if missing:
        raise ConfigError(f"{path}: manifest lacks {', '.join(missing)}", field=missing[0])
    if not isinstance(manifest["arguments"], dict):
        raise ConfigError(f"{path}: arguments must be an object", field="arguments")
    config = parse_config(manifest["config"], source=f"{path}:config")
    return manifest["command"], config, manifest["arguments"]
