"""Stamped CSV and JSON writers shared by every command."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np


def fmt(value: Any) -> str:
    """Stable text form: floats rounded to 12 decimals, NaN as an empty cell."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return ""
        v = round(v, 12)
        return repr(v + 0.0)  # folds -0.0 into 0.0
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return None if math.isnan(v) else round(v, 12) + 0.0
    return value


class Outputs:
    """Writes files into one directory, stamping each with the config hash and seed."""

    def __init__(self, directory: str | Path, command: str, config_hash: str, seed: int):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.stamp = {"command": command, "config_hash": config_hash, "seed": seed}
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        return self.dir / name

    def _track(self, name: str) -> Path:
        if name not in self.files:
            self.files.append(name)
        return self.dir / name

    def csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        path = self._track(name)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            for key, value in self.stamp.items():
                fh.write(f"# {key}: {value}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([fmt(v) for v in row])
        return path

    def json(self, name: str, payload: dict[str, Any]) -> Path:
        path = self._track(name)
        body = {**self.stamp, **_jsonable(payload)}
        path.write_text(json.dumps(body, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    def adopt(self, name: str) -> Path:
        """Register a file written by other code."""
        return self._track(name)

    def manifest(self, config: dict[str, Any], results: dict[str, Any]) -> Path:
        return self.json("manifest.json", {"config": config, "results": results,
                                           "files": sorted(self.files)})


def read_csv(path: str | Path) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Stamp lines and rows of a file written by :meth:`Outputs.csv`."""
    stamp: dict[str, str] = {}
    body = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition(": ")
                stamp[key] = value
            else:
                body.append(line)
    return stamp, list(csv.DictReader(body))
