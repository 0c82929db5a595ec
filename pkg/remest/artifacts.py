"""Result files: JSON, CSV and optional HDF5, each carrying provenance.

Provenance is the toolkit version, the config hash and the master seed.
No timestamps are written, so identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from remest import __version__
from remest.belief.types import GridDensity
from remest.errors import ConfigError
from remest.solvers.threshold import ValueGrid

logger = logging.getLogger(__name__)

# h5py is optional; HDF5 export fails with a clear message when it is missing.
try:
    import h5py

    HAS_H5PY = True
except ImportError:
    h5py = None  # type: ignore[assignment]
    HAS_H5PY = False


@dataclass(frozen=True)
class Provenance:
    """Header block stamped into every output file."""

    config_hash: str
    seed: int | None
    toolkit_version: str = __version__

    def to_dict(self) -> dict[str, Any]:
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "toolkit_version": self.toolkit_version,
        }

    def comment_block(self) -> str:
        """``# key=value`` lines, one per field."""
        return "".join(
            f"# {key}={'' if value is None else value}\n" for key, value in self.to_dict().items()
        )


def _jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become "inf", "-inf" or "nan"."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, list | tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.bool_ | bool):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating | float):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def format_cell(value: Any) -> str:
    """CSV cell text: floats by ``repr``, infinities as ``inf``."""
    if value is None:
        return ""
    if isinstance(value, np.bool_ | bool):
        return str(int(value))
    if isinstance(value, np.integer | int):
        return str(int(value))
    if isinstance(value, np.floating | float):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


class ArtifactWriter:
    """Writes result files into one output directory.

    Args:
        directory: Output directory; created on first write.
        provenance: Header stamped into every file.
    """

    def __init__(self, directory: Path, provenance: Provenance) -> None:
        self.directory = Path(directory)
        self.provenance = provenance
        self.written: list[Path] = []

    def _path(self, name: str) -> Path:
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.directory / name
        self.written.append(path)
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self._path(name)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        logger.info("Wrote %s", path)
        return path

    def write_json(self, name: str, payload: dict[str, Any]) -> Path:
        """UTF-8 JSON with sorted keys and a ``provenance`` block."""
        document = {**_jsonable(payload), "provenance": self.provenance.to_dict()}
        text = json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False)
        return self.write_text(name, text + "\n")

    def write_csv(self, name: str, header: list[str], rows: Iterable[Iterable[Any]]) -> Path:
        """Comma-separated rows after ``# key=value`` provenance lines and a header row."""
        path = self._path(name)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(self.provenance.comment_block())
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_cell(cell) for cell in row])
        logger.info("Wrote %s", path)
        return path

    def write_density_csv(self, name: str, density: GridDensity) -> Path:
        rows = zip(density.points, density.values, strict=True)
        return self.write_csv(name, ["x", "density"], rows)

    def write_value_grid_hdf5(self, name: str, value_grid: ValueGrid) -> Path:
        """Datasets ``J``, ``J0``, ``J1`` (shape (T+2, 2, n)) and ``grid``."""
        if not HAS_H5PY:
            raise ConfigError("hdf5 output requires h5py: pip install h5py")
        path = self._path(name)
        with h5py.File(str(path), "w") as f:
            for key, value in self.provenance.to_dict().items():
                f.attrs[key] = "" if value is None else value
            f.attrs["lambda"] = value_grid.lam
            f.attrs["half_width"] = value_grid.grid.half_width
            f.create_dataset("grid", data=value_grid.grid.points)
            f.create_dataset("J", data=value_grid.J)
            f.create_dataset("J0", data=value_grid.J0)
            f.create_dataset("J1", data=value_grid.J1)
        logger.info("Wrote %s", path)
        return path
