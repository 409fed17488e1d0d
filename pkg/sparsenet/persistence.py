"""
Reading data matrices from CSV and writing results to the output directory.

Matrices, edge lists and curves are CSV with floats written to 17
significant digits; diagnostics are JSON with sorted keys and the run seed
echoed. Wall-clock timings go to ``timing.json`` only, so every other file
is identical across runs with the same inputs and seed.
"""

import csv
import json
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from .data import DataMatrix
from .errors import ValidationError
from .filtration import FiltrationResult
from .logging import get_logger

logger = get_logger(__name__)

TIMING_FILE = "timing.json"


class CsvFormatError(ValidationError):
    """Input CSV file is malformed."""

    pass


def format_float(value: float) -> str:
    """Format a float with 17 significant digits."""
    return format(float(value), ".17g")


def _is_number(field: str) -> bool:
    try:
        float(field)
    except ValueError:
        return False
    return True


def load_data_csv(path: Path) -> DataMatrix:
    """
    Load an n x p data matrix, one row per subject.

    The first row is taken as node names when any of its fields is not a
    number. Decimal points are always ``.``.

    Args:
        path: CSV file

    Returns:
        Raw DataMatrix, with node names when a header was present

    Raises:
        CsvFormatError: On ragged rows, empty files or unparseable values
    """
    try:
        with open(path, newline="", encoding="utf-8") as f:
            rows = [row for row in csv.reader(f) if row]
    except OSError as e:
        raise CsvFormatError(f"Cannot read {path}: {e}") from e

    if not rows:
        raise CsvFormatError(f"{path} is empty")

    names: tuple[str, ...] | None = None
    if not all(_is_number(field) for field in rows[0]):
        names = tuple(field.strip() for field in rows[0])
        rows = rows[1:]

    width = len(names) if names is not None else len(rows[0]) if rows else 0
    values: list[list[float]] = []
    for line, row in enumerate(rows, start=2 if names is not None else 1):
        if len(row) != width:
            raise CsvFormatError(
                f"{path}:{line}: expected {width} fields, got {len(row)}"
            )
        try:
            values.append([float(field) for field in row])
        except ValueError as e:
            raise CsvFormatError(f"{path}:{line}: {e}") from e

    if not values:
        raise CsvFormatError(f"{path} has no data rows")

    logger.debug("Loaded data matrix", path=str(path), n=len(values), p=width)
    return DataMatrix(np.array(values), node_names=names)


def _jsonable(value: Any) -> Any:
    """Convert numpy scalars and arrays, tuples and paths for ``json``."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


class ResultWriter:
    """
    Writes command outputs into one directory.
    """

    def __init__(self, output_dir: Path, seed: int):
        self.output_dir = output_dir
        self.seed = seed
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.written: list[Path] = []
        logger.debug("ResultWriter initialized", output_dir=str(output_dir), seed=seed)

    def _path(self, name: str) -> Path:
        path = self.output_dir / name
        self.written.append(path)
        return path

    def write_rows(
        self, name: str, header: Sequence[str] | None, rows: Iterable[Sequence[str]]
    ) -> Path:
        """Pre-formatted CSV rows with an optional header."""
        path = self._path(name)
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            if header is not None:
                writer.writerow(header)
            writer.writerows(rows)
        logger.info("Wrote file", path=str(path))
        return path

    def write_matrix_csv(
        self, name: str, matrix: np.ndarray, names: Sequence[str] | None = None
    ) -> Path:
        """Dense matrix, one row per line, with an optional header."""
        rows = ([format_float(v) for v in row] for row in np.asarray(matrix).tolist())
        return self.write_rows(name, names, rows)

    def write_data_csv(self, name: str, data: DataMatrix) -> Path:
        """Data matrix with its node names as header."""
        return self.write_matrix_csv(name, data.values, data.names())

    def write_edge_list(
        self, name: str, edges: Iterable[tuple[int, int, float]]
    ) -> Path:
        """``i,j,value`` rows."""
        rows = ((str(i), str(j), format_float(v)) for i, j, v in edges)
        return self.write_rows(name, ("i", "j", "value"), rows)

    def write_curve_csv(self, name: str, filtration: FiltrationResult) -> Path:
        """``lambda,beta0,edges`` rows, one per grid value."""
        rows = (
            (format_float(lam), str(beta0), str(edges))
            for lam, beta0, edges in filtration.rows()
        )
        return self.write_rows(name, ("lambda", "beta0", "edges"), rows)

    def write_json(self, name: str, payload: dict[str, Any]) -> Path:
        """JSON document with sorted keys; the run seed is added as ``seed``."""
        path = self._path(name)
        document = _jsonable({**payload, "seed": self.seed})
        path.write_text(
            json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        logger.info("Wrote file", path=str(path))
        return path

    def write_timing(self, payload: dict[str, Any]) -> Path:
        """Wall-clock timings, kept apart from reproducible outputs."""
        path = self._path(TIMING_FILE)
        path.write_text(
            json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        return path
