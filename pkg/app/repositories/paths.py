"""
Path repository for the periodic drift estimator.

This module reads and writes sampled paths as CSV files with a ``t,x``
header. Lines starting with ``#`` carry provenance (config hash, seed) and
are skipped on read.
"""

import csv
import math
from pathlib import Path as FilePath
from typing import Dict, List, Optional, Union

import numpy as np

from app.core.logging import get_logger
from app.models.dto import Path
from app.models.errors import DataValidationError, SchemaMismatchError

logger = get_logger(__name__)

PATH_COLUMNS = ["t", "x"]


def provenance_line(fields: Dict[str, object]) -> str:
    """Render ``# key=value ...`` for the first line of an output file."""
    return "# " + " ".join(f"{key}={value}" for key, value in fields.items())


def format_number(value: float, digits: int = 17) -> str:
    return format(float(value), f".{digits}g")


def read_provenance(source: Union[str, FilePath]) -> Dict[str, str]:
    """Fields of the leading ``# key=value ...`` line, empty when there is none."""
    with open(source, newline="") as handle:
        first = handle.readline().strip()
    if not first.startswith("#"):
        return {}
    fields: Dict[str, str] = {}
    for token in first.lstrip("#").split():
        key, sep, value = token.partition("=")
        if sep:
            fields[key] = value
    return fields


def read_rows(source: Union[str, FilePath]) -> List[List[str]]:
    """Read CSV rows, skipping comment lines and blank lines."""
    with open(source, newline="") as handle:
        lines = [line for line in handle if line.strip() and not line.lstrip().startswith("#")]
    return [row for row in csv.reader(lines)]


class PathRepository:
    """Repository for path files."""

    def __init__(self, digits: int = 17, spacing_rtol: float = 1e-6):
        """Initialize repository with the output precision and the spacing tolerance."""
        self.digits = digits
        self.spacing_rtol = spacing_rtol

    def write(
        self,
        path: Path,
        dest: Union[str, FilePath],
        provenance: Optional[Dict[str, object]] = None
    ) -> FilePath:
        """
        Write a path as ``t,x`` rows.

        Args:
            path: Path to write
            dest: Output file
            provenance: Fields echoed in the leading comment line

        Returns:
            The written file path
        """
        dest = FilePath(dest)
        dest.parent.mkdir(parents=True, exist_ok=True)
        times = path.times
        with open(dest, "w", newline="") as handle:
            if provenance:
                handle.write(provenance_line(provenance) + "\n")
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(PATH_COLUMNS)
            for t, x in zip(times, path.values):
                writer.writerow([format_number(t, self.digits), format_number(x, self.digits)])

        logger.info("Wrote path", file=str(dest), n_points=path.n_points, dt=path.dt)
        return dest

    def read(self, source: Union[str, FilePath]) -> Path:
        """
        Read a ``t,x`` file into a uniformly sampled path.

        Raises:
            DataValidationError: If the file is empty, holds a NaN or a
                non-numeric value, or is not uniformly spaced
            SchemaMismatchError: If the header is not ``t,x``
        """
        name = str(source)
        rows = read_rows(source)
        if not rows:
            raise DataValidationError(name, "empty file")
        header = [cell.strip() for cell in rows[0]]
        if header != PATH_COLUMNS:
            raise SchemaMismatchError(name, PATH_COLUMNS, header)
        body = rows[1:]
        if not body:
            raise DataValidationError(name, "empty file: header without observations")
        if len(body) < 2:
            raise DataValidationError(name, "need at least 2 observations", index=0)

        times = np.empty(len(body))
        values = np.empty(len(body))
        for i, row in enumerate(body):
            if len(row) != 2:
                raise DataValidationError(name, f"expected 2 columns, found {len(row)}", index=i)
            try:
                times[i] = float(row[0])
                values[i] = float(row[1])
            except ValueError:
                raise DataValidationError(name, "non-numeric value", index=i)
            if math.isnan(times[i]) or math.isnan(values[i]):
                raise DataValidationError(name, "NaN value", index=i)
            if not (math.isfinite(times[i]) and math.isfinite(values[i])):
                raise DataValidationError(name, "infinite value", index=i)

        steps = np.diff(times)
        dt = (times[-1] - times[0]) / (times.size - 1)
        if not dt > 0:
            raise DataValidationError(name, "non-uniform spacing: times are not increasing", index=0)
        off = np.flatnonzero(np.abs(steps - dt) > self.spacing_rtol * dt)
        if off.size:
            raise DataValidationError(name, "non-uniform spacing", index=int(off[0]) + 1)

        logger.debug("Read path", file=name, n_points=times.size, dt=dt)
        return Path(t0=float(times[0]), dt=float(dt), values=values)
