"""
Artifact repository for fit outputs.

This module writes the posterior summary, the chain trace and the run
metadata of a fit, and merges summaries of several runs into one
long-format table keyed by run label, config hash and seed.
"""

import csv
import json
from pathlib import Path as FilePath
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from app.core.logging import get_logger
from app.models.dto import Chain, PosteriorSummary
from app.models.errors import DataValidationError, InvalidArgumentError, SchemaMismatchError
from app.repositories.paths import format_number, provenance_line, read_provenance, read_rows

logger = get_logger(__name__)

SUMMARY_FILE = "summary.csv"
CHAIN_FILE = "chain.csv"
META_FILE = "meta.json"

SUMMARY_COLUMNS = ["x", "mean", "lo", "hi"]
CHAIN_COLUMNS = ["iter", "j", "s_sq", "accept2", "accept3_rate"]


class ArtifactRepository:
    """Repository for fit artifacts in one output directory."""

    def __init__(self, out_dir: Union[str, FilePath], digits: int = 17):
        """Initialize repository with the output directory and numeric precision."""
        self.out_dir = FilePath(out_dir)
        self.digits = digits

    def _write_csv(
        self,
        name: str,
        columns: List[str],
        rows: Sequence[Sequence[str]],
        provenance: Optional[Dict[str, object]]
    ) -> FilePath:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        dest = self.out_dir / name
        with open(dest, "w", newline="") as handle:
            if provenance:
                handle.write(provenance_line(provenance) + "\n")
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(columns)
            writer.writerows(rows)
        logger.debug("Wrote table", file=str(dest), rows=len(rows))
        return dest

    def write_summary(self, summary: PosteriorSummary, provenance: Optional[Dict[str, object]] = None) -> FilePath:
        """Write ``x,mean,lo,hi`` on the summary grid."""
        fmt = self.digits
        rows = [
            [format_number(x, fmt), format_number(m, fmt), format_number(lo, fmt), format_number(hi, fmt)]
            for x, m, lo, hi in zip(summary.grid, summary.mean, summary.band_lo, summary.band_hi)
        ]
        return self._write_csv(SUMMARY_FILE, SUMMARY_COLUMNS, rows, provenance)

    def write_chain(self, chain: Chain, provenance: Optional[Dict[str, object]] = None) -> FilePath:
        """
        Write one row per post-burn-in iteration.

        accept2 is 1 when the Move II proposal was accepted; accept3_rate is
        the fraction of accepted bridge proposals, empty without Move III.
        """
        rows = [
            [
                str(record.iteration),
                str(record.j),
                format_number(record.s_sq, self.digits),
                "1" if record.model_accepted else "0",
                "" if record.bridge_accept_rate is None else format_number(record.bridge_accept_rate, self.digits),
            ]
            for record in chain.records
        ]
        return self._write_csv(CHAIN_FILE, CHAIN_COLUMNS, rows, provenance)

    def write_meta(self, meta: Dict[str, Any]) -> FilePath:
        """Write run metadata as sorted, indented JSON."""
        self.out_dir.mkdir(parents=True, exist_ok=True)
        dest = self.out_dir / META_FILE
        with open(dest, "w") as handle:
            json.dump(meta, handle, indent=2, sort_keys=True, default=str)
            handle.write("\n")
        return dest


def read_table(source: Union[str, FilePath]) -> Tuple[List[str], List[List[str]]]:
    """
    Read a CSV artifact as (header, rows), skipping comment lines.

    Raises:
        DataValidationError: If the file is empty
    """
    rows = read_rows(source)
    if not rows:
        raise DataValidationError(str(source), "empty file")
    return [cell.strip() for cell in rows[0]], rows[1:]


RUN_COLUMNS = ["label", "config_hash", "seed"]


def merged_meta_path(dest: Union[str, FilePath]) -> FilePath:
    """Sidecar metadata file of a merged table: ``<stem>.meta.json``."""
    dest = FilePath(dest)
    return dest.with_name(dest.stem + ".meta.json")


def merge_long(
    inputs: Sequence[Tuple[str, Union[str, FilePath]]],
    dest: Union[str, FilePath],
    provenance: Optional[Dict[str, object]] = None
) -> FilePath:
    """
    Stack several tables into one long-format CSV keyed by run.

    Every row is prefixed with its run's label, config hash and seed, read
    from the input's provenance line (empty when absent). The runs are also
    listed in a sidecar ``<stem>.meta.json``. Values are copied as text, so
    the merge is lossless.

    Args:
        inputs: (label, file) pairs; all files must share one header
        dest: Output file
        provenance: Fields echoed in the leading comment line

    Raises:
        InvalidArgumentError: If no inputs are given
        SchemaMismatchError: If headers differ
    """
    if not inputs:
        raise InvalidArgumentError(["inputs"], "at least one input file is required")

    expected: Optional[List[str]] = None
    blocks: List[Tuple[List[str], List[List[str]]]] = []
    runs: List[Dict[str, str]] = []
    for label, source in inputs:
        header, rows = read_table(source)
        if expected is None:
            expected = header
        elif header != expected:
            raise SchemaMismatchError(str(source), expected, header)
        fields = read_provenance(source)
        run = {
            "label": label,
            "config_hash": fields.get("config_hash", ""),
            "seed": fields.get("seed", ""),
            "source": str(source),
        }
        runs.append(run)
        blocks.append(([run[column] for column in RUN_COLUMNS], rows))
    assert expected is not None

    dest = FilePath(dest)
    dest.parent.mkdir(parents=True, exist_ok=True)
    with open(dest, "w", newline="") as handle:
        if provenance:
            handle.write(provenance_line(provenance) + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([*RUN_COLUMNS, *expected])
        for keys, rows in blocks:
            writer.writerows([*keys, *row] for row in rows)

    with open(merged_meta_path(dest), "w") as handle:
        json.dump({**(provenance or {}), "runs": runs}, handle, indent=2, sort_keys=True, default=str)
        handle.write("\n")

    logger.info("Merged runs", file=str(dest), runs=len(runs), labels=[run["label"] for run in runs])
    return dest
