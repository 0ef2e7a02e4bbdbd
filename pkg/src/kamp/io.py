"""Tabular cell-table ingestion and result-table writing.

Input is delimiter-separated text with one row per cell (sample id, x, y,
cell type), column names configurable. Malformed rows fail fast with their
1-based line number; a sample that ends up with fewer than two cells is an
error because nothing downstream can use it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptySampleError, MissingColumnError, RowParseError
from .geometry import PointPattern, Window

NA = "NA"


@dataclass(frozen=True)
class ColumnMap:
    """Names of the required columns in a cell table."""

    sample_id: str = "sample_id"
    x: str = "x"
    y: str = "y"
    cell_type: str = "cell_type"


@dataclass
class SampleCells:
    sample_id: str
    x: np.ndarray
    y: np.ndarray
    cell_type: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0]


@dataclass
class CellTable:
    """Per-sample cell coordinates and types, in file order.

    ``windows`` may hold an explicit observation window per sample; samples
    without one get the tight bounding box of their points (recorded via the
    pattern's ``window_inferred`` flag).
    """

    samples: dict[str, SampleCells]
    windows: dict[str, Window] = field(default_factory=dict)
    source: str | None = None

    @property
    def sample_ids(self) -> list[str]:
        return list(self.samples)

    def pattern(self, sample_id: str) -> PointPattern:
        cells = self.samples[sample_id]
        return PointPattern.from_arrays(
            cells.x, cells.y, cells.cell_type, window=self.windows.get(sample_id)
        )


def _header_indices(header, columns: ColumnMap):
    idx = {}
    for attr in ("sample_id", "x", "y", "cell_type"):
        name = getattr(columns, attr)
        if name not in header:
            raise MissingColumnError(
                f"required column {name!r} not found in header {header}"
            )
        idx[attr] = header.index(name)
    return idx


def ingest_csv(
    path, columns: ColumnMap = ColumnMap(), delimiter: str = ","
) -> CellTable:
    """Parse a delimiter-separated cell table grouped by sample.

    Raises MissingColumnError if the header lacks a mapped column,
    RowParseError (with the offending 1-based line number) for rows with bad
    coordinates, missing fields, or an empty cell type, and EmptySampleError
    for samples with fewer than two cells.
    """
    path = Path(path)
    acc: dict[str, list] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumnError(f"{path} is empty; no header row") from None
        idx = _header_indices([h.strip() for h in header], columns)
        needed = max(idx.values()) + 1
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # ignore blank lines
            if len(row) < needed:
                raise RowParseError(
                    f"expected at least {needed} fields, found {len(row)}", line_no
                )
            sid = row[idx["sample_id"]].strip()
            if not sid:
                raise RowParseError("empty sample_id", line_no)
            try:
                x = float(row[idx["x"]])
                y = float(row[idx["y"]])
            except ValueError:
                raise RowParseError(
                    f"unparsable coordinates ({row[idx['x']]!r}, {row[idx['y']]!r})",
                    line_no,
                ) from None
            if not (np.isfinite(x) and np.isfinite(y)):
                raise RowParseError(f"non-finite coordinates ({x}, {y})", line_no)
            cell_type = row[idx["cell_type"]].strip()
            if not cell_type:
                raise RowParseError("empty cell_type", line_no)
            acc.setdefault(sid, ([], [], []))
            xs, ys, ts = acc[sid]
            xs.append(x)
            ys.append(y)
            ts.append(cell_type)
    samples = {}
    for sid, (xs, ys, ts) in acc.items():
        if len(xs) < 2:
            raise EmptySampleError(
                f"sample {sid!r} has {len(xs)} cell(s); at least 2 are required"
            )
        samples[sid] = SampleCells(
            sample_id=sid,
            x=np.asarray(xs, dtype=float),
            y=np.asarray(ys, dtype=float),
            cell_type=np.asarray(ts),
        )
    if not samples:
        raise EmptySampleError(f"{path} contains no data rows")
    return CellTable(samples=samples, source=str(path))


def read_window_file(path, delimiter: str = ",") -> dict[str, Window]:
    """Optional per-sample window specification.

    Columns: sample_id, x_min, x_max, y_min, y_max.
    """
    path = Path(path)
    windows = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        header = [h.strip() for h in next(reader)]
        cols = ("sample_id", "x_min", "x_max", "y_min", "y_max")
        for col in cols:
            if col not in header:
                raise MissingColumnError(f"window file misses column {col!r}")
        pos = {c: header.index(c) for c in cols}
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                windows[row[pos["sample_id"]].strip()] = Window(
                    float(row[pos["x_min"]]),
                    float(row[pos["x_max"]]),
                    float(row[pos["y_min"]]),
                    float(row[pos["y_max"]]),
                )
            except ValueError:
                raise RowParseError("unparsable window bounds", line_no) from None
    return windows


def format_value(value) -> str:
    """Render one table cell; NaN and None become the NA marker."""
    if value is None:
        return NA
    if isinstance(value, float):
        if np.isnan(value):
            return NA
        return f"{value:.12g}"
    return str(value)


def write_table(path, columns, rows) -> None:
    """Write a tab-separated table with a header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(format_value(v) for v in row) + "\n")


def write_cells_csv(path, rows) -> None:
    """Write a cell table in the ingestion schema (sample_id, x, y, cell_type)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "x", "y", "cell_type"])
        for row in rows:
            writer.writerow(row)
