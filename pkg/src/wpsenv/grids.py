"""Plain-text raster grids (ESRI ASCII layout, row 0 = northmost)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


@dataclass
class Grid:
    ncols: int
    nrows: int
    xll: float
    yll: float
    cellsize: float
    nodata: float = -9999.0
    cells: np.ndarray = field(default=None)  # (nrows, ncols), row 0 north

    def __post_init__(self):
        if self.ncols <= 0 or self.nrows <= 0:
            raise ValidationError("grid dimensions must be positive")
        if self.cellsize <= 0:
            raise ValidationError("cellsize must be positive")
        if self.cells is None:
            self.cells = np.zeros((self.nrows, self.ncols), dtype=float)
        else:
            self.cells = np.asarray(self.cells, dtype=float)
            if self.cells.shape != (self.nrows, self.ncols):
                raise ValidationError(
                    f"cell block {self.cells.shape} does not match "
                    f"{self.nrows}x{self.ncols} header"
                )

    def header_matches(self, other: "Grid", tol: float = 1e-9) -> bool:
        return (
            self.ncols == other.ncols
            and self.nrows == other.nrows
            and abs(self.xll - other.xll) <= tol
            and abs(self.yll - other.yll) <= tol
            and abs(self.cellsize - other.cellsize) <= tol
        )

    def contains(self, x: float, y: float) -> bool:
        return (
            self.xll <= x <= self.xll + self.ncols * self.cellsize
            and self.yll <= y <= self.yll + self.nrows * self.cellsize
        )

    def cell_index(self, x: float, y: float) -> tuple[int, int]:
        """(row, col) of the containing cell; max-edge hits clamp inward."""
        col = min(int(math.floor((x - self.xll) / self.cellsize)), self.ncols - 1)
        row_south = min(int(math.floor((y - self.yll) / self.cellsize)), self.nrows - 1)
        return self.nrows - 1 - row_south, col


def _fmt(x: float) -> str:
    x = float(x)  # numpy scalars repr as np.float64(...)
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def write_grid(grid: Grid) -> str:
    lines = [
        f"ncols {grid.ncols}",
        f"nrows {grid.nrows}",
        f"xllcorner {_fmt(grid.xll)}",
        f"yllcorner {_fmt(grid.yll)}",
        f"cellsize {_fmt(grid.cellsize)}",
        f"nodata_value {_fmt(grid.nodata)}",
    ]
    for row in grid.cells:
        lines.append(" ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def read_grid(text: str | bytes) -> Grid:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) < 6:
        raise ValidationError("grid file truncated before header end")
    header: dict[str, float] = {}
    for ln in lines[:6]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValidationError(f"bad grid header line {ln!r}")
        key = parts[0].lower()
        if key not in HEADER_KEYS:
            raise ValidationError(f"unknown grid header key {parts[0]!r}")
        try:
            header[key] = float(parts[1])
        except ValueError as exc:
            raise ValidationError(f"bad grid header value in {ln!r}") from exc
    missing = [k for k in HEADER_KEYS if k not in header and k != "nodata_value"]
    if missing:
        raise ValidationError(f"grid header missing {missing}")
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    rows = []
    for ln in lines[6:]:
        try:
            rows.append([float(v) for v in ln.split()])
        except ValueError as exc:
            raise ValidationError(f"bad grid data line {ln!r}") from exc
    if len(rows) != nrows or any(len(r) != ncols for r in rows):
        raise ValidationError("grid data block does not match header dimensions")
    return Grid(
        ncols=ncols,
        nrows=nrows,
        xll=header["xllcorner"],
        yll=header["yllcorner"],
        cellsize=header["cellsize"],
        nodata=header.get("nodata_value", -9999.0),
        cells=np.array(rows, dtype=float),
    )


def parse_grid_spec(text: str) -> Grid:
    """Parse a compact `key=value` grid header, e.g.
    "ncols=2 nrows=2 xllcorner=0 yllcorner=0 cellsize=5". Commas and
    whitespace both separate entries; nodata_value is optional."""
    header: dict[str, float] = {}
    for chunk in text.replace(",", " ").split():
        if "=" not in chunk:
            raise ValidationError(f"bad grid spec entry {chunk!r}")
        key, _, value = chunk.partition("=")
        key = key.strip().lower()
        if key not in HEADER_KEYS:
            raise ValidationError(f"unknown grid spec key {key!r}")
        try:
            header[key] = float(value)
        except ValueError as exc:
            raise ValidationError(f"bad grid spec value {chunk!r}") from exc
    missing = [k for k in HEADER_KEYS if k not in header and k != "nodata_value"]
    if missing:
        raise ValidationError(f"grid spec missing {missing}")
    return Grid(
        ncols=int(header["ncols"]),
        nrows=int(header["nrows"]),
        xll=header["xllcorner"],
        yll=header["yllcorner"],
        cellsize=header["cellsize"],
        nodata=header.get("nodata_value", -9999.0),
    )
