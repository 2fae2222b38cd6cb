"""Desk-scale built-in processes: rasterize point and road emission
sources, sum grids, and a configurable slow echo for long-running tests.

All three rasterizers conserve mass: the cell sum of vector2grid equals
the summed q of in-extent points; road2grid deposits sumpol*q per road
spread over midpoint samples along the polyline.
"""

from __future__ import annotations

import csv
import io
import math
import re
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .catalog import BoundParam, ProcessDescriptor, ProcessKind, WidgetDescriptor, LOCAL
from .errors import ValidationError
from .grids import Grid, parse_grid_spec, read_grid, write_grid
from .wps_protocol import ComplexType, LiteralType, ParamDecl

ProgressFn = Callable[[int], None]
LogFn = Callable[[str], None]

_LINESTRING_RE = re.compile(r"^\s*LINESTRING\s*\(\s*(.+?)\s*\)\s*$", re.IGNORECASE)


# ---------------------------------------------------------------- sources


@dataclass(frozen=True)
class PointSource:
    x: float
    y: float
    q: float


@dataclass(frozen=True)
class RoadSource:
    id: str
    polyline: tuple[tuple[float, float], ...]
    q: float


def parse_points_csv(text: str) -> list[PointSource]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["x", "y", "q"]:
        raise ValidationError("points CSV must have header x,y,q")
    points = []
    for i, row in enumerate(reader, start=2):
        try:
            q = float(row["q"])
            if q < 0:
                raise ValidationError(f"points CSV line {i}: negative q")
            points.append(PointSource(x=float(row["x"]), y=float(row["y"]), q=q))
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"points CSV line {i}: {exc}") from exc
    return points


def parse_linestring(wkt: str) -> tuple[tuple[float, float], ...]:
    m = _LINESTRING_RE.match(wkt)
    if not m:
        raise ValidationError(f"bad WKT LINESTRING: {wkt!r}")
    vertices = []
    for pair in m.group(1).split(","):
        coords = pair.split()
        if len(coords) != 2:
            raise ValidationError(f"bad LINESTRING vertex: {pair!r}")
        try:
            vertices.append((float(coords[0]), float(coords[1])))
        except ValueError as exc:
            raise ValidationError(f"bad LINESTRING vertex: {pair!r}") from exc
    if len(vertices) < 2:
        raise ValidationError("LINESTRING needs at least 2 vertices")
    return tuple(vertices)


def parse_roads_csv(text: str) -> list[RoadSource]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["id", "wkt", "q"]:
        raise ValidationError("roads CSV must have header id,wkt,q")
    roads = []
    for i, row in enumerate(reader, start=2):
        try:
            q = float(row["q"])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"roads CSV line {i}: {exc}") from exc
        if q < 0:
            raise ValidationError(f"roads CSV line {i}: negative q")
        roads.append(
            RoadSource(id=row["id"] or str(i), polyline=parse_linestring(row["wkt"]), q=q)
        )
    return roads


# ---------------------------------------------------------------- rasterizers


def vector2grid(points: list[PointSource], spec: Grid, log: LogFn = lambda _m: None) -> Grid:
    out = Grid(spec.ncols, spec.nrows, spec.xll, spec.yll, spec.cellsize, spec.nodata)
    skipped = 0
    for p in points:
        if not out.contains(p.x, p.y):
            skipped += 1
            continue
        row, col = out.cell_index(p.x, p.y)
        out.cells[row, col] += p.q
    if skipped:
        log(f"vector2grid: skipped {skipped} out-of-extent point(s)")
    return out


def _polyline_length(polyline) -> float:
    return sum(
        math.dist(polyline[i], polyline[i + 1]) for i in range(len(polyline) - 1)
    )


def _point_at_arclength(polyline, s: float) -> tuple[float, float]:
    remaining = s
    for i in range(len(polyline) - 1):
        (x0, y0), (x1, y1) = polyline[i], polyline[i + 1]
        seg = math.dist((x0, y0), (x1, y1))
        if remaining <= seg or i == len(polyline) - 2:
            t = remaining / seg if seg > 0 else 0.0
            return x0 + t * (x1 - x0), y0 + t * (y1 - y0)
        remaining -= seg
    return polyline[-1]


def road2grid(
    roads: list[RoadSource],
    spec: Grid,
    sumpol: float,
    log: LogFn = lambda _m: None,
) -> Grid:
    if sumpol < 0:
        raise ValidationError("sumpol must be non-negative")
    out = Grid(spec.ncols, spec.nrows, spec.xll, spec.yll, spec.cellsize, spec.nodata)
    skipped = 0
    for road in roads:
        length = _polyline_length(road.polyline)
        if length == 0:
            if road.q > 0:
                x, y = road.polyline[0]
                if out.contains(x, y):
                    row, col = out.cell_index(x, y)
                    out.cells[row, col] += sumpol * road.q
                else:
                    skipped += 1
            continue
        n = max(1, math.ceil(length / (spec.cellsize / 2)))
        share = sumpol * road.q / n
        for i in range(n):
            x, y = _point_at_arclength(road.polyline, (i + 0.5) * length / n)
            if not out.contains(x, y):
                skipped += 1
                continue
            row, col = out.cell_index(x, y)
            out.cells[row, col] += share
    if skipped:
        log(f"road2grid: skipped {skipped} out-of-extent sample(s)")
    return out


def g_sum(a: Grid, b: Grid) -> Grid:
    if not a.header_matches(b):
        raise ValidationError("g_sum: grid headers do not match")
    cells = a.cells + b.cells
    mask = (a.cells == a.nodata) | (b.cells == b.nodata)
    cells[mask] = a.nodata
    return Grid(a.ncols, a.nrows, a.xll, a.yll, a.cellsize, a.nodata, cells)


# ---------------------------------------------------------------- processes


TEXT_GRID = ComplexType(mime="text/plain")


def _param(ident: str, title: str, dtype, widget: str, **wkw) -> BoundParam:
    return BoundParam(
        decl=ParamDecl(identifier=ident, title=title, dtype=dtype),
        widget=WidgetDescriptor(kind=widget, **wkw),
        human_name=title,
    )


@dataclass(frozen=True)
class BuiltinProcess:
    descriptor: ProcessDescriptor
    run: Callable[[dict, ProgressFn, LogFn], dict]


def _run_vector2grid(inputs: dict, progress: ProgressFn, log: LogFn) -> dict:
    points = parse_points_csv(_as_text(inputs["points"]))
    spec = parse_grid_spec(_as_text(inputs["grid"]))
    out = vector2grid(points, spec, log)
    log(f"vector2grid: rasterized {len(points)} point(s)")
    return {"result": write_grid(out).encode("utf-8")}


def _run_road2grid(inputs: dict, progress: ProgressFn, log: LogFn) -> dict:
    roads = parse_roads_csv(_as_text(inputs["roads"]))
    spec = parse_grid_spec(_as_text(inputs["grid"]))
    sumpol = float(inputs["sumpol"])
    out = road2grid(roads, spec, sumpol, log)
    log(f"road2grid: rasterized {len(roads)} road(s), sumpol={sumpol}")
    return {"result": write_grid(out).encode("utf-8")}


def _run_g_sum(inputs: dict, progress: ProgressFn, log: LogFn) -> dict:
    a = read_grid(_as_text(inputs["a"]))
    b = read_grid(_as_text(inputs["b"]))
    out = g_sum(a, b)
    log("g_sum: combined two grids")
    return {"result": write_grid(out).encode("utf-8")}


def _run_slow_echo(inputs: dict, progress: ProgressFn, log: LogFn) -> dict:
    payload = _as_text(inputs.get("payload", ""))
    duration = float(inputs.get("duration", 1.0))
    if duration < 0 or duration > 60:
        raise ValidationError("slow_echo duration must be in [0, 60] seconds")
    for k in range(10):
        progress(10 * k)
        time.sleep(duration / 10)
    log(f"slow_echo: slept {duration}s")
    return {"result": payload}


def _as_text(value) -> str:
    if isinstance(value, bytes):
        return value.decode("utf-8")
    return str(value)


def builtin_processes() -> list[BuiltinProcess]:
    def desc(ident, name, description, inputs, outputs) -> ProcessDescriptor:
        return ProcessDescriptor(
            local_id=ident,
            display_name=name,
            description=description,
            endpoint=LOCAL,
            remote_identifier=ident,
            inputs=tuple(inputs),
            outputs=tuple(outputs),
            wrapper_name=ident,
            kind=ProcessKind.LOCAL_BUILTIN,
        )

    return [
        BuiltinProcess(
            descriptor=desc(
                "vector2grid",
                "vector2grid",
                "rasterizes point emission sources onto a regular grid",
                [
                    _param("points", "Point sources CSV", TEXT_GRID, "file"),
                    _param("grid", "Grid header spec", LiteralType("string"), "edit"),
                ],
                [_param("result", "Pollution grid", TEXT_GRID, "file_save")],
            ),
            run=_run_vector2grid,
        ),
        BuiltinProcess(
            descriptor=desc(
                "road2grid",
                "road2grid",
                "rasterizes road emission sources onto a regular grid",
                [
                    _param("roads", "Road sources CSV", TEXT_GRID, "file"),
                    _param("grid", "Grid header spec", LiteralType("string"), "edit"),
                    _param("sumpol", "Emission scale", LiteralType("double"), "number", min=0.0),
                ],
                [_param("result", "Pollution grid", TEXT_GRID, "file_save")],
            ),
            run=_run_road2grid,
        ),
        BuiltinProcess(
            descriptor=desc(
                "g_sum",
                "g_sum",
                "combines grids: elementwise sum of two rasters",
                [
                    _param("a", "First grid", TEXT_GRID, "file"),
                    _param("b", "Second grid", TEXT_GRID, "file"),
                ],
                [_param("result", "Summed grid", TEXT_GRID, "file_save")],
            ),
            run=_run_g_sum,
        ),
        BuiltinProcess(
            descriptor=desc(
                "slow_echo",
                "slow_echo",
                "echoes its payload after a configurable delay, reporting progress",
                [
                    _param("payload", "Text to echo", LiteralType("string"), "edit"),
                    _param("duration", "Delay in seconds", LiteralType("double"), "number", min=0.0, max=60.0),
                ],
                [_param("result", "Echoed text", LiteralType("string"), "edit")],
            ),
            run=_run_slow_echo,
        ),
    ]
