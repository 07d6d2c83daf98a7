"""File formats and tabular ingestion.

Rasters live in two files: a ``.grdh`` JSON header (georeferencing, nodata,
units, parameter, date) and a ``.grd`` raw binary of row-major 32-bit
little-endian floats. Commodity balances and crop calendars are plain UTF-8
CSV with a header row.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    EmptyStackError,
    GridMismatchError,
    HeaderMismatchError,
    NegativeQuantityError,
    ParseError,
)
from .raster import GridGeometry, GridRaster, ZoneMap

# Native temporal resolutions of the four biogeophysical inputs, in days.
CADENCE_DAYS = {"NDVI": 16, "LST_DAY": 8, "RAIN": 30, "ET": 8}

# Native spatial resolutions in km (production labels are the 10 km layer).
CELL_KM = {"NDVI": 1.0, "LST_DAY": 1.0, "RAIN": 5.55, "ET": 0.5, "PRODUCTION": 10.0}

_HEADER_FIELDS = {
    "origin_lat": float,
    "origin_lon": float,
    "cell_size_deg": float,
    "n_rows": int,
    "n_cols": int,
    "nodata": float,
    "units": str,
    "parameter": str,
    "year": int,
    "day_of_year": int,
}


@dataclass(frozen=True)
class FrameMeta:
    """Per-layer identity carried by the header but not by GridRaster."""

    parameter: str
    year: int
    day_of_year: int


def _header_path(path) -> Path:
    p = Path(path)
    if p.suffix != ".grdh":
        raise ValueError(f"expected a .grdh header path, got {p}")
    return p


def write_grid(r: GridRaster, path, parameter: str = "", year: int = 0, day_of_year: int = 0) -> None:
    """Write ``r`` as a header/payload pair; ``path`` names the header.

    Values are quantized to float32. The nodata sentinel must survive that
    quantization exactly, and no valid value may round onto it, or sentinel
    matching would corrupt the raster on read.
    """
    hp = _header_path(path)
    if float(np.float32(r.nodata)) != r.nodata:
        raise ValueError(f"nodata {r.nodata!r} is not exactly representable in float32")
    quantized = r.values.astype("<f4")
    collided = (quantized == np.float32(r.nodata)) & r.valid_mask()
    if collided.any():
        raise ValueError(
            f"{int(collided.sum())} valid values quantize onto the nodata sentinel {r.nodata!r}"
        )
    header = {
        "origin_lat": r.geo.origin_lat,
        "origin_lon": r.geo.origin_lon,
        "cell_size_deg": r.geo.cell_size_deg,
        "n_rows": r.geo.n_rows,
        "n_cols": r.geo.n_cols,
        "nodata": r.nodata,
        "units": r.units,
        "parameter": parameter,
        "year": int(year),
        "day_of_year": int(day_of_year),
    }
    hp.write_text(json.dumps(header, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    hp.with_suffix(".grd").write_bytes(quantized.tobytes(order="C"))


def _parse_header(hp: Path) -> dict:
    try:
        raw = json.loads(hp.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ParseError(f"{hp}: header is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ParseError(f"{hp}: header must be a JSON object")
    out = {}
    for key, kind in _HEADER_FIELDS.items():
        if key not in raw:
            raise ParseError(f"{hp}: header missing key {key!r}")
        v = raw[key]
        if kind is float and isinstance(v, (int, float)) and not isinstance(v, bool):
            out[key] = float(v)
        elif kind is int and isinstance(v, int) and not isinstance(v, bool):
            out[key] = v
        elif kind is str and isinstance(v, str):
            out[key] = v
        else:
            raise ParseError(f"{hp}: header key {key!r} has wrong type {type(v).__name__}")
    return out


def read_grid(path) -> GridRaster:
    hp = _header_path(path)
    h = _parse_header(hp)
    try:
        geo = GridGeometry(h["origin_lat"], h["origin_lon"], h["cell_size_deg"], h["n_rows"], h["n_cols"])
    except ValueError as e:
        raise ParseError(f"{hp}: {e}") from e
    payload = hp.with_suffix(".grd").read_bytes()
    expected = h["n_rows"] * h["n_cols"] * 4
    if len(payload) != expected:
        raise HeaderMismatchError(
            f"{hp}: payload is {len(payload)} bytes, header implies {expected}"
        )
    values = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    try:
        return GridRaster(geo, values, nodata=h["nodata"], units=h["units"])
    except ValueError as e:
        raise ParseError(f"{hp}: {e}") from e


def read_frame_meta(path) -> FrameMeta:
    h = _parse_header(_header_path(path))
    return FrameMeta(parameter=h["parameter"], year=h["year"], day_of_year=h["day_of_year"])


@dataclass
class TimeSeriesStack:
    """Time-ordered frames of one parameter over one year, uniform cadence."""

    parameter: str
    cadence_days: int
    start_day_of_year: int
    year: int
    frames: list[GridRaster]

    def __post_init__(self):
        if not self.frames:
            raise EmptyStackError(f"stack {self.parameter}/{self.year} has no frames")
        if self.cadence_days < 1:
            raise ValueError(f"cadence_days must be >= 1, got {self.cadence_days}")
        if not 1 <= self.start_day_of_year <= 366:
            raise ValueError(f"start_day_of_year {self.start_day_of_year} outside [1, 366]")
        first = self.frames[0]
        for f in self.frames[1:]:
            if f.geo != first.geo or f.nodata != first.nodata:
                raise GridMismatchError(
                    f"stack {self.parameter}/{self.year}: frames disagree on grid metadata"
                )

    @property
    def geo(self) -> GridGeometry:
        return self.frames[0].geo

    @property
    def nodata(self) -> float:
        return self.frames[0].nodata

    @property
    def days(self) -> list[int]:
        return [self.start_day_of_year + i * self.cadence_days for i in range(len(self.frames))]

    def as_cube(self) -> np.ndarray:
        """(n_frames, n_rows, n_cols) float64 view of the stack."""
        return np.stack([f.values for f in self.frames], axis=0)


def stack_file_name(parameter: str, year: int, day_of_year: int) -> str:
    return f"{parameter}_{year}_{day_of_year:03d}.grdh"


def write_stack(stack: TimeSeriesStack, dirpath) -> list[Path]:
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    paths = []
    for day, frame in zip(stack.days, stack.frames):
        hp = d / stack_file_name(stack.parameter, stack.year, day)
        write_grid(frame, hp, parameter=stack.parameter, year=stack.year, day_of_year=day)
        paths.append(hp)
    return paths


def read_stack(dirpath, parameter: str, year: int) -> TimeSeriesStack:
    d = Path(dirpath)
    pattern = re.compile(rf"^{re.escape(parameter)}_{year}_(\d{{3}})\.grdh$")
    found = sorted((int(m.group(1)), p) for p in d.iterdir() if (m := pattern.match(p.name)))
    if not found:
        raise EmptyStackError(f"no {parameter} frames for {year} under {d}")
    days = [day for day, _ in found]
    frames = [read_grid(p) for _, p in found]
    cadence = days[1] - days[0] if len(days) > 1 else 1
    if any(b - a != cadence for a, b in zip(days, days[1:])) or cadence < 1:
        raise ParseError(f"{parameter}/{year} frames under {d} are not uniformly spaced: days {days}")
    return TimeSeriesStack(parameter=parameter, cadence_days=cadence, start_day_of_year=days[0], year=year, frames=frames)


@dataclass(frozen=True)
class CommodityBalance:
    """Mean yearly production and domestic consumption of one commodity."""

    country: str
    commodity: str
    production_t: float
    consumption_t: float

    def __post_init__(self):
        if self.production_t < 0 or self.consumption_t < 0:
            raise NegativeQuantityError(
                f"{self.country}/{self.commodity}: production and consumption must be >= 0"
            )


def _read_csv_rows(path, required: list[str]) -> list[dict]:
    p = Path(path)
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        missing = [c for c in required if c not in cols]
        if missing:
            raise ParseError(f"{p}: missing columns {missing}; found {cols}")
        rows = list(reader)
    for i, row in enumerate(rows, start=2):
        if any(row.get(c) in (None, "") for c in required):
            raise ParseError(f"{p}:{i}: empty field among {required}")
    return rows


def _to_float(path, row_no: int, name: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError as e:
        raise ParseError(f"{path}:{row_no}: column {name!r} value {raw!r} is not a number") from e


def _to_int(path, row_no: int, name: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError as e:
        raise ParseError(f"{path}:{row_no}: column {name!r} value {raw!r} is not an integer") from e


def _sorted_mean(values: list[float]) -> float:
    # Summing in sorted order makes the mean independent of input row order.
    total = 0.0
    for v in sorted(values):
        total += v
    return total / len(values)


def read_commodity_table(path) -> list[CommodityBalance]:
    """Read a yearly balance CSV and average each (country, commodity) over years.

    Columns: country,commodity,year,production_t,consumption_t. Averages use
    whatever years are present; no imputation.
    """
    rows = _read_csv_rows(path, ["country", "commodity", "year", "production_t", "consumption_t"])
    groups: dict[tuple[str, str], tuple[list[float], list[float]]] = {}
    for i, row in enumerate(rows, start=2):
        prod = _to_float(path, i, "production_t", row["production_t"])
        cons = _to_float(path, i, "consumption_t", row["consumption_t"])
        _to_int(path, i, "year", row["year"])
        if prod < 0 or cons < 0:
            raise NegativeQuantityError(f"{path}:{i}: negative production or consumption")
        g = groups.setdefault((row["country"], row["commodity"]), ([], []))
        g[0].append(prod)
        g[1].append(cons)
    return [
        CommodityBalance(country=c, commodity=m, production_t=_sorted_mean(p), consumption_t=_sorted_mean(s))
        for (c, m), (p, s) in sorted(groups.items())
    ]


def write_commodity_table(path, rows) -> None:
    """Write yearly balance rows of (country, commodity, year, production_t, consumption_t)."""
    p = Path(path)
    with p.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["country", "commodity", "year", "production_t", "consumption_t"])
        for country, commodity, year, prod, cons in rows:
            w.writerow([country, commodity, int(year), repr(float(prod)), repr(float(cons))])


@dataclass(frozen=True)
class CropCalendarEntry:
    """Sowing/growing/harvest day-of-year ranges for one country and crop.

    A range may wrap across the year end, represented by end < start.
    """

    country: str
    crop: str
    sowing: tuple[int, int]
    growing: tuple[int, int]
    harvest: tuple[int, int]

    def __post_init__(self):
        for label, (a, b) in (("sowing", self.sowing), ("growing", self.growing), ("harvest", self.harvest)):
            if not (1 <= a <= 366 and 1 <= b <= 366):
                raise ValueError(f"{self.country}/{self.crop}: {label} range ({a}, {b}) outside [1, 366]")


_CALENDAR_COLS = ["country", "crop", "sow_start", "sow_end", "grow_start", "grow_end", "harvest_start", "harvest_end"]


def read_calendar(path) -> list[CropCalendarEntry]:
    rows = _read_csv_rows(path, _CALENDAR_COLS)
    out = []
    for i, row in enumerate(rows, start=2):
        days = {c: _to_int(path, i, c, row[c]) for c in _CALENDAR_COLS[2:]}
        try:
            out.append(
                CropCalendarEntry(
                    country=row["country"],
                    crop=row["crop"],
                    sowing=(days["sow_start"], days["sow_end"]),
                    growing=(days["grow_start"], days["grow_end"]),
                    harvest=(days["harvest_start"], days["harvest_end"]),
                )
            )
        except ValueError as e:
            raise ParseError(f"{path}:{i}: {e}") from e
    return sorted(out, key=lambda e: (e.country, e.crop))


def write_calendar(path, entries: list[CropCalendarEntry]) -> None:
    p = Path(path)
    with p.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(_CALENDAR_COLS)
        for e in entries:
            w.writerow([e.country, e.crop, *e.sowing, *e.growing, *e.harvest])


@dataclass(frozen=True)
class ZoneInfo:
    """Zone-table row tying a raster zone id to a country and region."""

    zone_id: int
    country: str
    region: str


def write_zone_map(zones: ZoneMap, path) -> None:
    r = GridRaster(zones.geo, zones.zone_ids.astype(np.float64), nodata=-1.0, units="zone_id")
    write_grid(r, path, parameter="ZONES")


def read_zone_map(path) -> ZoneMap:
    r = read_grid(path)
    ids = r.values
    if not np.array_equal(ids, np.round(ids)) or (ids < 0).any():
        raise ParseError(f"{path}: zone ids must be nonnegative integers")
    return ZoneMap(r.geo, ids.astype(np.int64))


def read_zone_table(path) -> list[ZoneInfo]:
    rows = _read_csv_rows(path, ["zone_id", "country", "region"])
    out = [
        ZoneInfo(zone_id=_to_int(path, i, "zone_id", row["zone_id"]), country=row["country"], region=row["region"])
        for i, row in enumerate(rows, start=2)
    ]
    if len({z.zone_id for z in out}) != len(out):
        raise ParseError(f"{path}: duplicate zone ids")
    return sorted(out, key=lambda z: z.zone_id)


def write_zone_table(path, zones: list[ZoneInfo]) -> None:
    p = Path(path)
    with p.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["zone_id", "country", "region"])
        for z in sorted(zones, key=lambda z: z.zone_id):
            w.writerow([z.zone_id, z.country, z.region])
