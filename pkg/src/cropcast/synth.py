"""Deterministic synthetic scene generator.

Stands in for the satellite and production archives at desk scale: four
parameter stacks at their native cadences and resolution ratios, plus a
production raster that is a known smooth function of the season-aggregated
features. Every value derives from the seed, so identical configs produce
bit-identical scenes.

The production surface is documented arithmetic, not a secret: with m_P the
window mean of parameter P's frames after cadence alignment to 16 days and
area-weighted resampling to the production grid,

    g = c0 + c_ndvi * m_NDVI + c_lst * (m_LST - 296)
        + c_rain * m_RAIN + c_et * m_ET + c_syn * m_NDVI * m_RAIN

and production is max(g + noise, 0) inside the cropland belt, 0 outside,
with noise ~ N(0, (sigma * std(g over belt))^2) drawn per year. Frames are
rounded to 32-bit floats at creation so in-memory stacks match what a write
then read returns, and the surface is computed from those rounded frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidConfigError
from .features import CANONICAL_PARAMS, SeasonWindow, to_analysis_grid
from .gridio import (
    CADENCE_DAYS,
    CELL_KM,
    CropCalendarEntry,
    TimeSeriesStack,
    ZoneInfo,
    write_calendar,
    write_commodity_table,
    write_grid,
    write_stack,
    write_zone_map,
    write_zone_table,
)
from .raster import KM_IN_DEGREES, GridGeometry, GridRaster, ZoneMap

SCENE_CROP = "Maize and products"
SCENE_REGION = "Synthetic Region"
SCENE_COUNTRIES = ("Aberia", "Borundi", "Cordavia")

# Crop calendar shipped with the scene. The feature window is sowing start
# to harvest start; NDVI greenness crosses its onset threshold near day 81,
# safely before sowing, so the window never moves off the calendar.
SOWING = (110, 140)
GROWING = (140, 290)
HARVEST = (300, 330)

TARGET_CADENCE_DAYS = CADENCE_DAYS["NDVI"]
LST_REFERENCE_K = 296.0
BELT_QUANTILE = 0.4


@dataclass(frozen=True)
class LatLonBox:
    north: float
    west: float
    south: float
    east: float

    def __post_init__(self):
        if not (self.north > self.south and self.east > self.west):
            raise InvalidConfigError(
                f"degenerate extent: lat {self.south}..{self.north}, lon {self.west}..{self.east}"
            )

    @property
    def height_deg(self) -> float:
        return self.north - self.south

    @property
    def width_deg(self) -> float:
        return self.east - self.west


@dataclass(frozen=True)
class Couplings:
    """Coefficients linking season-aggregated features to production."""

    intercept: float = 25.0
    ndvi: float = 50.0
    lst: float = -0.9
    rain: float = 0.05
    et: float = 2.2
    synergy: float = 0.02


def _default_box() -> LatLonBox:
    side = 24 * CELL_KM["PRODUCTION"] * KM_IN_DEGREES
    return LatLonBox(north=12.0, west=0.0, south=12.0 - side, east=side)


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    box: LatLonBox = field(default_factory=_default_box)
    years: tuple[int, int] = (2018, 2020)
    noise_sigma: float = 0.1
    couplings: Couplings = field(default_factory=Couplings)

    def __post_init__(self):
        object.__setattr__(self, "years", (int(self.years[0]), int(self.years[1])))
        if self.noise_sigma < 0.0:
            raise InvalidConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.years[0] > self.years[1]:
            raise InvalidConfigError(f"year span {self.years} is reversed")
        geo = production_geometry(self)
        if geo.n_rows < 3 or geo.n_cols < 3:
            raise InvalidConfigError(
                f"extent too small: production grid would be {geo.n_rows}x{geo.n_cols}"
            )

    @property
    def year_list(self) -> list[int]:
        return list(range(self.years[0], self.years[1] + 1))


def _grid_for(cfg: SynthConfig, cell_km: float) -> GridGeometry:
    # Cells exactly tile the box: the count comes from the nominal cell
    # size, then the cell size is recomputed so n * cell == extent.
    nominal = cell_km * KM_IN_DEGREES
    n_rows = max(1, round(cfg.box.height_deg / nominal))
    n_cols = max(1, round(cfg.box.width_deg / nominal))
    if abs(cfg.box.height_deg / n_rows - cfg.box.width_deg / n_cols) > 1e-9:
        raise InvalidConfigError("extent must be square-celled: height/rows != width/cols")
    return GridGeometry(
        origin_lat=cfg.box.north,
        origin_lon=cfg.box.west,
        cell_size_deg=cfg.box.height_deg / n_rows,
        n_rows=n_rows,
        n_cols=n_cols,
    )


def production_geometry(cfg: SynthConfig) -> GridGeometry:
    return _grid_for(cfg, CELL_KM["PRODUCTION"])


def _smooth_field(geo: GridGeometry, box: LatLonBox, rng: np.random.Generator) -> np.ndarray:
    """Random smooth surface in [0, 1], a fixed function of (lat, lon).

    Four low-frequency plane waves with seeded coefficients; the value at a
    cell depends only on its center coordinates, so every grid samples the
    same underlying function and resolutions stay mutually consistent.
    """
    amp = rng.uniform(0.4, 1.0, size=4)
    px = rng.integers(1, 3, size=4)
    py = rng.integers(1, 3, size=4)
    phase = rng.uniform(0.0, 2.0 * math.pi, size=4)
    u = (np.asarray(geo.col_centers()) - box.west) / box.width_deg
    v = (box.north - np.asarray(geo.row_centers())) / box.height_deg
    vv, uu = np.meshgrid(v, u, indexing="ij")
    out = np.zeros((geo.n_rows, geo.n_cols), dtype=np.float64)
    for a, p, q, ph in zip(amp, px, py, phase):
        out += a * np.sin(2.0 * math.pi * (p * uu + q * vv) + ph)
    bound = float(amp.sum())
    return (out + bound) / (2.0 * bound)


def _season_curve(day: float) -> float:
    """Greenness fraction over the year: rises near day 90, falls near 290."""
    rise = 1.0 / (1.0 + math.exp(-0.15 * (day - 90.0)))
    fall = 1.0 / (1.0 + math.exp(-0.10 * (day - 290.0)))
    return rise - fall


def _rain_curve(day: float) -> float:
    """Wet-season factor: a half-sine between days 60 and 300, else dry."""
    if 60.0 <= day <= 300.0:
        return math.sin(math.pi * (day - 60.0) / 240.0)
    return 0.0


def _frame_days(parameter: str) -> list[int]:
    cadence = CADENCE_DAYS[parameter]
    return list(range(1, 366, cadence))


def _f32(values: np.ndarray) -> np.ndarray:
    return values.astype(np.float32).astype(np.float64)


@dataclass(frozen=True)
class _SceneFields:
    """Per-scene spatial surfaces, shared by every year of the span."""

    ndvi: np.ndarray
    lst: np.ndarray
    rain: np.ndarray
    et: np.ndarray
    belt: np.ndarray  # boolean, production grid


def _scene_fields(cfg: SynthConfig) -> _SceneFields:
    streams = np.random.SeedSequence(cfg.seed).spawn(5)
    geos = {p: _grid_for(cfg, CELL_KM[p]) for p in CANONICAL_PARAMS}
    fields = {
        p: _smooth_field(geos[p], cfg.box, np.random.default_rng(streams[i]))
        for i, p in enumerate(CANONICAL_PARAMS)
    }
    prod_geo = production_geometry(cfg)
    belt_field = _smooth_field(prod_geo, cfg.box, np.random.default_rng(streams[4]))
    belt = belt_field > np.quantile(belt_field, BELT_QUANTILE)
    return _SceneFields(
        ndvi=fields["NDVI"],
        lst=fields["LST_DAY"],
        rain=fields["RAIN"],
        et=fields["ET"],
        belt=belt,
    )


def _parameter_stack(cfg: SynthConfig, fields: _SceneFields, parameter: str, year: int) -> TimeSeriesStack:
    geo = _grid_for(cfg, CELL_KM[parameter])
    frames = []
    for day in _frame_days(parameter):
        s = _season_curve(float(day))
        if parameter == "NDVI":
            vals = 0.08 + (0.15 + 0.6 * fields.ndvi) * s
            units = "ndvi"
        elif parameter == "LST_DAY":
            vals = 288.0 + 12.0 * fields.lst + 4.0 * s
            units = "kelvin"
        elif parameter == "RAIN":
            vals = (20.0 + 130.0 * fields.rain) * _rain_curve(float(day))
            units = "mm"
        else:
            vals = (1.0 + 4.0 * fields.et) * (0.3 + 0.7 * s)
            units = "mm"
        frames.append(GridRaster(geo, _f32(vals), units=units))
    return TimeSeriesStack(
        parameter=parameter,
        cadence_days=CADENCE_DAYS[parameter],
        start_day_of_year=1,
        year=year,
        frames=frames,
    )


def scene_window() -> SeasonWindow:
    return SeasonWindow(start_day=SOWING[0], end_day=HARVEST[0], source="calendar")


def seasonal_means(stacks: dict[str, TimeSeriesStack], target_geo: GridGeometry) -> dict[str, np.ndarray]:
    """Window means of each parameter on the analysis grid.

    Exactly the arithmetic the feature builder applies: cadence-align to 16
    days on the native grid, area-weight each frame to the target grid, and
    average the frames whose day falls inside the season window.
    """
    window = scene_window()
    out = {}
    for p in CANONICAL_PARAMS:
        analysis = to_analysis_grid(stacks[p], target_geo, TARGET_CADENCE_DAYS)
        sel = [i for i, d in enumerate(analysis.days) if window.start_day <= d <= window.end_day]
        out[p] = analysis.as_cube()[sel].mean(axis=0)
    return out


def deterministic_production(cfg: SynthConfig, stacks: dict[str, TimeSeriesStack]) -> np.ndarray:
    """The noise-free production surface on the production grid, in tonnes."""
    m = seasonal_means(stacks, production_geometry(cfg))
    c = cfg.couplings
    return (
        c.intercept
        + c.ndvi * m["NDVI"]
        + c.lst * (m["LST_DAY"] - LST_REFERENCE_K)
        + c.rain * m["RAIN"]
        + c.et * m["ET"]
        + c.synergy * m["NDVI"] * m["RAIN"]
    )


def _production_raster(cfg: SynthConfig, fields: _SceneFields, stacks, year: int) -> GridRaster:
    geo = production_geometry(cfg)
    g = deterministic_production(cfg, stacks)
    values = np.where(fields.belt, np.maximum(g, 0.0), 0.0)
    if cfg.noise_sigma > 0.0 and int(fields.belt.sum()) >= 2:
        scale = cfg.noise_sigma * float(g[fields.belt].std())
        stream = np.random.default_rng(np.random.SeedSequence([cfg.seed, year]))
        noise = stream.normal(0.0, scale, size=values.shape)
        values = np.where(fields.belt, np.maximum(g + noise, 0.0), 0.0)
    return GridRaster(geo, _f32(values), units="t")


def generate_synthetic_scene(cfg: SynthConfig, year: int | None = None) -> dict[str, TimeSeriesStack]:
    """Scene for one year (default: the last of the span), keyed by parameter.

    PRODUCTION is a one-frame stack on the 10 km-class grid; the four
    feature parameters come at their native cadences and resolutions.
    """
    if year is None:
        year = cfg.years[1]
    if not cfg.years[0] <= year <= cfg.years[1]:
        raise InvalidConfigError(f"year {year} outside configured span {cfg.years}")
    fields = _scene_fields(cfg)
    stacks = {p: _parameter_stack(cfg, fields, p, year) for p in CANONICAL_PARAMS}
    production = _production_raster(cfg, fields, stacks, year)
    stacks["PRODUCTION"] = TimeSeriesStack(
        parameter="PRODUCTION",
        cadence_days=365,
        start_day_of_year=1,
        year=year,
        frames=[production],
    )
    return stacks


def crop_belt(cfg: SynthConfig) -> np.ndarray:
    return _scene_fields(cfg).belt


def scene_zone_map(cfg: SynthConfig) -> tuple[ZoneMap, list[ZoneInfo]]:
    """Three vertical country strips over the production grid."""
    geo = production_geometry(cfg)
    ids = np.zeros((geo.n_rows, geo.n_cols), dtype=np.int64)
    third = geo.n_cols / 3.0
    for j in range(geo.n_cols):
        ids[:, j] = min(int(j / third) + 1, 3)
    table = [
        ZoneInfo(zone_id=i + 1, country=name, region=SCENE_REGION)
        for i, name in enumerate(SCENE_COUNTRIES)
    ]
    return ZoneMap(geo, ids), table


def scene_balances() -> list[tuple[str, str, int, float, float]]:
    """Yearly commodity rows making the scene crop each country's staple."""
    commodities = [
        (SCENE_CROP, 1000.0, 500.0),
        ("Eggs", 500.0, 250.0),
        ("Honey", 450.0, 200.0),
        ("Tea", 400.0, 100.0),
        ("Coffee and products", 350.0, 90.0),
    ]
    rows = []
    for country in SCENE_COUNTRIES:
        for name, prod, cons in commodities:
            rows.append((country, name, 2018, prod, cons))
    return rows


def scene_calendar() -> list[CropCalendarEntry]:
    return [
        CropCalendarEntry(
            country=country,
            crop=SCENE_CROP,
            sowing=SOWING,
            growing=GROWING,
            harvest=HARVEST,
        )
        for country in SCENE_COUNTRIES
    ]


def write_scene(cfg: SynthConfig, out_dir) -> list[Path]:
    """Write every year of the scene plus the tables the pipeline ingests.

    Layout under ``out_dir``: stacks/ holds the parameter frames for all
    years, production_<year>.grdh/.grd the labels, zones.grdh/.grd and
    zones.csv the country partition, balances.csv and calendar.csv the
    selection inputs.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for year in cfg.year_list:
        scene = generate_synthetic_scene(cfg, year)
        for p in CANONICAL_PARAMS:
            written.extend(write_stack(scene[p], out / "stacks"))
        prod_path = out / f"production_{year}.grdh"
        write_grid(scene["PRODUCTION"].frames[0], prod_path, parameter="PRODUCTION", year=year, day_of_year=365)
        written.append(prod_path)
    zones, table = scene_zone_map(cfg)
    write_zone_map(zones, out / "zones.grdh")
    written.append(out / "zones.grdh")
    write_zone_table(out / "zones.csv", table)
    written.append(out / "zones.csv")
    write_commodity_table(out / "balances.csv", scene_balances())
    written.append(out / "balances.csv")
    write_calendar(out / "calendar.csv", scene_calendar())
    written.append(out / "calendar.csv")
    return written
