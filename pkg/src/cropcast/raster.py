"""Geospatial grid data model: co-registration, resampling, masking, zonal sums.

Grids are regular lat/lon rasters with square cells in degrees. The origin is
the north-west corner: latitude decreases with row index, longitude increases
with column index. All operations are pure functions over immutable inputs;
reductions run in a fixed (row-major) order so outputs are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, NoOverlapError

# 1 km expressed in degrees at the equator; used to map the native sensor
# resolutions (1 / 5.55 / 0.5 / 10 km) onto degree cell sizes.
KM_IN_DEGREES = 0.008983

DEFAULT_NODATA = -9999.0


@dataclass(frozen=True)
class GridGeometry:
    """Georeferencing of a regular grid: NW corner, cell size, shape."""

    origin_lat: float
    origin_lon: float
    cell_size_deg: float
    n_rows: int
    n_cols: int

    def __post_init__(self):
        if self.cell_size_deg <= 0:
            raise ValueError(f"cell_size_deg must be > 0, got {self.cell_size_deg}")
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.n_rows}x{self.n_cols}")

    @property
    def south_lat(self) -> float:
        return self.origin_lat - self.n_rows * self.cell_size_deg

    @property
    def east_lon(self) -> float:
        return self.origin_lon + self.n_cols * self.cell_size_deg

    def row_centers(self) -> np.ndarray:
        return self.origin_lat - (np.arange(self.n_rows) + 0.5) * self.cell_size_deg

    def col_centers(self) -> np.ndarray:
        return self.origin_lon + (np.arange(self.n_cols) + 0.5) * self.cell_size_deg

    def overlaps(self, other: "GridGeometry") -> bool:
        lat = min(self.origin_lat, other.origin_lat) - max(self.south_lat, other.south_lat)
        lon = min(self.east_lon, other.east_lon) - max(self.origin_lon, other.origin_lon)
        return lat > 0 and lon > 0


def _as_grid(values, geo: GridGeometry) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size != geo.n_rows * geo.n_cols:
        raise ValueError(
            f"values length {arr.size} != {geo.n_rows}x{geo.n_cols} grid"
        )
    return arr.reshape(geo.n_rows, geo.n_cols)


@dataclass
class GridRaster:
    """A georeferenced grid of float64 values with a nodata sentinel.

    Every value is either finite or exactly equal to ``nodata``; the sentinel
    is matched by exact equality.
    """

    geo: GridGeometry
    values: np.ndarray
    nodata: float = DEFAULT_NODATA
    units: str = ""

    def __post_init__(self):
        self.values = _as_grid(self.values, self.geo)
        if not math.isfinite(self.nodata):
            raise ValueError("nodata sentinel must be finite (exact-equality match)")
        bad = ~np.isfinite(self.values) & (self.values != self.nodata)
        if bad.any():
            raise ValueError(f"{int(bad.sum())} values are non-finite and != nodata")

    @property
    def n_rows(self) -> int:
        return self.geo.n_rows

    @property
    def n_cols(self) -> int:
        return self.geo.n_cols

    @property
    def origin_lat(self) -> float:
        return self.geo.origin_lat

    @property
    def origin_lon(self) -> float:
        return self.geo.origin_lon

    @property
    def cell_size_deg(self) -> float:
        return self.geo.cell_size_deg

    def valid_mask(self) -> np.ndarray:
        return self.values != self.nodata

    def with_values(self, values) -> "GridRaster":
        return GridRaster(self.geo, values, nodata=self.nodata, units=self.units)

    def equals(self, other: "GridRaster") -> bool:
        return (
            self.geo == other.geo
            and self.nodata == other.nodata
            and self.units == other.units
            and np.array_equal(self.values, other.values)
        )


@dataclass
class CropMask:
    """Boolean raster marking cells where a crop is grown."""

    geo: GridGeometry
    cells: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.cells, dtype=bool)
        if arr.size != self.geo.n_rows * self.geo.n_cols:
            raise ValueError("mask cell count does not match its grid")
        self.cells = arr.reshape(self.geo.n_rows, self.geo.n_cols)


@dataclass
class ZoneMap:
    """Integer zone labels per cell; 0 means outside every zone."""

    geo: GridGeometry
    zone_ids: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.zone_ids)
        if arr.size != self.geo.n_rows * self.geo.n_cols:
            raise ValueError("zone id count does not match its grid")
        self.zone_ids = arr.reshape(self.geo.n_rows, self.geo.n_cols).astype(np.int64)

    def ids(self) -> list[int]:
        present = np.unique(self.zone_ids)
        return [int(z) for z in present if z != 0]


def _axis_overlap(t_lo, t_hi, s_lo, s_hi) -> np.ndarray:
    """Pairwise 1-D interval overlap lengths, shape (n_target, n_source)."""
    lo = np.maximum(t_lo[:, None], s_lo[None, :])
    hi = np.minimum(t_hi[:, None], s_hi[None, :])
    return np.clip(hi - lo, 0.0, None)


def _lat_intervals(geo: GridGeometry):
    hi = geo.origin_lat - np.arange(geo.n_rows) * geo.cell_size_deg
    return hi - geo.cell_size_deg, hi


def _lon_intervals(geo: GridGeometry):
    lo = geo.origin_lon + np.arange(geo.n_cols) * geo.cell_size_deg
    return lo, lo + geo.cell_size_deg


def resample(src: GridRaster, target_geo: GridGeometry, method: str) -> GridRaster:
    """Resample ``src`` onto ``target_geo``.

    ``nearest`` copies the source cell containing each target cell center
    (nodata where the center falls outside the source). ``area_weighted``
    averages intersecting source cells weighted by overlap area, skipping
    nodata cells and renormalizing; target cells with zero valid overlap
    get nodata.
    """
    if isinstance(target_geo, GridRaster):
        target_geo = target_geo.geo
    if not src.geo.overlaps(target_geo):
        raise NoOverlapError(
            f"source bounds lat [{src.geo.south_lat}, {src.geo.origin_lat}] "
            f"lon [{src.geo.origin_lon}, {src.geo.east_lon}] do not intersect target"
        )

    if method == "nearest":
        rows = np.floor((src.geo.origin_lat - target_geo.row_centers()) / src.geo.cell_size_deg).astype(int)
        cols = np.floor((target_geo.col_centers() - src.geo.origin_lon) / src.geo.cell_size_deg).astype(int)
        row_ok = (rows >= 0) & (rows < src.geo.n_rows)
        col_ok = (cols >= 0) & (cols < src.geo.n_cols)
        r = np.clip(rows, 0, src.geo.n_rows - 1)
        c = np.clip(cols, 0, src.geo.n_cols - 1)
        out = src.values[np.ix_(r, c)]
        out = np.where(row_ok[:, None] & col_ok[None, :], out, src.nodata)
        return GridRaster(target_geo, out, nodata=src.nodata, units=src.units)

    if method == "area_weighted":
        t_lat_lo, t_lat_hi = _lat_intervals(target_geo)
        s_lat_lo, s_lat_hi = _lat_intervals(src.geo)
        t_lon_lo, t_lon_hi = _lon_intervals(target_geo)
        s_lon_lo, s_lon_hi = _lon_intervals(src.geo)
        w_lat = _axis_overlap(t_lat_lo, t_lat_hi, s_lat_lo, s_lat_hi)
        w_lon = _axis_overlap(t_lon_lo, t_lon_hi, s_lon_lo, s_lon_hi)

        valid = src.valid_mask().astype(np.float64)
        vals = np.where(src.valid_mask(), src.values, 0.0)
        # Two chained einsums keep the reduction order fixed (no BLAS dispatch).
        num = np.einsum("il,jl->ij", np.einsum("ik,kl->il", w_lat, vals), w_lon)
        den = np.einsum("il,jl->ij", np.einsum("ik,kl->il", w_lat, valid), w_lon)
        out = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), src.nodata)
        return GridRaster(target_geo, out, nodata=src.nodata, units=src.units)

    raise ValueError(f"unknown resampling method {method!r}")


def build_crop_mask(production: GridRaster, threshold: float = 0.0) -> CropMask:
    """Mask cells whose production exceeds ``threshold`` (nodata excluded)."""
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    cells = (production.values > threshold) & production.valid_mask()
    return CropMask(production.geo, cells)


def apply_mask(r: GridRaster, m: CropMask) -> GridRaster:
    """Keep values where the mask is true, nodata elsewhere."""
    if r.geo != m.geo:
        raise GridMismatchError(f"raster grid {r.geo} != mask grid {m.geo}")
    return r.with_values(np.where(m.cells, r.values, r.nodata))


def zonal_sum(r: GridRaster, zones: ZoneMap) -> dict[int, tuple[float, int]]:
    """Per-zone (sum, valid cell count) over non-nodata cells.

    Zones whose cells are all nodata map to ``(0.0, 0)``. Summation order is
    row-major within each zone.
    """
    if r.geo != zones.geo:
        raise GridMismatchError(f"raster grid {r.geo} != zone grid {zones.geo}")
    valid = r.valid_mask()
    out: dict[int, tuple[float, int]] = {}
    for z in zones.ids():
        pick = (zones.zone_ids == z) & valid
        n = int(pick.sum())
        # Strict left-to-right accumulation in row-major order (boolean
        # indexing preserves it); pairwise summation would drift at the ulp.
        total = 0.0
        for v in r.values[pick]:
            total += float(v)
        out[z] = (total, n)
    return out
