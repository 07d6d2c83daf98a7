"""Seasonal feature engineering over raster time series.

Stacks are aligned to a common cadence by per-pixel linear interpolation in
time, the growing-season start is detected from NDVI greenness, and per-pixel
feature vectors aggregate each parameter over the season window.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    EmptyWindowError,
    GridMismatchError,
    LengthMismatchError,
    ParseError,
)
from .gridio import CropCalendarEntry, TimeSeriesStack
from .raster import CropMask, GridGeometry, GridRaster, resample

# Canonical model inputs and the fixed within-window aggregates applied to
# each; the feature order below is the column order of every dataset.
CANONICAL_PARAMS = ("NDVI", "LST_DAY", "RAIN", "ET")
DEFAULT_AGGREGATES = ("mean", "max", "sum")
SUPPORTED_AGGREGATES = ("mean", "max", "sum", "min", "std")

ONSET_THRESHOLD_FRAC = 0.2
ONSET_MIN_AMPLITUDE = 0.05


@dataclass(frozen=True)
class SeasonWindow:
    """Day-of-year interval the features aggregate over."""

    start_day: int
    end_day: int
    source: str = "calendar"

    def __post_init__(self):
        for label, d in (("start_day", self.start_day), ("end_day", self.end_day)):
            if not 1 <= d <= 366:
                raise ValueError(f"{label} {d} outside [1, 366]")
        if self.source not in ("calendar", "detected_onset"):
            raise ValueError(f"unknown window source {self.source!r}")


def align_cadence(stack: TimeSeriesStack, target_cadence_days: int) -> TimeSeriesStack:
    """Interpolate a stack onto a uniform target cadence over its own time span.

    Per pixel, values are linear in time between bracketing frames; a target
    sample is nodata when either bracket is nodata there. Target days start
    at the stack's first day and never extend past its last.
    """
    if target_cadence_days < 1:
        raise ValueError(f"target cadence must be >= 1 day, got {target_cadence_days}")
    days = stack.days
    if target_cadence_days == stack.cadence_days:
        return stack
    cube = stack.as_cube()
    nodata = stack.nodata
    target_days = list(range(days[0], days[-1] + 1, target_cadence_days))
    frames = []
    for d in target_days:
        hi = int(np.searchsorted(days, d))
        if hi < len(days) and days[hi] == d:
            frames.append(stack.frames[hi].with_values(cube[hi].copy()))
            continue
        lo = hi - 1
        v0, v1 = cube[lo], cube[hi]
        w = (d - days[lo]) / (days[hi] - days[lo])
        vals = v0 * (1.0 - w) + v1 * w
        vals = np.where((v0 == nodata) | (v1 == nodata), nodata, vals)
        frames.append(stack.frames[0].with_values(vals))
    return TimeSeriesStack(
        parameter=stack.parameter,
        cadence_days=target_cadence_days,
        start_day_of_year=days[0],
        year=stack.year,
        frames=frames,
    )


def to_analysis_grid(
    stack: TimeSeriesStack, target_geo: GridGeometry, target_cadence_days: int
) -> TimeSeriesStack:
    """Align a native stack in time, then area-weight each frame onto the
    analysis grid. Cadence alignment runs on the native grid first so the
    interpolation sees full-resolution values.
    """
    aligned = align_cadence(stack, target_cadence_days)
    if aligned.geo == target_geo:
        return aligned
    frames = [resample(f, target_geo, method="area_weighted") for f in aligned.frames]
    return TimeSeriesStack(
        parameter=aligned.parameter,
        cadence_days=aligned.cadence_days,
        start_day_of_year=aligned.start_day_of_year,
        year=aligned.year,
        frames=frames,
    )


def detect_greenness_onset(ndvi_series, dates) -> int | None:
    """First date NDVI rises through base + 0.2 x amplitude from below.

    base is the mean of the two lowest values and amplitude the excursion of
    the maximum above it; a flat series (amplitude < 0.05) has no season and
    returns None.
    """
    v = np.asarray(ndvi_series, dtype=np.float64)
    d = np.asarray(dates)
    if v.shape != d.shape:
        raise LengthMismatchError(f"series length {v.size} != dates length {d.size}")
    if v.size < 3:
        raise ValueError(f"need at least 3 samples to detect an onset, got {v.size}")
    lowest_two = np.sort(v)[:2]
    base = (lowest_two[0] + lowest_two[1]) / 2.0
    amplitude = v.max() - base
    if amplitude < ONSET_MIN_AMPLITUDE:
        return None
    threshold = base + ONSET_THRESHOLD_FRAC * amplitude
    for i in range(1, v.size):
        if v[i - 1] < threshold <= v[i]:
            return int(d[i])
    return None


def make_season_window(entry: CropCalendarEntry, onset_day: int | None) -> SeasonWindow:
    """Window from sowing (or the detected onset, if later) to harvest start."""
    sow_start = entry.sowing[0]
    harvest_start = entry.harvest[0]
    if onset_day is not None and onset_day > sow_start:
        return SeasonWindow(start_day=onset_day, end_day=harvest_start, source="detected_onset")
    return SeasonWindow(start_day=sow_start, end_day=harvest_start, source="calendar")


@dataclass(eq=False)
class FeatureDataset:
    """Per-pixel design matrix with optional production targets.

    ``y`` is None for datasets built ahead of the season, before labels
    exist; labeled datasets have one target per row.
    """

    feature_names: list[str]
    X: np.ndarray
    y: np.ndarray | None
    pixel_index: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        if self.X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {self.X.shape}")
        if self.X.shape[1] != len(self.feature_names):
            raise ValueError(f"{self.X.shape[1]} columns vs {len(self.feature_names)} feature names")
        self.pixel_index = np.asarray(self.pixel_index, dtype=np.int64).reshape(-1, 2)
        if self.pixel_index.shape[0] != self.X.shape[0]:
            raise ValueError("pixel_index row count does not match X")
        if not np.isfinite(self.X).all():
            raise ValueError("X contains non-finite values")
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
            if self.y.shape[0] != self.X.shape[0]:
                raise ValueError("y length does not match X")
            if not np.isfinite(self.y).all():
                raise ValueError("y contains non-finite values")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    def take(self, indices) -> "FeatureDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return FeatureDataset(
            feature_names=list(self.feature_names),
            X=self.X[idx],
            y=None if self.y is None else self.y[idx],
            pixel_index=self.pixel_index[idx],
        )

    def equals(self, other: "FeatureDataset") -> bool:
        same_y = (self.y is None) == (other.y is None) and (
            self.y is None or np.array_equal(self.y, other.y)
        )
        return (
            self.feature_names == other.feature_names
            and np.array_equal(self.X, other.X)
            and same_y
            and np.array_equal(self.pixel_index, other.pixel_index)
        )


def _aggregate(cube: np.ndarray, how: str) -> np.ndarray:
    if how == "mean":
        return cube.mean(axis=0)
    if how == "max":
        return cube.max(axis=0)
    if how == "sum":
        return cube.sum(axis=0)
    if how == "min":
        return cube.min(axis=0)
    if how == "std":
        return cube.std(axis=0)
    raise ValueError(f"unknown aggregate {how!r}; supported: {SUPPORTED_AGGREGATES}")


def build_feature_vectors(
    stacks: dict[str, TimeSeriesStack],
    production: GridRaster | None,
    mask: CropMask,
    window: SeasonWindow,
    aggregates: tuple[str, ...] = DEFAULT_AGGREGATES,
) -> FeatureDataset:
    """One sample per masked pixel with complete valid data in the window.

    Features are, per canonical parameter, the window aggregates in declared
    order; y is the production value at the pixel (None when ``production``
    is None). Pixels with any nodata among the window frames or the label
    are dropped. Sample order is row-major over the grid.
    """
    missing = [p for p in CANONICAL_PARAMS if p not in stacks]
    if missing:
        raise ValueError(f"missing stacks for parameters {missing}")
    for how in aggregates:
        if how not in SUPPORTED_AGGREGATES:
            raise ValueError(f"unknown aggregate {how!r}; supported: {SUPPORTED_AGGREGATES}")
    geo = mask.geo
    for p in CANONICAL_PARAMS:
        if stacks[p].geo != geo:
            raise GridMismatchError(f"{p} stack grid differs from the mask grid")
    if production is not None and production.geo != geo:
        raise GridMismatchError("production grid differs from the mask grid")

    keep = mask.cells.copy()
    if production is not None:
        keep &= production.valid_mask()

    columns = []
    names = []
    for p in CANONICAL_PARAMS:
        stack = stacks[p]
        sel = [i for i, d in enumerate(stack.days) if window.start_day <= d <= window.end_day]
        if not sel:
            raise EmptyWindowError(
                f"{p} stack has no frames in window days [{window.start_day}, {window.end_day}]"
            )
        cube = stack.as_cube()[sel]
        keep &= np.all(cube != stack.nodata, axis=0)
        for how in aggregates:
            names.append(f"{p}_{how}")
            columns.append(_aggregate(cube, how))

    rows, cols = np.nonzero(keep)
    X = np.empty((rows.size, len(columns)), dtype=np.float64)
    for j, col in enumerate(columns):
        X[:, j] = col[rows, cols]
    y = production.values[rows, cols] if production is not None else None
    return FeatureDataset(
        feature_names=names,
        X=X,
        y=y,
        pixel_index=np.stack([rows, cols], axis=1),
    )


def write_dataset(ds: FeatureDataset, path) -> None:
    reserved = {"y", "row", "col"}
    clash = reserved.intersection(ds.feature_names)
    if clash:
        raise ValueError(f"feature names clash with reserved columns: {sorted(clash)}")
    p = Path(path)
    with p.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*ds.feature_names, "y", "row", "col"])
        for i in range(ds.n_samples):
            label = "" if ds.y is None else repr(float(ds.y[i]))
            w.writerow(
                [*(repr(float(v)) for v in ds.X[i]), label, int(ds.pixel_index[i, 0]), int(ds.pixel_index[i, 1])]
            )


def read_dataset(path) -> FeatureDataset:
    p = Path(path)
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{p}: empty dataset file") from None
        if header[-3:] != ["y", "row", "col"]:
            raise ParseError(f"{p}: dataset header must end with y,row,col")
        names = header[:-3]
        rows = list(reader)
    n = len(rows)
    X = np.empty((n, len(names)), dtype=np.float64)
    pix = np.empty((n, 2), dtype=np.int64)
    labels: list[float] = []
    blank = 0
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ParseError(f"{p}: row {i + 2} has {len(row)} fields, expected {len(header)}")
        try:
            X[i] = [float(v) for v in row[: len(names)]]
            pix[i] = (int(row[-2]), int(row[-1]))
            if row[-3] == "":
                blank += 1
            else:
                labels.append(float(row[-3]))
        except ValueError as e:
            raise ParseError(f"{p}: row {i + 2}: {e}") from e
    if blank and labels:
        raise ParseError(f"{p}: mixed labeled and unlabeled rows")
    y = None if blank or not labels else np.array(labels)
    if n == 0:
        y = None
    return FeatureDataset(feature_names=names, X=X, y=y, pixel_index=pix)
