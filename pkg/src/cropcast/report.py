"""Country and region aggregation of pixel predictions.

Turns a predicted-production raster and a baseline raster into per-zone
totals, baseline-relative rates of change, a cellwise ratio map, and the
CSV / raster / graymap artifacts the pipeline emits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AllZeroError, GridMismatchError, ParseError, ZeroBaselineError
from .gridio import ZoneInfo
from .raster import GridRaster, ZoneMap, zonal_sum

ALL_COUNTRIES = "ALL"


def rate_of_change(baseline_t: float, predicted_t: float) -> float:
    """Percent change of predicted over baseline; baseline must be positive."""
    if baseline_t <= 0.0:
        raise ZeroBaselineError(f"baseline must be positive, got {baseline_t}")
    return 100.0 * (predicted_t - baseline_t) / baseline_t


@dataclass(frozen=True)
class ReportRow:
    region: str
    country: str
    crop: str
    baseline_t: float
    predicted_t: float
    rate_pct: float

    def __post_init__(self):
        if self.baseline_t < 0.0 or self.predicted_t < 0.0:
            raise ValueError("production totals must be nonnegative")
        if self.baseline_t > 0.0:
            want = rate_of_change(self.baseline_t, self.predicted_t)
            if abs(self.rate_pct - want) > 1e-9:
                raise ValueError(
                    f"rate {self.rate_pct} inconsistent with totals (expected {want})"
                )

    @classmethod
    def from_totals(cls, region, country, crop, baseline_t, predicted_t) -> "ReportRow":
        return cls(
            region=region,
            country=country,
            crop=crop,
            baseline_t=baseline_t,
            predicted_t=predicted_t,
            rate_pct=rate_of_change(baseline_t, predicted_t),
        )


@dataclass
class ForecastReport:
    rows: list[ReportRow]

    def sorted_rows(self) -> list[ReportRow]:
        return sorted(self.rows, key=lambda r: (r.region, r.country, r.crop))


def zone_names_from_table(table: list[ZoneInfo]) -> dict[int, str]:
    return {z.zone_id: z.country for z in table}


def country_totals(pred: GridRaster, zones: ZoneMap, zone_names: dict[int, str]) -> dict[str, float]:
    """Per-country production sums; countries with no valid cells get 0."""
    sums = zonal_sum(pred, zones)
    out: dict[str, float] = {}
    for zone_id, name in zone_names.items():
        total, _ = sums.get(zone_id, (0.0, 0))
        out[name] = out.get(name, 0.0) + total
    return out


def ratio_map(pred: GridRaster, baseline: GridRaster) -> GridRaster:
    """Cellwise pred/baseline; nodata where either is nodata or baseline <= 0."""
    if pred.geo != baseline.geo:
        raise GridMismatchError(f"prediction grid {pred.geo} != baseline grid {baseline.geo}")
    ok = pred.valid_mask() & baseline.valid_mask() & (baseline.values > 0.0)
    safe = np.where(ok, baseline.values, 1.0)
    values = np.where(ok, pred.values / safe, pred.nodata)
    return GridRaster(pred.geo, values, nodata=pred.nodata, units="ratio")


def share_of_total(totals: dict[str, float]) -> dict[str, float]:
    """Each country's percent of the grand total; needs one positive total."""
    for name, value in totals.items():
        if value < 0.0:
            raise ValueError(f"negative total for {name}: {value}")
    grand = 0.0
    for value in totals.values():
        grand += float(value)
    if grand <= 0.0:
        raise AllZeroError("all totals are zero; shares undefined")
    return {name: 100.0 * value / grand for name, value in totals.items()}


def emit_report(report: ForecastReport, path) -> None:
    """Write report.csv: rate to 2 decimals, totals at full precision."""
    p = Path(path)
    with p.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["region", "country", "crop", "baseline_t", "predicted_t", "rate_pct"])
        for row in report.sorted_rows():
            w.writerow(
                [
                    row.region,
                    row.country,
                    row.crop,
                    repr(row.baseline_t),
                    repr(row.predicted_t),
                    f"{row.rate_pct:.2f}",
                ]
            )


def read_report(path) -> ForecastReport:
    """Parse report.csv; rates are recomputed from the totals columns.

    The file carries rates rounded to 2 decimals, so reading recomputes the
    exact value from baseline/predicted instead of trusting the rounded one
    (zero-baseline rows keep the stored value).
    """
    p = Path(path)
    with p.open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        want = ["region", "country", "crop", "baseline_t", "predicted_t", "rate_pct"]
        if header != want:
            raise ParseError(f"{p}: expected header {want}, got {header}")
        rows = []
        for i, rec in enumerate(reader, start=2):
            if len(rec) != 6:
                raise ParseError(f"{p}:{i}: expected 6 fields, got {len(rec)}")
            try:
                baseline = float(rec[3])
                predicted = float(rec[4])
                stored_rate = float(rec[5])
            except ValueError as exc:
                raise ParseError(f"{p}:{i}: {exc}") from None
            if baseline > 0.0:
                rate = rate_of_change(baseline, predicted)
            else:
                rate = stored_rate
            rows.append(
                ReportRow(
                    region=rec[0],
                    country=rec[1],
                    crop=rec[2],
                    baseline_t=baseline,
                    predicted_t=predicted,
                    rate_pct=rate,
                )
            )
    return ForecastReport(rows=rows)


def render_pgm(r: GridRaster, path) -> None:
    """Binary PGM rendering for eyeballing a raster without a plot stack.

    Valid cells map linearly onto gray 1..255 (min -> 1, max -> 255, a
    constant field -> 128); nodata cells are 0.
    """
    valid = r.valid_mask()
    gray = np.zeros(r.values.shape, dtype=np.uint8)
    if valid.any():
        vals = r.values[valid]
        lo = float(vals.min())
        hi = float(vals.max())
        if hi > lo:
            scaled = 1.0 + np.round(254.0 * (r.values - lo) / (hi - lo))
        else:
            scaled = np.full(r.values.shape, 128.0)
        gray[valid] = scaled[valid].astype(np.uint8)
    n_rows, n_cols = gray.shape
    header = f"P5\n{n_cols} {n_rows}\n255\n".encode("ascii")
    Path(path).write_bytes(header + gray.tobytes())
