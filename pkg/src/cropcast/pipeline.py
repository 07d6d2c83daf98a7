"""End-to-end pipeline stages behind the CLI.

Every stage reads its inputs from files and writes its outputs to files
under the configured output directory, never passing arrays in memory from
one stage to the next. A full run and a stage-at-a-time run therefore
produce byte-identical artifacts, which the manifest asserts via content
hashes. Invoking a stage recomputes it; missing prerequisites are filled
in first, existing ones are trusted.

The one modelling choice made here rather than in the library modules is
how unobserved late-season frames are forecast: one forest per parameter
and country runs on the country-mean series (pooled over that country's
zone cells on the analysis grid, across all available years), and each
pixel takes the pooled forecast scaled by the ratio of its own observed
seasonal mean to the country's. Per-pixel forests would cost thousands of
fits for no benefit at the grid sizes involved, while a single global
forest would blur country-level contrasts.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import PipelineConfig, load_config, validate_config
from .crops import select_country_crops, select_regional_crops, tally_region
from .errors import (
    CropcastError,
    DivergenceError,
    EmptyInputError,
    GridMismatchError,
    InsufficientHistoryError,
    InvalidConfigError,
)
from .features import (
    CANONICAL_PARAMS,
    build_feature_vectors,
    detect_greenness_onset,
    make_season_window,
    read_dataset,
    to_analysis_grid,
    write_dataset,
)
from .forest import day_of_year, forecast_series
from .gridio import (
    TimeSeriesStack,
    read_calendar,
    read_commodity_table,
    read_grid,
    read_stack,
    read_zone_map,
    read_zone_table,
    stack_file_name,
    write_grid,
)
from .mlp import load_mlp, predict_mlp, r_squared, rmse, save_mlp, split_dataset, train_mlp
from .raster import CropMask, GridRaster, build_crop_mask
from .report import (
    ALL_COUNTRIES,
    ForecastReport,
    ReportRow,
    country_totals,
    emit_report,
    ratio_map,
    render_pgm,
    zone_names_from_table,
)
from .synth import write_scene

TARGET_CADENCE_DAYS = 16

STAGES = (
    "synth",
    "select-crops",
    "mask",
    "forecast-features",
    "features",
    "train",
    "predict",
    "report",
)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _read_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))


def _out(cfg: PipelineConfig, name: str) -> Path:
    return cfg.paths.out_dir / name


def _aligned_dir(cfg: PipelineConfig) -> Path:
    return _out(cfg, "aligned")


# ---------------------------------------------------------------- synth


def _scene_inputs_present(cfg: PipelineConfig) -> bool:
    needed = [
        cfg.paths.stacks_dir,
        cfg.paths.balances,
        cfg.paths.calendar,
        cfg.paths.zones_grid,
        cfg.paths.zones_table,
        cfg.paths.baseline_production,
    ]
    return all(p.exists() for p in needed)


def stage_synth(cfg: PipelineConfig) -> None:
    """Generate the synthetic scene the other stages consume."""
    scene_dir = cfg.paths.out_dir / "scene"
    scene_dir.mkdir(parents=True, exist_ok=True)
    write_scene(cfg.synth_config(), scene_dir)


def _ensure_scene(cfg: PipelineConfig) -> None:
    if cfg.scene is not None and not _scene_inputs_present(cfg):
        stage_synth(cfg)


# ---------------------------------------------------------- select-crops


def _region_by_country(cfg: PipelineConfig) -> dict[str, str]:
    table = read_zone_table(cfg.paths.zones_table)
    out: dict[str, str] = {}
    for z in table:
        out.setdefault(z.country, z.region)
    return out


def stage_select(cfg: PipelineConfig) -> None:
    """Regional staple selection from the commodity balances."""
    _ensure_scene(cfg)
    balances = read_commodity_table(cfg.paths.balances)
    regions = _region_by_country(cfg)

    by_country: dict[str, list] = {}
    for rec in balances:
        if rec.country in regions:
            by_country.setdefault(rec.country, []).append(rec)
    if not by_country:
        raise EmptyInputError("no commodity records for any zoned country")

    selections = {
        c: select_country_crops(recs, top_n=cfg.selection.top_n, keep=cfg.selection.keep)
        for c, recs in sorted(by_country.items())
    }
    rows = []
    staples = set()
    for region in sorted(set(regions.values())):
        members = [selections[c] for c in sorted(selections) if regions[c] == region]
        tallies = tally_region(members, region=region)
        chosen = select_regional_crops(
            tallies,
            n_countries=len(members),
            threshold_frac=cfg.selection.threshold_frac,
            cap=cfg.selection.cap,
        )
        for t in chosen:
            rows.append((region, t.crop, t.count))
            staples.add(t.crop)

    if cfg.run.crop not in staples:
        raise EmptyInputError(
            f"configured crop {cfg.run.crop!r} was not selected as a staple in any region"
        )
    with _out(cfg, "staples.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["region", "crop", "count"])
        w.writerows(rows)


def _ensure_select(cfg: PipelineConfig) -> None:
    if not _out(cfg, "staples.csv").exists():
        stage_select(cfg)


# ------------------------------------------------------------------ mask


def stage_mask(cfg: PipelineConfig) -> None:
    """Crop mask: baseline-year cells with any recorded production."""
    _ensure_scene(cfg)
    baseline = read_grid(cfg.paths.baseline_production)
    mask = build_crop_mask(baseline, threshold=0.0)
    as_grid = GridRaster(mask.geo, mask.cells.astype(np.float64), units="")
    write_grid(as_grid, _out(cfg, "mask.grdh"), parameter="MASK", year=cfg.run.baseline_year)


def _ensure_mask(cfg: PipelineConfig) -> None:
    if not _out(cfg, "mask.grdh").exists():
        stage_mask(cfg)


def _read_mask(cfg: PipelineConfig) -> CropMask:
    r = read_grid(_out(cfg, "mask.grdh"))
    return CropMask(r.geo, r.values > 0.5)


# ------------------------------------------------- forecast-features


def _available_years(cfg: PipelineConfig, parameter: str) -> list[int]:
    pat = re.compile(rf"^{re.escape(parameter)}_(\d{{4}})_\d{{3}}\.grdh$")
    years = set()
    for p in cfg.paths.stacks_dir.iterdir():
        m = pat.match(p.name)
        if m:
            years.add(int(m.group(1)))
    got = sorted(y for y in years if y <= cfg.run.target_year)
    if cfg.run.target_year not in years:
        raise EmptyInputError(
            f"stacks dir has no {parameter} frames for target year {cfg.run.target_year}"
        )
    return got


def _observed_stack(cfg: PipelineConfig, parameter: str, year: int, geo) -> TimeSeriesStack:
    """Native stack for one year, truncated to the as-of day for the target
    year, then aligned onto the analysis grid and cadence."""
    stack = read_stack(cfg.paths.stacks_dir, parameter, year)
    if year == cfg.run.target_year:
        kept = [f for d, f in zip(stack.days, stack.frames) if d <= cfg.run.asof_day]
        if not kept:
            raise InsufficientHistoryError(
                f"{parameter} {year}: no frames on or before as-of day {cfg.run.asof_day}"
            )
        stack = TimeSeriesStack(
            parameter=stack.parameter,
            cadence_days=stack.cadence_days,
            start_day_of_year=stack.start_day_of_year,
            year=stack.year,
            frames=kept,
        )
    return to_analysis_grid(stack, geo, TARGET_CADENCE_DAYS)


def _country_cells(cfg: PipelineConfig, geo) -> dict[str, np.ndarray]:
    zones = read_zone_map(cfg.paths.zones_grid)
    if zones.geo != geo:
        raise GridMismatchError("zone map grid differs from the analysis (production) grid")
    names = zone_names_from_table(read_zone_table(cfg.paths.zones_table))
    cells: dict[str, np.ndarray] = {}
    for zid in zones.ids():
        name = names.get(zid)
        if name is None:
            raise EmptyInputError(f"zone id {zid} on the map is missing from the zone table")
        member = zones.zone_ids == zid
        cells[name] = cells.get(name, np.zeros_like(member)) | member
    return cells


def _forecast_fingerprint(cfg: PipelineConfig, years: list[int]) -> dict:
    return {
        "seed": cfg.seed,
        "target_year": cfg.run.target_year,
        "asof_day": cfg.run.asof_day,
        "years": years,
        "forest": asdict(cfg.forest),
        "cadence_days": TARGET_CADENCE_DAYS,
    }


def stage_forecast(cfg: PipelineConfig) -> None:
    """Align every stack onto the analysis grid and extend the target year
    past the as-of day with pooled per-country forecasts."""
    _ensure_scene(cfg)
    baseline = read_grid(cfg.paths.baseline_production)
    geo = baseline.geo
    cells = _country_cells(cfg, geo)

    aligned_dir = _aligned_dir(cfg)
    aligned_dir.mkdir(parents=True, exist_ok=True)
    full_days = list(range(1, 366, TARGET_CADENCE_DAYS))

    years = None
    observed_days: list[int] = []
    forecast_days: list[int] = []
    for param in CANONICAL_PARAMS:
        got = _available_years(cfg, param)
        if years is None:
            years = got
        elif got != years:
            raise EmptyInputError(f"{param} stack years {got} differ from {years}")

        aligned: dict[int, TimeSeriesStack] = {}
        for year in years:
            stack = _observed_stack(cfg, param, year, geo)
            for day, frame in zip(stack.days, stack.frames):
                write_grid(
                    frame,
                    aligned_dir / stack_file_name(param, year, day),
                    parameter=param,
                    year=year,
                    day_of_year=day,
                )
            aligned[year] = stack

        target = aligned[cfg.run.target_year]
        observed_days = target.days
        last_obs = observed_days[-1]
        needed = [d for d in full_days if d > last_obs]
        forecast_days = needed
        if not needed:
            continue

        base_year = years[0]
        horizon = full_days[-1] - last_obs
        target_cube = target.as_cube()
        nodata = target.nodata
        obs_valid = np.all(target_cube != nodata, axis=0)
        pixel_obs_mean = target_cube.mean(axis=0)

        frames = {d: np.full((geo.n_rows, geo.n_cols), nodata) for d in needed}
        for country in sorted(cells):
            member = cells[country]
            history = []
            for year in years:
                stack = aligned[year]
                for day, frame in zip(stack.days, stack.frames):
                    ok = member & frame.valid_mask()
                    if not ok.any():
                        raise EmptyInputError(
                            f"{param} {year} day {day}: no valid cells in {country}"
                        )
                    history.append(((year - base_year) * 365 + day, float(frame.values[ok].mean())))
            seed = cfg.stage_seed(f"forecast:{param}:{country}")
            out = forecast_series(history, horizon_days=horizon, params=cfg.forest, seed=seed)
            pooled = {day_of_year(d): v for d, v in out}
            if sorted(pooled) != needed:
                raise InsufficientHistoryError(
                    f"{param}/{country}: forecast produced days {sorted(pooled)}, needed {needed}"
                )
            ok = member & obs_valid
            den = float(pixel_obs_mean[ok].mean()) if ok.any() else 0.0
            ratio = np.ones((geo.n_rows, geo.n_cols))
            if den != 0.0:
                ratio[ok] = pixel_obs_mean[ok] / den
            for d in needed:
                frames[d][member] = pooled[d] * ratio[member]

        units = target.frames[0].units
        for d in needed:
            grid = GridRaster(geo, frames[d], nodata=nodata, units=units)
            write_grid(
                grid,
                aligned_dir / stack_file_name(param, cfg.run.target_year, d),
                parameter=param,
                year=cfg.run.target_year,
                day_of_year=d,
            )

    meta = _forecast_fingerprint(cfg, years or [])
    meta["observed_days"] = observed_days
    meta["forecast_days"] = forecast_days
    _write_json(_out(cfg, "forecast_meta.json"), meta)


def _ensure_forecast(cfg: PipelineConfig) -> None:
    meta_path = _out(cfg, "forecast_meta.json")
    if meta_path.exists():
        meta = _read_json(meta_path)
        want = _forecast_fingerprint(cfg, meta.get("years", []))
        if all(meta.get(k) == v for k, v in want.items()):
            return
    stage_forecast(cfg)


# -------------------------------------------------------------- features


def _calendar_entry(cfg: PipelineConfig):
    entries = [e for e in read_calendar(cfg.paths.calendar) if e.crop == cfg.run.crop]
    if not entries:
        raise EmptyInputError(f"calendar has no entry for crop {cfg.run.crop!r}")
    return min(entries, key=lambda e: e.country)


def stage_features(cfg: PipelineConfig) -> None:
    """Season-window feature vectors for the training and target years."""
    _ensure_mask(cfg)
    _ensure_forecast(cfg)
    mask = _read_mask(cfg)
    aligned_dir = _aligned_dir(cfg)

    ndvi = read_stack(aligned_dir, "NDVI", cfg.run.target_year)
    observed = [
        (d, f) for d, f in zip(ndvi.days, ndvi.frames) if d <= cfg.run.asof_day
    ]
    series = []
    for _, frame in observed:
        ok = mask.cells & frame.valid_mask()
        if not ok.any():
            raise EmptyInputError("no valid masked NDVI cells to detect the season onset")
        series.append(float(frame.values[ok].mean()))
    onset = detect_greenness_onset(series, [d for d, _ in observed])
    entry = _calendar_entry(cfg)
    window = make_season_window(entry, onset)
    _write_json(
        _out(cfg, "window.json"),
        {
            "start_day": window.start_day,
            "end_day": window.end_day,
            "source": window.source,
            "onset_day": onset,
        },
    )

    baseline = read_grid(cfg.paths.baseline_production)
    train_stacks = {p: read_stack(aligned_dir, p, cfg.run.baseline_year) for p in CANONICAL_PARAMS}
    ds_train = build_feature_vectors(train_stacks, baseline, mask, window)
    write_dataset(ds_train, _out(cfg, "features_train.csv"))

    target_stacks = {p: read_stack(aligned_dir, p, cfg.run.target_year) for p in CANONICAL_PARAMS}
    ds_target = build_feature_vectors(target_stacks, None, mask, window)
    write_dataset(ds_target, _out(cfg, "features_target.csv"))


def _ensure_features(cfg: PipelineConfig) -> None:
    if not (_out(cfg, "features_train.csv").exists() and _out(cfg, "features_target.csv").exists()):
        stage_features(cfg)


# ----------------------------------------------------------------- train


def stage_train(cfg: PipelineConfig) -> None:
    _ensure_features(cfg)
    ds = read_dataset(_out(cfg, "features_train.csv"))
    train, val, test = split_dataset(ds, cfg.split)
    model = train_mlp(train, val, cfg.hyper, seed=cfg.stage_seed("train"))
    save_mlp(model, _out(cfg, "model.json"))

    metrics = {"n_train": train.n_samples, "n_val": val.n_samples, "n_test": test.n_samples}
    for name, part in (("train", train), ("val", val), ("test", test)):
        if part.n_samples == 0:
            continue
        pred = predict_mlp(model, part.X)
        metrics[f"{name}_rmse"] = rmse(pred, part.y)
        if name == "test" and part.n_samples >= 2 and float(np.ptp(part.y)) > 0:
            metrics["test_r2"] = r_squared(pred, part.y)
    _write_json(_out(cfg, "training_metrics.json"), metrics)


def _ensure_train(cfg: PipelineConfig) -> None:
    if not _out(cfg, "model.json").exists():
        stage_train(cfg)


# --------------------------------------------------------------- predict


def stage_predict(cfg: PipelineConfig) -> None:
    _ensure_train(cfg)
    _ensure_features(cfg)
    _ensure_mask(cfg)
    model = load_mlp(_out(cfg, "model.json"))
    ds = read_dataset(_out(cfg, "features_target.csv"))
    mask = _read_mask(cfg)
    baseline = read_grid(cfg.paths.baseline_production)

    pred = predict_mlp(model, ds.X)
    values = np.zeros((mask.geo.n_rows, mask.geo.n_cols))
    rows, cols = ds.pixel_index[:, 0], ds.pixel_index[:, 1]
    values[rows, cols] = pred
    grid = GridRaster(mask.geo, values, units=baseline.units)
    write_grid(
        grid,
        _out(cfg, "prediction.grdh"),
        parameter="PRODUCTION",
        year=cfg.run.target_year,
    )

    metrics = {"n_predicted": ds.n_samples}
    actual_path = cfg.paths.target_production
    if actual_path is not None and actual_path.exists():
        actual = read_grid(actual_path)
        if actual.geo != mask.geo:
            raise GridMismatchError("target production grid differs from the analysis grid")
        ok = actual.valid_mask()[rows, cols]
        truth = actual.values[rows, cols][ok]
        est = pred[ok]
        metrics["n_evaluated"] = int(ok.sum())
        if truth.size >= 2 and float(np.ptp(truth)) > 0:
            metrics["holdout_rmse"] = rmse(est, truth)
            metrics["holdout_r2"] = r_squared(est, truth)
    _write_json(_out(cfg, "prediction_metrics.json"), metrics)


def _ensure_predict(cfg: PipelineConfig) -> None:
    if not _out(cfg, "prediction.grdh").exists():
        stage_predict(cfg)


# ---------------------------------------------------------------- report


def stage_report(cfg: PipelineConfig) -> None:
    _ensure_predict(cfg)
    pred = read_grid(_out(cfg, "prediction.grdh"))
    baseline = read_grid(cfg.paths.baseline_production)
    zones = read_zone_map(cfg.paths.zones_grid)
    table = read_zone_table(cfg.paths.zones_table)
    names = zone_names_from_table(table)
    region_of = {z.country: z.region for z in reversed(table)}

    totals_pred = country_totals(pred, zones, names)
    totals_base = country_totals(baseline, zones, names)

    rows = []
    for country in sorted(totals_pred):
        base_t = totals_base.get(country, 0.0)
        pred_t = totals_pred[country]
        region = region_of.get(country, "")
        if base_t > 0.0:
            rows.append(ReportRow.from_totals(region, country, cfg.run.crop, base_t, pred_t))
        else:
            rows.append(ReportRow(region, country, cfg.run.crop, base_t, pred_t, 0.0))
    grand_base = sum(totals_base.get(c, 0.0) for c in sorted(totals_pred))
    grand_pred = sum(totals_pred[c] for c in sorted(totals_pred))
    if grand_base > 0.0:
        rows.append(
            ReportRow.from_totals(ALL_COUNTRIES, ALL_COUNTRIES, cfg.run.crop, grand_base, grand_pred)
        )
    else:
        rows.append(ReportRow(ALL_COUNTRIES, ALL_COUNTRIES, cfg.run.crop, grand_base, grand_pred, 0.0))
    emit_report(ForecastReport(rows), _out(cfg, "report.csv"))

    ratio = ratio_map(pred, baseline)
    write_grid(ratio, _out(cfg, "ratio.grdh"), parameter="RATIO", year=cfg.run.target_year)
    render_pgm(ratio, _out(cfg, "ratio.pgm"))
    write_manifest(cfg)


def write_manifest(cfg: PipelineConfig) -> None:
    """Content hash of every artifact under the output directory."""
    out_dir = cfg.paths.out_dir
    artifacts = {}
    for p in sorted(out_dir.rglob("*")):
        if p.is_dir() or p.name == "manifest.json":
            continue
        rel = p.relative_to(out_dir).as_posix()
        artifacts[rel] = hashlib.sha256(p.read_bytes()).hexdigest()
    _write_json(out_dir / "manifest.json", {"artifacts": artifacts})


# ------------------------------------------------------------------- run


_STAGE_FUNCS = {
    "synth": stage_synth,
    "select-crops": stage_select,
    "mask": stage_mask,
    "forecast-features": stage_forecast,
    "features": stage_features,
    "train": stage_train,
    "predict": stage_predict,
    "report": stage_report,
}


def run_stage(cfg: PipelineConfig, stage: str) -> int:
    """Run one stage (prerequisites are computed if missing); exit status."""
    if stage not in _STAGE_FUNCS:
        raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")
    cfg.paths.out_dir.mkdir(parents=True, exist_ok=True)
    try:
        _STAGE_FUNCS[stage](cfg)
    except DivergenceError as e:
        print(f"[{stage}] training diverged: {e}", file=sys.stderr)
        return 3
    except InvalidConfigError as e:
        print(f"[{stage}] {e}", file=sys.stderr)
        return 1
    except (CropcastError, OSError) as e:
        print(f"[{stage}] {e}", file=sys.stderr)
        return 2
    return 0


def run_pipeline(config_path, seed=None, out_dir=None, threads=None) -> int:
    """Execute every stage in order; 0 on success, 1/2/3 on failure.

    Exit 1 flags configuration problems, 2 data problems, 3 training
    divergence; each failure prints one diagnostic line naming the stage.
    """
    try:
        cfg = load_config(config_path, seed=seed, out_dir=out_dir, threads=threads)
    except CropcastError as e:
        print(f"[config] {e}", file=sys.stderr)
        return 1
    if cfg.scene is None:
        problems = validate_config(config_path)
        if problems:
            for line in problems:
                print(f"[config] {line}", file=sys.stderr)
            return 1

    for stage in STAGES:
        if stage == "synth" and cfg.scene is None:
            continue
        status = run_stage(cfg, stage)
        if status != 0:
            return status
        print(f"[{stage}] ok")
    return 0
