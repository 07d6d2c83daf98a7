"""File-format round trips, header validation, and tabular ingestion."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cropcast.errors import (
    EmptyStackError,
    GridMismatchError,
    HeaderMismatchError,
    NegativeQuantityError,
    ParseError,
)
from cropcast.gridio import (
    CADENCE_DAYS,
    CommodityBalance,
    CropCalendarEntry,
    TimeSeriesStack,
    ZoneInfo,
    read_calendar,
    read_commodity_table,
    read_frame_meta,
    read_grid,
    read_stack,
    read_zone_map,
    read_zone_table,
    write_calendar,
    write_commodity_table,
    write_grid,
    write_stack,
    write_zone_map,
    write_zone_table,
)
from cropcast.raster import GridGeometry, GridRaster, ZoneMap


def geo(lat, lon, cell, rows, cols):
    return GridGeometry(origin_lat=lat, origin_lon=lon, cell_size_deg=cell, n_rows=rows, n_cols=cols)


def test_native_cadences():
    assert CADENCE_DAYS == {"NDVI": 16, "LST_DAY": 8, "RAIN": 30, "ET": 8}


# --- grid files --------------------------------------------------------------


def test_unit_value_payload_bytes(tmp_path):
    # IEEE-754: 1.0f is 0x3F800000, little-endian on disk.
    hp = tmp_path / "one.grdh"
    write_grid(GridRaster(geo(1.0, 0.0, 1.0, 1, 1), [[1.0]]), hp)
    assert hp.with_suffix(".grd").read_bytes() == b"\x00\x00\x80\x3f"


def test_grid_round_trip_preserves_meta_and_quantized_values(tmp_path):
    g = geo(12.5, -3.25, 0.125, 3, 4)
    vals = np.linspace(-5.7, 9.3, 12).reshape(3, 4)
    vals[2, 1] = -9999.0
    r = GridRaster(g, vals, units="mm")
    hp = tmp_path / "x.grdh"
    write_grid(r, hp, parameter="RAIN", year=2019, day_of_year=31)
    back = read_grid(hp)
    assert back.geo == g
    assert back.nodata == r.nodata
    assert back.units == "mm"
    assert np.array_equal(back.values, vals.astype(np.float32).astype(np.float64))
    meta = read_frame_meta(hp)
    assert (meta.parameter, meta.year, meta.day_of_year) == ("RAIN", 2019, 31)


@given(
    st.integers(1, 5),
    st.integers(1, 5),
    st.lists(st.floats(-1e6, 1e6, allow_nan=False, width=32), min_size=25, max_size=25),
)
@settings(max_examples=40, deadline=None)
def test_property_grid_round_trip(tmp_path_factory, rows, cols, raw):
    vals = np.array(raw[: rows * cols]).reshape(rows, cols)
    r = GridRaster(geo(4.0, 4.0, 0.5, rows, cols), vals, units="u")
    hp = tmp_path_factory.mktemp("rt") / "g.grdh"
    write_grid(r, hp)
    back = read_grid(hp)
    assert back.geo == r.geo and back.units == r.units and back.nodata == r.nodata
    # width=32 floats are already exactly representable, so equality is exact.
    assert np.array_equal(back.values, vals)


def test_truncated_payload_is_header_mismatch(tmp_path):
    hp = tmp_path / "t.grdh"
    write_grid(GridRaster(geo(2.0, 0.0, 1.0, 2, 2), np.ones((2, 2))), hp)
    gp = hp.with_suffix(".grd")
    gp.write_bytes(gp.read_bytes()[:-4])
    with pytest.raises(HeaderMismatchError):
        read_grid(hp)


def test_bad_header_json_is_parse_error(tmp_path):
    hp = tmp_path / "b.grdh"
    hp.write_text("{not json", encoding="utf-8")
    with pytest.raises(ParseError):
        read_grid(hp)


def test_missing_and_mistyped_header_keys(tmp_path):
    hp = tmp_path / "m.grdh"
    write_grid(GridRaster(geo(2.0, 0.0, 1.0, 1, 1), [[3.0]]), hp)
    h = json.loads(hp.read_text())

    del h["units"]
    hp.write_text(json.dumps(h))
    with pytest.raises(ParseError):
        read_grid(hp)

    h["units"] = 5
    hp.write_text(json.dumps(h))
    with pytest.raises(ParseError):
        read_grid(hp)


def test_write_rejects_unrepresentable_nodata(tmp_path):
    r = GridRaster(geo(1.0, 0.0, 1.0, 1, 1), [[2.0]], nodata=-9999.1)
    with pytest.raises(ValueError):
        write_grid(r, tmp_path / "n.grdh")


def test_write_rejects_value_colliding_with_sentinel(tmp_path):
    # -9999.00001 rounds to -9999.0 in float32 and would read back as nodata.
    r = GridRaster(geo(1.0, 0.0, 1.0, 1, 2), [[-9999.00001, 1.0]])
    with pytest.raises(ValueError):
        write_grid(r, tmp_path / "c.grdh")


def test_header_path_must_end_grdh(tmp_path):
    with pytest.raises(ValueError):
        write_grid(GridRaster(geo(1.0, 0.0, 1.0, 1, 1), [[1.0]]), tmp_path / "x.tif")


# --- stacks ------------------------------------------------------------------


def make_stack(n_frames=4, cadence=8, start=9, year=2020, rows=2, cols=3):
    g = geo(6.0, 1.0, 0.25, rows, cols)
    frames = [
        GridRaster(g, np.full((rows, cols), float(i)), units="idx") for i in range(n_frames)
    ]
    return TimeSeriesStack(parameter="ET", cadence_days=cadence, start_day_of_year=start, year=year, frames=frames)


def test_stack_days_and_cube():
    s = make_stack()
    assert s.days == [9, 17, 25, 33]
    assert s.as_cube().shape == (4, 2, 3)


def test_stack_rejects_empty_and_mixed_grids():
    with pytest.raises(EmptyStackError):
        TimeSeriesStack(parameter="ET", cadence_days=8, start_day_of_year=1, year=2020, frames=[])
    g1 = GridRaster(geo(6.0, 1.0, 0.25, 2, 2), np.ones((2, 2)))
    g2 = GridRaster(geo(6.0, 1.0, 0.5, 2, 2), np.ones((2, 2)))
    with pytest.raises(GridMismatchError):
        TimeSeriesStack(parameter="ET", cadence_days=8, start_day_of_year=1, year=2020, frames=[g1, g2])


def test_stack_round_trip(tmp_path):
    s = make_stack()
    paths = write_stack(s, tmp_path)
    assert [p.name for p in paths] == ["ET_2020_009.grdh", "ET_2020_017.grdh", "ET_2020_025.grdh", "ET_2020_033.grdh"]
    back = read_stack(tmp_path, "ET", 2020)
    assert back.cadence_days == 8 and back.start_day_of_year == 9 and back.year == 2020
    assert np.array_equal(back.as_cube(), s.as_cube())


def test_read_stack_rejects_nonuniform_days(tmp_path):
    s = make_stack(n_frames=3)
    write_stack(s, tmp_path)
    src = tmp_path / "ET_2020_025.grdh"
    for ext in (".grdh", ".grd"):
        (tmp_path / f"ET_2020_030{ext}").write_bytes(src.with_suffix(ext).read_bytes())
    (tmp_path / "ET_2020_025.grdh").unlink()
    (tmp_path / "ET_2020_025.grd").unlink()
    with pytest.raises(ParseError):
        read_stack(tmp_path, "ET", 2020)


def test_read_stack_empty_dir(tmp_path):
    with pytest.raises(EmptyStackError):
        read_stack(tmp_path, "NDVI", 2020)


# --- commodity tables --------------------------------------------------------


def write_rows(path, rows):
    write_commodity_table(path, rows)
    return path


def test_single_row_means_equal_row(tmp_path):
    p = write_rows(tmp_path / "b.csv", [("KEN", "Maize and products", 2018, 100.0, 80.0)])
    (rec,) = read_commodity_table(p)
    assert rec == CommodityBalance("KEN", "Maize and products", 100.0, 80.0)


def test_two_year_mean(tmp_path):
    p = write_rows(
        tmp_path / "b.csv",
        [("KEN", "Maize and products", 2017, 100.0, 50.0), ("KEN", "Maize and products", 2018, 300.0, 70.0)],
    )
    (rec,) = read_commodity_table(p)
    assert rec.production_t == 200.0
    assert rec.consumption_t == 60.0


def test_five_year_fixture_matches_mean_oracle(tmp_path):
    rng = np.random.default_rng(3)
    rows = []
    expect = {}
    for country in ("AAA", "BBB"):
        for commodity in ("Cassava and products", "Rice and products", "Wheat and products"):
            prods = rng.uniform(10, 1e6, size=5)
            cons = rng.uniform(10, 1e6, size=5)
            rows += [
                (country, commodity, 2014 + k, float(prods[k]), float(cons[k])) for k in range(5)
            ]
            expect[(country, commodity)] = (np.mean(prods), np.mean(cons))
    p = write_rows(tmp_path / "b.csv", rows)
    for rec in read_commodity_table(p):
        ep, ec = expect[(rec.country, rec.commodity)]
        assert rec.production_t == pytest.approx(ep, rel=1e-12)
        assert rec.consumption_t == pytest.approx(ec, rel=1e-12)


@given(st.permutations(range(6)))
@settings(max_examples=30, deadline=None)
def test_property_commodity_mean_permutation_invariant(tmp_path_factory, order):
    base = [
        ("NGA", "Yams", 2014 + k, v, v / 3.0)
        for k, v in enumerate([0.1, 1e8, 7.7, 123.456, 2.5e7, 0.3])
    ]
    d = tmp_path_factory.mktemp("perm")
    a = read_commodity_table(write_rows(d / "a.csv", base))
    b = read_commodity_table(write_rows(d / "b.csv", [base[i] for i in order]))
    assert a == b


def test_negative_quantity_rejected(tmp_path):
    p = tmp_path / "n.csv"
    p.write_text(
        "country,commodity,year,production_t,consumption_t\nKEN,Maize,2018,-5,2\n", encoding="utf-8"
    )
    with pytest.raises(NegativeQuantityError):
        read_commodity_table(p)


def test_commodity_table_parse_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("country,commodity,production_t\nKEN,Maize,5\n", encoding="utf-8")
    with pytest.raises(ParseError):
        read_commodity_table(p)
    p.write_text(
        "country,commodity,year,production_t,consumption_t\nKEN,Maize,2018,abc,2\n", encoding="utf-8"
    )
    with pytest.raises(ParseError):
        read_commodity_table(p)


# --- crop calendars ----------------------------------------------------------


def test_calendar_round_trip(tmp_path):
    entries = [
        CropCalendarEntry("KEN", "Maize", sowing=(60, 91), growing=(92, 280), harvest=(281, 330)),
        CropCalendarEntry("AGO", "Cassava", sowing=(335, 31), growing=(32, 200), harvest=(201, 260)),
    ]
    p = tmp_path / "cal.csv"
    write_calendar(p, entries)
    assert read_calendar(p) == sorted(entries, key=lambda e: (e.country, e.crop))


def test_calendar_rejects_out_of_range_day(tmp_path):
    p = tmp_path / "cal.csv"
    p.write_text(
        "country,crop,sow_start,sow_end,grow_start,grow_end,harvest_start,harvest_end\n"
        "KEN,Maize,0,91,92,280,281,330\n",
        encoding="utf-8",
    )
    with pytest.raises(ParseError):
        read_calendar(p)


# --- zones -------------------------------------------------------------------


def test_zone_map_round_trip(tmp_path):
    z = ZoneMap(geo(4.0, 2.0, 0.5, 3, 3), [[0, 1, 1], [2, 2, 2], [0, 0, 3]])
    hp = tmp_path / "zones.grdh"
    write_zone_map(z, hp)
    back = read_zone_map(hp)
    assert back.geo == z.geo
    assert np.array_equal(back.zone_ids, z.zone_ids)


def test_zone_map_rejects_fractional_ids(tmp_path):
    hp = tmp_path / "zb.grdh"
    write_grid(GridRaster(geo(1.0, 0.0, 1.0, 1, 2), [[1.5, 2.0]]), hp)
    with pytest.raises(ParseError):
        read_zone_map(hp)


def test_zone_table_round_trip_and_duplicates(tmp_path):
    rows = [ZoneInfo(2, "Kenya", "Eastern Africa"), ZoneInfo(1, "Ghana", "Western Africa")]
    p = tmp_path / "zones.csv"
    write_zone_table(p, rows)
    assert read_zone_table(p) == sorted(rows, key=lambda z: z.zone_id)
    p.write_text("zone_id,country,region\n1,Ghana,W\n1,Togo,W\n", encoding="utf-8")
    with pytest.raises(ParseError):
        read_zone_table(p)
