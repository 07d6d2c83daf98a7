"""Grid model tests: resampling against brute-force oracles plus invariants."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cropcast.errors import GridMismatchError, NoOverlapError
from cropcast.raster import (
    CropMask,
    GridGeometry,
    GridRaster,
    ZoneMap,
    apply_mask,
    build_crop_mask,
    resample,
    zonal_sum,
)

NODATA = -9999.0


def geo(lat, lon, cell, rows, cols):
    return GridGeometry(origin_lat=lat, origin_lon=lon, cell_size_deg=cell, n_rows=rows, n_cols=cols)


# --- independent oracles ---------------------------------------------------


def oracle_area_weighted(src: GridRaster, tgt: GridGeometry) -> np.ndarray:
    """Quadruple loop over (target cell, source cell) rectangle intersections."""
    g, s = tgt, src.geo
    out = np.empty((g.n_rows, g.n_cols))
    for i in range(g.n_rows):
        t_lat_hi = g.origin_lat - i * g.cell_size_deg
        t_lat_lo = t_lat_hi - g.cell_size_deg
        for j in range(g.n_cols):
            t_lon_lo = g.origin_lon + j * g.cell_size_deg
            t_lon_hi = t_lon_lo + g.cell_size_deg
            num = 0.0
            den = 0.0
            for r in range(s.n_rows):
                s_lat_hi = s.origin_lat - r * s.cell_size_deg
                s_lat_lo = s_lat_hi - s.cell_size_deg
                dlat = min(t_lat_hi, s_lat_hi) - max(t_lat_lo, s_lat_lo)
                if dlat <= 0:
                    continue
                for c in range(s.n_cols):
                    if src.values[r, c] == src.nodata:
                        continue
                    s_lon_lo = s.origin_lon + c * s.cell_size_deg
                    s_lon_hi = s_lon_lo + s.cell_size_deg
                    dlon = min(t_lon_hi, s_lon_hi) - max(t_lon_lo, s_lon_lo)
                    if dlon <= 0:
                        continue
                    num += dlat * dlon * src.values[r, c]
                    den += dlat * dlon
            out[i, j] = num / den if den > 0 else src.nodata
    return out


def oracle_apply_mask(r: GridRaster, m: CropMask) -> np.ndarray:
    out = np.empty_like(r.values)
    for i in range(r.n_rows):
        for j in range(r.n_cols):
            out[i, j] = r.values[i, j] if m.cells[i, j] else r.nodata
    return out


def oracle_zonal_sum(r: GridRaster, z: ZoneMap):
    acc: dict[int, list] = {}
    for i in range(r.n_rows):
        for j in range(r.n_cols):
            zid = int(z.zone_ids[i, j])
            if zid == 0:
                continue
            acc.setdefault(zid, [0.0, 0])
            if r.values[i, j] != r.nodata:
                acc[zid][0] += r.values[i, j]
                acc[zid][1] += 1
    return {k: (v[0], v[1]) for k, v in acc.items()}


# --- resample --------------------------------------------------------------


def test_nearest_identity_same_geometry():
    g = geo(10.0, 0.0, 0.5, 4, 5)
    vals = np.arange(20, dtype=float).reshape(4, 5)
    vals[1, 2] = NODATA
    r = GridRaster(g, vals)
    out = resample(r, g, "nearest")
    assert np.array_equal(out.values, vals)


def test_nearest_picks_containing_cell():
    # 2x2 source at 1 degree; 1x1 target centered inside the SE source cell.
    src = GridRaster(geo(2.0, 0.0, 1.0, 2, 2), [[1.0, 2.0], [3.0, 4.0]])
    tgt = geo(1.0, 1.0, 0.5, 1, 1)  # center (0.75, 1.25) -> row 1, col 1
    out = resample(src, tgt, "nearest")
    assert out.values[0, 0] == 4.0


def test_nearest_outside_source_is_nodata():
    src = GridRaster(geo(2.0, 0.0, 1.0, 2, 2), np.ones((2, 2)))
    tgt = geo(2.0, 0.0, 1.0, 2, 4)  # right half of targets lies east of source
    out = resample(src, tgt, "nearest")
    assert np.array_equal(out.values[:, :2], np.ones((2, 2)))
    assert (out.values[:, 2:] == NODATA).all()


def test_area_weighted_matches_oracle_with_nodata():
    # 3x3 source with one hole, coarsened onto an offset 2x2 target.
    src = GridRaster(
        geo(3.0, 0.0, 1.0, 3, 3),
        [[1.0, 2.0, 3.0], [4.0, NODATA, 6.0], [7.0, 8.0, 9.0]],
    )
    tgt = geo(2.75, 0.25, 1.25, 2, 2)
    out = resample(src, tgt, "area_weighted")
    expect = oracle_area_weighted(src, tgt)
    assert np.allclose(out.values, expect, rtol=1e-12, atol=0)


def test_area_weighted_all_nodata_region():
    src = GridRaster(geo(2.0, 0.0, 1.0, 2, 2), np.full((2, 2), NODATA))
    tgt = geo(2.0, 0.0, 2.0, 1, 1)
    out = resample(src, tgt, "area_weighted")
    assert out.values[0, 0] == NODATA


def test_resample_rejects_disjoint_grids():
    src = GridRaster(geo(10.0, 0.0, 1.0, 2, 2), np.ones((2, 2)))
    with pytest.raises(NoOverlapError):
        resample(src, geo(-50.0, 90.0, 1.0, 2, 2), "nearest")


def test_resample_rejects_unknown_method():
    src = GridRaster(geo(10.0, 0.0, 1.0, 2, 2), np.ones((2, 2)))
    with pytest.raises(ValueError):
        resample(src, src.geo, "bilinear")


@st.composite
def rasters(draw, max_side=6):
    rows = draw(st.integers(1, max_side))
    cols = draw(st.integers(1, max_side))
    cell = draw(st.sampled_from([0.25, 0.5, 1.0]))
    lat = draw(st.sampled_from([0.0, 5.0, 10.25]))
    lon = draw(st.sampled_from([0.0, -3.5, 20.0]))
    g = geo(lat, lon, cell, rows, cols)
    vals = draw(
        st.lists(
            st.floats(-1e6, 1e6, allow_nan=False, width=32),
            min_size=rows * cols,
            max_size=rows * cols,
        )
    )
    return GridRaster(g, vals)


@given(rasters())
@settings(max_examples=60, deadline=None)
def test_property_nearest_identity(r):
    assert np.array_equal(resample(r, r.geo, "nearest").values, r.values)


@given(
    st.integers(1, 4),
    st.integers(1, 4),
    st.integers(1, 3),
    st.floats(-1e3, 1e3, allow_nan=False),
)
@settings(max_examples=40, deadline=None)
def test_property_constant_preserved(rows, cols, factor, const):
    src = GridRaster(geo(8.0, 1.0, 0.5, rows * factor, cols * factor), np.full((rows * factor, cols * factor), const))
    out = resample(src, geo(8.0, 1.0, 0.5 * factor, rows, cols), "area_weighted")
    assert np.allclose(out.values, const, rtol=1e-12, atol=1e-12)


@given(
    st.integers(1, 4),
    st.integers(1, 4),
    st.integers(1, 3),
    st.lists(st.floats(0, 1e4, allow_nan=False, width=32), min_size=144, max_size=144),
)
@settings(max_examples=40, deadline=None)
def test_property_mean_conserved_on_exact_tiling(rows, cols, factor, raw):
    sr, sc = rows * factor, cols * factor
    vals = np.array(raw[: sr * sc]).reshape(sr, sc)
    src = GridRaster(geo(0.0, 0.0, 0.25, sr, sc), vals)
    out = resample(src, geo(0.0, 0.0, 0.25 * factor, rows, cols), "area_weighted")
    assert out.values.mean() == pytest.approx(vals.mean(), rel=1e-9, abs=1e-9)


@given(rasters())
@settings(max_examples=60, deadline=None)
def test_property_area_weighted_matches_oracle(r):
    tgt = geo(r.geo.origin_lat, r.geo.origin_lon, r.geo.cell_size_deg * 1.5, max(1, r.geo.n_rows // 2), max(1, r.geo.n_cols // 2))
    out = resample(r, tgt, "area_weighted")
    expect = oracle_area_weighted(r, tgt)
    valid = expect != r.nodata
    assert np.array_equal(out.values == r.nodata, ~valid)
    assert np.allclose(out.values[valid], expect[valid], rtol=1e-9, atol=1e-9)


# --- masks ------------------------------------------------------------------


def test_build_crop_mask_thresholds_and_skips_nodata():
    r = GridRaster(geo(2.0, 0.0, 1.0, 2, 2), [[0.0, 5.0], [NODATA, 2.0]])
    m = build_crop_mask(r, threshold=1.0)
    assert m.cells.tolist() == [[False, True], [False, True]]
    m0 = build_crop_mask(r)
    assert m0.cells.tolist() == [[False, True], [False, True]]


def test_build_crop_mask_rejects_negative_threshold():
    r = GridRaster(geo(2.0, 0.0, 1.0, 2, 2), np.ones((2, 2)))
    with pytest.raises(ValueError):
        build_crop_mask(r, threshold=-0.5)


def test_apply_mask_matches_elementwise_oracle():
    rng = np.random.default_rng(7)
    g = geo(5.0, 5.0, 0.5, 6, 7)
    vals = rng.uniform(0, 100, size=(6, 7))
    vals[rng.random((6, 7)) < 0.2] = NODATA
    r = GridRaster(g, vals)
    m = CropMask(g, rng.random((6, 7)) < 0.5)
    out = apply_mask(r, m)
    assert np.array_equal(out.values, oracle_apply_mask(r, m))


def test_apply_mask_requires_same_grid():
    r = GridRaster(geo(5.0, 5.0, 0.5, 2, 2), np.ones((2, 2)))
    m = CropMask(geo(5.0, 5.0, 0.5, 2, 3), np.ones((2, 3), dtype=bool))
    with pytest.raises(GridMismatchError):
        apply_mask(r, m)


@given(rasters(), st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_property_apply_mask_idempotent(r, seed):
    m = CropMask(r.geo, np.random.default_rng(seed).random(r.values.shape) < 0.5)
    once = apply_mask(r, m)
    twice = apply_mask(once, m)
    assert np.array_equal(once.values, twice.values)


# --- zonal sums -------------------------------------------------------------


def test_zonal_sum_matches_double_loop_oracle():
    rng = np.random.default_rng(11)
    g = geo(4.0, 0.0, 0.5, 8, 8)
    vals = rng.uniform(0, 50, size=(8, 8))
    vals[rng.random((8, 8)) < 0.25] = NODATA
    r = GridRaster(g, vals)
    z = ZoneMap(g, rng.integers(0, 4, size=(8, 8)))
    assert zonal_sum(r, z) == oracle_zonal_sum(r, z)


def test_zonal_sum_all_nodata_zone_is_zero():
    g = geo(2.0, 0.0, 1.0, 2, 2)
    r = GridRaster(g, [[NODATA, NODATA], [1.0, 2.0]])
    z = ZoneMap(g, [[1, 1], [2, 2]])
    assert zonal_sum(r, z) == {1: (0.0, 0), 2: (3.0, 2)}


def test_zonal_sum_requires_same_grid():
    r = GridRaster(geo(2.0, 0.0, 1.0, 2, 2), np.ones((2, 2)))
    z = ZoneMap(geo(2.0, 0.0, 1.0, 3, 2), np.ones((3, 2), dtype=int))
    with pytest.raises(GridMismatchError):
        zonal_sum(r, z)


@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_property_zonal_counts_on_ones(rows, cols, seed):
    g = geo(1.0, 1.0, 0.5, rows, cols)
    ids = np.random.default_rng(seed).integers(0, 5, size=(rows, cols))
    z = ZoneMap(g, ids)
    out = zonal_sum(GridRaster(g, np.ones((rows, cols))), z)
    for zid, (total, n) in out.items():
        assert n == int((ids == zid).sum())
        assert total == float(n)


# --- model validation -------------------------------------------------------


def test_grid_rejects_bad_shape_and_nonfinite():
    with pytest.raises(ValueError):
        GridGeometry(0.0, 0.0, -1.0, 2, 2)
    with pytest.raises(ValueError):
        GridRaster(geo(1.0, 0.0, 1.0, 2, 2), np.ones(5))
    with pytest.raises(ValueError):
        GridRaster(geo(1.0, 0.0, 1.0, 2, 2), [[1.0, np.nan], [0.0, 0.0]])


def test_zone_ids_listing_skips_zero():
    z = ZoneMap(geo(1.0, 0.0, 1.0, 2, 2), [[0, 3], [1, 3]])
    assert z.ids() == [1, 3]
