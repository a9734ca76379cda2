import numpy as np
import pytest

from wristim import analysis as an
from wristim import effects as fx
from wristim import handmap as hm
from wristim import sessions as ss
from wristim.perceiver import SensationReport
from wristim.simband import SimulatedWristband


@pytest.fixture(scope="module")
def hmap():
    return hm.default_handmap()


def blank(hmap):
    return np.zeros(hmap.shape, dtype=bool)


def test_rate_mask_inside_thumb(hmap):
    mask = blank(hmap)
    mask[40:44, 4:8] = True  # inside the thumb rectangle
    assert an.in_region_rate(mask, "thumb", hmap) == 100.0


def test_rate_half_and_half(hmap):
    mask = blank(hmap)
    mask[50, 10:12] = True  # two thumb cells
    mask[50, 20:22] = True  # two palm cells
    assert an.in_region_rate(mask, "thumb", hmap) == 50.0


def test_rate_counting_fixture_331_of_1000():
    # constructed fixture on a synthetic map with a large thumb region:
    # 331 painted thumb cells out of 1000 painted -> 33.1%
    raster = np.zeros((40, 50), dtype=np.uint8)
    raster[:20, :] = hm.THUMB   # 1000 thumb cells
    raster[20:, :] = hm.PALM
    big = hm.HandMap(raster, scale_mm=2.0, version="handmap/test")
    mask = np.zeros((40, 50), dtype=bool)
    painted_thumb = 0
    for r in range(20):
        for c in range(50):
            if painted_thumb < 331:
                mask[r, c] = True
                painted_thumb += 1
    flat = [(r, c) for r in range(20, 40) for c in range(50)]
    for r, c in flat[:1000 - 331]:
        mask[r, c] = True
    assert mask.sum() == 1000
    assert an.in_region_rate(mask, "thumb", big) == pytest.approx(33.1)


def test_rate_errors(hmap):
    with pytest.raises(an.EmptyMaskError):
        an.in_region_rate(blank(hmap), "thumb", hmap)
    with pytest.raises(an.DimensionMismatchError):
        an.in_region_rate(np.zeros((3, 3), dtype=bool), "thumb", hmap)
    # painting only background cells counts as empty
    mask = blank(hmap)
    mask[0, 0] = True
    with pytest.raises(an.EmptyMaskError):
        an.in_region_rate(mask, "thumb", hmap)


def test_rate_additive_over_partitions(hmap):
    mask = blank(hmap)
    mask[46:52, 8:24] = True  # straddles thumb and palm
    rate_thumb = an.in_region_rate(mask, "thumb", hmap)
    rate_palm = an.in_region_rate(mask, "palm", hmap)
    assert rate_thumb + rate_palm == pytest.approx(100.0)


def report_with(hmap, cells, strongest, quality="tapping"):
    mask = blank(hmap)
    for r, c in cells:
        mask[r, c] = True
    return SensationReport(mask, strongest, quality)


def test_heatmap_single_report_is_mask(hmap):
    rep = report_with(hmap, [(50, 20), (50, 21)], (50, 20))
    heat = an.aggregate_heatmap([rep])
    assert np.array_equal(heat.counts, rep.area_mask.astype(int))
    assert heat.strongest_points == [(50, 20)]
    assert heat.mean_strongest == (50.0, 20.0)


def test_heatmap_doubling(hmap):
    rep = report_with(hmap, [(50, 20), (51, 20)], (50, 20))
    one = an.aggregate_heatmap([rep])
    two = an.aggregate_heatmap([rep, rep])
    assert np.array_equal(two.counts, 2 * one.counts)
    assert two.mean_strongest == one.mean_strongest


def test_heatmap_counts_bounded_by_report_count(hmap):
    rng = np.random.default_rng(3)
    reports = []
    for _ in range(7):
        r, c = 45 + rng.integers(0, 10), 16 + rng.integers(0, 10)
        reports.append(report_with(hmap, [(r, c), (r + 1, c)], (r, c)))
    heat = an.aggregate_heatmap(reports)
    assert heat.counts.max() <= 7


def test_strongest_point_rate_fixtures(hmap):
    thumb_cell = (50, 10)
    palm_cell = (50, 25)
    reports = []
    for i in range(24):
        cell = thumb_cell if i < 6 else palm_cell
        reports.append(report_with(hmap, [cell], cell))
    assert an.strongest_point_rate(reports, "thumb", hmap) == 0.25
    reports_all = [report_with(hmap, [thumb_cell], thumb_cell)] * 5
    assert an.strongest_point_rate(reports_all, "thumb", hmap) == 1.0
    reports_half = reports[:6] * 2 + reports[6:][:12]
    assert an.strongest_point_rate(reports_half, "thumb", hmap) == 0.5


@pytest.fixture(scope="module")
def cohort_records():
    records = ss.run_cohort("study1", seed=31, participants=3)
    records += ss.run_cohort("study2", seed=31, participants=3)
    return records


def test_rate_table_covers_conditions(cohort_records, hmap):
    rows = an.rate_table(cohort_records, hmap)
    conditions = {(r.finger, r.condition) for r in rows}
    for finger in fx.FINGERS:
        assert (finger, "none") in conditions
        for size in fx.SIZES:
            for opacity in fx.OPACITIES:
                assert (finger, f"{size}/{opacity}") in conditions
    assert all(r.n == 3 for r in rows)


def test_rate_cube_shape_and_completeness(cohort_records, hmap):
    participants, cube = an.rate_cube(cohort_records, "thumb", hmap)
    assert participants == ["p01", "p02", "p03"]
    assert cube.shape == (3, 3, 2)
    assert np.isfinite(cube).all()


def test_ttests_vs_baseline_rows(cohort_records, hmap):
    rows = an.ttests_vs_baseline(cohort_records, hmap)
    assert len(rows) == 12  # 6 conditions x 2 fingers
    for row in rows:
        assert 0.0 <= row.result.p <= 1.0


def test_heatmap_csv_export(tmp_path, hmap):
    rep = report_with(hmap, [(50, 20)], (50, 20))
    heat = an.aggregate_heatmap([rep])
    path = tmp_path / "h.csv"
    an.write_heatmap_csv(heat, path)
    grid = np.loadtxt(path, delimiter=",", dtype=int)
    assert grid.shape == hmap.shape
    assert grid.sum() == 1


def test_trial_rate_zero_for_silent_trial(cohort_records, hmap):
    rec = cohort_records[0]
    silent = type(rec)(**{**rec.__dict__, "report": None})
    assert an.trial_in_target_rate(silent, "thumb", hmap) == 0.0
