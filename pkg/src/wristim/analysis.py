"""Scoring and aggregation of sensation reports against the hand map.

Rates are percentages of painted (non-background) cells falling in a region;
heatmaps overlay all report masks with the strongest points marked.  Higher
level helpers turn trial logs into the per-condition rate tables, the
visual-size x opacity ANOVA cube, and the condition-vs-baseline t table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import effects as fx
from . import handmap as hm
from .records import TrialRecord
from .sessions import DEFAULT_CHANNEL
from .stats import TTestResult, unpaired_t


class EmptyMaskError(ValueError):
    pass


class DimensionMismatchError(ValueError):
    pass


def in_region_rate(mask, region, handmap: hm.HandMap) -> float:
    """Percent of the painted hand area lying in the region."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != handmap.shape:
        raise DimensionMismatchError(
            f"mask shape {mask.shape} does not match map {handmap.shape}")
    painted = mask & handmap.hand_mask()
    total = int(painted.sum())
    if total == 0:
        raise EmptyMaskError("no painted cells on the hand")
    hits = int((painted & handmap.region_mask(region)).sum())
    return 100.0 * hits / total


def strongest_point_rate(reports, region, handmap: hm.HandMap) -> float:
    """Fraction of reports whose strongest point lies in the region."""
    reports = list(reports)
    if not reports:
        raise ValueError("need at least one report")
    region_mask = handmap.region_mask(region)
    hits = sum(1 for r in reports if region_mask[r.strongest_point])
    return hits / len(reports)


@dataclass
class Heatmap:
    counts: np.ndarray
    strongest_points: list[tuple[int, int]]
    mean_strongest: tuple[float, float]  # (row, col)


def aggregate_heatmap(reports) -> Heatmap:
    reports = list(reports)
    if not reports:
        raise ValueError("need at least one report")
    counts = np.zeros(reports[0].area_mask.shape, dtype=int)
    points = []
    for r in reports:
        counts += r.area_mask.astype(int)
        points.append(r.strongest_point)
    rows = [p[0] for p in points]
    cols = [p[1] for p in points]
    return Heatmap(counts, points, (float(np.mean(rows)), float(np.mean(cols))))


def write_heatmap_csv(heatmap: Heatmap, path) -> None:
    np.savetxt(path, heatmap.counts, fmt="%d", delimiter=",")


# log-level aggregation

def condition_key(rec: TrialRecord) -> str:
    if rec.visual_size is None:
        return "none"
    return f"{rec.visual_size}/{rec.visual_opacity}"


def trial_in_target_rate(rec: TrialRecord, finger: str,
                         handmap: hm.HandMap) -> float:
    """In-finger percentage for one trial; a silent trial scores 0."""
    if rec.report is None:
        return 0.0
    return in_region_rate(rec.report.area_mask, finger, handmap)


def baseline_rates_by_participant(records, finger: str,
                                  handmap: hm.HandMap) -> dict[str, float]:
    """No-visual in-finger rates from trials on the finger's consensus
    channel, averaged per participant."""
    channel = DEFAULT_CHANNEL[finger]
    per: dict[str, list[float]] = {}
    for rec in records:
        if rec.study == "study1" and rec.channel == channel:
            per.setdefault(rec.participant, []).append(
                trial_in_target_rate(rec, finger, handmap))
    return {p: float(np.mean(v)) for p, v in sorted(per.items())}


def condition_rates_by_participant(records, finger: str, size: str, opacity: str,
                                   handmap: hm.HandMap) -> dict[str, float]:
    per: dict[str, list[float]] = {}
    for rec in records:
        if (rec.study == "study2" and rec.target_finger == finger
                and rec.visual_size == size and rec.visual_opacity == opacity):
            per.setdefault(rec.participant, []).append(
                trial_in_target_rate(rec, finger, handmap))
    return {p: float(np.mean(v)) for p, v in sorted(per.items())}


def rate_cube(records, finger: str, handmap: hm.HandMap):
    """(participants, data[n, size(3), opacity(2)]) of in-finger rates for the
    repeated-measures ANOVA.  Raises if the design is incomplete."""
    cells: dict[tuple[str, str], dict[str, float]] = {}
    participants: set[str] = set()
    for size in fx.SIZES:
        for opacity in fx.OPACITIES:
            per = condition_rates_by_participant(records, finger, size, opacity,
                                                 handmap)
            cells[(size, opacity)] = per
            participants |= set(per)
    participants = sorted(participants)
    data = np.full((len(participants), len(fx.SIZES), len(fx.OPACITIES)), np.nan)
    for i, p in enumerate(participants):
        for j, size in enumerate(fx.SIZES):
            for k, opacity in enumerate(fx.OPACITIES):
                data[i, j, k] = cells[(size, opacity)].get(p, np.nan)
    return participants, data


@dataclass
class RateRow:
    finger: str
    condition: str
    mean: float
    sd: float
    n: int


def rate_table(records, handmap: hm.HandMap) -> list[RateRow]:
    """Mean/SD of per-participant in-target rates for every condition seen."""
    rows = []
    for finger in fx.FINGERS:
        base = baseline_rates_by_participant(records, finger, handmap)
        if base:
            vals = np.array(list(base.values()))
            rows.append(RateRow(finger, "none", float(vals.mean()),
                                float(vals.std(ddof=1)) if len(vals) > 1 else 0.0,
                                len(vals)))
        for size in fx.SIZES:
            for opacity in fx.OPACITIES:
                per = condition_rates_by_participant(records, finger, size,
                                                     opacity, handmap)
                if per:
                    vals = np.array(list(per.values()))
                    rows.append(RateRow(
                        finger, f"{size}/{opacity}", float(vals.mean()),
                        float(vals.std(ddof=1)) if len(vals) > 1 else 0.0,
                        len(vals)))
    return rows


@dataclass
class ConditionTTest:
    finger: str
    condition: str
    result: TTestResult


def ttests_vs_baseline(records, handmap: hm.HandMap,
                       pooled: bool = True) -> list[ConditionTTest]:
    """Unpaired t of each visual condition against the no-visual baseline."""
    out = []
    for finger in fx.FINGERS:
        base = list(baseline_rates_by_participant(records, finger, handmap).values())
        if len(base) < 2:
            continue
        for size in fx.SIZES:
            for opacity in fx.OPACITIES:
                cond = list(condition_rates_by_participant(
                    records, finger, size, opacity, handmap).values())
                if len(cond) < 2:
                    continue
                out.append(ConditionTTest(
                    finger, f"{size}/{opacity}",
                    unpaired_t(cond, base, pooled=pooled)))
    return out


def reports_for(records, finger: str | None = None, size: str | None = None,
                opacity: str | None = None, study: str | None = None):
    out = []
    for rec in records:
        if rec.report is None:
            continue
        if study is not None and rec.study != study:
            continue
        if finger is not None and rec.target_finger != finger:
            continue
        if size is not None and rec.visual_size != size:
            continue
        if opacity is not None and rec.visual_opacity != opacity:
            continue
        out.append(rec.report)
    return out
