"""Parametric stand-in for a human participant reporting sensations.

This is an explicitly synthetic model, tuned only to reproduce the direction
of the study findings (referred sensations near the target fingers, and the
perceived location drifting toward a concurrent visual highlight).  It makes
no claim about real perception.

Each stimulation channel owns one or more Gaussian sensation blobs on the
hand raster plus a detection threshold.  A report paints the cells whose blob
density clears a randomly drawn level, so masks are contiguous regions.  With
a visual effect present, the whole blob shifts toward the highlight centroid
by ``w0 * exp(-d^2 / (2 sigma_v^2))`` of the separation ``d`` (scaled down at
half opacity).  The wrist locus used by the vibrotactile baseline sits far
from the finger highlights, so its shift is negligible by the same formula.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import effects as fx
from . import handmap as hm

PERCEIVER_VERSION = "perceiver/1"

QUALITY_KEYWORDS = ("tapping", "vibrating", "tingling", "pressing", "skin-stretching")

WRIST_KEY = "wrist"

_DEFAULT_QUALITY = {
    "tapping": 0.55,
    "tingling": 0.20,
    "pressing": 0.13,
    "vibrating": 0.07,
    "skin-stretching": 0.05,
}

_WRIST_QUALITY = {
    "vibrating": 0.80,
    "tapping": 0.10,
    "tingling": 0.05,
    "pressing": 0.04,
    "skin-stretching": 0.01,
}

# (x_mm, y_mm, sigma_mm) sensation loci per channel, radial to ulnar across
# the palm; ch5 sits on the thenar edge, ch8 under the index finger.
_DEFAULT_BLOBS = {
    "ch1": (75.0, 178.0, 10.0),
    "ch2": (75.0, 178.0, 10.0),
    "ch3": (75.0, 178.0, 10.0),
    "ch4": (75.0, 178.0, 10.0),
    "ch5": (40.0, 121.0, 12.0),
    "ch6": (43.0, 122.0, 12.0),
    "ch7": (46.0, 120.0, 12.0),
    "ch8": (49.0, 118.0, 12.0),
    "ch9": (58.0, 118.0, 12.0),
    "ch10": (63.0, 120.0, 12.0),
    "ch11": (68.0, 123.0, 12.0),
    "ch12": (72.0, 127.0, 11.0),
    "ch13": (76.0, 132.0, 11.0),
    "ch14": (80.0, 138.0, 11.0),
    "ch15": (84.0, 144.0, 11.0),
    WRIST_KEY: (75.0, 185.0, 9.0),
}

_DEFAULT_THRESHOLDS = {
    "ch1": 1.50, "ch2": 1.50, "ch3": 1.50, "ch4": 1.50,
    "ch5": 0.65, "ch6": 0.68, "ch7": 0.72, "ch8": 0.76,
    "ch9": 0.78, "ch10": 0.80, "ch11": 0.82, "ch12": 0.85,
    "ch13": 0.88, "ch14": 0.90, "ch15": 0.92,
    WRIST_KEY: 0.0,
}


def channel_key(channel) -> str:
    if channel == WRIST_KEY:
        return WRIST_KEY
    return f"ch{int(channel)}"


@dataclass
class PerceiverConfig:
    ventriloquism_gain: float = 0.7           # w0
    ventriloquism_falloff_mm: float = 22.0    # sigma_v
    opacity_gain: dict = field(default_factory=lambda: {"full": 1.0, "half": 0.75})
    thresholds_ma: dict = field(default_factory=lambda: dict(_DEFAULT_THRESHOLDS))
    blobs: dict = field(default_factory=lambda: {
        k: [{"x_mm": x, "y_mm": y, "sigma_mm": s, "weight": 1.0}]
        for k, (x, y, s) in _DEFAULT_BLOBS.items()
    })
    quality_weights: dict = field(default_factory=lambda: {
        k: dict(_WRIST_QUALITY if k == WRIST_KEY else _DEFAULT_QUALITY)
        for k in _DEFAULT_BLOBS
    })
    mask_level_range: tuple = (0.35, 0.65)
    trial_jitter_mm: float = 2.0
    participant_centroid_sd_mm: float = 3.0
    participant_threshold_sd_ma: float = 0.08

    def __post_init__(self):
        if not 0.0 <= self.ventriloquism_gain <= 1.0:
            raise ValueError("ventriloquism gain must be in [0, 1]")
        if self.ventriloquism_falloff_mm <= 0:
            raise ValueError("ventriloquism falloff must be positive")

    def to_dict(self) -> dict:
        # deep copies: a config round-tripped through to_dict/from_dict must
        # never alias this one's nested state
        return {
            "version": PERCEIVER_VERSION,
            "ventriloquism_gain": self.ventriloquism_gain,
            "ventriloquism_falloff_mm": self.ventriloquism_falloff_mm,
            "opacity_gain": dict(self.opacity_gain),
            "thresholds_ma": dict(self.thresholds_ma),
            "blobs": {k: [dict(b) for b in v] for k, v in self.blobs.items()},
            "quality_weights": {k: dict(v) for k, v in self.quality_weights.items()},
            "mask_level_range": list(self.mask_level_range),
            "trial_jitter_mm": self.trial_jitter_mm,
            "participant_centroid_sd_mm": self.participant_centroid_sd_mm,
            "participant_threshold_sd_ma": self.participant_threshold_sd_ma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PerceiverConfig":
        d = dict(d)
        version = d.pop("version", PERCEIVER_VERSION)
        if version != PERCEIVER_VERSION:
            raise ValueError(f"unsupported perceiver config version {version!r}")
        d["mask_level_range"] = tuple(d.get("mask_level_range", (0.35, 0.65)))
        return cls(**d)

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "PerceiverConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))


def participant_variant(config: PerceiverConfig, seed: int) -> PerceiverConfig:
    """Per-participant jitter of thresholds and blob placement."""
    rng = np.random.default_rng(seed)
    variant = PerceiverConfig.from_dict(config.to_dict())
    for key, blobs in variant.blobs.items():
        dx, dy = rng.normal(0.0, config.participant_centroid_sd_mm, size=2)
        for b in blobs:
            b["x_mm"] += dx
            b["y_mm"] += dy
    for key, thr in variant.thresholds_ma.items():
        if thr > 0:
            jitter = rng.normal(0.0, config.participant_threshold_sd_ma)
            variant.thresholds_ma[key] = float(min(3.9, max(0.2, thr + jitter)))
    return variant


class SensationReport:
    """A painted perceived-area mask, its strongest point, and a quality word."""

    def __init__(self, area_mask: np.ndarray, strongest_point: tuple[int, int],
                 quality: str):
        area_mask = np.asarray(area_mask, dtype=bool)
        if not area_mask.any():
            raise ValueError("sensation report requires a nonempty mask")
        r, c = strongest_point
        if not area_mask[r, c]:
            raise ValueError("strongest point must lie inside the painted mask")
        if quality not in QUALITY_KEYWORDS:
            raise ValueError(f"unknown quality keyword {quality!r}")
        self.area_mask = area_mask
        self.strongest_point = (int(r), int(c))
        self.quality = quality

    def to_dict(self) -> dict:
        rows = ["".join("1" if v else "0" for v in row) for row in self.area_mask]
        return {
            "mask_rows": rows,
            "strongest_point": list(self.strongest_point),
            "quality": self.quality,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SensationReport":
        mask = np.array([[ch == "1" for ch in row] for row in d["mask_rows"]])
        return cls(mask, tuple(d["strongest_point"]), d["quality"])

    def equals(self, other: "SensationReport") -> bool:
        return (
            np.array_equal(self.area_mask, other.area_mask)
            and self.strongest_point == other.strongest_point
            and self.quality == other.quality
        )


def shift_gain(distance_mm: float, w0: float, sigma_v_mm: float,
               opacity_factor: float = 1.0) -> float:
    """Fraction of the visuotactile separation the percept moves by."""
    return w0 * opacity_factor * math.exp(-(distance_mm ** 2) / (2 * sigma_v_mm ** 2))


class Perceiver:
    def __init__(self, config: PerceiverConfig | None = None,
                 handmap: hm.HandMap | None = None):
        self.config = config or PerceiverConfig()
        self.handmap = handmap or hm.default_handmap()

    def ventriloquism_shift(self, centroid_xy,
                            visual: fx.VisualEffect | None) -> np.ndarray:
        """Displacement of the percept toward the visual highlight."""
        if visual is None:
            return np.zeros(2)
        target = np.array(fx.centroid_mm(visual, self.handmap))
        delta = target - np.asarray(centroid_xy, dtype=float)
        d = float(np.hypot(*delta))
        if d == 0:
            return np.zeros(2)
        gain = shift_gain(
            d,
            self.config.ventriloquism_gain,
            self.config.ventriloquism_falloff_mm,
            self.config.opacity_gain[visual.opacity],
        )
        return gain * delta

    def threshold_ma(self, channel) -> float:
        key = channel_key(channel)
        if key not in self.config.thresholds_ma:
            raise KeyError(f"unknown channel {channel!r}")
        return self.config.thresholds_ma[key]

    def perceive(self, channel, intensity_ma: float,
                 visual: fx.VisualEffect | None = None,
                 seed: int = 0) -> SensationReport | None:
        """One reported sensation, or None below the detection threshold."""
        key = channel_key(channel)
        if key not in self.config.blobs:
            raise KeyError(f"unknown channel {channel!r}")
        if intensity_ma < self.threshold_ma(channel):
            return None

        rng = np.random.default_rng(seed)
        blobs = self.config.blobs[key]
        weights = np.array([b["weight"] for b in blobs])
        centers = np.array([[b["x_mm"], b["y_mm"]] for b in blobs])
        centroid = (centers * weights[:, None]).sum(axis=0) / weights.sum()

        jitter = rng.normal(0.0, self.config.trial_jitter_mm, size=2)
        centroid = centroid + jitter

        shift = self.ventriloquism_shift(centroid, visual)

        cells, xy = self.handmap.hand_cell_coords_mm()
        density = np.zeros(len(cells))
        for b, w in zip(blobs, weights):
            c = np.array([b["x_mm"], b["y_mm"]]) + jitter + shift
            d2 = ((xy - c) ** 2).sum(axis=1)
            density += w * np.exp(-d2 / (2 * b["sigma_mm"] ** 2))

        peak_idx = int(np.argmax(density))
        level = rng.uniform(*self.config.mask_level_range)
        selected = density >= level * density[peak_idx]

        mask = np.zeros(self.handmap.shape, dtype=bool)
        mask[cells[selected, 0], cells[selected, 1]] = True
        # keep only the patch connected to the strongest cell (painted areas
        # are contiguous)
        labels, _ = ndimage.label(mask, structure=np.ones((3, 3), dtype=int))
        strongest = (int(cells[peak_idx, 0]), int(cells[peak_idx, 1]))
        mask = labels == labels[strongest]

        quality = self._draw_quality(key, rng)
        return SensationReport(mask, strongest, quality)

    def _draw_quality(self, key: str, rng: np.random.Generator) -> str:
        weights = self.config.quality_weights.get(key, _DEFAULT_QUALITY)
        names = list(QUALITY_KEYWORDS)
        p = np.array([weights.get(n, 0.0) for n in names], dtype=float)
        p = p / p.sum()
        return names[int(rng.choice(len(names), p=p))]
