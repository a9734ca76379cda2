"""Finger-highlight visual effect commands paired with stimulation.

Three sizes (fingertip, whole finger, a highlight sweeping fingertip-to-wrist)
at two opacities form the six-condition grid.  Color is fixed light blue.
The sweep is represented by its endpoints and duration; animation is
renderer-side metadata only.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import handmap as hm

SIZE_FINGERTIP = "fingertip"
SIZE_FINGER = "finger"
SIZE_FINGERTIP_TO_WRIST = "fingertip_to_wrist"
SIZES = (SIZE_FINGERTIP, SIZE_FINGER, SIZE_FINGERTIP_TO_WRIST)

OPACITY_FULL = "full"
OPACITY_HALF = "half"
OPACITIES = (OPACITY_FULL, OPACITY_HALF)

FINGERS = ("thumb", "index")

EFFECT_COLOR = "#ADD8E6"  # light blue
SWEEP_DURATION_MS = 45.0  # aligned to the stimulus duration

# size x opacity grid used by the visual-condition study
CONDITION_GRID = [(s, o) for s in SIZES for o in OPACITIES]


@dataclass(frozen=True)
class VisualEffect:
    size: str
    opacity: str
    target_finger: str
    color: str = EFFECT_COLOR

    def __post_init__(self):
        if self.size not in SIZES:
            raise ValueError(f"unknown effect size {self.size!r}")
        if self.opacity not in OPACITIES:
            raise ValueError(f"unknown opacity {self.opacity!r}")
        if self.target_finger not in FINGERS:
            raise ValueError(f"target finger must be one of {FINGERS}")


def centroid_mm(effect: VisualEffect, handmap: hm.HandMap) -> tuple[float, float]:
    """Where the highlight visually sits, for the cross-modal shift."""
    region = hm.REGION_CODES[effect.target_finger]
    if effect.size == SIZE_FINGERTIP:
        return handmap.fingertip_mm(region)
    if effect.size == SIZE_FINGER:
        return handmap.region_centroid_mm(region)
    # sweep: centroid of the fingertip-to-wrist path
    tip = handmap.fingertip_mm(region)
    wrist = handmap.region_centroid_mm(hm.WRIST)
    return ((tip[0] + wrist[0]) / 2.0, (tip[1] + wrist[1]) / 2.0)


def animation(effect: VisualEffect, handmap: hm.HandMap) -> dict:
    """Renderer-side metadata (sweep endpoints for the moving highlight)."""
    region = hm.REGION_CODES[effect.target_finger]
    meta = {
        "size": effect.size,
        "opacity": effect.opacity,
        "target_finger": effect.target_finger,
        "color": effect.color,
    }
    if effect.size == SIZE_FINGERTIP_TO_WRIST:
        meta["sweep_from_mm"] = list(handmap.fingertip_mm(region))
        meta["sweep_to_mm"] = list(handmap.region_centroid_mm(hm.WRIST))
        meta["duration_ms"] = SWEEP_DURATION_MS
    return meta
