"""Labeled palmar-hand raster used for sensation reports and scoring.

A stylized left-hand palmar view on a 60x80 grid at 2.5 mm/cell, thumb on the
left, wrist at the bottom.  Region codes label background, wrist, palm and the
five fingers.  The raster is generated deterministically and carries a version
string; masks painted against one version only score against the same version.
"""

from __future__ import annotations

import numpy as np

HANDMAP_VERSION = "handmap/1"

WIDTH = 60
HEIGHT = 80
SCALE_MM = 2.5

BACKGROUND = 0
WRIST = 1
PALM = 2
THUMB = 3
INDEX = 4
MIDDLE = 5
RING = 6
LITTLE = 7

REGION_NAMES = {
    BACKGROUND: "background",
    WRIST: "wrist",
    PALM: "palm",
    THUMB: "thumb",
    INDEX: "index",
    MIDDLE: "middle",
    RING: "ring",
    LITTLE: "little",
}
REGION_CODES = {v: k for k, v in REGION_NAMES.items()}

# (code, row range inclusive, col range inclusive)
_REGION_RECTS = [
    (WRIST, (68, 79), (20, 40)),
    (PALM, (44, 67), (14, 46)),
    (THUMB, (36, 56), (2, 13)),
    (INDEX, (18, 43), (16, 23)),
    (MIDDLE, (14, 43), (25, 32)),
    (RING, (17, 43), (34, 41)),
    (LITTLE, (24, 43), (43, 49)),
]


class HandMap:
    def __init__(self, raster: np.ndarray, scale_mm: float = SCALE_MM,
                 version: str = HANDMAP_VERSION):
        if raster.ndim != 2:
            raise ValueError("raster must be 2-D")
        codes = set(np.unique(raster).tolist())
        if not codes <= set(REGION_NAMES):
            raise ValueError(f"unknown region codes: {codes - set(REGION_NAMES)}")
        self.raster = raster.astype(np.uint8)
        self.scale_mm = float(scale_mm)
        self.version = version
        self._hand = self.raster != BACKGROUND
        rows, cols = np.nonzero(self._hand)
        self._hand_cells = np.stack([rows, cols], axis=1)
        self._hand_xy = (self._hand_cells[:, ::-1] + 0.5) * self.scale_mm

    @property
    def shape(self) -> tuple[int, int]:
        return self.raster.shape

    def hand_mask(self) -> np.ndarray:
        return self._hand.copy()

    def region_mask(self, region) -> np.ndarray:
        return self.raster == self._code(region)

    @staticmethod
    def _code(region) -> int:
        if isinstance(region, str):
            return REGION_CODES[region]
        return int(region)

    def cell_center_mm(self, row: int, col: int) -> tuple[float, float]:
        return ((col + 0.5) * self.scale_mm, (row + 0.5) * self.scale_mm)

    def region_centroid_mm(self, region) -> tuple[float, float]:
        rows, cols = np.nonzero(self.region_mask(region))
        if rows.size == 0:
            raise ValueError(f"region {region!r} is empty")
        return ((cols.mean() + 0.5) * self.scale_mm, (rows.mean() + 0.5) * self.scale_mm)

    def fingertip_mm(self, region) -> tuple[float, float]:
        """Centroid of the topmost three rows of a finger region."""
        mask = self.region_mask(region)
        rows, cols = np.nonzero(mask)
        if rows.size == 0:
            raise ValueError(f"region {region!r} is empty")
        top = rows.min()
        sel = rows <= top + 2
        return ((cols[sel].mean() + 0.5) * self.scale_mm,
                (rows[sel].mean() + 0.5) * self.scale_mm)

    def nearest_hand_cell(self, x_mm: float, y_mm: float) -> tuple[int, int]:
        d2 = ((self._hand_xy - np.array([x_mm, y_mm])) ** 2).sum(axis=1)
        r, c = self._hand_cells[int(np.argmin(d2))]
        return int(r), int(c)

    def hand_cell_coords_mm(self) -> tuple[np.ndarray, np.ndarray]:
        """(cells Nx2 of (row, col), centers Nx2 of (x, y) mm)."""
        return self._hand_cells, self._hand_xy

    def to_csv(self, path) -> None:
        np.savetxt(path, self.raster, fmt="%d", delimiter=",",
                   header=f"{self.version} scale_mm={self.scale_mm}")

    @classmethod
    def from_csv(cls, path, scale_mm: float = SCALE_MM,
                 version: str = HANDMAP_VERSION) -> "HandMap":
        return cls(np.loadtxt(path, dtype=int, delimiter=","), scale_mm, version)


def build_default_raster() -> np.ndarray:
    raster = np.zeros((HEIGHT, WIDTH), dtype=np.uint8)
    for code, (r0, r1), (c0, c1) in _REGION_RECTS:
        raster[r0:r1 + 1, c0:c1 + 1] = code
    return raster


_DEFAULT: HandMap | None = None


def default_handmap() -> HandMap:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = HandMap(build_default_raster())
    return _DEFAULT
