"""Boundary-free UV atlas shared by latents, textures, and the renderer.

The UV grid is carved into rectangular patches, one per body segment.
Within a patch, columns sweep the angle around the bone (front hemisphere
in the left half of the patch, back hemisphere mirrored into the right
half) and rows run along the bone axis.  Patches of adjacent segments sit
next to each other (head over neck over torso over legs over feet), so
garment shapes stay readable after warping.

Left/right limbs use separate patches with identical internal coordinates,
which makes the left-right correspondence a plain texel copy and the
front-back correspondence a horizontal flip inside each patch.  Those two
index maps are the body-topology prior used to expand a single-view
partial mask to the full surface.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

import numpy as np


class BodyPart(IntEnum):
    HEAD = 0
    NECK = 1
    BODY = 2
    ARM = 3
    LEG = 4
    FOOT = 5


PART_NAMES = tuple(p.name.lower() for p in BodyPart)


def part_from_name(name: str) -> BodyPart:
    return BodyPart[name.upper()]


# Patch rectangles as (row0, row1, col0, col1) on the reference 128-grid.
# Widths are even so the front/back halves split cleanly.
_PATCH_TABLE = {
    "head": ("head", (2, 24, 44, 84), None),
    "neck": ("neck", (24, 40, 44, 84), None),
    "torso": ("body", (40, 78, 40, 88), None),
    "arm_l": ("arm", (40, 78, 6, 34), "arm_r"),
    "arm_r": ("arm", (40, 78, 94, 122), "arm_l"),
    "leg_l": ("leg", (78, 116, 40, 62), "leg_r"),
    "leg_r": ("leg", (78, 116, 66, 88), "leg_l"),
    "foot_l": ("foot", (116, 126, 40, 62), "foot_r"),
    "foot_r": ("foot", (116, 126, 66, 88), "foot_l"),
}

_REF = 128


@dataclass(frozen=True)
class Patch:
    name: str
    part: BodyPart
    row0: int
    row1: int
    col0: int
    col1: int
    twin: str | None = None

    @property
    def height(self) -> int:
        return self.row1 - self.row0

    @property
    def width(self) -> int:
        return self.col1 - self.col0

    def slice(self):
        return (slice(self.row0, self.row1), slice(self.col0, self.col1))

    def contains(self, row: float, col: float) -> bool:
        return self.row0 <= row < self.row1 and self.col0 <= col < self.col1


@dataclass(frozen=True)
class PartMaskSet:
    """Per-part binary masks plus the derived foreground and body masks."""

    part: np.ndarray   # (6, h, w) bool, disjoint
    fg: np.ndarray     # (h, w) bool, union of the six part masks
    body: np.ndarray   # (h, w) bool, garment-relevant region (neck|body|arm|leg)

    def for_part(self, part: BodyPart) -> np.ndarray:
        return self.part[int(part)]


class Layout:
    """Patch geometry and mask algebra for one UV resolution."""

    def __init__(self, h: int = 128, w: int = 128):
        if h < 32 or w < 32:
            raise ValueError("UV grid too small for the body atlas")
        self.h = h
        self.w = w
        patches = {}
        for name, (part_name, rect, twin) in _PATCH_TABLE.items():
            r0, r1, c0, c1 = rect
            r0 = round(r0 * h / _REF)
            r1 = round(r1 * h / _REF)
            c0 = round(c0 * w / _REF)
            c1 = round(c1 * w / _REF)
            if (c1 - c0) % 2:
                c1 -= 1
            patches[name] = Patch(name, part_from_name(part_name), r0, r1, c0, c1, twin)
        self.patches = patches

        part = np.zeros((6, h, w), dtype=bool)
        part_of = np.full((h, w), -1, dtype=np.int8)
        for p in patches.values():
            part[int(p.part)][p.slice()] = True
            part_of[p.slice()] = int(p.part)
        fg = part.any(axis=0)
        body = part[BodyPart.NECK] | part[BodyPart.BODY] | part[BodyPart.ARM] | part[BodyPart.LEG]
        for arr in (part, fg, body, part_of):
            arr.setflags(write=False)
        self.masks = PartMaskSet(part=part, fg=fg, body=body)
        self.part_of = part_of

    def patches_of(self, part: BodyPart) -> list[Patch]:
        return [p for p in self.patches.values() if p.part == part]

    def part_mask(self, part: BodyPart) -> np.ndarray:
        return self.masks.part[int(part)]

    def patch_at(self, row: float, col: float) -> Patch | None:
        for p in self.patches.values():
            if p.contains(row, col):
                return p
        return None

    def flip_front_back(self, mask: np.ndarray) -> np.ndarray:
        """Map every marked texel to its behind-the-body counterpart."""
        out = np.zeros_like(mask)
        for p in self.patches.values():
            out[p.slice()] = mask[p.slice()][:, ::-1]
        return out

    def expand_mask(self, mask: np.ndarray, mirror: bool = True) -> np.ndarray:
        """Complete a partial mask over the full body surface.

        Front-back closure always applies; left-right limb mirroring is
        optional so single-limb edits stay single-limb when requested.
        Idempotent and monotone.
        """
        self._check_grid(mask)
        out = mask & self.masks.fg
        for p in self.patches.values():
            sub = out[p.slice()]
            out[p.slice()] = sub | sub[:, ::-1]
        if mirror:
            for p in self.patches.values():
                if p.twin is None:
                    continue
                t = self.patches[p.twin]
                merged = out[p.slice()] | out[t.slice()]
                out[p.slice()] = merged
                out[t.slice()] = merged
        return out

    def _check_grid(self, arr: np.ndarray):
        if arr.shape[:2] != (self.h, self.w):
            raise ValueError(f"expected a {self.h}x{self.w} UV grid, got {arr.shape}")


@lru_cache(maxsize=8)
def get_layout(h: int = 128, w: int = 128) -> Layout:
    return Layout(h, w)
