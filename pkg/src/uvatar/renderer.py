"""Deterministic procedural avatar renderer.

Decodes a UV latent into a garment texture and rasterizes an articulated
capsule body under controllable pose, view, and shape.  Emits color,
segmentation, per-pixel UV coordinates, and depth.  Everything is a pure
function of its inputs: identical calls produce bit-identical rasters.

Channel semantics of the latent decode (fixed, documented contract):
  0-2  base color logits (sigmoid-squashed to [0, 1])
  3    pattern selector: floor(x + 2) clipped to 0..3 =
       plain / stripe / checker / floral-dot
  4    pattern frequency logit (period 4..16 texels)
  5    pattern contrast logit
  6    garment coverage logit (covered where > 0)
  7    reserved
Skin texels use a fixed skin tone; covered head texels render as hair in
the plain base color.
"""

from __future__ import annotations

import io as _io
import math
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from PIL import Image

from . import kernels
from .core import UVCoordMap, UVLatent
from .errors import InvalidArgumentError
from .layout import BodyPart, Layout, get_layout

SKIN_TONE = np.array([0.87, 0.72, 0.60], dtype=np.float32)
BACKGROUND = np.array([0.94, 0.94, 0.97], dtype=np.float32)

CANONICAL_SIZE = (512, 512)
_CAM_CENTER_Y = 1.05
_PPU_FRACTION = 0.35

_JOINTS = ("shoulder_l", "shoulder_r", "elbow_l", "elbow_r",
           "hip_l", "hip_r", "knee_l", "knee_r", "spine")
_MAX_ANGLE = 150.0


@dataclass(frozen=True)
class BodyPose:
    """Joint angles in degrees; all zeros is the canonical A-pose."""

    shoulder_l: float = 0.0
    shoulder_r: float = 0.0
    elbow_l: float = 0.0
    elbow_r: float = 0.0
    hip_l: float = 0.0
    hip_r: float = 0.0
    knee_l: float = 0.0
    knee_r: float = 0.0
    spine: float = 0.0
    label: str = "custom"

    def validate(self):
        for name in _JOINTS:
            a = getattr(self, name)
            if not (-_MAX_ANGLE <= a <= _MAX_ANGLE):
                raise InvalidArgumentError(f"joint {name}={a} outside +-150 degrees")

    def angles(self) -> dict:
        return {name: getattr(self, name) for name in _JOINTS}


@dataclass(frozen=True)
class CameraView:
    yaw: float = 0.0    # degrees, 0 = front
    pitch: float = 0.0  # degrees
    scale: float = 1.0  # orthographic zoom

    def validate(self):
        if not (-180.0 <= self.yaw <= 180.0):
            raise InvalidArgumentError(f"yaw {self.yaw} outside [-180, 180]")
        if not (-45.0 <= self.pitch <= 45.0):
            raise InvalidArgumentError(f"pitch {self.pitch} outside [-45, 45]")
        if not (0.05 <= self.scale <= 8.0):
            raise InvalidArgumentError(f"scale {self.scale} outside (0.05, 8]")


@dataclass(frozen=True)
class ShapeParams:
    height: float = 1.0
    limb_width: float = 1.0
    torso_width: float = 1.0

    def validate(self):
        for name in ("height", "limb_width", "torso_width"):
            v = getattr(self, name)
            if not (0.7 <= v <= 1.3):
                raise InvalidArgumentError(f"shape {name}={v} outside [0.7, 1.3]")


CANONICAL_POSE = BodyPose(label="a-pose")
CANONICAL_VIEW = CameraView()
DEFAULT_SHAPE = ShapeParams()

POSE_CORPUS = {
    "a-pose": CANONICAL_POSE,
    "walk": BodyPose(shoulder_l=-20, shoulder_r=20, elbow_l=10, elbow_r=15,
                     hip_l=15, hip_r=-12, knee_l=18, knee_r=0, label="walk"),
    "stride": BodyPose(hip_l=28, hip_r=-25, knee_l=22, knee_r=5, spine=4, label="stride"),
    "arms-up": BodyPose(shoulder_l=110, shoulder_r=110, elbow_l=15, elbow_r=15, label="arms-up"),
    "wave": BodyPose(shoulder_l=5, shoulder_r=140, elbow_r=25, label="wave"),
    "lean": BodyPose(spine=18, shoulder_l=12, shoulder_r=12, label="lean"),
}


@dataclass(frozen=True)
class RenderOutput:
    color: np.ndarray    # (h, w, 3) float32 in [0, 1]
    part: np.ndarray     # (h, w) int8 BodyPart code, -1 background
    garment: np.ndarray  # (h, w) bool garment-coverage flag
    coords: UVCoordMap
    depth: np.ndarray    # (h, w) float32, smaller = closer, +inf background
    pose: BodyPose = field(compare=False, default=CANONICAL_POSE)
    view: CameraView = field(compare=False, default=CANONICAL_VIEW)
    shape: ShapeParams = field(compare=False, default=DEFAULT_SHAPE)

    @property
    def size(self):
        h, w = self.part.shape
        return (w, h)

    def color_u8(self) -> np.ndarray:
        return np.clip(self.color * 255.0 + 0.5, 0, 255).astype(np.uint8)

    def segmentation_u8(self) -> np.ndarray:
        h, w = self.part.shape
        seg = np.zeros((h, w, 3), dtype=np.uint8)
        seg[..., 0] = (self.part.astype(np.int16) + 1).astype(np.uint8)
        seg[..., 1] = self.garment.astype(np.uint8) * 255
        return seg

    def png_bytes(self) -> bytes:
        return encode_png(self.color_u8())

    def segmentation_png_bytes(self) -> bytes:
        return encode_png(self.segmentation_u8())


def encode_png(arr_u8: np.ndarray) -> bytes:
    buf = _io.BytesIO()
    Image.fromarray(arr_u8, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    img = Image.open(_io.BytesIO(data)).convert("RGB")
    return np.asarray(img, dtype=np.uint8)


# ---------------------------------------------------------------------------
# Latent decode
# ---------------------------------------------------------------------------

def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def decode_texture(latent: UVLatent, layout: Layout | None = None):
    """Decode a latent into an albedo texture and a garment-coverage grid."""
    if latent.c < 8:
        raise InvalidArgumentError(f"decode needs >= 8 channels, got {latent.c}")
    layout = layout or get_layout(latent.h, latent.w)
    g = latent.grid
    base = _sigmoid(g[..., 0:3]).astype(np.float32)
    pat = np.clip(np.floor(g[..., 3] + 2.0), 0, 3).astype(np.int8)
    period = (4.0 + 12.0 * _sigmoid(g[..., 4])).astype(np.float32)
    contrast = _sigmoid(g[..., 5]).astype(np.float32)
    coverage = g[..., 6] > 0

    rows, cols = np.indices((latent.h, latent.w), dtype=np.float32)
    rm = np.mod(rows, period)
    cm = np.mod(cols, period)
    half = period * 0.5
    stripe = rm < half
    checker = (rm < half) ^ (cm < half)
    dot = (rm - half) ** 2 + (cm - half) ** 2 < (period * 0.25) ** 2
    modulation = np.select(
        [pat == 1, pat == 2, pat == 3], [stripe, checker, dot], default=False
    ).astype(np.float32)
    garment = base * (1.0 - 0.6 * contrast * modulation)[..., None]

    texture = np.broadcast_to(SKIN_TONE, garment.shape).copy()
    texture[coverage] = garment[coverage]
    hair = coverage & layout.part_mask(BodyPart.HEAD)
    texture[hair] = base[hair]  # hair keeps the flat base color
    return texture.astype(np.float32), coverage


# ---------------------------------------------------------------------------
# Skeleton
# ---------------------------------------------------------------------------

def _rotz(deg: float):
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    return c, s


def _rot2(c, s, x, y):
    return (c * x - s * y, s * x + c * y)


_ARM_DROP = 20.0  # canonical A-pose arm angle from vertical, degrees


def build_capsules(pose: BodyPose, shape: ShapeParams):
    """Posed capsule list: (name, A, B, radius, patch, v0, v1, flip)."""
    hs = shape.height
    lw = shape.limb_width
    tw = shape.torso_width
    pelvis = np.array([0.0, 0.95, 0.0])
    caps = []

    def add(name, a, b, r, patch, v0, v1, flip):
        caps.append((name, np.asarray(a, float) * hs, np.asarray(b, float) * hs,
                     r * hs, patch, v0, v1, flip))

    csp, ssp = _rotz(pose.spine)

    def spin(p):
        # Spine rotation about the pelvis, in the body plane.
        x, y = _rot2(csp, ssp, p[0] - pelvis[0], p[1] - pelvis[1])
        return np.array([x + pelvis[0], y + pelvis[1], p[2]])

    add("torso", pelvis, spin((0.0, 1.28, 0.0)), 0.17 * tw, "torso", 0.0, 1.0, True)
    add("neck", spin((0.0, 1.42, 0.0)), spin((0.0, 1.58, 0.0)), 0.065, "neck", 0.0, 1.0, True)
    add("head", spin((0.0, 1.66, 0.0)), spin((0.0, 1.74, 0.0)), 0.12, "head", 0.0, 1.0, True)

    drop = math.radians(_ARM_DROP)
    for side, sign in (("l", -1.0), ("r", 1.0)):
        sh = spin((sign * 0.19, 1.40, 0.05))
        d0 = np.array([sign * math.sin(drop), -math.cos(drop), 0.0])
        a_sh = pose.spine + sign * getattr(pose, f"shoulder_{side}")
        c, s = _rotz(a_sh)
        du = np.array([*_rot2(c, s, d0[0], d0[1]), 0.0])
        elbow = sh + 0.26 * du
        c, s = _rotz(a_sh + sign * getattr(pose, f"elbow_{side}"))
        df = np.array([*_rot2(c, s, d0[0], d0[1]), 0.0])
        wrist = elbow + 0.25 * df
        add(f"arm_{side}_upper", sh, elbow, 0.052 * lw, f"arm_{side}", 0.0, 0.5, False)
        add(f"arm_{side}_fore", elbow, wrist, 0.046 * lw, f"arm_{side}", 0.5, 1.0, False)

        hip = np.array([sign * 0.095, 0.93, 0.0])
        a_hip = sign * getattr(pose, f"hip_{side}")
        c, s = _rotz(a_hip)
        dl = np.array([*_rot2(c, s, 0.0, -1.0), 0.0])
        knee = hip + 0.40 * dl
        a_knee = a_hip + sign * getattr(pose, f"knee_{side}")
        c, s = _rotz(a_knee)
        dk = np.array([*_rot2(c, s, 0.0, -1.0), 0.0])
        ankle = knee + 0.40 * dk
        add(f"leg_{side}_upper", hip, knee, 0.075 * lw, f"leg_{side}", 0.0, 0.5, False)
        add(f"leg_{side}_lower", knee, ankle, 0.060 * lw, f"leg_{side}", 0.5, 1.0, False)

        c, s = _rotz(a_knee)
        fa = ankle + np.array([*_rot2(c, s, 0.0, -0.035), 0.02])
        fb = ankle + np.array([*_rot2(c, s, sign * 0.04, -0.075), 0.13])
        add(f"foot_{side}", fa, fb, 0.055 * lw, f"foot_{side}", 0.0, 1.0, False)

    return caps


def _bone_frame(a: np.ndarray, b: np.ndarray):
    """Rows (local x, bone axis, local front) of the bone frame."""
    axis = b - a
    axis = axis / np.linalg.norm(axis)
    xl = np.cross(axis, np.array([0.0, 0.0, 1.0]))
    if np.linalg.norm(xl) < 0.05:
        xl = np.cross(np.array([0.0, 1.0, 0.0]), axis)
    xl = xl / np.linalg.norm(xl)
    zl = np.cross(xl, axis)
    return np.stack([xl, axis, zl])


def _camera_matrix(view: CameraView) -> np.ndarray:
    ya = math.radians(view.yaw)
    pa = math.radians(view.pitch)
    ry = np.array([[math.cos(ya), 0.0, math.sin(ya)],
                   [0.0, 1.0, 0.0],
                   [-math.sin(ya), 0.0, math.cos(ya)]])
    rx = np.array([[1.0, 0.0, 0.0],
                   [0.0, math.cos(pa), -math.sin(pa)],
                   [0.0, math.sin(pa), math.cos(pa)]])
    return rx @ ry


# ---------------------------------------------------------------------------
# Render
# ---------------------------------------------------------------------------

def render(latent: UVLatent, pose: BodyPose = CANONICAL_POSE,
           view: CameraView = CANONICAL_VIEW, shape: ShapeParams = DEFAULT_SHAPE,
           size=CANONICAL_SIZE) -> RenderOutput:
    pose.validate()
    view.validate()
    shape.validate()
    w_img, h_img = size
    if not (64 <= w_img <= 2048 and 64 <= h_img <= 2048):
        raise InvalidArgumentError(f"image size {size} outside 64..2048")

    layout = get_layout(latent.h, latent.w)
    texture, coverage = decode_texture(latent, layout)
    caps = build_capsules(pose, shape)

    rw = _camera_matrix(view)
    center = np.array([0.0, _CAM_CENTER_Y, 0.0]) * shape.height
    ppu = _PPU_FRACTION * min(w_img, h_img) * view.scale

    k = len(caps)
    buf = {
        "ax": np.empty(k), "ay": np.empty(k), "az": np.empty(k),
        "bx": np.empty(k), "by": np.empty(k), "bz": np.empty(k),
        "rr": np.empty(k), "part": np.empty(k, dtype=np.int8),
        "M": np.empty((k, 3, 3)),
        "r0": np.empty(k, dtype=np.int32), "r1": np.empty(k, dtype=np.int32),
        "c0": np.empty(k, dtype=np.int32), "c1": np.empty(k, dtype=np.int32),
        "flip": np.empty(k, dtype=np.bool_),
    }
    for i, (name, a, b, r, patch_name, v0, v1, flip) in enumerate(caps):
        ac = rw @ (a - center)
        bc = rw @ (b - center)
        buf["ax"][i] = w_img / 2.0 + ac[0] * ppu
        buf["ay"][i] = h_img / 2.0 - ac[1] * ppu
        buf["az"][i] = ac[2] * ppu
        buf["bx"][i] = w_img / 2.0 + bc[0] * ppu
        buf["by"][i] = h_img / 2.0 - bc[1] * ppu
        buf["bz"][i] = bc[2] * ppu
        buf["rr"][i] = r * ppu
        patch = layout.patches[patch_name]
        buf["part"][i] = int(patch.part)
        buf["r0"][i] = patch.row0 + round(v0 * patch.height)
        buf["r1"][i] = patch.row0 + round(v1 * patch.height)
        buf["c0"][i] = patch.col0
        buf["c1"][i] = patch.col1
        # Pixel y grows downward while camera y grows up; the kernel feeds
        # pixel-space offsets, so negate the y column of the camera->local map.
        m = _bone_frame(a, b) @ rw.T
        m[:, 1] *= -1.0
        buf["M"][i] = m
        buf["flip"][i] = flip

    zbuf, part, uf, vf = kernels.rasterize(buf, h_img, w_img)
    valid = part >= 0

    u = np.where(valid, uf / np.float32(latent.w), np.float32(-1.0)).astype(np.float32)
    v = np.where(valid, vf / np.float32(latent.h), np.float32(-1.0)).astype(np.float32)
    depth = np.where(valid, -zbuf / np.float32(ppu), np.float32(np.inf)).astype(np.float32)
    coords = UVCoordMap.create(u, v, valid, depth)

    tu = np.clip(np.floor(u * latent.w).astype(np.int32), 0, latent.w - 1)
    tv = np.clip(np.floor(v * latent.h).astype(np.int32), 0, latent.h - 1)
    color = np.broadcast_to(BACKGROUND, (h_img, w_img, 3)).copy()
    color[valid] = texture[tv[valid], tu[valid]]
    garment = np.zeros((h_img, w_img), dtype=bool)
    garment[valid] = coverage[tv[valid], tu[valid]]

    for arr in (color, part, garment, depth):
        arr.setflags(write=False)
    return RenderOutput(color=color, part=part, garment=garment, coords=coords,
                        depth=depth, pose=pose, view=view, shape=shape)


def render_canonical(latent: UVLatent, size=CANONICAL_SIZE) -> RenderOutput:
    """Render under the fixed canonical pose, view, and shape."""
    return render(latent, CANONICAL_POSE, CANONICAL_VIEW, DEFAULT_SHAPE, size)
