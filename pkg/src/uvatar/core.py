"""UV latent grids, partial UV images, coordinate maps, and their algebra.

All types are immutable after construction (backing arrays are marked
read-only) and the operations are pure functions, so everything here is
safe to share across threads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidArgumentError, OverlappingMasksError
from . import kernels

DEFAULT_UV_SHAPE = (128, 128)
DEFAULT_CHANNELS = 8

_UVLT_MAGIC = b"UVLT"
_UVCM_MAGIC = b"UVCM"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class UVLatent:
    """A fixed-resolution grid of feature vectors in the boundary-free UV layout."""

    grid: np.ndarray  # (h, w, c) float32, read-only

    @staticmethod
    def from_array(arr: np.ndarray) -> "UVLatent":
        arr = np.asarray(arr, dtype=np.float32)
        if arr.ndim != 3:
            raise InvalidArgumentError(f"latent grid must be 3-d, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise InvalidArgumentError("latent grid contains non-finite values")
        return UVLatent(_freeze(arr))

    @staticmethod
    def zeros(h: int = 128, w: int = 128, c: int = DEFAULT_CHANNELS) -> "UVLatent":
        return UVLatent(_freeze(np.zeros((h, w, c), dtype=np.float32)))

    @property
    def h(self) -> int:
        return self.grid.shape[0]

    @property
    def w(self) -> int:
        return self.grid.shape[1]

    @property
    def c(self) -> int:
        return self.grid.shape[2]

    def tobytes(self) -> bytes:
        header = _UVLT_MAGIC + struct.pack("<III", self.h, self.w, self.c)
        return header + self.grid.tobytes()

    def save(self, path):
        with open(path, "wb") as f:
            f.write(self.tobytes())

    @staticmethod
    def frombytes(data: bytes) -> "UVLatent":
        if len(data) < 16 or data[:4] != _UVLT_MAGIC:
            raise InvalidArgumentError("not a UVLT blob")
        h, w, c = struct.unpack("<III", data[4:16])
        expected = 16 + 4 * h * w * c
        if len(data) != expected:
            raise InvalidArgumentError(f"UVLT payload truncated: {len(data)} != {expected}")
        grid = np.frombuffer(data[16:], dtype="<f4").reshape(h, w, c)
        return UVLatent.from_array(grid)

    @staticmethod
    def load(path) -> "UVLatent":
        with open(path, "rb") as f:
            return UVLatent.frombytes(f.read())


@dataclass(frozen=True)
class PartialUVImage:
    """UV-space color raster valid only on texels hit by at least one pixel."""

    color: np.ndarray  # (h, w, 3) float32, zero where invalid
    valid: np.ndarray  # (h, w) bool

    @staticmethod
    def create(color: np.ndarray, valid: np.ndarray) -> "PartialUVImage":
        color = np.asarray(color, dtype=np.float32)
        valid = np.asarray(valid, dtype=bool)
        if color.shape[:2] != valid.shape or color.ndim != 3 or color.shape[2] != 3:
            raise DimensionMismatchError(
                f"color {color.shape} does not match validity {valid.shape}"
            )
        color = color * valid[..., None]  # pin undefined texels to zero
        return PartialUVImage(_freeze(color), _freeze(valid))

    @property
    def shape(self):
        return self.valid.shape


@dataclass(frozen=True)
class UVCoordMap:
    """Per-pixel (u, v) surface coordinates of a render, plus visibility.

    ``depth`` (smaller = closer to camera) is carried in memory so the
    warp can resolve texel collisions front-most-first; it is not part of
    the serialized UVCM raster.
    """

    u: np.ndarray      # (h_img, w_img) float32 in [0, 1), -1 where invalid
    v: np.ndarray      # (h_img, w_img) float32
    valid: np.ndarray  # (h_img, w_img) bool
    depth: np.ndarray | None = None  # (h_img, w_img) float32

    @staticmethod
    def create(u, v, valid, depth=None) -> "UVCoordMap":
        u = _freeze(np.asarray(u, dtype=np.float32))
        v = _freeze(np.asarray(v, dtype=np.float32))
        valid = _freeze(np.asarray(valid, dtype=bool))
        if not (u.shape == v.shape == valid.shape):
            raise DimensionMismatchError("u, v, validity rasters differ in shape")
        if depth is not None:
            depth = _freeze(np.asarray(depth, dtype=np.float32))
            if depth.shape != valid.shape:
                raise DimensionMismatchError("depth raster differs in shape")
        return UVCoordMap(u, v, valid, depth)

    @property
    def shape(self):
        return self.valid.shape

    def tobytes(self) -> bytes:
        h, w = self.valid.shape
        header = _UVCM_MAGIC + struct.pack("<II", w, h)
        return (
            header
            + self.u.astype("<f4").tobytes()
            + self.v.astype("<f4").tobytes()
            + self.valid.astype(np.uint8).tobytes()
        )

    def save(self, path):
        with open(path, "wb") as f:
            f.write(self.tobytes())

    @staticmethod
    def frombytes(data: bytes) -> "UVCoordMap":
        if len(data) < 12 or data[:4] != _UVCM_MAGIC:
            raise InvalidArgumentError("not a UVCM blob")
        w, h = struct.unpack("<II", data[4:12])
        expected = 12 + h * w * (4 + 4 + 1)
        if len(data) != expected:
            raise InvalidArgumentError(f"UVCM payload truncated: {len(data)} != {expected}")
        off = 12
        u = np.frombuffer(data[off:off + 4 * h * w], dtype="<f4").reshape(h, w)
        off += 4 * h * w
        v = np.frombuffer(data[off:off + 4 * h * w], dtype="<f4").reshape(h, w)
        off += 4 * h * w
        valid = np.frombuffer(data[off:], dtype=np.uint8).reshape(h, w).astype(bool)
        return UVCoordMap.create(u, v, valid)

    @staticmethod
    def load(path) -> "UVCoordMap":
        with open(path, "rb") as f:
            return UVCoordMap.frombytes(f.read())


def _as_mask(mask: np.ndarray, shape) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != shape:
        raise DimensionMismatchError(f"mask shape {mask.shape} does not match grid {shape}")
    return mask.astype(bool)


def compose_latents(parts) -> UVLatent:
    """Assemble one latent from (latent, mask) pairs with disjoint masks.

    Texels covered by no mask are zero.  Order of the pairs is irrelevant
    because overlap is rejected.
    """
    parts = list(parts)
    if not parts:
        raise InvalidArgumentError("compose_latents needs at least one (latent, mask) pair")
    base = parts[0][0]
    out = np.zeros_like(base.grid)
    covered = np.zeros(base.grid.shape[:2], dtype=np.uint8)
    for latent, mask in parts:
        if latent.grid.shape != base.grid.shape:
            raise DimensionMismatchError("latents differ in shape")
        m = _as_mask(mask, covered.shape)
        covered += m
        out[m] = latent.grid[m]
    if (covered > 1).any():
        raise OverlappingMasksError("part masks overlap")
    return UVLatent(_freeze(out))


def blend_latent(source: UVLatent, target: UVLatent, mask: np.ndarray) -> UVLatent:
    """target where mask is set, source elsewhere; bit-exact on both sides."""
    if source.grid.shape != target.grid.shape:
        raise DimensionMismatchError("source and target latents differ in shape")
    m = _as_mask(mask, source.grid.shape[:2])
    out = np.where(m[..., None], target.grid, source.grid)
    return UVLatent(_freeze(out))


def warp_to_uv(image: np.ndarray, coords: UVCoordMap, uv_shape=DEFAULT_UV_SHAPE) -> PartialUVImage:
    """Scatter visible pixels into UV texels, front-most pixel winning.

    Each visible pixel lands in the texel containing its (u, v); when
    several pixels hit one texel the smallest depth wins, ties going to
    the earliest pixel in row-major order.
    """
    image = np.asarray(image, dtype=np.float32)
    if image.ndim != 3 or image.shape[2] != 3:
        raise DimensionMismatchError(f"image must be (h, w, 3), got {image.shape}")
    if image.shape[:2] != coords.shape:
        raise DimensionMismatchError(
            f"image {image.shape[:2]} does not match coords {coords.shape}"
        )
    winner = scatter_winners(coords, uv_shape)
    valid = winner >= 0
    color = np.zeros(uv_shape + (3,), dtype=np.float32)
    flat = image.reshape(-1, 3)
    color[valid] = flat[winner[valid]]
    return PartialUVImage.create(color, valid)


def scatter_winners(coords: UVCoordMap, uv_shape=DEFAULT_UV_SHAPE) -> np.ndarray:
    """Per-texel linear index of the winning source pixel, -1 where none."""
    h_uv, w_uv = uv_shape
    sel = coords.valid.ravel()
    idx = np.nonzero(sel)[0].astype(np.int64)
    if idx.size == 0:
        return np.full(uv_shape, -1, dtype=np.int64)
    u = coords.u.ravel()[idx]
    v = coords.v.ravel()[idx]
    tu = np.clip(np.floor(u * w_uv).astype(np.int64), 0, w_uv - 1)
    tv = np.clip(np.floor(v * h_uv).astype(np.int64), 0, h_uv - 1)
    if coords.depth is not None:
        depth = coords.depth.ravel()[idx].astype(np.float32)
    else:
        depth = np.zeros(idx.shape, dtype=np.float32)
    return kernels.scatter(tv, tu, depth, idx, h_uv, w_uv)
