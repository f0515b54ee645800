"""Grayscale frames, deterministic downsampling, and structural similarity.

Similarity compares luminance, contrast, and structure of two equally sized
8-bit images. The default mode computes the three terms from whole-image
statistics (population convention for variances); ``windowed`` mode averages
the same product over sliding windows instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InputError


@dataclass(frozen=True)
class GrayFrame:
    """Immutable 8-bit luma image, row-major."""

    width: int
    height: int
    samples: np.ndarray

    def __post_init__(self) -> None:
        a = self.samples
        if a.dtype != np.uint8 or a.ndim != 2:
            raise ValueError("samples must be a 2-D uint8 array")
        if a.shape != (self.height, self.width):
            raise ValueError(
                f"samples shape {a.shape} does not match {self.height}x{self.width}"
            )
        if not a.flags.c_contiguous:
            a = np.ascontiguousarray(a)
            object.__setattr__(self, "samples", a)
        a.flags.writeable = False

    @classmethod
    def from_array(cls, a: np.ndarray) -> "GrayFrame":
        a = np.asarray(a, dtype=np.uint8)
        return cls(a.shape[1], a.shape[0], a)

    def same_size(self, other: "GrayFrame") -> bool:
        return self.width == other.width and self.height == other.height


@dataclass(frozen=True)
class SsimParams:
    """Constants and mode for the similarity computation."""

    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 255.0
    mode: str = "global"  # "global" or "windowed"
    window_size: int = 8
    stride: int = 4
    downsample_w: int = 160
    downsample_h: int = 120
    similarity_threshold: float = 0.85

    def __post_init__(self) -> None:
        if self.k1 <= 0 or self.k2 <= 0 or self.dynamic_range <= 0:
            raise ValueError("k1, k2 and dynamic_range must be positive")
        if self.mode not in ("global", "windowed"):
            raise ValueError(f"mode must be 'global' or 'windowed', got {self.mode!r}")
        if self.window_size <= 0 or self.stride <= 0:
            raise ValueError("window_size and stride must be positive")
        if self.downsample_w <= 0 or self.downsample_h <= 0:
            raise ValueError("downsample dimensions must be positive")
        if not (0.0 < self.similarity_threshold <= 1.0):
            raise ValueError("similarity_threshold must be in (0, 1]")

    @property
    def b1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def b2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2

    @property
    def b3(self) -> float:
        return self.b2 / 2.0


def to_luma(rgb_frame: np.ndarray) -> GrayFrame:
    """Convert an (h, w, 3) uint8 RGB raster to luma, rounding half up."""
    rgb = np.asarray(rgb_frame)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise InputError(
            f"expected an (h, w, 3) uint8 raster, got shape {rgb.shape} dtype {rgb.dtype}"
        )
    return GrayFrame.from_array(kernels.luma(rgb))


def downsample(g: GrayFrame, target_w: int, target_h: int) -> GrayFrame:
    """Area-average resample; identity when the target equals the source."""
    if target_w <= 0 or target_h <= 0:
        raise InputError(f"target dimensions must be positive, got {target_w}x{target_h}")
    if target_w > g.width or target_h > g.height:
        raise InputError(
            f"target {target_w}x{target_h} exceeds source {g.width}x{g.height}"
        )
    if target_w == g.width and target_h == g.height:
        return g
    return GrayFrame.from_array(kernels.box_downsample(g.samples, target_w, target_h))


def _ssim_from_stats(
    sx: int, sy: int, sxx: int, syy: int, sxy: int, n: int, b1: float, b2: float, b3: float
) -> float:
    mx = sx / n
    my = sy / n
    vx = max(sxx / n - mx * mx, 0.0)
    vy = max(syy / n - my * my, 0.0)
    cxy = sxy / n - mx * my
    sdx = math.sqrt(vx)
    sdy = math.sqrt(vy)
    lum = (2.0 * mx * my + b1) / (mx * mx + my * my + b1)
    con = (2.0 * sdx * sdy + b2) / (vx + vy + b2)
    stru = (cxy + b3) / (sdx * sdy + b3)
    return lum * con * stru


def ssim(x: GrayFrame, y: GrayFrame, p: SsimParams | None = None) -> float:
    """Structural similarity of two equally sized luma frames, in (-1, 1]."""
    p = p or SsimParams()
    if not x.same_size(y):
        raise InputError(
            f"frame dimensions differ: {x.width}x{x.height} vs {y.width}x{y.height}"
        )
    if p.mode == "global":
        sx, sy, sxx, syy, sxy = kernels.ssim_stats(x.samples, y.samples)
        return _ssim_from_stats(sx, sy, sxx, syy, sxy, x.width * x.height, p.b1, p.b2, p.b3)
    if x.width < p.window_size or x.height < p.window_size:
        raise InputError(
            f"windowed mode needs frames of at least {p.window_size}x{p.window_size}"
        )
    total, count = kernels.windowed_ssim(
        x.samples, y.samples, p.window_size, p.stride, p.b1, p.b2, p.b3
    )
    return total / count


def similar_frames(
    current: GrayFrame, neighbors: list[GrayFrame], p: SsimParams | None = None
) -> list[int]:
    """Indices of neighbors whose similarity with `current` exceeds the threshold."""
    p = p or SsimParams()
    return [i for i, nb in enumerate(neighbors) if ssim(current, nb, p) > p.similarity_threshold]


def prepare_luma(g: GrayFrame, p: SsimParams) -> GrayFrame:
    """Downsample a frame to the configured comparison size.

    Never upsamples: frames already at or below the target size are
    used as-is, keeping the similarity cost bounded for large inputs.
    """
    tw = min(p.downsample_w, g.width)
    th = min(p.downsample_h, g.height)
    return downsample(g, tw, th)
