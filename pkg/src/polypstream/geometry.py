"""Axis-aligned box geometry and the detection domain types.

Coordinates are real-valued pixels with the origin at the top-left corner.
Box area uses the closed-interval convention (width = x_max - x_min); there
is no +1 pixel adjustment.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field


class BoxOrigin(enum.Enum):
    """Where a box in a filtered frame came from."""

    DETECTOR = "det"
    INTERPOLATED = "interp"


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle with strictly positive area."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"box coordinates must be finite, got {coords}")
        if min(coords) < 0:
            raise ValueError(f"box coordinates must be >= 0, got {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"box must have positive extent, got {coords}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class ScoredBox:
    """A bounding box with a detector confidence and a provenance tag."""

    box: BoundingBox
    confidence: float
    origin: BoxOrigin = BoxOrigin.DETECTOR

    def __post_init__(self) -> None:
        if not (math.isfinite(self.confidence) and 0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class FrameMeta:
    """Pixel dimensions and position of one frame in a sequence."""

    width: int
    height: int
    frame_index: int

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"frame dimensions must be positive, got {self.width}x{self.height}")
        if self.frame_index < 0:
            raise ValueError(f"frame index must be >= 0, got {self.frame_index}")


@dataclass(frozen=True)
class FrameDetections:
    """The ordered detector output for a single frame."""

    meta: FrameMeta
    boxes: tuple[ScoredBox, ...] = field(default=())

    def __post_init__(self) -> None:
        object.__setattr__(self, "boxes", tuple(self.boxes))
        for sb in self.boxes:
            b = sb.box
            if b.x_max > self.meta.width or b.y_max > self.meta.height:
                raise ValueError(
                    f"box {b.as_tuple()} exceeds frame bounds "
                    f"{self.meta.width}x{self.meta.height}"
                )

    @property
    def nb(self) -> int:
        return len(self.boxes)


@dataclass(frozen=True)
class GroundTruthBox:
    """Centroid-form annotation carrying a polyp identity."""

    centroid_x: float
    centroid_y: float
    width: float
    height: float
    polyp_id: str

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"ground truth extent must be positive, got {self.width}x{self.height}")
        # Corner form must be a valid box; this also rejects centroids that
        # would put a corner at a negative coordinate.
        centroid_to_corners(self)


def centroid_to_corners(g: GroundTruthBox) -> BoundingBox:
    """Convert a centroid-form annotation to corner form."""
    return BoundingBox(
        g.centroid_x - g.width / 2.0,
        g.centroid_y - g.height / 2.0,
        g.centroid_x + g.width / 2.0,
        g.centroid_y + g.height / 2.0,
    )


def corners_to_centroid(box: BoundingBox, polyp_id: str = "") -> GroundTruthBox:
    """Inverse of :func:`centroid_to_corners`."""
    return GroundTruthBox(
        (box.x_min + box.x_max) / 2.0,
        (box.y_min + box.y_max) / 2.0,
        box.width,
        box.height,
        polyp_id,
    )


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes; 0.0 when disjoint."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    if ix <= 0.0:
        return 0.0
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def adaptive_iou_threshold(box: BoundingBox, meta: FrameMeta) -> float:
    """Size-dependent overlap threshold for cross-frame box correlation.

    Half the sum of the box's width and height as fractions of the frame:
    small boxes may move relatively further between frames, so they get a
    lower matching bar. The value is not clamped; a frame-sized box yields
    1.0 and can never be matched, which is the formula's behavior at the
    extreme.
    """
    return 0.5 * (box.width / meta.width + box.height / meta.height)


def clip_box(box: BoundingBox, width: float, height: float) -> BoundingBox | None:
    """Clip a box to frame bounds; None when nothing with area remains."""
    x0 = min(max(box.x_min, 0.0), width)
    y0 = min(max(box.y_min, 0.0), height)
    x1 = min(max(box.x_max, 0.0), width)
    y1 = min(max(box.y_max, 0.0), height)
    if x0 >= x1 or y0 >= y1:
        return None
    return BoundingBox(x0, y0, x1, y1)
