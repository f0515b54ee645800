"""Streaming cross-frame correlation of detector outputs.

A sliding window of up to ``2*half_window + 1`` frames is kept around each
center frame. Two independent passes run per center:

* noise elimination — a center box survives only if similar neighbor frames
  (or, when no neighbor is similar enough, a fixed quorum of all neighbors)
  contain an overlapping box;
* missed-detection correction — boxes that recur at a stable location in
  neighbor frames, on both sides of the center, but have no counterpart in
  the center frame are interpolated as their coordinate-wise mean.

Both passes read the original (confidence-gated) detections of every frame;
elimination never feeds correction.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .errors import InputError, SequencingError
from .geometry import (
    BoundingBox,
    BoxOrigin,
    FrameDetections,
    FrameMeta,
    ScoredBox,
    adaptive_iou_threshold,
    iou,
)
from .similarity import GrayFrame, SsimParams, prepare_luma, ssim


@dataclass(frozen=True)
class IscuConfig:
    """Operating point of the correlation unit."""

    half_window: int = 3
    similarity_threshold: float = 0.85
    confidence_gate: float = 0.3
    fc_quorum: int = 3
    fill_quorum: int = 3
    fill_iou: float = 0.5
    ssim_params: SsimParams = field(default_factory=SsimParams)

    def __post_init__(self) -> None:
        if self.half_window < 1:
            raise ValueError(f"half_window must be >= 1, got {self.half_window}")
        full = 2 * self.half_window
        if not (1 <= self.fc_quorum <= full):
            raise ValueError(f"fc_quorum must be in [1, {full}], got {self.fc_quorum}")
        if not (1 <= self.fill_quorum <= full):
            raise ValueError(f"fill_quorum must be in [1, {full}], got {self.fill_quorum}")
        if not (0.0 <= self.confidence_gate <= 1.0):
            raise ValueError(f"confidence_gate must be in [0, 1], got {self.confidence_gate}")
        if not (0.0 <= self.fill_iou <= 1.0):
            raise ValueError(f"fill_iou must be in [0, 1], got {self.fill_iou}")
        if not (0.0 < self.similarity_threshold <= 1.0):
            raise ValueError(
                f"similarity_threshold must be in (0, 1], got {self.similarity_threshold}"
            )


@dataclass(frozen=True)
class WindowSlot:
    """One frame of the correlation window: comparison luma plus detections."""

    luma: GrayFrame
    dets: FrameDetections

    @property
    def frame_index(self) -> int:
        return self.dets.meta.frame_index


@dataclass(frozen=True)
class CorrelationWindow:
    """An ordered run of frames with a designated center."""

    slots: tuple[WindowSlot, ...]
    center: int

    def __post_init__(self) -> None:
        if not self.slots:
            raise ValueError("window must contain at least the center slot")
        if not (0 <= self.center < len(self.slots)):
            raise ValueError(f"center {self.center} out of range for {len(self.slots)} slots")
        indices = [s.frame_index for s in self.slots]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError(f"window frame indices must be strictly increasing: {indices}")


@dataclass(frozen=True)
class FilteredFrame:
    """Correlation result for one frame."""

    meta: FrameMeta
    kept: tuple[ScoredBox, ...]
    added: tuple[ScoredBox, ...]
    removed_count: int

    @property
    def boxes(self) -> tuple[ScoredBox, ...]:
        return self.kept + self.added


def _overlap_count(
    target: ScoredBox, meta: FrameMeta, pool: Sequence[WindowSlot]
) -> int:
    """Number of pool frames holding a box that overlaps `target` above its
    size-adaptive threshold."""
    thr = adaptive_iou_threshold(target.box, meta)
    count = 0
    for slot in pool:
        if any(iou(sb.box, target.box) > thr for sb in slot.dets.boxes):
            count += 1
    return count


def eliminate_noise(
    window: CorrelationWindow,
    cfg: IscuConfig,
    ssim_lookup: Callable[[int, int], float] | None = None,
) -> tuple[ScoredBox, ...]:
    """Center boxes that survive the cross-frame noise test, in input order.

    `ssim_lookup(i, j)` may supply precomputed similarity between slots i and
    j; when absent, similarities are computed from the slot frames directly.
    """
    center = window.slots[window.center]
    neighbors = [
        (i, s) for i, s in enumerate(window.slots) if i != window.center
    ]
    if not neighbors:
        # Nothing to correlate against: a single-frame stream passes through.
        return center.dets.boxes

    if ssim_lookup is None:
        prepared = {window.center: prepare_luma(center.luma, cfg.ssim_params)}

        def ssim_lookup(i: int, j: int) -> float:
            for k in (i, j):
                if k not in prepared:
                    prepared[k] = prepare_luma(window.slots[k].luma, cfg.ssim_params)
            return ssim(prepared[i], prepared[j], cfg.ssim_params)

    similar = [
        s
        for i, s in neighbors
        if ssim_lookup(window.center, i) > cfg.similarity_threshold
    ]
    m = len(similar)
    if m > 0:
        pool = similar
        required: Callable[[int], bool] = lambda c: 2 * c > m
    else:
        # Fixed-frames fallback: at steady state the configured quorum, on a
        # truncated boundary window the majority of whatever is available.
        pool = [s for _, s in neighbors]
        quorum = (
            cfg.fc_quorum
            if len(neighbors) == 2 * cfg.half_window
            else math.ceil(len(neighbors) / 2)
        )
        required = lambda c: c >= quorum

    meta = center.dets.meta
    return tuple(
        sb for sb in center.dets.boxes if required(_overlap_count(sb, meta, pool))
    )


def correct_missed(window: CorrelationWindow, cfg: IscuConfig) -> tuple[ScoredBox, ...]:
    """Interpolated boxes for detections the center frame is missing.

    Clusters are seeded from the nearest neighbor frames outward; each
    neighbor frame contributes at most its best-overlapping unclaimed box
    (IoU with the seed strictly above ``fill_iou``). A cluster fills only if
    it spans at least ``fill_quorum`` frames on both sides of the center and
    its mean box does not coincide with any original center detection.
    """
    c = window.center
    neighbor_ids = [i for i in range(len(window.slots)) if i != c]
    if not any(i < c for i in neighbor_ids) or not any(i > c for i in neighbor_ids):
        return ()

    slots = window.slots
    claimed: set[tuple[int, int]] = set()
    added: list[ScoredBox] = []
    seed_order = sorted(neighbor_ids, key=lambda i: (abs(i - c), i - c))

    for si in seed_order:
        for bi, seed in enumerate(slots[si].dets.boxes):
            if (si, bi) in claimed:
                continue
            claimed.add((si, bi))
            members = [(si, seed)]
            for oi in neighbor_ids:
                if oi == si:
                    continue
                best_idx = -1
                best_iou = cfg.fill_iou
                for obi, cand in enumerate(slots[oi].dets.boxes):
                    if (oi, obi) in claimed:
                        continue
                    v = iou(seed.box, cand.box)
                    if v > best_iou:
                        best_iou = v
                        best_idx = obi
                if best_idx >= 0:
                    claimed.add((oi, best_idx))
                    members.append((oi, slots[oi].dets.boxes[best_idx]))

            if len(members) < cfg.fill_quorum:
                continue
            if not any(mi < c for mi, _ in members) or not any(mi > c for mi, _ in members):
                continue
            members.sort(key=lambda m: m[0])
            n = len(members)
            boxes = [m[1].box for m in members]
            mean_box = BoundingBox(
                sum(b.x_min for b in boxes) / n,
                sum(b.y_min for b in boxes) / n,
                sum(b.x_max for b in boxes) / n,
                sum(b.y_max for b in boxes) / n,
            )
            if any(iou(mean_box, sb.box) > cfg.fill_iou for sb in slots[c].dets.boxes):
                continue
            confidence = sum(m[1].confidence for m in members) / n
            added.append(ScoredBox(mean_box, confidence, BoxOrigin.INTERPOLATED))

    return tuple(added)


class StreamCorrelator:
    """Single-writer streaming stage: push frames in, receive filtered frames.

    The result for a frame is emitted once ``half_window`` later frames have
    arrived; ``flush()`` drains the trailing frames with whatever neighbors
    remain. Similarity values are cached per frame pair as the window slides.
    """

    def __init__(self, cfg: IscuConfig | None = None) -> None:
        self.cfg = cfg or IscuConfig()
        self._slots: deque[WindowSlot] = deque()
        self._ssim_cache: dict[tuple[int, int], float] = {}
        self._n_pushed = 0
        self._next_emit = 0
        self._last_index: int | None = None
        self._dims: tuple[int, int] | None = None

    def push_frame(
        self, frame: GrayFrame, dets: FrameDetections
    ) -> FilteredFrame | None:
        meta = dets.meta
        if (frame.width, frame.height) != (meta.width, meta.height):
            raise InputError(
                f"frame {frame.width}x{frame.height} does not match detection "
                f"metadata {meta.width}x{meta.height}"
            )
        if self._dims is None:
            self._dims = (frame.width, frame.height)
        elif self._dims != (frame.width, frame.height):
            raise InputError(
                f"frame dimensions changed mid-stream: {self._dims} -> "
                f"{(frame.width, frame.height)}"
            )
        if self._last_index is not None and meta.frame_index <= self._last_index:
            raise SequencingError(
                f"frame index {meta.frame_index} not after {self._last_index}"
            )
        self._last_index = meta.frame_index

        gated = FrameDetections(
            meta,
            tuple(sb for sb in dets.boxes if sb.confidence > self.cfg.confidence_gate),
        )
        self._slots.append(WindowSlot(prepare_luma(frame, self.cfg.ssim_params), gated))
        self._n_pushed += 1
        if self._n_pushed - 1 >= self._next_emit + self.cfg.half_window:
            return self._emit()
        return None

    def flush(self) -> list[FilteredFrame]:
        """Emit results for every frame still buffered (end of stream)."""
        out = []
        while self._next_emit < self._n_pushed:
            out.append(self._emit())
        return out

    # internal ------------------------------------------------------------

    def _base(self) -> int:
        return self._n_pushed - len(self._slots)

    def _pair_ssim(self, pos_a: int, pos_b: int) -> float:
        key = (pos_a, pos_b) if pos_a < pos_b else (pos_b, pos_a)
        val = self._ssim_cache.get(key)
        if val is None:
            base = self._base()
            val = ssim(
                self._slots[pos_a - base].luma,
                self._slots[pos_b - base].luma,
                self.cfg.ssim_params,
            )
            self._ssim_cache[key] = val
        return val

    def _emit(self) -> FilteredFrame:
        h = self.cfg.half_window
        center_pos = self._next_emit
        base = self._base()
        lo = max(0, center_pos - h)
        hi = min(self._n_pushed - 1, center_pos + h)
        window = CorrelationWindow(
            tuple(self._slots[p - base] for p in range(lo, hi + 1)),
            center_pos - lo,
        )
        lookup = lambda i, j: self._pair_ssim(lo + i, lo + j)
        kept = eliminate_noise(window, self.cfg, lookup)
        added = correct_missed(window, self.cfg)
        center = window.slots[window.center]
        result = FilteredFrame(
            center.dets.meta, kept, added, len(center.dets.boxes) - len(kept)
        )
        self._next_emit += 1
        keep_from = self._next_emit - h
        while self._base() < keep_from and self._slots:
            self._slots.popleft()
        if keep_from > 0:
            self._ssim_cache = {
                k: v for k, v in self._ssim_cache.items() if k[0] >= keep_from
            }
        return result


def process_sequence(
    frames: Sequence[GrayFrame],
    detections: Sequence[FrameDetections],
    cfg: IscuConfig | None = None,
) -> list[FilteredFrame]:
    """Batch wrapper over the streaming correlator; output order matches input."""
    if len(frames) != len(detections):
        raise InputError(
            f"{len(frames)} frames but {len(detections)} detection sets"
        )
    correlator = StreamCorrelator(cfg)
    out: list[FilteredFrame] = []
    for frame, dets in zip(frames, detections):
        emitted = correlator.push_frame(frame, dets)
        if emitted is not None:
            out.append(emitted)
    out.extend(correlator.flush())
    return out
