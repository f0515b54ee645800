"""Per-frame timing of the correlation unit, file I/O excluded.

The timed loop covers exactly the streaming work: pushing a frame into the
correlator (downsampling, similarity, correlation) and draining emissions.
Inputs are prepared up front; kernels are warmed first so JIT compilation
never lands in the measurement.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .correlator import IscuConfig, StreamCorrelator
from .geometry import BoundingBox, BoxOrigin, FrameDetections, FrameMeta, ScoredBox
from .similarity import GrayFrame


@dataclass(frozen=True)
class BenchResult:
    backend: str
    n_frames: int
    mpt_ms: float
    max_ms: float
    total_s: float


def make_bench_frames(
    width: int, height: int, pool_size: int = 24, seed: int = 0
) -> list[GrayFrame]:
    """A pool of smoothly varying frames; cycling it keeps neighbors similar
    (the wobble period equals the pool size, so the wrap is seamless)."""
    rng = np.random.default_rng([seed, 7])
    base = rng.uniform(40.0, 215.0, size=(6, 8))
    phase = rng.uniform(0.0, 2.0 * math.pi, size=(6, 8))
    gy = np.linspace(0, 5, height)
    gx = np.linspace(0, 7, width)
    y0 = np.floor(gy).astype(np.int64)
    x0 = np.floor(gx).astype(np.int64)
    y1 = np.minimum(y0 + 1, 5)
    x1 = np.minimum(x0 + 1, 7)
    fy = (gy - y0)[:, None]
    fx = (gx - x0)[None, :]
    frames = []
    for t in range(pool_size):
        grid = base + 4.0 * np.sin(2.0 * math.pi * t / pool_size + phase)
        top = grid[np.ix_(y0, x0)] * (1 - fx) + grid[np.ix_(y0, x1)] * fx
        bot = grid[np.ix_(y1, x0)] * (1 - fx) + grid[np.ix_(y1, x1)] * fx
        img = top * (1 - fy) + bot * fy
        frames.append(GrayFrame.from_array(np.clip(np.rint(img), 0, 255).astype(np.uint8)))
    return frames


def make_bench_detections(width: int, height: int, n_frames: int) -> list[FrameDetections]:
    """Two deterministic slow tracks per frame, detector-confidence 0.9."""
    out = []
    bw = width * 0.08
    bh = height * 0.1
    for t in range(n_frames):
        x = (width - bw) * (0.5 + 0.4 * math.sin(2.0 * math.pi * t / 900.0))
        y = (height - bh) * (0.5 + 0.4 * math.cos(2.0 * math.pi * t / 1100.0))
        boxes = (
            ScoredBox(BoundingBox(x, y, x + bw, y + bh), 0.9, BoxOrigin.DETECTOR),
            ScoredBox(
                BoundingBox(width - x - bw, height - y - bh, width - x, height - y),
                0.9,
                BoxOrigin.DETECTOR,
            ),
        )
        out.append(FrameDetections(FrameMeta(width, height, t), boxes))
    return out


def bench_correlator(
    frame_pool: list[GrayFrame],
    detections: list[FrameDetections],
    cfg: IscuConfig | None = None,
    warmup_frames: int = 50,
) -> BenchResult:
    """Time push_frame/flush over the detection sequence, cycling the pool."""
    cfg = cfg or IscuConfig()
    kernels.warmup()
    pool_n = len(frame_pool)

    warm = StreamCorrelator(cfg)
    for i in range(min(warmup_frames, len(detections))):
        warm.push_frame(frame_pool[i % pool_n], detections[i])
    warm.flush()

    correlator = StreamCorrelator(cfg)
    per_push = []
    t_start = time.perf_counter()
    for i, dets in enumerate(detections):
        frame = frame_pool[i % pool_n]
        t0 = time.perf_counter()
        correlator.push_frame(frame, dets)
        per_push.append(time.perf_counter() - t0)
    correlator.flush()
    total = time.perf_counter() - t_start

    n = len(detections)
    return BenchResult(
        backend=kernels.active_backend(),
        n_frames=n,
        mpt_ms=1000.0 * total / n,
        max_ms=1000.0 * max(per_push),
        total_s=total,
    )


def compare_backends(
    frame_pool: list[GrayFrame],
    detections: list[FrameDetections],
    cfg: IscuConfig | None = None,
) -> list[BenchResult]:
    """Run the same benchmark on every available kernel backend."""
    results = []
    for backend in kernels.available_backends():
        with kernels.use_backend(backend):
            results.append(bench_correlator(frame_pool, detections, cfg))
    return results
