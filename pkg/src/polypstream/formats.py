"""Plain-text record formats and binary netpbm frame I/O.

Detection records are whitespace-separated lines
``frame_index x_min y_min x_max y_max confidence [origin]``; ground-truth
records are ``frame_index polyp_id cx cy w h`` (centroid form). ``#`` starts
a comment. Floats are written with 6 significant digits, which is the
round-trip precision of these files.

Frames are binary PGM (P5) or PPM (P6) with maxval 255, named by
zero-padded frame index.
"""

from __future__ import annotations

import math
import re
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .correlator import FilteredFrame
from .errors import InputError
from .geometry import (
    BoundingBox,
    BoxOrigin,
    FrameDetections,
    FrameMeta,
    GroundTruthBox,
    ScoredBox,
    clip_box,
)
from .similarity import GrayFrame, to_luma

_ORIGIN_TOKENS = {"det": BoxOrigin.DETECTOR, "interp": BoxOrigin.INTERPOLATED}
_FRAME_FILE_RE = re.compile(r"^(\d+)\.(pgm|ppm)$", re.IGNORECASE)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _lines(source: IO[str] | str | Path | Iterable[str]) -> Iterable[tuple[int, str]]:
    if isinstance(source, (str, Path)):
        try:
            text = Path(source).read_text(encoding="utf-8")
        except OSError as exc:
            raise InputError(f"cannot read {source}: {exc}") from None
        yield from enumerate(text.splitlines(), start=1)
        return
    if hasattr(source, "read"):
        yield from enumerate(source.read().splitlines(), start=1)
        return
    yield from enumerate(source, start=1)


def _parse_float(token: str, line_no: int, what: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise InputError(f"line {line_no}: {what} {token!r} is not a number") from None
    if not math.isfinite(value):
        raise InputError(f"line {line_no}: {what} {token!r} is not finite")
    return value


def _parse_int(token: str, line_no: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise InputError(f"line {line_no}: {what} {token!r} is not an integer") from None


def parse_detections(
    source: IO[str] | str | Path | Iterable[str],
    width: int,
    height: int,
    n_frames: int | None = None,
) -> list[FrameDetections]:
    """Parse detection records into per-frame sets of the given geometry.

    Boxes are clipped to the frame; a record that clips to nothing is an
    error. Frames with no records come back with empty detection lists, up
    to ``n_frames`` (or the highest index seen when not given).
    """
    per_frame: dict[int, list[ScoredBox]] = {}
    max_index = -1
    for line_no, raw in _lines(source):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        fields = text.split()
        if len(fields) not in (6, 7):
            raise InputError(
                f"line {line_no}: expected 6 or 7 fields "
                f"(frame x_min y_min x_max y_max confidence [origin]), got {len(fields)}"
            )
        frame_index = _parse_int(fields[0], line_no, "frame index")
        if frame_index < 0:
            raise InputError(f"line {line_no}: frame index must be >= 0")
        if n_frames is not None and frame_index >= n_frames:
            raise InputError(
                f"line {line_no}: frame index {frame_index} beyond declared length {n_frames}"
            )
        x_min = _parse_float(fields[1], line_no, "x_min")
        y_min = _parse_float(fields[2], line_no, "y_min")
        x_max = _parse_float(fields[3], line_no, "x_max")
        y_max = _parse_float(fields[4], line_no, "y_max")
        confidence = _parse_float(fields[5], line_no, "confidence")
        if x_min >= x_max:
            raise InputError(f"line {line_no}: x_min {x_min:g} must be < x_max {x_max:g}")
        if y_min >= y_max:
            raise InputError(f"line {line_no}: y_min {y_min:g} must be < y_max {y_max:g}")
        if not (0.0 <= confidence <= 1.0):
            raise InputError(f"line {line_no}: confidence {confidence:g} outside [0, 1]")
        origin = BoxOrigin.DETECTOR
        if len(fields) == 7:
            try:
                origin = _ORIGIN_TOKENS[fields[6]]
            except KeyError:
                raise InputError(
                    f"line {line_no}: origin must be 'det' or 'interp', got {fields[6]!r}"
                ) from None
        clipped = clip_box(
            BoundingBox(max(x_min, 0.0), max(y_min, 0.0), x_max, y_max), width, height
        )
        if clipped is None:
            raise InputError(
                f"line {line_no}: box lies entirely outside the {width}x{height} frame"
            )
        per_frame.setdefault(frame_index, []).append(ScoredBox(clipped, confidence, origin))
        max_index = max(max_index, frame_index)

    length = n_frames if n_frames is not None else max_index + 1
    return [
        FrameDetections(FrameMeta(width, height, i), tuple(per_frame.get(i, ())))
        for i in range(length)
    ]


def parse_groundtruth(
    source: IO[str] | str | Path | Iterable[str],
    n_frames: int | None = None,
) -> list[list[GroundTruthBox]]:
    """Parse centroid-form annotations; duplicates of (frame, polyp_id) are errors."""
    per_frame: dict[int, list[GroundTruthBox]] = {}
    seen: set[tuple[int, str]] = set()
    max_index = -1
    for line_no, raw in _lines(source):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        fields = text.split()
        if len(fields) != 6:
            raise InputError(
                f"line {line_no}: expected 6 fields (frame polyp_id cx cy w h), got {len(fields)}"
            )
        frame_index = _parse_int(fields[0], line_no, "frame index")
        if frame_index < 0:
            raise InputError(f"line {line_no}: frame index must be >= 0")
        if n_frames is not None and frame_index >= n_frames:
            raise InputError(
                f"line {line_no}: frame index {frame_index} beyond declared length {n_frames}"
            )
        polyp_id = fields[1]
        cx = _parse_float(fields[2], line_no, "cx")
        cy = _parse_float(fields[3], line_no, "cy")
        bw = _parse_float(fields[4], line_no, "w")
        bh = _parse_float(fields[5], line_no, "h")
        key = (frame_index, polyp_id)
        if key in seen:
            raise InputError(
                f"line {line_no}: duplicate annotation for polyp {polyp_id!r} in frame {frame_index}"
            )
        seen.add(key)
        try:
            gt = GroundTruthBox(cx, cy, bw, bh, polyp_id)
        except ValueError as exc:
            raise InputError(f"line {line_no}: {exc}") from None
        per_frame.setdefault(frame_index, []).append(gt)
        max_index = max(max_index, frame_index)

    length = n_frames if n_frames is not None else max_index + 1
    return [per_frame.get(i, []) for i in range(length)]


def write_detections(
    target: IO[str] | str | Path,
    frames: Iterable[FrameDetections | FilteredFrame],
    include_origin: bool = False,
) -> None:
    lines = []
    for fd in frames:
        boxes = fd.boxes
        for sb in boxes:
            b = sb.box
            fields = [
                str(fd.meta.frame_index),
                _fmt(b.x_min),
                _fmt(b.y_min),
                _fmt(b.x_max),
                _fmt(b.y_max),
                _fmt(sb.confidence),
            ]
            if include_origin:
                fields.append(sb.origin.value)
            lines.append(" ".join(fields))
    text = "\n".join(lines) + ("\n" if lines else "")
    if isinstance(target, (str, Path)):
        Path(target).write_text(text, encoding="utf-8")
    else:
        target.write(text)


def write_groundtruth(
    target: IO[str] | str | Path,
    ground_truth: Sequence[Sequence[GroundTruthBox]],
) -> None:
    lines = []
    for frame_index, gts in enumerate(ground_truth):
        for g in gts:
            lines.append(
                " ".join(
                    [
                        str(frame_index),
                        g.polyp_id,
                        _fmt(g.centroid_x),
                        _fmt(g.centroid_y),
                        _fmt(g.width),
                        _fmt(g.height),
                    ]
                )
            )
    text = "\n".join(lines) + ("\n" if lines else "")
    if isinstance(target, (str, Path)):
        Path(target).write_text(text, encoding="utf-8")
    else:
        target.write(text)


# ---------------------------------------------------------------------------
# netpbm frames
# ---------------------------------------------------------------------------


def _read_netpbm_tokens(data: bytes, path: Path, count: int) -> tuple[list[bytes], int]:
    """Read `count` header tokens, skipping whitespace and # comments.

    Returns the tokens and the offset of the raster (one whitespace byte
    after the last token).
    """
    tokens: list[bytes] = []
    i = 0
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i] == ord("#"):
            while i < n and data[i] != ord("\n"):
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i] != ord("#"):
            i += 1
        if start == i:
            raise InputError(f"{path}: truncated netpbm header")
        tokens.append(data[start:i])
    if i >= n or not data[i : i + 1].isspace():
        raise InputError(f"{path}: missing whitespace after netpbm header")
    return tokens, i + 1


def read_image(path: str | Path) -> GrayFrame:
    """Read a single PGM (P5) or PPM (P6) file as luma."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    if len(data) < 2:
        raise InputError(f"{path}: not a netpbm file")
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise InputError(
            f"{path}: unsupported netpbm format {magic!r} (binary P5/P6 required)"
        )
    tokens, offset = _read_netpbm_tokens(data[2:], path, 3)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise InputError(f"{path}: malformed netpbm header") from None
    if width <= 0 or height <= 0:
        raise InputError(f"{path}: invalid dimensions {width}x{height}")
    if maxval != 255:
        raise InputError(f"{path}: unsupported maxval {maxval} (only 8-bit, maxval 255)")
    raster = data[2 + offset :]
    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    if len(raster) < expected:
        raise InputError(
            f"{path}: raster truncated ({len(raster)} bytes, expected {expected})"
        )
    arr = np.frombuffer(raster[:expected], dtype=np.uint8)
    if channels == 1:
        return GrayFrame.from_array(arr.reshape(height, width).copy())
    return to_luma(arr.reshape(height, width, 3).copy())


def read_frames(directory: str | Path) -> list[GrayFrame]:
    """Read a directory of index-named frames, validating order and geometry."""
    directory = Path(directory)
    if not directory.is_dir():
        raise InputError(f"{directory}: not a directory")
    indexed: dict[int, Path] = {}
    for entry in sorted(directory.iterdir()):
        m = _FRAME_FILE_RE.match(entry.name)
        if not m:
            continue
        idx = int(m.group(1))
        if idx in indexed:
            raise InputError(f"{directory}: duplicate frame index {idx}")
        indexed[idx] = entry
    if not indexed:
        raise InputError(f"{directory}: no .pgm/.ppm frames found")
    first = min(indexed)
    last = max(indexed)
    missing = [i for i in range(first, last + 1) if i not in indexed]
    if missing:
        raise InputError(f"{directory}: missing frame index {missing[0]}")
    frames = [read_image(indexed[i]) for i in range(first, last + 1)]
    dims = {(f.width, f.height) for f in frames}
    if len(dims) > 1:
        raise InputError(f"{directory}: mixed frame dimensions {sorted(dims)}")
    return frames


def write_pgm(path: str | Path, frame: GrayFrame) -> None:
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + frame.samples.tobytes())


def write_ppm_gray(path: str | Path, frame: GrayFrame) -> None:
    """Write luma as an RGB PPM with equal channels (survives luma round-trip)."""
    header = f"P6\n{frame.width} {frame.height}\n255\n".encode("ascii")
    rgb = np.repeat(frame.samples[:, :, None], 3, axis=2)
    Path(path).write_bytes(header + rgb.tobytes())


def write_frames(
    directory: str | Path, frames: Sequence[GrayFrame], image_format: str = "pgm"
) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    writer = {"pgm": write_pgm, "ppm": write_ppm_gray}.get(image_format)
    if writer is None:
        raise InputError(f"unsupported image format {image_format!r}")
    width = len(str(max(len(frames) - 1, 0)))
    width = max(width, 6)
    for i, frame in enumerate(frames):
        writer(directory / f"{i:0{width}d}.{image_format}", frame)
