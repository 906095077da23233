"""Binary and text file formats: EVT1 event files, INTF frame stacks,
PGM previews, text event lists, and resumable estimator state."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from evprep.errors import FormatError
from evprep.events import EVENT_DTYPE, SensorGeometry, make_events
from evprep.intensity import IntensityConfig, IntensityState, Method

EVT1_MAGIC = b"EVT1"
INTF_MAGIC = b"INTF"

# EVT1: 16-byte header, then packed 13-byte records (u64 t, u16 x, u16 y, i8 p)
_EVT1_HEADER = struct.Struct("<4sHHII")
# INTF: 12-byte header, then f32 frames
_INTF_HEADER = struct.Struct("<4sHHI")


def write_evt1(path, events: np.ndarray, geometry: SensorGeometry) -> None:
    with open(path, "wb") as fh:
        fh.write(
            _EVT1_HEADER.pack(
                EVT1_MAGIC, geometry.width, geometry.height, 0, events.shape[0]
            )
        )
        fh.write(np.ascontiguousarray(events, dtype=EVENT_DTYPE).tobytes())


def read_evt1(path) -> tuple[np.ndarray, SensorGeometry]:
    raw = Path(path).read_bytes()
    if len(raw) < _EVT1_HEADER.size:
        raise FormatError(f"{path}: truncated EVT1 header")
    magic, width, height, _, _hint = _EVT1_HEADER.unpack_from(raw)
    if magic != EVT1_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected EVT1")
    body = raw[_EVT1_HEADER.size :]
    if len(body) % EVENT_DTYPE.itemsize:
        raise FormatError(f"{path}: event payload not a whole number of records")
    events = np.frombuffer(body, dtype=EVENT_DTYPE).copy()
    bad = np.nonzero(~np.isin(events["p"], (-1, 1)))[0]
    if bad.size:
        raise FormatError(f"{path}: record {int(bad[0])} has polarity {int(events['p'][bad[0]])}")
    return events, SensorGeometry(width, height)


def read_text_events(path) -> np.ndarray:
    """One event per line: `t x y p`, whitespace-separated, p in {-1, 1}."""
    ts, xs, ys, ps = [], [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                t, x, y, p = int(parts[0]), int(parts[1]), int(parts[2]), int(parts[3])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            if p not in (-1, 1):
                raise FormatError(f"{path}:{lineno}: polarity must be -1 or 1, got {p}")
            ts.append(t)
            xs.append(x)
            ys.append(y)
            ps.append(p)
    return make_events(ts, xs, ys, ps)


def write_intf(path, frames: list[np.ndarray], geometry: SensorGeometry) -> None:
    with open(path, "wb") as fh:
        fh.write(
            _INTF_HEADER.pack(INTF_MAGIC, geometry.width, geometry.height, len(frames))
        )
        for frame in frames:
            fh.write(np.ascontiguousarray(frame, dtype="<f4").tobytes())


def read_intf(path) -> tuple[list[np.ndarray], SensorGeometry]:
    raw = Path(path).read_bytes()
    if len(raw) < _INTF_HEADER.size:
        raise FormatError(f"{path}: truncated INTF header")
    magic, width, height, count = _INTF_HEADER.unpack_from(raw)
    if magic != INTF_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected INTF")
    frame_bytes = width * height * 4
    body = raw[_INTF_HEADER.size :]
    if len(body) != count * frame_bytes:
        raise FormatError(
            f"{path}: payload holds {len(body)} bytes, expected {count * frame_bytes}"
        )
    frames = [
        np.frombuffer(body, dtype="<f4", count=width * height, offset=i * frame_bytes)
        .reshape(height, width)
        .copy()
        for i in range(count)
    ]
    return frames, SensorGeometry(width, height)


def write_pgm(path, frame: np.ndarray) -> None:
    """8-bit binary PGM (P5) after per-frame affine rescale to [0, 255].

    Visualization only; loss computation always reads raw INTF values.
    """
    lo, hi = float(frame.min()), float(frame.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    img = ((frame - lo) * scale).round().astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def save_state(path, state: IntensityState) -> None:
    np.savez(
        path,
        frame=state.frame,
        last_update_time_us=np.int64(state.last_update_time_us),
        last_event_t_us=state.last_event_t_us,
        segments_done=np.int64(state.segments_done),
        width=np.int64(state.geometry.width),
        height=np.int64(state.geometry.height),
        method=np.bytes_(state.config.method.value.encode()),
        alpha_per_s=np.float64(state.config.alpha_per_s),
        threshold=np.float64(state.config.threshold),
        normalizer=np.int64(state.config.normalizer),
        bin_duration_us=np.int64(state.config.bin_duration_us),
    )


def load_state(path) -> IntensityState:
    try:
        data = np.load(path)
    except Exception as exc:
        raise FormatError(f"{path}: cannot read state file: {exc}") from exc
    config = IntensityConfig(
        method=Method(bytes(data["method"]).decode()),
        alpha_per_s=float(data["alpha_per_s"]),
        threshold=float(data["threshold"]),
        normalizer=int(data["normalizer"]),
        bin_duration_us=int(data["bin_duration_us"]),
    )
    return IntensityState(
        frame=data["frame"],
        last_update_time_us=int(data["last_update_time_us"]),
        config=config,
        geometry=SensorGeometry(int(data["width"]), int(data["height"])),
        last_event_t_us=data["last_event_t_us"],
        segments_done=int(data["segments_done"]),
    )
