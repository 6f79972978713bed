"""Text formats: RSS traces, ground truth, track logs, timing sidecars, image dumps.

Every text format starts with a one-line ``# <format> v<version>`` header.
Traces and truth are CSV; track logs are JSON lines. Everything written
here is a pure function of its inputs except the timing sidecar, which is
kept apart so that logs stay byte-identical across runs.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

from .geometry import NetworkGeometry
from .imaging import Frame

TRACE_FORMAT = "rti-trace"
TRUTH_FORMAT = "rti-truth"
LOG_FORMAT = "rti-tracklog"
VERSION = 1
TRACE_COLUMNS = "frame,timestamp,tx,rx,channel,rss"
TRUTH_COLUMNS = "frame,id,x,y"


class FormatError(ValueError):
    """Malformed or inconsistent file content (a validation failure)."""


@dataclass(frozen=True)
class TraceRecord:
    frame: int
    timestamp: float
    tx: int
    rx: int
    channel: int
    rss: float  # dBm, one decimal

    def line(self) -> str:
        return f"{self.frame},{self.timestamp!r},{self.tx},{self.rx},{self.channel},{self.rss:.1f}"


def _header(fmt: str, extra: str = "") -> str:
    return f"# {fmt} v{VERSION}{(' ' + extra) if extra else ''}"


def _check_header(line: str, fmt: str, where) -> list[str]:
    parts = line.strip().split()
    if len(parts) < 3 or parts[0] != "#" or parts[1] != fmt:
        raise FormatError(f"{where}: expected a '# {fmt} v{VERSION}' header, got {line.strip()!r}")
    if parts[2] != f"v{VERSION}":
        raise FormatError(f"{where}: unsupported {fmt} version {parts[2]!r}")
    return parts[3:]


def _open(src) -> IO[str]:
    return open(src) if isinstance(src, (str, Path)) else src


# --- traces -----------------------------------------------------------------

def frame_records(frame: Frame, geometry: NetworkGeometry, channels: Sequence[int],
                  bidirectional: bool = False) -> Iterator[TraceRecord]:
    """Records of one frame, link-major then channel; missing packets are omitted."""
    rss = np.asarray(frame.rss, dtype=float)
    for l, (a, b) in enumerate(geometry.links):
        a, b = int(a), int(b)
        for c, ch in enumerate(channels):
            v = rss[l, c]
            if math.isnan(v):
                continue
            v = round(float(v), 1)
            yield TraceRecord(frame.index, float(frame.timestamp), a, b, int(ch), v)
            if bidirectional:
                yield TraceRecord(frame.index, float(frame.timestamp), b, a, int(ch), v)


def write_trace(path, frames: Iterable[Frame], geometry: NetworkGeometry, channels: Sequence[int],
                bidirectional: bool = False) -> int:
    """Stream frames to a trace file; returns the number of records written."""
    n = 0
    with open(path, "w") as fh:
        fh.write(_header(TRACE_FORMAT) + "\n" + TRACE_COLUMNS + "\n")
        for frame in frames:
            for rec in frame_records(frame, geometry, channels, bidirectional):
                fh.write(rec.line() + "\n")
                n += 1
    return n


def format_records(records: Iterable[TraceRecord]) -> str:
    body = "".join(r.line() + "\n" for r in records)
    return _header(TRACE_FORMAT) + "\n" + TRACE_COLUMNS + "\n" + body


def read_records(src, channels: Sequence[int] | None = None) -> Iterator[TraceRecord]:
    """Parse and validate trace records lazily.

    Checks: header and columns, six fields per line, tx != rx, channel in
    ``channels`` (when given), frame indices non-decreasing.
    """
    fh = _open(src)
    try:
        where = getattr(fh, "name", "trace")
        first = fh.readline()
        if not first:
            raise FormatError(f"{where}: empty file")
        _check_header(first, TRACE_FORMAT, where)
        cols = fh.readline().strip()
        if cols != TRACE_COLUMNS:
            raise FormatError(f"{where}: expected columns {TRACE_COLUMNS!r}, got {cols!r}")
        allowed = set(int(c) for c in channels) if channels is not None else None
        last = None
        for lineno, line in enumerate(fh, start=3):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise FormatError(f"{where}:{lineno}: expected 6 fields, got {len(parts)}")
            try:
                rec = TraceRecord(int(parts[0]), float(parts[1]), int(parts[2]), int(parts[3]),
                                  int(parts[4]), float(parts[5]))
            except ValueError as exc:
                raise FormatError(f"{where}:{lineno}: {exc}") from None
            if rec.tx == rec.rx:
                raise FormatError(f"{where}:{lineno}: tx equals rx ({rec.tx})")
            if allowed is not None and rec.channel not in allowed:
                raise FormatError(f"{where}:{lineno}: channel {rec.channel} is not configured")
            if last is not None and rec.frame < last:
                raise FormatError(f"{where}:{lineno}: frame {rec.frame} after frame {last}")
            last = rec.frame
            yield rec
    finally:
        if fh is not src:
            fh.close()


def assemble_frames(records: Iterable[TraceRecord], geometry: NetworkGeometry,
                    channels: Sequence[int]) -> Iterator[Frame]:
    """Group records into frames; a frame closes when the index advances.

    Both directions of a link land in the same (link, channel) cell and are
    averaged. Cells with no record stay NaN. Frame indices absent from the
    trace produce no frame.
    """
    index = geometry.link_index()
    col = {int(c): k for k, c in enumerate(channels)}
    shape = (geometry.n_links, len(channels))
    current = None
    total = count = None
    stamp = 0.0

    def close():
        with np.errstate(invalid="ignore", divide="ignore"):
            rss = np.where(count > 0, total / np.maximum(count, 1), np.nan)
        return Frame(current, stamp, rss)

    for rec in records:
        if rec.frame != current:
            if current is not None:
                yield close()
            current, stamp = rec.frame, rec.timestamp
            total = np.zeros(shape)
            count = np.zeros(shape, dtype=np.int64)
        key = (min(rec.tx, rec.rx), max(rec.tx, rec.rx))
        if key not in index:
            raise FormatError(f"frame {rec.frame}: sensors {rec.tx}-{rec.rx} are not a configured link")
        if rec.channel not in col:
            raise FormatError(f"frame {rec.frame}: channel {rec.channel} is not configured")
        l, c = index[key], col[rec.channel]
        total[l, c] += rec.rss
        count[l, c] += 1
    if current is not None:
        yield close()


def read_frames(src, geometry: NetworkGeometry, channels: Sequence[int]) -> Iterator[Frame]:
    return assemble_frames(read_records(src, channels), geometry, channels)


def trace_channel_coverage(src, channels: Sequence[int]) -> set[int]:
    return {r.channel for r in read_records(src, channels)}


# --- ground truth -----------------------------------------------------------

def write_truth(path, truth: Sequence[dict], start: int = 0) -> None:
    """Per-frame target positions; the header records the frame range [start, stop)."""
    stop = start + len(truth)
    with open(path, "w") as fh:
        fh.write(_header(TRUTH_FORMAT, f"frames {start} {stop}") + "\n" + TRUTH_COLUMNS + "\n")
        for k, targets in enumerate(truth, start=start):
            for tid in sorted(targets):
                x, y = targets[tid]
                fh.write(f"{k},{tid},{float(x)!r},{float(y)!r}\n")


def read_truth(path) -> tuple[range, list[dict[int, tuple[float, float]]]]:
    with open(path) as fh:
        extra = _check_header(fh.readline(), TRUTH_FORMAT, path)
        if len(extra) != 3 or extra[0] != "frames":
            raise FormatError(f"{path}: truth header must carry 'frames <start> <stop>'")
        frames = range(int(extra[1]), int(extra[2]))
        if fh.readline().strip() != TRUTH_COLUMNS:
            raise FormatError(f"{path}: expected columns {TRUTH_COLUMNS!r}")
        truth = [dict() for _ in frames]
        for lineno, line in enumerate(fh, start=3):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 fields")
            k, tid = int(parts[0]), int(parts[1])
            if k not in frames:
                raise FormatError(f"{path}:{lineno}: frame {k} outside the declared range")
            truth[k - frames.start][tid] = (float(parts[2]), float(parts[3]))
    return frames, truth


# --- track logs ---------------------------------------------------------------

def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


class TrackLogWriter:
    """JSON-lines log: a header, then per frame one frame record and one record per track.

    Processing times go to an optional separate CSV so the log itself is
    reproducible.
    """

    def __init__(self, path, meta: dict | None = None, timing_path=None):
        self._fh = open(path, "w")
        self._timing = open(timing_path, "w") if timing_path else None
        head = {"format": LOG_FORMAT, "version": VERSION}
        head.update(meta or {})
        self._fh.write(_dumps(head) + "\n")
        if self._timing:
            self._timing.write("frame,proc_ms\n")
        self.n_frames = 0

    def write(self, result) -> None:
        frame = {
            "kind": "frame", "frame": result.frame, "timestamp": result.timestamp,
            "threshold": round(float(result.threshold), 9), "voxels": result.n_voxels,
            "observations": result.n_observations,
            "assoc_cost": round(float(result.assoc_cost), 9),
        }
        if result.deleted:
            frame["deleted"] = list(result.deleted)
        self._fh.write(_dumps(frame) + "\n")
        for t in result.tracks:
            self._fh.write(_dumps({
                "kind": "track", "frame": result.frame, "timestamp": result.timestamp,
                "id": t.id, "status": t.status, "x": round(t.x, 6), "y": round(t.y, 6),
            }) + "\n")
        if self._timing:
            self._timing.write(f"{result.frame},{result.proc_ms:.4f}\n")
        self.n_frames += 1

    def close(self) -> None:
        self._fh.write(_dumps({"kind": "end", "frames": self.n_frames}) + "\n")
        self._fh.close()
        if self._timing:
            self._timing.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class TrackLog:
    meta: dict
    frames: list[int]
    timestamps: list[float]
    tracks: list[list[dict]]  # per frame

    def confirmed_positions(self) -> list[list[tuple[float, float]]]:
        return [[(t["x"], t["y"]) for t in ts if t["status"] == "confirmed"] for ts in self.tracks]


_TRACK_KEYS = {"kind", "frame", "timestamp", "id", "status", "x", "y"}


def read_track_log(path) -> TrackLog:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty track log")
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:1: {exc}") from None
    if head.get("format") != LOG_FORMAT:
        raise FormatError(f"{path}: not a track log")
    if head.get("version") != VERSION:
        raise FormatError(f"{path}: unsupported track log version {head.get('version')}")
    log = TrackLog(head, [], [], [])
    ended = False
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
        kind = rec.get("kind")
        if ended:
            raise FormatError(f"{path}:{lineno}: record after the end marker")
        if kind == "frame":
            if log.frames and rec["frame"] <= log.frames[-1]:
                raise FormatError(f"{path}:{lineno}: frame indices must increase")
            log.frames.append(int(rec["frame"]))
            log.timestamps.append(float(rec["timestamp"]))
            log.tracks.append([])
        elif kind == "track":
            if not log.frames or rec.get("frame") != log.frames[-1]:
                raise FormatError(f"{path}:{lineno}: track record outside its frame")
            if not _TRACK_KEYS <= set(rec):
                raise FormatError(f"{path}:{lineno}: track record lacks {sorted(_TRACK_KEYS - set(rec))}")
            if rec["status"] not in ("candidate", "confirmed"):
                raise FormatError(f"{path}:{lineno}: unknown status {rec['status']!r}")
            log.tracks[-1].append(rec)
        elif kind == "end":
            if rec.get("frames") != len(log.frames):
                raise FormatError(f"{path}:{lineno}: end marker counts {rec.get('frames')} frames, "
                                  f"log has {len(log.frames)}")
            ended = True
        else:
            raise FormatError(f"{path}:{lineno}: unknown record kind {kind!r}")
    if not ended:
        raise FormatError(f"{path}: truncated log (no end marker)")
    return log


def read_timing(path) -> dict[int, float]:
    with open(path) as fh:
        if fh.readline().strip() != "frame,proc_ms":
            raise FormatError(f"{path}: not a timing file")
        out = {}
        for line in fh:
            if line.strip():
                k, ms = line.split(",")
                out[int(k)] = float(ms)
    return out


def timing_path_for(log_path) -> Path:
    p = Path(log_path)
    return p.with_name(p.name + ".timing.csv")


# --- image dumps -------------------------------------------------------------

def write_image(fh, frame: int, intensities: np.ndarray) -> None:
    """Append one record: uint32 frame index then N float32, little-endian."""
    fh.write(struct.pack("<I", frame))
    fh.write(np.asarray(intensities, dtype="<f4").tobytes())


def read_images(path, n_voxels: int) -> Iterator[tuple[int, np.ndarray]]:
    size = 4 + 4 * n_voxels
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(size)
            if not chunk:
                return
            if len(chunk) != size:
                raise FormatError(f"{path}: truncated image record")
            yield struct.unpack("<I", chunk[:4])[0], np.frombuffer(chunk[4:], dtype="<f4")
