"""On-disk formats: binary tensor container, CSV loaders, canonical JSON.

The tensor container is a little-endian row-major format:

    magic      4 bytes  "STMT"
    version    u8       (currently 1)
    dtype_code u8       1 = float32, 2 = float64, 3 = uint16
    ndim       u32      in [1, 5]
    dims       ndim*u64
    payload    prod(dims) * itemsize bytes, row-major

Checkpoints use a companion archive format ("STMA") that concatenates named
tensor blobs; see read_archive / write_archive.
"""

import csv
import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadCsvHeader,
    BadHeader,
    BadMagic,
    CsvError,
    DuplicateVideoId,
    IoFailure,
    NegativeCoordinate,
    ScoreOutOfRange,
    TruncatedPayload,
    UnsupportedDtype,
)

TENSOR_MAGIC = b"STMT"
ARCHIVE_MAGIC = b"STMA"
TENSOR_VERSION = 1

_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("<u2")}
_CODE_FOR_KIND = {("f", 4): 1, ("f", 8): 2, ("u", 2): 3}

SPLITS = ("train", "val", "test")


@dataclass(frozen=True)
class MemRecord:
    video_id: str
    score: float
    split: str


@dataclass(frozen=True)
class FixationEvent:
    participant_id: str
    video_id: str
    frame_index: int
    x_px: int
    y_px: int
    duration_ms: float


@dataclass(frozen=True)
class LabelEntry:
    label_id: int
    name: str
    is_thing: bool


class LabelTable:
    """Panoptic label ids with their stuff/thing flag."""

    def __init__(self, entries):
        self.entries = list(entries)
        seen = set()
        for e in self.entries:
            if e.label_id in seen:
                raise ValueError(f"duplicate label_id {e.label_id}")
            if not e.name:
                raise ValueError(f"empty name for label_id {e.label_id}")
            if not 0 <= e.label_id < 2 ** 16:
                raise ValueError(f"label_id {e.label_id} outside u16 range")
            seen.add(e.label_id)
        self._by_id = {e.label_id: e for e in self.entries}

    def __contains__(self, label_id):
        return label_id in self._by_id

    def __len__(self):
        return len(self.entries)

    def name(self, label_id):
        return self._by_id[label_id].name

    def is_thing(self, label_id):
        return self._by_id[label_id].is_thing

    def ids(self):
        return sorted(self._by_id)

    @classmethod
    def from_json(cls, path):
        with open(path) as fp:
            raw = json.load(fp)
        return cls(
            LabelEntry(int(e["label_id"]), str(e["name"]), bool(e["is_thing"]))
            for e in raw["entries"]
        )

    def to_json(self, path):
        payload = {
            "entries": [
                {"label_id": e.label_id, "name": e.name, "is_thing": e.is_thing}
                for e in sorted(self.entries, key=lambda e: e.label_id)
            ]
        }
        with open(path, "w") as fp:
            json.dump(payload, fp, indent=2, sort_keys=True)
            fp.write("\n")


# --- tensor container -----------------------------------------------------

def _decode_tensor(data, origin=0):
    """Decode one tensor blob; offsets in errors are relative to `origin`."""
    if len(data) < 4 or data[:4] != TENSOR_MAGIC:
        raise BadMagic("bad magic, expected b'STMT'", origin)
    if len(data) < 10:
        raise TruncatedPayload("header truncated", origin + len(data))
    version = data[4]
    if version != TENSOR_VERSION:
        raise BadHeader(f"unsupported version {version}", origin + 4)
    code = data[5]
    if code not in _DTYPE_CODES:
        raise UnsupportedDtype(f"unknown dtype code {code}", origin + 5)
    (ndim,) = struct.unpack_from("<I", data, 6)
    if not 1 <= ndim <= 5:
        raise BadHeader(f"ndim {ndim} outside [1, 5]", origin + 6)
    header_end = 10 + 8 * ndim
    if len(data) < header_end:
        raise TruncatedPayload("dims truncated", origin + len(data))
    dims = struct.unpack_from(f"<{ndim}Q", data, 10)
    dtype = _DTYPE_CODES[code]
    n_bytes = int(np.prod(dims)) * dtype.itemsize
    if len(data) < header_end + n_bytes:
        raise TruncatedPayload(
            f"payload needs {n_bytes} bytes, file ends early", origin + len(data)
        )
    flat = np.frombuffer(data, dtype=dtype, count=int(np.prod(dims)), offset=header_end)
    return flat.reshape(dims).copy(), header_end + n_bytes


def _encode_tensor(tensor):
    arr = np.ascontiguousarray(tensor)
    key = (arr.dtype.kind, arr.dtype.itemsize)
    if key not in _CODE_FOR_KIND:
        raise ValueError(
            f"dtype {arr.dtype} not storable; use float32, float64 or uint16"
        )
    if arr.size == 0:
        raise ValueError("refusing to write an empty tensor")
    if not 1 <= arr.ndim <= 5:
        raise ValueError(f"ndim {arr.ndim} outside [1, 5]")
    header = TENSOR_MAGIC + bytes([TENSOR_VERSION, _CODE_FOR_KIND[key]])
    header += struct.pack("<I", arr.ndim)
    header += struct.pack(f"<{arr.ndim}Q", *arr.shape)
    payload = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
    return header + payload


def read_tensor(path):
    """Read a tensor file, returning an ndarray with the stored dtype."""
    with open(path, "rb") as fp:
        data = fp.read()
    tensor, _ = _decode_tensor(data)
    return tensor


def write_tensor(tensor, path):
    blob = _encode_tensor(tensor)
    try:
        with open(path, "wb") as fp:
            fp.write(blob)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# --- named tensor archive (checkpoints) ------------------------------------

def write_archive(tensors, path):
    """Write a name -> ndarray mapping as one archive file, names sorted."""
    parts = [ARCHIVE_MAGIC, bytes([TENSOR_VERSION]), struct.pack("<I", len(tensors))]
    for name in sorted(tensors):
        encoded = name.encode("utf-8")
        blob = _encode_tensor(tensors[name])
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<Q", len(blob)))
        parts.append(blob)
    try:
        with open(path, "wb") as fp:
            fp.write(b"".join(parts))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_archive(path):
    with open(path, "rb") as fp:
        data = fp.read()
    if len(data) < 4 or data[:4] != ARCHIVE_MAGIC:
        raise BadMagic("bad magic, expected b'STMA'", 0)
    if data[4] != TENSOR_VERSION:
        raise BadHeader(f"unsupported version {data[4]}", 4)
    (count,) = struct.unpack_from("<I", data, 5)
    pos = 9
    out = {}
    for _ in range(count):
        if len(data) < pos + 2:
            raise TruncatedPayload("entry header truncated", len(data))
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos : pos + name_len].decode("utf-8")
        pos += name_len
        if len(data) < pos + 8:
            raise TruncatedPayload("entry length truncated", len(data))
        (blob_len,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        tensor, consumed = _decode_tensor(data[pos : pos + blob_len], origin=pos)
        if consumed != blob_len:
            raise BadHeader("entry length disagrees with tensor blob", pos)
        out[name] = tensor
        pos += blob_len
    return out


# --- CSV loaders ------------------------------------------------------------

def _open_rows(path, expected_header):
    with open(path, newline="") as fp:
        reader = csv.reader(fp)
        try:
            header = next(reader)
        except StopIteration:
            raise BadCsvHeader(f"{path}: empty file, expected header") from None
        if header != expected_header:
            raise BadCsvHeader(
                f"{path}: header {header!r} != expected {expected_header!r}"
            )
        return list(reader)


def load_scores(path):
    """Load memorability records; data rows are numbered from 1."""
    rows = _open_rows(path, ["video_id", "score", "split"])
    records = []
    seen = set()
    for row_no, row in enumerate(rows, start=1):
        if len(row) != 3:
            raise CsvError(f"expected 3 fields, got {len(row)}", row_no)
        video_id, score_s, split = row
        try:
            score = float(score_s)
        except ValueError:
            raise CsvError(f"unparsable score {score_s!r}", row_no) from None
        if not 0.0 <= score <= 1.0:
            raise ScoreOutOfRange(f"score {score} outside [0, 1]", row_no)
        if split not in SPLITS:
            raise CsvError(f"split {split!r} not one of {SPLITS}", row_no)
        key = (video_id, split)
        if key in seen:
            raise DuplicateVideoId(f"video_id {video_id!r} repeated in {split}", row_no)
        seen.add(key)
        records.append(MemRecord(video_id, score, split))
    return records


_FIX_HEADER = ["participant_id", "video_id", "frame_index", "x_px", "y_px", "duration_ms"]


def load_fixations(path):
    """Load fixation events; data rows are numbered from 1."""
    rows = _open_rows(path, _FIX_HEADER)
    events = []
    for row_no, row in enumerate(rows, start=1):
        if len(row) != 6:
            raise CsvError(f"expected 6 fields, got {len(row)}", row_no)
        pid, vid, frame_s, x_s, y_s, dur_s = row
        try:
            frame = int(frame_s)
            x = int(x_s)
            y = int(y_s)
            dur = float(dur_s)
        except ValueError:
            raise CsvError(f"unparsable numeric field in {row!r}", row_no) from None
        if x < 0 or y < 0:
            raise NegativeCoordinate(f"coordinate ({x}, {y}) negative", row_no)
        if frame < 0:
            raise CsvError(f"frame_index {frame} negative", row_no)
        if dur < 0:
            raise CsvError(f"duration_ms {dur} negative", row_no)
        events.append(FixationEvent(pid, vid, frame, x, y, dur))
    return events


def group_fixations(events):
    """Group events as {(video_id, frame_index): {participant_id: [events]}}."""
    grouped = {}
    for ev in events:
        frame = grouped.setdefault((ev.video_id, ev.frame_index), {})
        frame.setdefault(ev.participant_id, []).append(ev)
    return grouped


# --- canonical JSON ---------------------------------------------------------

def _round_floats(obj):
    # 9 significant digits keeps result files diffable across runs
    if isinstance(obj, dict):
        return {str(k): _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round_floats(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if v != v or v in (float("inf"), float("-inf")):
            return None
        return float(f"{v:.9g}")
    if isinstance(obj, (np.integer, np.bool_)):
        return obj.item()
    return obj


def canonical_json(obj):
    """Serialize with sorted keys and floats at 9 significant digits."""
    return json.dumps(_round_floats(obj), sort_keys=True, ensure_ascii=True) + "\n"


def dump_json(obj, path):
    try:
        with open(path, "w") as fp:
            fp.write(canonical_json(obj))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# --- PGM export -------------------------------------------------------------

def write_pgm(grid, path):
    """Write a [0, 1] grid as an 8-bit binary PGM for visual inspection."""
    arr = np.asarray(grid, dtype=np.float64)
    levels = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    h, w = levels.shape
    try:
        with open(path, "wb") as fp:
            fp.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            fp.write(levels.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
