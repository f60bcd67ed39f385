"""Loading, windowing, and grid geometry for multi-lead ECG recordings.

Two on-disk input formats are supported (see docs/formats.md):

* columnar CSV -- ``# key: value`` header lines declaring fs and gain,
  then a lead-name header row and one row of raw amplitudes per sample;
* int16 binary -- frame-interleaved little-endian samples with a JSON
  sidecar (same stem, ``.json``) declaring fs, gain, and lead names.

Raw amplitudes are divided by the declared gain (ADC units per
millivolt) on load; everything downstream works in millivolts, double
precision.  A record round-trips bit-exactly through the binary format.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

__all__ = [
    "Record",
    "Strip",
    "RenderSpec",
    "load_record",
    "save_record",
    "record_from_json",
    "record_to_json",
    "extract_strip",
    "render_params",
]

FORMAT_CSV = "columnar-csv"
FORMAT_BINARY = "binary-int16"
FORMATS = (FORMAT_CSV, FORMAT_BINARY)


class FormatError(ValueError):
    """Malformed input file (bad header, ragged rows, non-finite data)."""


@dataclass
class Record:
    """One multi-lead recording, amplitudes in millivolts.

    ``samples`` has shape (n_leads, n_samples), row order matching
    ``leads``.
    """

    id: str
    leads: tuple[str, ...]
    samples: np.ndarray
    fs: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 2 or self.samples.shape[0] != len(self.leads):
            raise ValueError(
                f"samples shape {self.samples.shape} does not match "
                f"{len(self.leads)} leads"
            )
        if self.fs <= 0:
            raise ValueError(f"sampling rate must be positive, got {self.fs}")
        if not np.isfinite(self.samples).all():
            lead_i, pos = np.argwhere(~np.isfinite(self.samples))[0]
            raise ValueError(
                f"non-finite amplitude in lead {self.leads[lead_i]!r} "
                f"at sample {pos}"
            )

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.fs

    def lead(self, name: str) -> np.ndarray:
        try:
            return self.samples[self.leads.index(name)]
        except ValueError:
            raise KeyError(f"record {self.id!r} has no lead {name!r}") from None


@dataclass
class Strip:
    """A contiguous single-lead window cut from a record."""

    record_id: str
    lead: str
    t_start: float
    duration: float
    samples: np.ndarray
    fs: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.duration <= 0:
            raise ValueError("strip duration must be positive")
        if abs(self.duration * self.fs - self.samples.size) > 1.0:
            raise ValueError(
                f"duration {self.duration}s at {self.fs}Hz does not match "
                f"{self.samples.size} samples"
            )


@dataclass
class RenderSpec:
    """Clinical-grid geometry for one strip.

    The sample-to-paper mapping is affine and invertible:
    x_mm(i) = i * mm_per_s / fs, y_mm(v) = v * mm_per_mv (y up).
    Grid lines are enumerated in millimetres over the strip extent,
    minor every 1 mm and major every 5 mm.
    """

    mm_per_mv: float
    mm_per_s: float
    fs: float
    width_mm: float
    y_min_mm: float
    y_max_mm: float
    x_major_mm: list[float]
    x_minor_mm: list[float]
    y_major_mm: list[float]
    y_minor_mm: list[float]

    @property
    def mm_per_sample(self) -> float:
        return self.mm_per_s / self.fs

    def x_of_sample(self, i) -> float:
        return np.asarray(i) * self.mm_per_s / self.fs

    def y_of_mv(self, v) -> float:
        return np.asarray(v) * self.mm_per_mv

    def to_dict(self) -> dict:
        return {
            "mm_per_mv": self.mm_per_mv,
            "mm_per_s": self.mm_per_s,
            "fs": self.fs,
            "mm_per_sample": self.mm_per_sample,
            "width_mm": self.width_mm,
            "y_min_mm": self.y_min_mm,
            "y_max_mm": self.y_max_mm,
            "x_major_mm": self.x_major_mm,
            "x_minor_mm": self.x_minor_mm,
            "y_major_mm": self.y_major_mm,
            "y_minor_mm": self.y_minor_mm,
        }


_META_KEYS = ("age", "sex", "interpretation")


def _parse_csv_header(lines: list[str], path: Path):
    """Pull ``# key: value`` pairs off the top of a columnar CSV."""
    header = {}
    body_start = 0
    for i, line in enumerate(lines):
        stripped = line.strip()
        if not stripped.startswith("#"):
            body_start = i
            break
        if ":" not in stripped:
            raise FormatError(f"{path}: malformed header line {i + 1}: {line!r}")
        key, _, value = stripped.lstrip("#").partition(":")
        header[key.strip()] = value.strip()
    else:
        raise FormatError(f"{path}: no data rows after header")
    for key in ("fs", "gain"):
        if key not in header:
            raise FormatError(f"{path}: header does not declare {key}")
    try:
        fs = float(header["fs"])
        gain = float(header["gain"])
    except ValueError as e:
        raise FormatError(f"{path}: bad header number: {e}") from None
    if fs <= 0 or gain <= 0:
        raise FormatError(f"{path}: fs and gain must be positive")
    meta = {k: header[k] for k in _META_KEYS if k in header}
    return fs, gain, header.get("id"), meta, body_start


def _load_csv(path: Path) -> Record:
    lines = path.read_text().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    fs, gain, rec_id, meta, body_start = _parse_csv_header(lines, path)

    reader = csv.reader(lines[body_start:])
    leads = tuple(name.strip() for name in next(reader))
    if not leads or any(not name for name in leads):
        raise FormatError(f"{path}: bad lead-name row")

    rows = []
    # Rows are numbered from 1 at the first sample row in error messages.
    for row_i, row in enumerate(reader, start=1):
        if not row:
            continue
        if len(row) != len(leads):
            raise FormatError(
                f"{path}: row {row_i} has {len(row)} values, "
                f"expected {len(leads)}"
            )
        try:
            values = [float(v) for v in row]
        except ValueError:
            raise FormatError(f"{path}: unparseable value in row {row_i}") from None
        if not all(math.isfinite(v) for v in values):
            raise FormatError(f"{path}: non-finite sample in row {row_i}")
        rows.append(values)
    if not rows:
        raise FormatError(f"{path}: no sample rows")

    raw = np.asarray(rows, dtype=float).T  # (n_leads, n_samples)
    return Record(id=rec_id or path.stem, leads=leads, samples=raw / gain,
                  fs=fs, meta=meta)


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def _load_binary(path: Path) -> Record:
    sidecar = _sidecar_path(path)
    if not sidecar.exists():
        raise FormatError(f"{path}: missing sidecar header {sidecar}")
    try:
        header = json.loads(sidecar.read_text())
    except json.JSONDecodeError as e:
        raise FormatError(f"{sidecar}: invalid JSON: {e}") from None
    for key in ("fs", "gain", "leads"):
        if key not in header:
            raise FormatError(f"{sidecar}: header does not declare {key}")
    fs, gain = float(header["fs"]), float(header["gain"])
    if fs <= 0 or gain <= 0:
        raise FormatError(f"{sidecar}: fs and gain must be positive")
    leads = tuple(header["leads"])
    if not leads:
        raise FormatError(f"{sidecar}: empty lead list")

    raw = np.fromfile(path, dtype="<i2")
    if raw.size % len(leads) != 0:
        raise FormatError(
            f"{path}: {raw.size} samples not divisible by "
            f"{len(leads)} leads (length mismatch)"
        )
    frames = raw.reshape(-1, len(leads)).T.astype(float)
    return Record(id=header.get("id", path.stem), leads=leads,
                  samples=frames / gain, fs=fs,
                  meta=dict(header.get("meta", {})))


def load_record(path, format: str) -> Record:
    """Read a recording from disk; see module docstring for the formats."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if format == FORMAT_CSV:
        return _load_csv(path)
    if format in (FORMAT_BINARY, "binary"):
        return _load_binary(path)
    raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")


def save_record(record: Record, path, format: str, gain: float = 200.0):
    """Write a record back out.  Binary writing checks that every sample
    quantizes exactly onto the int16 grid at the given gain, so that a
    load/save cycle is bit-exact."""
    path = Path(path)
    if format in (FORMAT_BINARY, "binary"):
        raw_f = record.samples.T * gain
        raw = np.rint(raw_f)
        if np.max(np.abs(raw_f - raw)) > 1e-6:
            raise ValueError(
                "samples do not quantize exactly onto the int16 grid at "
                f"gain {gain}; writing would lose precision"
            )
        if np.max(np.abs(raw)) > np.iinfo(np.int16).max:
            raise ValueError(f"amplitude exceeds int16 range at gain {gain}")
        raw.astype("<i2").tofile(path)
        header = {"id": record.id, "fs": record.fs, "gain": gain,
                  "leads": list(record.leads), "meta": record.meta}
        _sidecar_path(path).write_text(json.dumps(header, indent=2) + "\n")
    elif format == "json":
        path.write_text(record_to_json(record))
    else:
        raise ValueError(f"unsupported output format {format!r}")


def record_to_json(record: Record) -> str:
    """Millivolt-denominated interchange form used by the CLI."""
    return json.dumps({
        "id": record.id,
        "fs": record.fs,
        "leads": list(record.leads),
        "samples_mv": record.samples.tolist(),
        "meta": record.meta,
    })


def record_from_json(text: str) -> Record:
    d = json.loads(text)
    return Record(id=d["id"], leads=tuple(d["leads"]),
                  samples=np.asarray(d["samples_mv"], dtype=float),
                  fs=float(d["fs"]), meta=dict(d.get("meta", {})))


def extract_strip(record: Record, lead: str, t_start: float,
                  duration: float) -> Strip:
    """Cut a contiguous window from one lead.

    The window is [t_start, t_start + duration) in seconds and must lie
    inside the record.
    """
    data = record.lead(lead)
    if duration <= 0:
        raise ValueError("duration must be positive")
    start = int(round(t_start * record.fs))
    count = int(round(duration * record.fs))
    if t_start < 0 or start + count > data.size:
        raise ValueError(
            f"window [{t_start}, {t_start + duration})s outside record "
            f"{record.id!r} (duration {record.duration}s)"
        )
    return Strip(record_id=record.id, lead=lead, t_start=t_start,
                 duration=duration, samples=data[start:start + count].copy(),
                 fs=record.fs)


def _grid_lines(lo: float, hi: float, step: float) -> list[float]:
    n = int(math.floor((hi - lo) / step + 1e-9))
    return [lo + k * step for k in range(n + 1)]


def render_params(strip: Strip, mm_per_mv: float = 10.0,
                  mm_per_s: float = 25.0) -> RenderSpec:
    """Grid geometry for presenting a strip at clinical scale.

    The vertical extent covers the strip's amplitude range rounded out
    to the nearest major (5 mm) line, at least one major division each
    side of zero.
    """
    if mm_per_mv <= 0 or mm_per_s <= 0:
        raise ValueError("scales must be positive")
    width = strip.duration * mm_per_s
    y_lo = float(strip.samples.min()) * mm_per_mv
    y_hi = float(strip.samples.max()) * mm_per_mv
    y_min = min(math.floor(y_lo / 5.0), -1) * 5.0
    y_max = max(math.ceil(y_hi / 5.0), 1) * 5.0
    return RenderSpec(
        mm_per_mv=mm_per_mv,
        mm_per_s=mm_per_s,
        fs=strip.fs,
        width_mm=width,
        y_min_mm=y_min,
        y_max_mm=y_max,
        x_major_mm=_grid_lines(0.0, width, 5.0),
        x_minor_mm=_grid_lines(0.0, width, 1.0),
        y_major_mm=_grid_lines(y_min, y_max, 5.0),
        y_minor_mm=_grid_lines(y_min, y_max, 1.0),
    )
