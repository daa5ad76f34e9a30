"""
Time-series data model, unit conversion, hourly windowing and file I/O.

Waveform CSV schema (one sample of one component per row)::

    timestamp,station,component,value,unit
    2017-11-19T12:00:00.000000Z,S945,x,1.25e-06,m/s

Campaign layout: ``<root>/<station>/<YYYY-MM-DD>.csv`` plus an optional
``<root>/channels.csv`` holding the :class:`ChannelMeta` table.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from datetime import date, datetime, time as dt_time, timedelta, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    DataError,
    InvalidStateError,
    ParameterError,
    ParseError,
)

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)
COMPONENTS = ("x", "y", "z")
SENSOR_KINDS = ("velocity", "acceleration")
UNITS = ("counts", "volts", "m/s", "m/s^2", "g")
PHYSICAL_UNIT = {"velocity": "m/s", "acceleration": "m/s^2"}
G_STANDARD = 9.80665

WAVEFORM_HEADER = ("timestamp", "station", "component", "value", "unit")
CHANNEL_HEADER = (
    "station_id", "component", "height", "sensor_kind", "sensitivity", "sample_rate",
)
GAP_FACTOR = 1.5


def to_us(t: datetime) -> int:
    """Microseconds since the Unix epoch for an aware (or naive-as-UTC) datetime."""
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return (t - EPOCH) // timedelta(microseconds=1)


def from_us(us: int) -> datetime:
    return EPOCH + timedelta(microseconds=int(us))


def parse_utc(text: str) -> datetime:
    """Parse an ISO-8601 timestamp; a trailing ``Z`` or no offset means UTC."""
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    t = datetime.fromisoformat(text)
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def format_utc(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%fZ")


@dataclass(frozen=True)
class ChannelMeta:
    """Static description of one recorded component."""

    station_id: str
    component: str
    height: float
    sensor_kind: str
    sensitivity: float
    sample_rate: float

    def __post_init__(self):
        if self.component not in COMPONENTS:
            raise ConfigurationError(f"unknown component {self.component!r}")
        if self.sensor_kind not in SENSOR_KINDS:
            raise ConfigurationError(f"unknown sensor kind {self.sensor_kind!r}")
        if not self.sample_rate > 0:
            raise ConfigurationError("sample_rate must be positive")
        if not self.sensitivity > 0:
            raise ConfigurationError("sensitivity must be positive")

    @property
    def key(self) -> str:
        return f"{self.station_id}.{self.component}"


@dataclass(frozen=True)
class TimeSeriesSegment:
    """Gap-free, uniformly sampled run of samples."""

    start: datetime
    rate: float
    samples: np.ndarray
    unit: str = "m/s"

    def __post_init__(self):
        if not self.rate > 0:
            raise ParameterError("rate must be positive")
        if self.unit not in UNITS:
            raise ParameterError(f"unknown unit {self.unit!r}")
        if self.start.tzinfo is None:
            object.__setattr__(self, "start", self.start.replace(tzinfo=timezone.utc))
        arr = np.array(self.samples, dtype=float)
        if arr.ndim != 1:
            raise ParameterError("samples must be one-dimensional")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.size

    @property
    def dt(self) -> float:
        return 1.0 / self.rate

    @property
    def duration(self) -> float:
        return self.samples.size / self.rate

    @property
    def start_us(self) -> int:
        return to_us(self.start)

    @property
    def end(self) -> datetime:
        """Instant just after the last sample (start + duration)."""
        return self.start + timedelta(seconds=self.duration)

    @property
    def end_us(self) -> int:
        return self.start_us + int(round(self.samples.size * 1e6 / self.rate))

    def times(self) -> np.ndarray:
        """Sample offsets in seconds from ``start``."""
        return np.arange(self.samples.size) / self.rate

    def sample_us(self) -> np.ndarray:
        """Absolute sample times in integer microseconds."""
        k = np.arange(self.samples.size)
        return self.start_us + np.round(k * (1e6 / self.rate)).astype(np.int64)

    def index_at(self, t_us: int) -> int:
        """Index of the first sample at or after ``t_us`` (may be out of range)."""
        k = (t_us - self.start_us) * self.rate / 1e6
        return int(math.ceil(round(k, 6)))

    def slice_time(self, t0_us: int, t1_us: int) -> "TimeSeriesSegment | None":
        k0 = max(self.index_at(t0_us), 0)
        k1 = min(self.index_at(t1_us), self.samples.size)
        if k1 <= k0:
            return None
        return self.with_samples(self.samples[k0:k1], start=self.start + timedelta(microseconds=round(k0 * 1e6 / self.rate)))

    def with_samples(self, samples, unit=None, rate=None, start=None) -> "TimeSeriesSegment":
        return TimeSeriesSegment(
            start=self.start if start is None else start,
            rate=self.rate if rate is None else rate,
            samples=samples,
            unit=self.unit if unit is None else unit,
        )


@dataclass(frozen=True)
class MultiChannelRecord:
    """Channels with their gap-separated segments.

    ``info`` carries free-form metadata such as window coverage.
    """

    channels: tuple
    info: Mapping = field(default_factory=dict)

    def __post_init__(self):
        chans = []
        seen = set()
        for meta, segs in self.channels:
            ident = (meta.station_id, meta.height, meta.component)
            if ident in seen:
                raise ConfigurationError(f"duplicate component for {meta.key}")
            seen.add(ident)
            segs = tuple(sorted(segs, key=lambda s: s.start_us))
            for a, b in zip(segs, segs[1:]):
                if b.start_us < a.end_us:
                    raise DataError(f"overlapping segments in channel {meta.key}")
            chans.append((meta, segs))
        object.__setattr__(self, "channels", tuple(chans))
        object.__setattr__(self, "info", dict(self.info))

    def __len__(self):
        return len(self.channels)

    @property
    def keys(self) -> list:
        return [m.key for m, _ in self.channels]

    @property
    def metas(self) -> list:
        return [m for m, _ in self.channels]

    def meta(self, key: str) -> ChannelMeta:
        return self.channels[self.keys.index(key)][0]

    def segments(self, key: str) -> tuple:
        try:
            return self.channels[self.keys.index(key)][1]
        except ValueError:
            raise ConfigurationError(f"no channel {key!r}") from None

    def select(self, keys: Sequence[str]) -> "MultiChannelRecord":
        return MultiChannelRecord(
            tuple((self.meta(k), self.segments(k)) for k in keys), self.info
        )

    def is_empty(self) -> bool:
        return all(len(segs) == 0 for _, segs in self.channels)

    @property
    def rate(self) -> float:
        rates = {s.rate for _, segs in self.channels for s in segs}
        if len(rates) != 1:
            raise DataError(f"channels do not share a sample rate: {sorted(rates)}")
        return rates.pop()

    @property
    def start_us(self) -> int:
        return min(s.start_us for _, segs in self.channels for s in segs)

    @property
    def end_us(self) -> int:
        return max(s.end_us for _, segs in self.channels for s in segs)

    def common_blocks(self, keys: Sequence[str] | None = None, min_samples: int = 1) -> list:
        """Contiguous stretches covered by every selected channel.

        Returns a list of ``(start, array)`` with ``array`` shaped
        ``(n_samples, n_channels)`` in ``keys`` order.
        """
        keys = self.keys if keys is None else list(keys)
        intervals = None
        for k in keys:
            spans = [(s.start_us, s.end_us) for s in self.segments(k)]
            intervals = spans if intervals is None else _intersect(intervals, spans)
        blocks = []
        for t0, t1 in intervals or []:
            cols = []
            for k in keys:
                for s in self.segments(k):
                    if s.start_us <= t0 and s.end_us >= t1:
                        cols.append(s.slice_time(t0, t1).samples)
                        break
            n = min(c.size for c in cols)
            if n >= min_samples:
                blocks.append((from_us(t0), np.column_stack([c[:n] for c in cols])))
        return blocks


def _intersect(a, b):
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if hi > lo:
            out.append((lo, hi))
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return out


@dataclass(frozen=True, order=True)
class CatalogEntry:
    origin: datetime
    location: str = field(compare=False)
    magnitude: float = field(compare=False)

    def __post_init__(self):
        if self.magnitude < 0:
            raise ParameterError("magnitude must be non-negative")

    @property
    def date(self) -> date:
        return self.origin.date()

    @property
    def time(self) -> dt_time:
        return self.origin.timetz()


# --------------------------------------------------------------------------
# Unit conversion

def counts_to_physical(segment: TimeSeriesSegment, meta: ChannelMeta,
                       digitizer_gain: float = 1.0) -> TimeSeriesSegment:
    """Convert digitizer counts or volts to m/s or m/s^2.

    ``counts * digitizer_gain`` gives volts; volts divided by the sensor
    sensitivity gives the physical quantity.
    """
    if segment.unit == "counts":
        volts = segment.samples * digitizer_gain
    elif segment.unit == "volts":
        volts = segment.samples
    else:
        raise InvalidStateError(f"segment already in physical unit {segment.unit!r}")
    return segment.with_samples(volts / meta.sensitivity, unit=PHYSICAL_UNIT[meta.sensor_kind])


# --------------------------------------------------------------------------
# Windowing

def segment_hourly(record: MultiChannelRecord, window: float = 3600.0,
                   coverage: float = 0.95, required: Sequence[str] | None = None) -> list:
    """Cut a record into wall-clock aligned windows.

    A window is kept only when each required channel covers at least
    ``coverage`` of it. Each returned record carries ``window_start``,
    ``window`` and per-channel ``coverage`` in its ``info``.
    """
    if record.is_empty():
        return []
    required = record.keys if required is None else list(required)
    w_us = int(round(window * 1e6))
    first = (record.start_us // w_us) * w_us
    last = record.end_us
    out = []
    for t0 in range(first, last, w_us):
        t1 = t0 + w_us
        cov = {}
        for key, (meta, segs) in zip(record.keys, record.channels):
            covered = sum(max(0, min(s.end_us, t1) - max(s.start_us, t0)) for s in segs)
            cov[key] = covered / w_us
        if any(cov[k] < coverage for k in required):
            continue
        chans = []
        for meta, segs in record.channels:
            clipped = [c for c in (s.slice_time(t0, t1) for s in segs) if c is not None]
            chans.append((meta, tuple(clipped)))
        info = dict(record.info)
        info.update(window_start=from_us(t0), window=window, coverage=cov,
                    coverage_threshold=coverage)
        out.append(MultiChannelRecord(tuple(chans), info))
    return out


def split_at_gaps(times_us: np.ndarray, values: np.ndarray, rate: float, unit: str) -> list:
    """Split a sorted, timestamped series into contiguous segments."""
    if times_us.size == 0:
        return []
    step = 1e6 / rate
    d = np.diff(times_us)
    if np.any(d <= 0):
        raise DataError("timestamps must be strictly increasing (overlap or duplicate)")
    cuts = np.flatnonzero(d > GAP_FACTOR * step) + 1
    segs = []
    for idx in np.split(np.arange(times_us.size), cuts):
        segs.append(TimeSeriesSegment(from_us(times_us[idx[0]]), rate, values[idx], unit))
    return segs


# --------------------------------------------------------------------------
# CSV waveform I/O

def ingest_csv(path, meta: Sequence[ChannelMeta]) -> MultiChannelRecord:
    """Read a waveform CSV file (or every CSV under a campaign directory).

    Rows may arrive in any order. Samples of each channel are sorted by
    time and split into segments at discontinuities larger than 1.5
    sample intervals. Lines beginning with ``#`` are ignored.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.glob("*/*.csv"))
    elif path.exists():
        files = [path]
    else:
        raise DataError(f"{path} does not exist")
    by_key = {m.key: m for m in meta}
    parts = {k: ([], [], set()) for k in by_key}  # time arrays, value arrays, units
    for f in files:
        if not _read_waveform_fast(f, by_key, parts):
            _read_waveform_rows(f, by_key, parts)

    channels = []
    for key, m in by_key.items():
        t_parts, v_parts, unit_set = parts[key]
        if not t_parts:
            channels.append((m, ()))
            continue
        t_us = np.concatenate(t_parts)
        v = np.concatenate(v_parts)
        order = np.argsort(t_us, kind="stable")
        t_us, v = t_us[order], v[order]
        if len(unit_set) != 1:
            raise DataError(f"mixed units in channel {key}: {sorted(unit_set)}")
        if t_us.size > 1:
            step = float(np.median(np.diff(t_us)))
            expected = 1e6 / m.sample_rate
            if abs(step - expected) > 0.01 * expected:
                raise ConfigurationError(
                    f"channel {key}: sample interval {step / 1e6:g} s does not match "
                    f"declared rate {m.sample_rate:g} Hz")
        channels.append((m, tuple(split_at_gaps(t_us, v, m.sample_rate, unit_set.pop()))))
    return MultiChannelRecord(tuple(channels), {"source": str(path)})


def _parse_times(ts, lines):
    cleaned = [s[:-1] if s.endswith("Z") else s for s in ts]
    try:
        return np.array(cleaned, dtype="datetime64[us]").astype(np.int64)
    except ValueError:
        for s, ln in zip(ts, lines):
            try:
                np.datetime64(s[:-1] if s.endswith("Z") else s, "us")
            except ValueError:
                raise ParseError(f"bad timestamp {s!r}", ln) from None
        raise


_CHUNK_LINES = 200_000


def _read_waveform_fast(path: Path, by_key: Mapping, parts: Mapping) -> bool:
    """Chunked column-wise reader for plain files.

    Returns False, having added nothing, when the file needs the row
    reader: quoting or padding, malformed rows, unknown units, bad numbers
    or timestamps. The row reader then reports the exact line.
    """
    found = {}
    header = None
    with open(path, newline="") as fh:
        while True:
            raw = fh.readlines(_CHUNK_LINES * 64)
            if not raw:
                break
            text = "".join(ln for ln in raw if not ln.startswith("#"))
            if any(c in text for c in '" \t\r'):
                return False
            lines = [ln for ln in text.split("\n") if ln]
            if not lines:
                continue
            if header is None:
                header = lines[0].split(",")
                if any(h not in header for h in WAVEFORM_HEADER):
                    return False
                lines = lines[1:]
                if not lines:
                    continue
            width = len(header)
            body = "\n".join(lines)
            if body.count(",") != (width - 1) * len(lines):
                return False
            flat = body.replace("\n", ",").split(",")
            ts, station, comp, value, unit = (np.array(flat[header.index(h)::width])
                                              for h in WAVEFORM_HEADER)
            del flat, body
            keys = np.char.add(np.char.add(station, "."), comp)
            for key in np.unique(keys):
                key = str(key)
                if key not in by_key:
                    continue
                sel = keys == key
                units = {str(u) for u in np.unique(unit[sel])}
                if not units <= set(UNITS):
                    return False
                try:
                    v = value[sel].astype(float)
                    t = np.char.rstrip(ts[sel], "Z").astype("datetime64[us]").astype(np.int64)
                except ValueError:
                    return False
                t_parts, v_parts, u_set = found.setdefault(key, ([], [], set()))
                t_parts.append(t)
                v_parts.append(v)
                u_set |= units
    for key, (t_parts, v_parts, u_set) in found.items():
        parts[key][0].extend(t_parts)
        parts[key][1].extend(v_parts)
        parts[key][2].update(u_set)
    return True


def _read_waveform_rows(path: Path, by_key: Mapping, parts: Mapping) -> None:
    rows = {k: ([], [], [], []) for k in by_key}  # timestamps, values, units, lines
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = None
        for row in reader:
            line = reader.line_num
            if not row or row[0].startswith("#"):
                continue
            if header is None:
                header = [h.strip() for h in row]
                missing = [h for h in WAVEFORM_HEADER if h not in header]
                if missing:
                    raise ConfigurationError(f"{path}: header lacks columns {missing}")
                idx = [header.index(h) for h in WAVEFORM_HEADER]
                continue
            if len(row) != len(header):
                raise ParseError(f"{path.name}: expected {len(header)} fields, got {len(row)}", line)
            ts, station, comp, value, unit = (row[i].strip() for i in idx)
            key = f"{station}.{comp}"
            if key not in by_key:
                continue
            if unit not in UNITS:
                raise ParseError(f"{path.name}: unknown unit {unit!r}", line)
            try:
                v = float(value)
            except ValueError:
                raise ParseError(f"{path.name}: bad value {value!r}", line) from None
            r = rows[key]
            r[0].append(ts)
            r[1].append(v)
            r[2].append(unit)
            r[3].append(line)
    for key, (ts, vals, units, lines) in rows.items():
        if ts:
            parts[key][0].append(_parse_times(ts, lines))
            parts[key][1].append(np.array(vals, dtype=float))
            parts[key][2].update(units)


def _segment_lines(meta: ChannelMeta, seg: TimeSeriesSegment, mask=None):
    t = seg.sample_us()
    vals = seg.samples
    if mask is not None:
        t, vals = t[mask], vals[mask]
    stamps = np.datetime_as_string(t.astype("datetime64[us]"), unit="us")
    prefix = f",{meta.station_id},{meta.component},"
    suffix = f",{seg.unit}\n"
    return [f"{s}Z{prefix}{v!r}{suffix}" for s, v in zip(stamps.tolist(), vals.tolist())]


def write_csv(record: MultiChannelRecord, path, comment: str | None = None) -> Path:
    """Write every sample of ``record`` into one waveform CSV file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(",".join(WAVEFORM_HEADER) + "\n")
        for meta, segs in record.channels:
            for seg in segs:
                fh.writelines(_segment_lines(meta, seg))
    return path


def write_campaign(record: MultiChannelRecord, root, comment: str | None = None) -> list:
    """Store ``record`` as one directory per station, one CSV per UTC day."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    write_channels(record.metas, root / "channels.csv", comment)
    day_us = 86400 * 1_000_000
    files = {}
    for meta, segs in record.channels:
        for seg in segs:
            days = seg.sample_us() // day_us
            for d in np.unique(days):
                name = root / meta.station_id / f"{from_us(int(d) * day_us):%Y-%m-%d}.csv"
                files.setdefault(name, []).extend(_segment_lines(meta, seg, days == d))
    for name in sorted(files):
        name.parent.mkdir(parents=True, exist_ok=True)
        with open(name, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            fh.write(",".join(WAVEFORM_HEADER) + "\n")
            fh.writelines(files[name])
    return sorted(files)


def write_channels(metas: Iterable[ChannelMeta], path, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CHANNEL_HEADER)
        for m in metas:
            w.writerow([m.station_id, m.component, repr(m.height), m.sensor_kind,
                        repr(m.sensitivity), repr(m.sample_rate)])


def read_channels(path) -> list:
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    skipped = sum(1 for ln in lines if ln.startswith("#"))
    body = [ln for ln in lines if not ln.startswith("#")]
    metas = []
    for i, row in enumerate(csv.DictReader(body), start=2 + skipped):
        try:
            metas.append(ChannelMeta(
                row["station_id"], row["component"], float(row["height"]),
                row["sensor_kind"], float(row["sensitivity"]), float(row["sample_rate"])))
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(f"bad channel row: {exc}", i) from None
    return metas


def read_campaign(root) -> MultiChannelRecord:
    root = Path(root)
    if not (root / "channels.csv").exists():
        raise DataError(f"{root} has no channels.csv; not a campaign directory")
    return ingest_csv(root, read_channels(root / "channels.csv"))


# --------------------------------------------------------------------------
# Catalogs

_TIME_RE = re.compile(r"^(\d{1,2})[:.](\d{2})[:.](\d{2}(?:\.\d+)?)$")


def _parse_catalog_datetime(d: str, t: str) -> datetime:
    d = d.strip()
    if "/" in d:
        day = datetime.strptime(d, "%m/%d/%y" if len(d.split("/")[-1]) == 2 else "%m/%d/%Y").date()
    else:
        day = date.fromisoformat(d)
    m = _TIME_RE.match(t.strip())
    if not m:
        raise ValueError(f"bad time {t!r}")
    hh, mm, ss = int(m.group(1)), int(m.group(2)), float(m.group(3))
    return datetime(day.year, day.month, day.day, hh, mm, tzinfo=timezone.utc) + timedelta(seconds=ss)


def load_catalog(path) -> list:
    """Read an earthquake catalog CSV (``date,time,location,magnitude``).

    Dates may be ISO or ``MM/DD/YY``; the time field tolerates ``.`` in
    place of ``:`` (as in ``09:18.44``). Entries come back sorted.
    """
    entries = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(ln for ln in fh if not ln.startswith("#"))
        for i, row in enumerate(reader, start=1):
            try:
                origin = _parse_catalog_datetime(row["date"], row["time"])
                mag = float(row["magnitude"])
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"catalog row unparseable: {exc}", i) from None
            entries.append(CatalogEntry(origin, row["location"].strip(), mag))
    return sorted(entries)


def write_catalog(entries: Iterable[CatalogEntry], path, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "time", "location", "magnitude"])
        for e in entries:
            w.writerow([e.origin.strftime("%Y-%m-%d"), e.origin.strftime("%H:%M:%S"),
                        e.location, repr(e.magnitude)])
