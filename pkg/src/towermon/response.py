"""
Vibration levels, seismic event detection with catalog matching, and
quasi-static tilt from low-passed acceleration.
"""

from __future__ import annotations

import csv
import warnings
from collections import defaultdict
from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta
from typing import Sequence

import numpy as np

from .core import (
    G_STANDARD,
    CatalogEntry,
    MultiChannelRecord,
    TimeSeriesSegment,
    format_utc,
    from_us,
)
from .dsp import filter_array
from .errors import InsufficientDataError, InvalidStateError, ParameterError, DataError

HOUR_US = 3600 * 1_000_000
DAY_US = 24 * HOUR_US


class PreconditionWarning(UserWarning):
    """Input does not look like it satisfies an operation's precondition."""


@dataclass(frozen=True)
class LevelSeries:
    granularity: str  # "hourly_max" | "daily_avg_of_hourly_max"
    values: dict      # channel key -> list of (datetime, value)
    flags: dict = field(default_factory=dict)  # channel key -> list of bool (daily only)
    coverage: dict = field(default_factory=dict)  # channel key -> list of fraction (hourly only)


@dataclass(frozen=True)
class DetectionEvent:
    trigger_time: datetime
    duration: float
    peak_value: float
    band: tuple
    matched_catalog: CatalogEntry | None = None
    channel: str = ""

    @property
    def end_time(self) -> datetime:
        return self.trigger_time + timedelta(seconds=self.duration)


@dataclass(frozen=True)
class TiltSeries:
    start: datetime
    rate: float
    theta: dict         # axis -> radians
    height: float
    displacement: dict  # axis -> mm

    def times(self) -> list:
        n = len(next(iter(self.theta.values())))
        return [self.start + timedelta(seconds=k / self.rate) for k in range(n)]


# ---------------------------------------------------------------------------
# Levels

def _acceleration_samples(seg: TimeSeriesSegment) -> np.ndarray:
    if seg.unit == "m/s^2":
        return seg.samples
    if seg.unit == "g":
        return seg.samples * G_STANDARD
    raise InvalidStateError(f"hourly_max_abs needs acceleration, got {seg.unit!r}")


def hourly_max_abs(record: MultiChannelRecord) -> LevelSeries:
    """Largest absolute acceleration per channel and clock hour.

    The fraction of each hour covered by samples is kept in ``coverage``.
    """
    values, coverage = {}, {}
    for meta, segs in record.channels:
        best, covered = {}, defaultdict(float)
        for seg in segs:
            a = np.abs(_acceleration_samples(seg))
            hours = seg.sample_us() // HOUR_US
            cuts = np.flatnonzero(np.diff(hours)) + 1
            starts = np.concatenate([[0], cuts])
            sizes = np.diff(np.concatenate([starts, [a.size]]))
            for h, v, c in zip(hours[starts], np.maximum.reduceat(a, starts), sizes):
                best[int(h)] = max(best.get(int(h), 0.0), float(v))
                covered[int(h)] += c / seg.rate
        hs = sorted(best)
        values[meta.key] = [(from_us(h * HOUR_US), best[h]) for h in hs]
        coverage[meta.key] = [min(1.0, covered[h] / 3600.0) for h in hs]
    return LevelSeries("hourly_max", values, coverage=coverage)


def daily_avg_hourly_max(levels: LevelSeries, min_hours: int = 12,
                         min_coverage: float = 0.95) -> LevelSeries:
    """Per UTC day, the mean of that day's hourly maxima.

    An hour is valid when its samples cover at least ``min_coverage`` of
    it. Days with fewer than ``min_hours`` valid hours are still reported
    but flagged ``True`` in ``flags``.
    """
    if levels.granularity != "hourly_max":
        raise ParameterError("daily averaging needs hourly maxima")
    values, flags = {}, {}
    for key, series in levels.values.items():
        cov = levels.coverage.get(key, [1.0] * len(series))
        days = defaultdict(list)
        valid = defaultdict(int)
        for (t, v), c in zip(series, cov):
            days[t.date()].append(v)
            valid[t.date()] += c >= min_coverage
        rows = sorted(days.items())
        values[key] = [(datetime(d.year, d.month, d.day, tzinfo=series[0][0].tzinfo),
                        float(np.mean(v))) for d, v in rows]
        flags[key] = [valid[d] < min_hours for d, _ in rows]
    return LevelSeries("daily_avg_of_hourly_max", values, flags)


def write_levels(levels: LevelSeries, path, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        head = ["channel", "time", "value"]
        daily = levels.granularity != "hourly_max"
        w.writerow(head + (["flag_low_coverage"] if daily else []))
        for key, series in levels.values.items():
            fl = levels.flags.get(key, [False] * len(series))
            for (t, v), f in zip(series, fl):
                w.writerow([key, format_utc(t), repr(v)] + ([int(f)] if daily else []))


# ---------------------------------------------------------------------------
# Event detection

def _trailing_mean(e: np.ndarray, n: int) -> np.ndarray:
    cs = np.concatenate([[0.0], np.cumsum(e)])
    out = np.full(e.size, np.nan)
    out[n - 1:] = (cs[n:] - cs[:-n]) / n
    return out


def _regions(mask: np.ndarray) -> list:
    d = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def sta_lta_detect(x: TimeSeriesSegment, sta: float = 1.0, lta: float = 60.0,
                   on: float = 4.0, off: float = 1.5, band=None) -> list:
    """Classic STA/LTA trigger on squared, mean-removed samples.

    Both averages are trailing running means. A trigger opens when the
    ratio reaches ``on`` and closes once it falls to ``off`` or below.
    """
    if not lta > sta > 0:
        raise ParameterError("need lta > sta > 0")
    if not on > off > 1:
        raise ParameterError("need on > off > 1")
    data = x.samples - x.samples.mean() if len(x) else x.samples
    ns, nl = max(1, int(round(sta * x.rate))), max(2, int(round(lta * x.rate)))
    if data.size < nl:
        return []
    e = data ** 2
    s, l_ = _trailing_mean(e, ns), _trailing_mean(e, nl)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(l_ > 0, s / l_, 0.0)
    ratio[:nl - 1] = 0.0
    band = (0.0, x.rate / 2) if band is None else tuple(band)
    events = []
    k = 0
    n = ratio.size
    while k < n:
        hits = np.flatnonzero(ratio[k:] >= on)
        if hits.size == 0:
            break
        k0 = k + hits[0]
        ends = np.flatnonzero(ratio[k0 + 1:] <= off)
        k1 = k0 + 1 + ends[0] if ends.size else n
        events.append(DetectionEvent(
            trigger_time=x.start + timedelta(seconds=k0 / x.rate),
            duration=max(k1 - k0, 1) / x.rate,
            peak_value=float(np.max(np.abs(data[k0:k1 + 1]))),
            band=band))
        k = k1 + 1
    return events


def moving_rms(y: np.ndarray, n: int) -> np.ndarray:
    """Centered moving RMS over ``n`` samples (shrinking at the edges)."""
    cs = np.concatenate([[0.0], np.cumsum(y * y)])
    half = n // 2
    idx = np.arange(y.size)
    lo = np.clip(idx - half, 0, y.size)
    hi = np.clip(idx - half + n, 0, y.size)
    return np.sqrt(np.maximum(cs[hi] - cs[lo], 0.0) / (hi - lo))


def teleseism_scan(x: TimeSeriesSegment, band=(0.04, 1.0), k: float = 5.0,
                   envelope: float = 60.0, merge_gap: float = 600.0, order: int = 4,
                   settle_periods: float = 3.0) -> list:
    """Find long-period arrivals.

    Zero-phase Butterworth band-pass, 60 s moving-RMS envelope, threshold
    at ``k`` times the median envelope. Detections closer than
    ``merge_gap`` seconds are merged into one event. The first and last
    ``settle_periods`` periods of the low corner are not scanned.
    """
    if x.rate < 2.5:
        raise ParameterError("teleseism_scan needs a sample rate of at least 2.5 Hz")
    if len(x) < 2:
        return []
    y = filter_array(x.samples - x.samples.mean(), x.rate, "bandpass", band, order,
                     zero_phase=True)
    env = moving_rms(y, max(1, int(round(envelope * x.rate))))
    thr = k * np.median(env)
    # zero-phase filtering rings at both ends for a few periods of the low corner
    settle = min(int(round(settle_periods / band[0] * x.rate)), env.size // 2)
    above = env > thr
    above[:settle] = False
    above[env.size - settle:] = False
    regions = _regions(above)
    gap = merge_gap * x.rate
    merged = []
    for a, b in regions:
        if merged and a - merged[-1][1] < gap:
            merged[-1] = (merged[-1][0], b)
        else:
            merged.append((a, b))
    return [DetectionEvent(x.start + timedelta(seconds=a / x.rate), (b - a) / x.rate,
                           float(np.max(np.abs(y[a:b]))), tuple(band))
            for a, b in merged]


def match_catalog(events: Sequence[DetectionEvent], catalog: Sequence[CatalogEntry],
                  window: float = 30.0) -> list:
    """Attach the latest catalog origin within ``window`` minutes before each trigger.

    Origins after the trigger are never matched. Use about 30 min for
    teleseisms and 5 min for regional events.
    """
    if not window > 0:
        raise ParameterError("window must be positive")
    span = timedelta(minutes=window)
    out = []
    for ev in events:
        cands = [c for c in catalog if ev.trigger_time - span <= c.origin <= ev.trigger_time]
        best = max(cands, key=lambda c: c.origin) if cands else None
        out.append(replace(ev, matched_catalog=best))
    return out


def write_events(events: Sequence[DetectionEvent], path, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trigger_utc", "duration_s", "peak", "band_lo", "band_hi",
                    "catalog_location", "catalog_mag"])
        for e in events:
            c = e.matched_catalog
            w.writerow([format_utc(e.trigger_time), repr(e.duration), repr(e.peak_value),
                        repr(float(e.band[0])), repr(float(e.band[1])),
                        c.location if c else "", repr(c.magnitude) if c else ""])


# ---------------------------------------------------------------------------
# Tilt

def high_frequency_fraction(a: np.ndarray, rate: float, cutoff: float = 0.5) -> float:
    a = np.asarray(a, float) - np.mean(a)
    P = np.abs(np.fft.rfft(a)) ** 2
    total = P.sum()
    if total == 0:
        return 0.0
    f = np.fft.rfftfreq(a.size, 1.0 / rate)
    return float(P[f > cutoff].sum() / total)


def tilt_series(acc: dict, height: float, g: float = G_STANDARD,
                cutoff: float = 0.5, max_fraction: float = 0.1) -> TiltSeries:
    """Inclination from quasi-static horizontal acceleration.

    For small rotations the acceleration in units of g equals the angle in
    radians: ``theta = a / g``; the displacement at ``height`` is
    ``theta * height`` (reported in mm).

    ``acc`` maps axis name to a low-passed :class:`TimeSeriesSegment` in
    m/s^2 (or g). A :class:`PreconditionWarning` is issued when more than
    ``max_fraction`` of an axis' energy lies above ``cutoff`` Hz.
    """
    if not acc:
        raise ParameterError("no acceleration channels given")
    segs = list(acc.values())
    start, rate = segs[0].start, segs[0].rate
    theta, disp = {}, {}
    for axis, seg in acc.items():
        a = _acceleration_samples(seg)
        frac = high_frequency_fraction(a, seg.rate, cutoff)
        if frac > max_fraction:
            warnings.warn(f"axis {axis}: {frac:.0%} of energy above {cutoff} Hz; "
                          "low-pass the input first", PreconditionWarning, stacklevel=2)
        th = a / g
        if th.size and np.max(np.abs(th)) >= 0.01:
            raise DataError(f"axis {axis}: tilt exceeds the 0.01 rad sanity bound")
        theta[axis] = th
        disp[axis] = th * height * 1000.0
    return TiltSeries(start, rate, theta, height, disp)


def write_tilt(tilt: TiltSeries, path, decimate_to: float | None = None,
               comment: str | None = None) -> None:
    axes = list(tilt.theta)
    step = 1 if decimate_to is None else max(1, int(round(tilt.rate / decimate_to)))
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time"] + [f"theta_{a}_rad" for a in axes] + [f"disp_{a}_mm" for a in axes])
        n = len(tilt.theta[axes[0]])
        for k in range(0, n, step):
            t = tilt.start + timedelta(seconds=k / tilt.rate)
            w.writerow([format_utc(t)] + [repr(float(tilt.theta[a][k])) for a in axes]
                       + [repr(float(tilt.displacement[a][k])) for a in axes])


def _block_mean(x: np.ndarray, n: int) -> np.ndarray:
    m = x.size // n
    return x[:m * n].reshape(m, n).mean(axis=1)


def axis_phase_shift(tilt: TiltSeries, period_band=(20.0, 28.0), min_days: float = 3.0,
                     grid: float = 60.0, first: str = "x", second: str = "y") -> float:
    """Delay in hours of the ``second`` axis' daily oscillation behind ``first``.

    Both axes are averaged onto a ``grid``-second lattice, detrended and
    band-limited to periods in ``period_band`` hours by masking their
    Fourier coefficients. The lag maximizing the (circular)
    cross-correlation is refined by a parabolic fit.
    """
    x = tilt.theta[first]
    y = tilt.theta[second]
    span_days = x.size / tilt.rate / 86400.0
    if span_days < min_days * (1 - 1e-6):
        raise InsufficientDataError(f"need at least {min_days:g} days, have {span_days:.2f}")
    n = max(1, int(round(grid * tilt.rate)))
    xs, ys = _block_mean(np.asarray(x, float), n), _block_mean(np.asarray(y, float), n)
    dt = n / tilt.rate
    t = np.arange(xs.size)
    xs = xs - np.polyval(np.polyfit(t, xs, 1), t)
    ys = ys - np.polyval(np.polyfit(t, ys, 1), t)
    f = np.fft.rfftfreq(xs.size, dt)
    keep = (f >= 1.0 / (period_band[1] * 3600)) & (f <= 1.0 / (period_band[0] * 3600))
    if not keep.any():
        raise InsufficientDataError("record too short to resolve the daily band")
    X = np.fft.rfft(xs) * keep
    Y = np.fft.rfft(ys) * keep
    c = np.fft.irfft(X.conj() * Y, n=xs.size)
    half = int(round(period_band[0] * 3600 / 2 / dt))
    lags = np.concatenate([np.arange(0, half + 1), np.arange(-half, 0)])
    cc = np.concatenate([c[:half + 1], c[-half:]])
    order = np.argsort(lags)
    lags, cc = lags[order], cc[order]
    k = int(np.argmax(cc))
    shift = 0.0
    if 0 < k < cc.size - 1:
        denom = cc[k - 1] - 2 * cc[k] + cc[k + 1]
        if denom != 0:
            shift = 0.5 * (cc[k - 1] - cc[k + 1]) / denom
    return float((lags[k] + shift) * dt / 3600.0)
