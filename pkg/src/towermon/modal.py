"""
Mode-shape algebra, multi-setup merging, long-term tracking, statistics
and correlation with environmental series.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Mapping, Sequence

import numpy as np

from .core import format_utc, parse_utc, to_us
from .errors import ConfigurationError, InsufficientDataError, ParameterError

ENV_KINDS = ("temperature", "wind_speed")
TEMPERATURE_BOUNDS = (-30.0, 50.0)


def mac(a, b) -> float:
    """Modal assurance criterion ``|a^H b|^2 / (|a|^2 |b|^2)``."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.shape != b.shape:
        raise ParameterError(f"shape vectors differ in length: {a.size} vs {b.size}")
    na = np.vdot(a, a).real
    nb = np.vdot(b, b).real
    if na == 0 or nb == 0:
        raise ParameterError("MAC undefined for a zero vector")
    return float(min(1.0, abs(np.vdot(a, b)) ** 2 / (na * nb)))


def merge_setups(setups: Sequence[Mapping], reference_channels: Sequence) -> dict:
    """Glue mode-shape fragments measured in several sensor layouts.

    Every setup maps channel id to a (complex) modal ordinate and must
    contain all reference channels. Each setup is rescaled by the complex
    least-squares factor that maps its reference entries onto those of the
    first setup; entries seen in several setups are averaged. The merged
    shape is divided by its largest-modulus entry.
    """
    if not setups:
        raise ConfigurationError("no setups to merge")
    refs = list(reference_channels)
    if not refs:
        raise ConfigurationError("at least one reference channel is required")
    for k, s in enumerate(setups):
        missing = [r for r in refs if r not in s]
        if missing:
            raise ConfigurationError(f"setup {k} lacks reference channels {missing}")
    anchor = np.array([setups[0][r] for r in refs], dtype=complex)
    sums: dict = {}
    counts: dict = {}
    for s in setups:
        own = np.array([s[r] for r in refs], dtype=complex)
        denom = np.vdot(own, own)
        if denom == 0:
            raise ConfigurationError("reference partition is zero in a setup")
        alpha = np.vdot(own, anchor) / denom
        for ch, v in s.items():
            sums[ch] = sums.get(ch, 0j) + alpha * complex(v)
            counts[ch] = counts.get(ch, 0) + 1
    merged = np.array([sums[ch] / counts[ch] for ch in sums])
    k = int(np.argmax(np.abs(merged)))
    merged = merged / merged[k]
    return dict(zip(sums, merged))


# ---------------------------------------------------------------------------
# Tracking

@dataclass(frozen=True)
class BaselineMode:
    label: str
    frequency: float
    shape: np.ndarray | None = None


@dataclass(frozen=True)
class TrajectoryPoint:
    window_start: datetime
    frequency: float | None = None
    damping: float | None = None
    shape: np.ndarray | None = None
    detected: bool = False


@dataclass(frozen=True)
class ModeTrajectory:
    mode_label: str
    points: list = field(default_factory=list)

    @property
    def times(self) -> list:
        return [p.window_start for p in self.points]

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([p.frequency if p.detected else np.nan for p in self.points])

    @property
    def dampings(self) -> np.ndarray:
        return np.array([p.damping if p.detected else np.nan for p in self.points])

    @property
    def detection_rate(self) -> float:
        if not self.points:
            return 0.0
        return sum(p.detected for p in self.points) / len(self.points)


def _as_baseline(baseline) -> list:
    out = []
    for k, b in enumerate(baseline):
        if isinstance(b, BaselineMode):
            out.append(b)
        else:
            f, shape = b if isinstance(b, (tuple, list)) else (b, None)
            out.append(BaselineMode(f"f{k + 1}", float(f),
                                    None if shape is None else np.asarray(shape, complex)))
    return out


def track_modes(estimates: Sequence, baseline: Sequence, f_tol: float = 0.05,
                mac_min: float = 0.8) -> list:
    """Follow baseline modes through a sequence of analysis windows.

    Parameters
    ----------
    estimates : sequence of (window_start, list of mode estimates)
        Windows in time order; each estimate needs ``frequency``,
        ``damping`` and ``shape``.
    baseline : sequence of BaselineMode or (f, shape) pairs
    f_tol : float
        Relative frequency tolerance (fraction, 0.05 = 5 %).
    mac_min : float
        Shape agreement threshold, applied when both shapes are known and
        have the same length.

    Candidate pairs are assigned one-to-one, closest relative frequency
    first.
    """
    base = _as_baseline(baseline)
    fs = sorted(b.frequency for b in base)
    for a, b in zip(fs, fs[1:]):
        if (b - a) / a <= 2 * f_tol:
            raise ParameterError(
                f"baseline frequencies {a:g} and {b:g} are closer than 2*f_tol")
    points = [[] for _ in base]
    for start, modes in estimates:
        cands = []
        for j, b in enumerate(base):
            for k, m in enumerate(modes):
                d = abs(m.frequency - b.frequency) / b.frequency
                if d >= f_tol:
                    continue
                if (b.shape is not None and m.shape is not None
                        and len(b.shape) == len(m.shape) and mac(b.shape, m.shape) <= mac_min):
                    continue
                cands.append((d, j, k))
        cands.sort()
        used_j, used_k, hit = set(), set(), {}
        for d, j, k in cands:
            if j in used_j or k in used_k:
                continue
            used_j.add(j)
            used_k.add(k)
            hit[j] = modes[k]
        for j in range(len(base)):
            m = hit.get(j)
            if m is None:
                points[j].append(TrajectoryPoint(start))
            else:
                points[j].append(TrajectoryPoint(start, float(m.frequency), float(m.damping),
                                                  m.shape, True))
    return [ModeTrajectory(b.label, pts) for b, pts in zip(base, points)]


# ---------------------------------------------------------------------------
# Statistics

@dataclass(frozen=True)
class ModeStatistics:
    mean_f: float
    delta_f: float
    mean_xi: float
    delta_xi: float
    detection_rate: float
    n_detected: int = 0


def percentile_delta(values, low: float, high: float) -> float:
    """``|p_high - p_low| / p_low * 100`` with linear-interpolation percentiles."""
    p_lo, p_hi = np.percentile(np.asarray(values, float), [low, high])
    return float(abs(p_hi - p_lo) / p_lo * 100.0)


def mode_statistics(traj: ModeTrajectory, f_percentiles=(1, 99), xi_percentiles=(5, 95)) -> ModeStatistics:
    """Mean values and percentile spreads over the detected points.

    The spread is reported as a positive percentage; damping values are
    returned in percent as well.
    """
    det = [p for p in traj.points if p.detected]
    if len(det) < 2:
        raise InsufficientDataError(f"mode {traj.mode_label}: {len(det)} detected points, need 2")
    f = np.array([p.frequency for p in det])
    xi = np.array([p.damping for p in det]) * 100.0
    return ModeStatistics(
        mean_f=float(f.mean()),
        delta_f=percentile_delta(f, *f_percentiles),
        mean_xi=float(xi.mean()),
        delta_xi=percentile_delta(xi, *xi_percentiles),
        detection_rate=traj.detection_rate,
        n_detected=len(det),
    )


# ---------------------------------------------------------------------------
# Environment

@dataclass(frozen=True)
class EnvSeries:
    kind: str
    times: list
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in ENV_KINDS:
            raise ParameterError(f"unknown environmental kind {self.kind!r}")
        v = np.asarray(self.values, dtype=float)
        if v.size != len(self.times):
            raise ParameterError("times and values differ in length")
        us = [to_us(t) for t in self.times]
        if any(b <= a for a, b in zip(us, us[1:])):
            raise ParameterError("environmental series must be strictly time-sorted")
        if self.kind == "temperature" and v.size and (
                v.min() < TEMPERATURE_BOUNDS[0] or v.max() > TEMPERATURE_BOUNDS[1]):
            raise ParameterError("temperature outside plausibility bounds [-30, 50] C")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "times", list(self.times))

    def times_us(self) -> np.ndarray:
        return np.array([to_us(t) for t in self.times], dtype=np.int64)

    def nearest(self, times_us: np.ndarray, tolerance_s: float = 1800.0) -> np.ndarray:
        """Nearest-neighbour lookup; NaN where no sample lies within tolerance."""
        src = self.times_us()
        times_us = np.asarray(times_us, dtype=np.int64)
        out = np.full(times_us.shape, np.nan)
        if src.size == 0:
            return out
        idx = np.clip(np.searchsorted(src, times_us), 1, max(src.size - 1, 1))
        left = np.clip(idx - 1, 0, src.size - 1)
        right = np.clip(idx, 0, src.size - 1)
        pick = np.where(np.abs(times_us - src[left]) <= np.abs(src[right] - times_us), left, right)
        ok = np.abs(src[pick] - times_us) <= tolerance_s * 1e6
        out[ok] = self.values[pick[ok]]
        return out


def read_env(path, kind: str = "temperature") -> EnvSeries:
    times, vals = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(ln for ln in fh if not ln.startswith("#")):
            times.append(parse_utc(row["timestamp"]))
            vals.append(float(row["value"]))
    return EnvSeries(kind, times, np.array(vals))


def write_env(env: EnvSeries, path, comment: str | None = None) -> None:
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("timestamp,value\n")
        for t, v in zip(env.times, env.values.tolist()):
            fh.write(f"{format_utc(t)},{v!r}\n")


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    best_lag: float
    per_regime: tuple | None
    n_pairs: int
    lags: np.ndarray
    r_by_lag: np.ndarray


def _pearson(a, b) -> float:
    ok = np.isfinite(a) & np.isfinite(b)
    if ok.sum() < 3:
        return float("nan")
    a, b = a[ok], b[ok]
    sa, sb = a.std(), b.std()
    if sa == 0 or sb == 0:
        return float("nan")
    return float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))


def correlate_env(traj: ModeTrajectory, env: EnvSeries, max_lag: float = 12.0,
                  regime_split: float | None = None, tolerance_s: float = 1800.0,
                  min_overlap_h: float = 48.0) -> CorrelationResult:
    """Pearson correlation between a frequency trajectory and an environmental series.

    The environment is sampled at each window time by nearest neighbour
    (within ``tolerance_s``). ``best_lag`` maximizes r over whole-hour lags
    in ``[-max_lag, max_lag]``; a positive lag means the frequency follows
    the environment. With ``regime_split``, lag-0 correlations are also
    computed separately for env below and at/above the split.
    """
    t_us = np.array([to_us(t) for t in traj.times], dtype=np.int64)
    f = traj.frequencies
    e0 = env.nearest(t_us, tolerance_s)
    ok = np.isfinite(f) & np.isfinite(e0)
    if ok.sum() < 3 or (t_us[ok].max() - t_us[ok].min()) / 3.6e9 < min_overlap_h:
        raise InsufficientDataError(f"need >= {min_overlap_h:g} h of overlapping support")
    r0 = _pearson(f, e0)
    lags = np.arange(-int(max_lag), int(max_lag) + 1)
    r_by_lag = np.array([_pearson(f, env.nearest(t_us - int(L * 3.6e9), tolerance_s))
                         for L in lags])
    best = float(lags[np.nanargmax(r_by_lag)]) if np.any(np.isfinite(r_by_lag)) else float("nan")
    per = None
    if regime_split is not None:
        below = ok & (e0 < regime_split)
        above = ok & (e0 >= regime_split)
        per = (_pearson(f[below], e0[below]), _pearson(f[above], e0[above]))
    return CorrelationResult(r0, best, per, int(ok.sum()), lags, r_by_lag)


# ---------------------------------------------------------------------------
# CSV

def write_trajectories(trajs: Sequence[ModeTrajectory], path, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode_label", "window_start", "detected", "f_hz", "xi"])
        for tr in trajs:
            for p in tr.points:
                w.writerow([tr.mode_label, format_utc(p.window_start), int(p.detected),
                            repr(p.frequency) if p.detected else "",
                            repr(p.damping) if p.detected else ""])


def read_trajectories(path) -> list:
    by_label: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(ln for ln in fh if not ln.startswith("#")):
            det = row["detected"] == "1"
            by_label.setdefault(row["mode_label"], []).append(TrajectoryPoint(
                parse_utc(row["window_start"]),
                float(row["f_hz"]) if det else None,
                float(row["xi"]) if det else None,
                None, det))
    return [ModeTrajectory(k, v) for k, v in by_label.items()]


def write_statistics(stats: Mapping[str, ModeStatistics], path, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode_label", "mean_f_hz", "delta_f_pct", "mean_xi_pct", "delta_xi_pct",
                    "detection_rate", "n_detected"])
        for label, s in stats.items():
            w.writerow([label, f"{s.mean_f:.4f}", f"{s.delta_f:.2f}", f"{s.mean_xi:.2f}",
                        f"{s.delta_xi:.0f}", f"{s.detection_rate:.3f}", s.n_detected])


def window_grid(start: datetime, count: int, window: float = 3600.0) -> list:
    return [start + timedelta(seconds=window * k) for k in range(count)]
