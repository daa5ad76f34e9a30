"""
Synthetic tower: decoupled modal models, exact discretization, excitation
generators, sensor noise and temperature-driven frequency drift.

Random numbers come from NumPy's PCG64 bit generator seeded through a
``SeedSequence([seed, stream...])``, so every stream is reproducible
from the integer seed alone.

The default tower uses the SS20 mean frequencies and damping ratios
of the monitored masonry tower. Its mode shapes are plausible
stand-ins (bending x, bending y, torsion, torsion-bending) and are not
measured ordinates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone
from typing import Sequence

import numpy as np
from scipy import linalg, signal

from .core import ChannelMeta, MultiChannelRecord, TimeSeriesSegment, format_utc, to_us
from .errors import ParameterError
from .modal import EnvSeries

OUTPUT_UNITS = {"velocity": "m/s", "acceleration": "m/s^2"}
EXCITATION_KINDS = ("white_noise", "harmonic", "pulse", "gust", "quarter_hour_impulses")

TOWER_FREQUENCIES = (1.0281, 1.2813, 4.0524, 4.4858)
TOWER_DAMPING = (0.0090, 0.0126, 0.0203, 0.0188)
TOWER_HEIGHTS = {"S942": 0.0, "S943": 24.0, "S2": 37.0, "S945": 42.0}
SS20_SENSITIVITY = 200.0  # V/(m/s)
FIFTH_FREQUENCY = 5.7
G_TILT_DEFAULT = 9.80665e-4  # 1e-4 rad of tilt, in m/s^2

# channels: S943.x, S943.y, S945.x, S945.y
_TOWER_SHAPES = (
    (0.48, 0.03, 1.00, 0.06),
    (0.04, 0.50, 0.08, 1.00),
    (0.30, -0.25, 1.00, -0.80),
    (0.10, 0.20, 1.00, 0.75),
)
# base x, y, z -> modal force
_TOWER_PARTICIPATION = (
    (1.00, 0.05, 0.00),
    (0.05, 1.00, 0.00),
    (0.40, 0.40, 0.00),
    (0.50, 0.30, 0.10),
)


def rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *stream])))


@dataclass(frozen=True)
class Mode:
    frequency: float
    damping: float
    shape: np.ndarray
    gain: float = 1.0
    participation: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "shape", np.asarray(self.shape, dtype=float))
        if not 0 <= self.damping < 1:
            raise ParameterError("damping must be in [0, 1)")
        if not self.frequency > 0:
            raise ParameterError("frequency must be positive")
        if self.gain < 0:
            raise ParameterError("gain must be non-negative")

    @property
    def omega(self) -> float:
        return 2 * np.pi * self.frequency


@dataclass(frozen=True)
class ModalModel:
    """Ground-truth description of a tower.

    ``channels`` are the response sensors, ``base_channels`` the optional
    three-component station at the base that records the ground input.
    """

    modes: tuple
    dt: float
    channels: tuple
    sensor_noise: np.ndarray | None = None
    output: str = "velocity"
    base_channels: tuple = ()
    base_noise: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "base_channels", tuple(self.base_channels))
        noise = np.zeros(len(self.channels)) if self.sensor_noise is None else self.sensor_noise
        noise = np.broadcast_to(np.asarray(noise, float), (len(self.channels),)).copy()
        object.__setattr__(self, "sensor_noise", noise)
        if self.output not in OUTPUT_UNITS:
            raise ParameterError(f"unknown output kind {self.output!r}")
        nyq = 0.5 / self.dt
        for m in self.modes:
            if m.frequency >= nyq:
                raise ParameterError(f"mode at {m.frequency:g} Hz is above Nyquist {nyq:g} Hz")
            if m.shape.size != len(self.channels):
                raise ParameterError("mode shape length must equal the channel count")

    @property
    def rate(self) -> float:
        return 1.0 / self.dt

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([m.frequency for m in self.modes])

    @property
    def dampings(self) -> np.ndarray:
        return np.array([m.damping for m in self.modes])

    @property
    def shapes(self) -> np.ndarray:
        return np.column_stack([m.shape for m in self.modes])

    def with_modes(self, modes) -> "ModalModel":
        return replace(self, modes=tuple(modes))


@dataclass(frozen=True)
class DiscreteModel:
    """Block-diagonal discrete modal state space, one modal force per mode."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    dt: float


@dataclass(frozen=True)
class ExcitationSpec:
    """One excitation component; several are summed.

    ``at_base`` routes the signal through the base ground motion (recorded
    by the base station) instead of applying it directly as modal force.
    """

    kind: str
    amp: float = 1.0
    f: float = 0.0
    t0: float = 0.0
    width: float = 0.0
    ramp: float = 0.0
    axis: str = "x"
    at_base: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.kind not in EXCITATION_KINDS:
            raise ParameterError(f"unknown excitation kind {self.kind!r}")
        if self.amp < 0:
            raise ParameterError("excitation amplitude must be non-negative")

    @classmethod
    def white_noise(cls, amp=1.0, at_base=False, seed=0):
        return cls("white_noise", amp=amp, at_base=at_base, seed=seed)

    @classmethod
    def harmonic(cls, f, amp, at_base=False, axis="x"):
        return cls("harmonic", amp=amp, f=f, at_base=at_base, axis=axis)

    @classmethod
    def pulse(cls, t0, width, amp):
        return cls("pulse", amp=amp, t0=t0, width=width)

    @classmethod
    def gust(cls, t0, ramp, amp):
        return cls("gust", amp=amp, t0=t0, ramp=ramp)

    @classmethod
    def quarter_hour_impulses(cls, amp, axis="x"):
        return cls("quarter_hour_impulses", amp=amp, axis=axis)


@dataclass(frozen=True)
class DriftSpec:
    temperature: EnvSeries
    sensitivity_above0: float
    sensitivity_below0: float
    lag: float = 0.0  # hours
    t_ref: float = 0.0


# ---------------------------------------------------------------------------
# Discretization

def mode_block(f: float, xi: float, dt: float, output: str = "velocity"):
    """Exact (zero-order-hold) discretization of one modal oscillator.

    State ``[q, dq/dt]`` of ``q'' + 2 xi w q' + w^2 q = u``. The 2x2
    exponential uses ``exp(At) = e^(sigma t) [cos(wd t) I + sin(wd t)/wd (A - sigma I)]``
    with ``sigma = -xi w`` and ``wd = w sqrt(1 - xi^2)``.

    Returns ``(Ad, Bd, c, d)`` for the chosen output quantity.
    """
    w = 2 * np.pi * f
    sigma = -xi * w
    wd = w * np.sqrt(1.0 - xi * xi)
    Ac = np.array([[0.0, 1.0], [-w * w, -2 * xi * w]])
    Ad = np.exp(sigma * dt) * (np.cos(wd * dt) * np.eye(2)
                               + np.sin(wd * dt) / wd * (Ac - sigma * np.eye(2)))
    Ac_inv = np.array([[-2 * xi * w, -1.0], [w * w, 0.0]]) / (w * w)
    Bd = Ac_inv @ (Ad - np.eye(2)) @ np.array([0.0, 1.0])
    if output == "displacement":
        c, d = np.array([1.0, 0.0]), 0.0
    elif output == "velocity":
        c, d = np.array([0.0, 1.0]), 0.0
    elif output == "acceleration":
        c, d = np.array([-w * w, -2 * xi * w]), 1.0
    else:
        raise ParameterError(f"unknown output kind {output!r}")
    return Ad, Bd, c, d


def build_model(modes: Sequence[Mode], dt: float, output: str = "velocity") -> DiscreteModel:
    """Block-diagonal discrete state space of decoupled modes."""
    nyq = 0.5 / dt
    m = len(modes)
    l = modes[0].shape.size if m else 0
    A = np.zeros((2 * m, 2 * m))
    B = np.zeros((2 * m, m))
    C = np.zeros((l, 2 * m))
    D = np.zeros((l, m))
    for k, md in enumerate(modes):
        if md.frequency >= nyq:
            raise ParameterError(f"mode at {md.frequency:g} Hz is above Nyquist {nyq:g} Hz")
        Ad, Bd, c, d = mode_block(md.frequency, md.damping, dt, output)
        A[2 * k:2 * k + 2, 2 * k:2 * k + 2] = Ad
        B[2 * k:2 * k + 2, k] = Bd
        C[:, 2 * k:2 * k + 2] = np.outer(md.shape, c)
        D[:, k] = md.shape * d
    return DiscreteModel(A, B, C, D, dt)


# ---------------------------------------------------------------------------
# Simulation

def _axis_weights(model: ModalModel, axis: str) -> np.ndarray:
    on_axis = np.array([c.component == axis for c in model.channels])
    w = []
    for m in model.modes:
        tot = np.abs(m.shape).sum()
        w.append(np.abs(m.shape[on_axis]).sum() / tot if tot > 0 else 0.0)
    return np.array(w)


def _burn_in(model: ModalModel, stochastic: bool, cap: float = 1800.0) -> int:
    if not stochastic or not model.modes:
        return 0
    decay = min(m.damping * m.omega for m in model.modes)
    seconds = cap if decay <= 0 else min(cap, 5.0 / decay)
    return int(math.ceil(seconds / model.dt))


def modal_forces(model: ModalModel, excitation: Sequence[ExcitationSpec], n: int,
                 burn: int, seed: int, start: datetime):
    """Modal force matrix ``(burn + n, n_modes)`` and base motion ``(burn + n, 3)``."""
    nm = len(model.modes)
    total = burn + n
    u = np.zeros((total, nm))
    base = np.zeros((total, 3))
    t = (np.arange(total) - burn) * model.dt
    gains = np.array([m.gain for m in model.modes])
    gamma = np.array([m.participation for m in model.modes], dtype=float).reshape(nm, 3)
    axes = {"x": 0, "y": 1, "z": 2}
    for idx, ex in enumerate(excitation):
        if ex.kind == "white_noise":
            g = rng(seed, 1, idx, ex.seed)
            if ex.at_base:
                base += ex.amp * g.standard_normal((total, 3))
            else:
                u += ex.amp * g.standard_normal((total, nm))
            continue
        live = t >= 0
        if ex.kind == "harmonic":
            s = ex.amp * np.sin(2 * np.pi * ex.f * t) * live
        elif ex.kind == "pulse":
            s = ex.amp * ((t >= ex.t0) & (t < ex.t0 + ex.width))
        elif ex.kind == "gust":
            r = max(ex.ramp, model.dt)
            tt = t - ex.t0
            s = ex.amp * np.clip(np.minimum(tt / r, (3 * r - tt) / r), 0.0, 1.0)
        else:  # quarter_hour_impulses
            t0_us = to_us(start)
            stamps = t0_us + np.round(t * 1e6).astype(np.int64)
            q = 900 * 1_000_000
            hit = live & ((stamps % q) < model.dt * 1e6)
            s = ex.amp * hit / model.dt
            u += np.outer(s, _axis_weights(model, ex.axis))
            continue
        if ex.at_base:
            base[:, axes[ex.axis]] += s
        else:
            u += s[:, None]
    u += base @ gamma.T
    return u * gains, base


def simulate(model: ModalModel, excitation: Sequence[ExcitationSpec] | ExcitationSpec,
             duration: float, seed: int = 0,
             start: datetime = datetime(2017, 11, 20, tzinfo=timezone.utc),
             snr: float | None = None, burn_in: float | None = None) -> MultiChannelRecord:
    """Simulate the tower response and return it as a record.

    The response is computed mode by mode with the exact discrete transfer
    function of each oscillator. Random forcing starts ``burn_in`` seconds
    before ``start`` (default five decay times of the slowest mode, capped
    at 30 min) so the record is stationary. With ``snr`` the per-channel
    sensor noise RMS is set to signal RMS / snr; otherwise
    ``model.sensor_noise`` is used.
    """
    if isinstance(excitation, ExcitationSpec):
        excitation = [excitation]
    excitation = list(excitation)
    n = int(round(duration / model.dt))
    stochastic = any(e.kind == "white_noise" for e in excitation)
    burn = _burn_in(model, stochastic) if burn_in is None else int(round(burn_in / model.dt))
    u, base = modal_forces(model, excitation, n, burn, seed, start)
    y = np.zeros((burn + n, len(model.channels)))
    for k, m in enumerate(model.modes):
        if not np.any(u[:, k]):
            continue
        Ad, Bd, c, d = mode_block(m.frequency, m.damping, model.dt, model.output)
        num, den = signal.ss2tf(Ad, Bd[:, None], c[None, :], np.array([[d]]))
        q = signal.lfilter(num[0], den, u[:, k])
        y += np.outer(q, m.shape)
    y = y[burn:]
    base = base[burn:]
    noise_rms = model.sensor_noise
    if snr is not None:
        noise_rms = np.sqrt(np.mean(y ** 2, axis=0)) / snr
    g = rng(seed, 2)
    y = y + g.standard_normal(y.shape) * noise_rms
    unit = OUTPUT_UNITS[model.output]
    chans = [(meta, (TimeSeriesSegment(start, model.rate, y[:, j], unit),))
             for j, meta in enumerate(model.channels)]
    if model.base_channels:
        b = base + model.base_noise * rng(seed, 3).standard_normal(base.shape)
        chans += [(meta, (TimeSeriesSegment(start, model.rate, b[:, j], unit),))
                  for j, meta in enumerate(model.base_channels)]
    return MultiChannelRecord(tuple(chans), {"seed": seed, "snr": snr})


def simulate_windows(models: Sequence, excitation, window: float, seed: int, snr=None,
                     start: datetime | None = None) -> MultiChannelRecord:
    """Concatenate independently simulated windows (one model per window).

    ``models`` is a sequence of ``(window_start, ModalModel)`` pairs; window
    ``k`` uses seed stream ``(seed, k)``.
    """
    pieces = {}
    metas = None
    for k, (ws, model) in enumerate(models):
        rec = simulate(model, excitation, window, seed=int(rng(seed, 4, k).integers(2**31)),
                       start=ws, snr=snr)
        metas = rec.metas
        for meta, segs in rec.channels:
            pieces.setdefault(meta.key, []).extend(segs)
    if metas is None:
        return MultiChannelRecord(())
    return MultiChannelRecord(tuple((m, tuple(pieces[m.key])) for m in metas), {"seed": seed})


# ---------------------------------------------------------------------------
# Drift and gating

def temperature_at(env: EnvSeries, t_us: np.ndarray) -> np.ndarray:
    return np.interp(np.asarray(t_us, float), env.times_us().astype(float), env.values)


def apply_drift(model: ModalModel, drift: DriftSpec, window: float = 3600.0,
                start: datetime | None = None, count: int | None = None) -> list:
    """Per-window models with frequencies scaled by ``1 + s (T(t - lag) - T_ref)``.

    ``s`` is ``sensitivity_above0`` when the lagged temperature is at or
    above 0 C, else ``sensitivity_below0``. Windows start at ``start``
    (default: first temperature sample floored to the window grid) and
    cover the temperature series unless ``count`` is given.
    """
    env = drift.temperature
    tus = env.times_us()
    w_us = int(round(window * 1e6))
    first = (int(tus[0]) // w_us) * w_us if start is None else to_us(start)
    if count is None:
        count = int((int(tus[-1]) - first) // w_us) + 1
    nyq = 0.5 / model.dt
    out = []
    for k in range(count):
        t = first + k * w_us
        T = float(temperature_at(env, [t - drift.lag * 3.6e9])[0])
        s = drift.sensitivity_above0 if T >= 0 else drift.sensitivity_below0
        scale = 1.0 + s * (T - drift.t_ref)
        modes = []
        for m in model.modes:
            f = m.frequency * scale
            if f >= nyq:
                raise ParameterError(f"drifted frequency {f:g} Hz reaches Nyquist")
            modes.append(replace(m, frequency=f))
        out.append((datetime.fromtimestamp(t / 1e6, timezone.utc), model.with_modes(modes)))
    return out


def gate_mode(models: Sequence, mode_index: int, fraction: float, seed: int = 0,
              off_gain: float = 0.0) -> tuple:
    """Switch one mode's excitation off in all but ``fraction`` of the windows.

    Exactly ``round(fraction * len(models))`` windows, chosen at random,
    keep the mode. Returns ``(models, active_mask)``.
    """
    n = len(models)
    active = np.zeros(n, bool)
    active[rng(seed, 5).permutation(n)[:int(round(fraction * n))]] = True
    out = []
    for (ws, model), on in zip(models, active):
        modes = list(model.modes)
        if not on:
            modes[mode_index] = replace(modes[mode_index], gain=off_gain)
        out.append((ws, model.with_modes(modes)))
    return out, active


# ---------------------------------------------------------------------------
# Scenarios

def tower_channels(rate: float, kind: str = "velocity", sensitivity: float = SS20_SENSITIVITY) -> tuple:
    return tuple(ChannelMeta(st, c, TOWER_HEIGHTS[st], kind, sensitivity, rate)
                 for st in ("S943", "S945") for c in ("x", "y"))


def base_channels(rate: float, kind: str = "velocity") -> tuple:
    return tuple(ChannelMeta("S942", c, 0.0, kind, SS20_SENSITIVITY, rate) for c in "xyz")


def agi_channels(rate: float, station: str = "S2") -> tuple:
    """Horizontal accelerometer pair (sensitivity 1, samples already in m/s^2)."""
    return tuple(ChannelMeta(station, c, TOWER_HEIGHTS[station], "acceleration", 1.0, rate)
                 for c in ("x", "y"))


def shapes_at(model: ModalModel, height: float) -> list:
    """Mode ordinates ``(x, y)`` at ``height`` by linear interpolation along the tower.

    The ordinates of each component are interpolated between the model's
    sensor heights, with zero at the ground.
    """
    out = []
    for m in model.modes:
        row = []
        for comp in ("x", "y"):
            pts = sorted((c.height, v) for c, v in zip(model.channels, m.shape)
                         if c.component == comp)
            hs = [0.0] + [h for h, _ in pts]
            vs = [0.0] + [v for _, v in pts]
            row.append(float(np.interp(height, hs, vs)))
        out.append(row)
    return out


def default_tower(rate: float = 100.0, output: str = "velocity", with_base: bool = False,
                  gains=(1.0, 1.0, 1.0, 1.0), fifth_mode: bool = False,
                  base_noise: float = 0.0) -> ModalModel:
    """Four-mode tower at the SS20 campaign means; optional 5.7 Hz fifth mode."""
    modes = [Mode(f, xi, shape, g, part) for f, xi, shape, g, part in
             zip(TOWER_FREQUENCIES, TOWER_DAMPING, _TOWER_SHAPES, gains, _TOWER_PARTICIPATION)]
    if fifth_mode:
        modes.append(Mode(FIFTH_FREQUENCY, 0.02, (0.6, -0.5, -0.4, 1.0), 1.0, (0.3, 0.3, 0.0)))
    kind = "velocity" if output == "velocity" else "acceleration"
    return ModalModel(
        modes=tuple(modes), dt=1.0 / rate, channels=tower_channels(rate, kind),
        output=output, base_channels=base_channels(rate, kind) if with_base else (),
        base_noise=base_noise)


def daily_temperature(start: datetime, hours: int, mean: float = 8.0, amplitude: float = 5.0,
                      trend: float = 0.0, wander: float = 2.0, seed: int = 0) -> EnvSeries:
    """Hourly temperature: daily sinusoid, linear trend and smooth random wander."""
    t = np.arange(hours, dtype=float)
    g = rng(seed, 6)
    walk = np.convolve(g.standard_normal(hours + 48), np.hanning(48), mode="same")[24:24 + hours]
    walk = wander * walk / (np.std(walk) or 1.0)
    vals = mean + amplitude * np.sin(2 * np.pi * (t - 9.0) / 24.0) + trend * t / 24.0 + walk
    times = [start + timedelta(hours=k) for k in range(hours)]
    return EnvSeries("temperature", times, vals)


def write_truth(models: Sequence, path, comment: str | None = None) -> None:
    """Ground-truth sidecar: one row per window and mode."""
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_start", "mode_index", "f_hz", "xi", "gain"])
        for ws, model in models:
            for k, m in enumerate(model.modes):
                w.writerow([format_utc(ws), k, repr(m.frequency), repr(m.damping), repr(m.gain)])


# ---------------------------------------------------------------------------
# Exact covariance oracle

def random_modal_system(g: np.random.Generator, n_modes: int, n_channels: int, dt: float,
                        f_range=(0.02, 0.4), xi_range=(0.005, 0.05), min_sep: float = 0.02):
    """Random stable modal state space ``(A, C)`` with well-separated poles.

    ``f_range`` is given as a fraction of the sampling rate.
    """
    rate = 1.0 / dt
    while True:
        f = np.sort(g.uniform(*f_range, n_modes)) * rate
        if n_modes < 2 or np.min(np.diff(f)) / rate > min_sep:
            break
    xi = g.uniform(*xi_range, n_modes)
    modes = [Mode(fk, xk, g.standard_normal(n_channels)) for fk, xk in zip(f, xi)]
    dm = build_model(modes, dt, "displacement")
    return dm.A, dm.C, f, xi


def analytic_covariances(A: np.ndarray, C: np.ndarray, Q: np.ndarray, R: np.ndarray,
                         max_lag: int, S: np.ndarray | None = None) -> np.ndarray:
    """Exact output covariances of ``x+ = A x + w``, ``y = C x + v``.

    ``Sigma = A Sigma A^T + Q``, ``G = A Sigma C^T + S``,
    ``Lambda_0 = C Sigma C^T + R`` and ``Lambda_k = C A^(k-1) G``.
    """
    n = A.shape[0]
    S = np.zeros((n, C.shape[0])) if S is None else S
    Sigma = linalg.solve_discrete_lyapunov(A, Q)
    G = A @ Sigma @ C.T + S
    out = [C @ Sigma @ C.T + R]
    Ak = np.eye(n)
    for _ in range(max_lag):
        out.append(C @ Ak @ G)
        Ak = Ak @ A
    return np.array(out)


def inject_packet(record: MultiChannelRecord, keys: Sequence[str], t0: datetime,
                  frequency: float, duration: float, amplitude: float,
                  taper: float = 30.0) -> MultiChannelRecord:
    """Add a cosine-tapered sinusoidal wave packet to selected channels."""
    chans = []
    for meta, segs in record.channels:
        if meta.key not in keys:
            chans.append((meta, segs))
            continue
        new = []
        for seg in segs:
            t = (seg.sample_us() - to_us(t0)) / 1e6
            env = np.clip(np.minimum(t, duration - t) / taper, 0.0, 1.0)
            env = 0.5 - 0.5 * np.cos(np.pi * env)
            new.append(seg.with_samples(seg.samples + amplitude * env * np.sin(2 * np.pi * frequency * t)))
        chans.append((meta, tuple(new)))
    return MultiChannelRecord(tuple(chans), record.info)


def inject_burst(record: MultiChannelRecord, keys: Sequence[str], t0: datetime,
                 duration: float, factor: float, seed: int = 0) -> MultiChannelRecord:
    """Add broadband noise raising the RMS ``factor``-fold for ``duration`` seconds."""
    chans = []
    for j, (meta, segs) in enumerate(record.channels):
        if meta.key not in keys:
            chans.append((meta, segs))
            continue
        new = []
        for seg in segs:
            t = (seg.sample_us() - to_us(t0)) / 1e6
            on = (t >= 0) & (t < duration)
            rms = np.std(seg.samples)
            extra = rng(seed, 7, j).standard_normal(seg.samples.size) * rms * np.sqrt(factor ** 2 - 1)
            new.append(seg.with_samples(seg.samples + extra * on))
        chans.append((meta, tuple(new)))
    return MultiChannelRecord(tuple(chans), record.info)


def tilt_record(days: float = 4.0, rate: float = 5.0, amplitude: float = G_TILT_DEFAULT,
                offset_h: float = 5.0, noise: float = 0.0, seed: int = 0,
                start: datetime = datetime(2018, 1, 11, tzinfo=timezone.utc),
                station: str = "S2") -> MultiChannelRecord:
    """Accelerometer pair at +37 m with a daily oscillation; y lags x by ``offset_h``."""
    n = int(round(days * 86400 * rate))
    t = np.arange(n) / rate
    w = 2 * np.pi / 86400.0
    g = rng(seed, 8)
    ax = amplitude * np.sin(w * t) + noise * g.standard_normal(n)
    ay = amplitude * np.sin(w * (t - offset_h * 3600.0)) + noise * g.standard_normal(n)
    metas = [ChannelMeta(station, c, TOWER_HEIGHTS[station], "acceleration", 1.0, rate)
             for c in ("x", "y")]
    return MultiChannelRecord(tuple(
        (m, (TimeSeriesSegment(start, rate, a, "m/s^2"),)) for m, a in zip(metas, (ax, ay))))
