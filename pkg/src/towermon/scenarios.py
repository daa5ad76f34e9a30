"""
Named synthetic campaigns used by ``towermon simulate`` and the test suite.

Each builder returns a :class:`Scenario` holding the record plus whatever
ground truth the scenario defines (per-window models, temperature,
catalog, gating mask).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime, timedelta, timezone

import numpy as np

from .core import CatalogEntry, MultiChannelRecord
from .dsp import filter_array
from .errors import ParameterError
from .modal import EnvSeries
from .sim import (DriftSpec, ExcitationSpec, ModalModel, agi_channels, apply_drift,
                  daily_temperature, default_tower, gate_mode, inject_burst, inject_packet,
                  shapes_at, simulate, simulate_windows, tilt_record)

UTC = timezone.utc

# Origins from the campaign's earthquake and teleseism bulletins.
CAMPAIGN_CATALOG = (
    ("2017-11-17", "22:34:21", "China", 6.4),
    ("2017-11-19", "09:25:50", "New Caledonia", 6.4),
    ("2017-11-19", "12:10:12", "Parma", 3.3),
    ("2017-11-19", "12:37:44", "Parma", 4.4),
    ("2017-11-19", "15:09:04", "New Caledonia", 6.6),
    ("2017-11-19", "22:43:31", "New Caledonia", 6.9),
    ("2017-11-30", "06:32:50", "Central Mid-Atlantic Ridge", 6.3),
    ("2017-12-01", "02:32:48", "Iran", 6.2),
    ("2017-12-03", "23:34:11", "Amatrice", 4.0),
    ("2018-01-11", "18:26:24", "Myanmar", 6.0),
    ("2018-01-14", "09:18:44", "Peru", 7.1),
    ("2018-01-23", "09:31:43", "United States (sea)", 7.6),
    ("2018-01-24", "10:51:19", "Japan", 6.4),
    ("2018-01-25", "01:15:59", "India", 6.0),
    ("2018-01-25", "02:10:37", "Russia", 6.3),
)

PERU_ARRIVAL = datetime(2018, 1, 14, 9, 33, 2, tzinfo=UTC)
PARMA_ARRIVAL = datetime(2017, 11, 19, 12, 38, 20, tzinfo=UTC)
SCENARIOS = ("default", "ema", "drift", "vregime", "gated", "quiet", "events", "tilt")


def campaign_catalog() -> list:
    out = []
    for d, t, loc, mag in CAMPAIGN_CATALOG:
        origin = datetime.fromisoformat(f"{d}T{t}+00:00")
        out.append(CatalogEntry(origin, loc, mag))
    return sorted(out)


@dataclass
class Scenario:
    name: str
    record: MultiChannelRecord
    models: list = field(default_factory=list)   # [(window_start, ModalModel)]
    temperature: EnvSeries | None = None
    catalog: list = field(default_factory=list)
    active: np.ndarray | None = None


def _start(start):
    return datetime(2017, 11, 20, tzinfo=UTC) if start is None else start


def default_scenario(hours=2, rate=100.0, seed=0, snr=10.0, start=None) -> Scenario:
    """Four-mode tower under white-noise forcing, independent hourly windows."""
    start = _start(start)
    model = default_tower(rate)
    models = [(start + timedelta(hours=k), model) for k in range(int(hours))]
    rec = simulate_windows(models, ExcitationSpec.white_noise(), 3600.0, seed, snr)
    return Scenario("default", rec, models)


def ema_scenario(hours=1, rate=100.0, seed=0, snr=10.0, start=None,
                 tone_amp=3.0, tone_f=3.0) -> Scenario:
    """Base-driven tower with a 3 Hz tone present only in the base motion."""
    start = _start(start)
    model = default_tower(rate, with_base=True, base_noise=0.01)
    exc = [ExcitationSpec.white_noise(at_base=True),
           ExcitationSpec.harmonic(tone_f, tone_amp, at_base=True, axis="x")]
    models = [(start + timedelta(hours=k), model) for k in range(int(hours))]
    rec = simulate_windows(models, exc, 3600.0, seed, snr)
    return Scenario("ema", rec, models)


def drift_scenario(hours=720, rate=20.0, seed=0, snr=10.0, start=None,
                   lag=3.0, swing=0.03) -> Scenario:
    """Temperature-driven frequency drift of +-``swing`` applied ``lag`` hours late."""
    start = _start(start)
    temp = daily_temperature(start - timedelta(hours=24), int(hours) + 48, seed=seed,
                             trend=-0.05, wander=2.5)
    t_ref = float(np.mean(temp.values))
    s = swing / float(np.max(np.abs(temp.values - t_ref)))
    drift = DriftSpec(temp, s, s, lag, t_ref)
    models = apply_drift(default_tower(rate), drift, 3600.0, start, int(hours))
    rec = simulate_windows(models, ExcitationSpec.white_noise(), 3600.0, seed, snr)
    return Scenario("drift", rec, models, temp)


def vregime_scenario(hours=240, rate=20.0, seed=0, snr=10.0, start=None,
                     sensitivity=0.004) -> Scenario:
    """Temperature oscillating around 0 C with opposite sensitivities per regime."""
    start = _start(start)
    temp = daily_temperature(start - timedelta(hours=24), int(hours) + 48, mean=0.0,
                             amplitude=6.0, wander=1.5, seed=seed)
    drift = DriftSpec(temp, sensitivity, -sensitivity, 0.0, 0.0)
    models = apply_drift(default_tower(rate), drift, 3600.0, start, int(hours))
    rec = simulate_windows(models, ExcitationSpec.white_noise(), 3600.0, seed, snr)
    return Scenario("vregime", rec, models, temp)


def gated_scenario(hours=100, rate=20.0, seed=0, snr=10.0, start=None,
                   fraction=0.3, mode_index=3) -> Scenario:
    """The fourth mode is excited in only ``fraction`` of the windows."""
    start = _start(start)
    model = default_tower(rate)
    models = [(start + timedelta(hours=k), model) for k in range(int(hours))]
    models, active = gate_mode(models, mode_index, fraction, seed)
    rec = simulate_windows(models, ExcitationSpec.white_noise(), 3600.0, seed, snr)
    return Scenario("gated", rec, models, active=active)


def quiet_scenario(hours=24, rate=20.0, seed=0, start=None, ambient_rms=2e-4) -> Scenario:
    """Stationary ambient response with base channels and the +37 m accelerometers, no events.

    All channels share one base motion. The record is scaled so that the
    larger accelerometer RMS equals ``ambient_rms`` (m/s^2), which puts
    the synthetic quiet city on a physical scale.
    """
    start = _start(start)
    model = default_tower(rate, with_base=True, base_noise=0.05)
    exc = ExcitationSpec.white_noise(at_base=True)
    rec = simulate(model, exc, hours * 3600.0, seed, start, snr=10.0)
    agi = agi_channels(rate)
    modes = [replace(m, shape=np.array(sh)) for m, sh in zip(model.modes,
                                                             shapes_at(model, agi[0].height))]
    acc_model = ModalModel(modes, model.dt, agi, output="acceleration")
    acc = simulate(acc_model, exc, hours * 3600.0, seed, start, snr=10.0)
    scale = ambient_rms / max(float(np.std(acc.segments(m.key)[0].samples)) for m in agi)
    chans = tuple((meta, tuple(s.with_samples(s.samples * scale) for s in segs))
                  for meta, segs in rec.channels + acc.channels)
    rec = MultiChannelRecord(chans, {"seed": seed, "scale": scale})
    return Scenario("quiet", rec, [(start, model)], catalog=campaign_catalog())


def _band_rms(rec, key, band):
    seg = rec.segments(key)[0]
    y = filter_array(seg.samples - seg.samples.mean(), seg.rate, "bandpass", band, 4,
                     zero_phase=True)
    return float(np.std(y))


def events_scenario(rate=20.0, seed=0, span_h=3, packet_f=0.1, packet_factor=20.0,
                    burst_factor=10.0) -> Scenario:
    """Two ambient stretches: a regional burst (Parma) and a teleseism packet (Peru)."""
    model = default_tower(rate, with_base=True, base_noise=0.05)
    exc = ExcitationSpec.white_noise(at_base=True)
    keys = [m.key for m in model.channels + model.base_channels]
    parts = []
    for k, arrival in enumerate((PARMA_ARRIVAL, PERU_ARRIVAL)):
        t0 = arrival.replace(minute=0, second=0) - timedelta(hours=1)
        parts.append(simulate(model, exc, span_h * 3600.0, seed + k, t0, snr=10.0))
    parma, peru = parts
    parma = inject_burst(parma, keys, PARMA_ARRIVAL, 20.0, burst_factor, seed)
    amp = packet_factor * _band_rms(peru, "S942.x", (0.04, 1.0)) * np.sqrt(2)
    peru = inject_packet(peru, keys, PERU_ARRIVAL, packet_f, 1800.0, amp)
    chans = tuple((m, parma.segments(m.key) + peru.segments(m.key)) for m in parma.metas)
    rec = MultiChannelRecord(chans, {"seed": seed})
    return Scenario("events", rec, [], catalog=campaign_catalog())


def tilt_scenario(days=4.0, rate=5.0, seed=0, offset_h=5.0, noise=0.0) -> Scenario:
    rec = tilt_record(days, rate, offset_h=offset_h, noise=noise, seed=seed)
    return Scenario("tilt", rec)


def build(name: str, hours=None, rate=None, seed=0, snr=10.0, start=None) -> Scenario:
    """Dispatch by scenario name; ``None`` keeps the scenario's own default.

    ``start`` applies to the scenarios without fixed dates (all but
    events and tilt).
    """
    kw = {}
    if start is not None and name not in ("events", "tilt"):
        kw["start"] = start
    if rate is not None:
        kw["rate"] = rate
    if name in ("default", "ema", "drift", "vregime", "gated", "quiet") and hours is not None:
        kw["hours"] = hours
    if name in ("default", "ema", "drift", "vregime", "gated"):
        kw["snr"] = snr
    builders = {"default": default_scenario, "ema": ema_scenario, "drift": drift_scenario,
                "vregime": vregime_scenario, "gated": gated_scenario,
                "quiet": quiet_scenario, "events": events_scenario}
    if name == "tilt":
        return tilt_scenario(days=(hours or 96) / 24.0, rate=rate or 5.0, seed=seed)
    if name not in builders:
        raise ParameterError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    return builders[name](seed=seed, **kw)
