"""
Command-line entry point: ``towermon <subcommand> [options]``.

Every subcommand writes CSV outputs whose first line names the config
digest, plus a ``manifest_<subcommand>.json`` with parameters, versions and input
digests. Exit codes: 0 success, 1 usage or configuration error, 2 data
error, 3 insufficient data.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import warnings
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import load_config
from .core import (G_STANDARD, format_utc, ingest_csv, load_catalog, parse_utc,
                   read_campaign, read_channels, segment_hourly, write_campaign, write_catalog,
                   counts_to_physical, MultiChannelRecord)
from .dsp import filter_array, psd_welch, spectrogram, write_spectrogram, write_spectrum
from .ema import write_cmif
from .errors import (ConfigurationError, DataError, InsufficientDataError, ParameterError,
                     ParseError)
from .modal import (correlate_env, mode_statistics, read_env, read_trajectories, track_modes,
                    write_env, write_statistics, write_trajectories)
from .pipeline import (estimates_for_tracking, identify_cmif, identify_ssi, mean_cmif,
                       read_windows, write_peaks, write_stabilization, write_windows)
from .plot import svg_lines
from .response import (axis_phase_shift, daily_avg_hourly_max, hourly_max_abs, match_catalog,
                       sta_lta_detect, teleseism_scan, tilt_series, write_events, write_levels,
                       write_tilt)
from .scenarios import SCENARIOS, build
from .sim import write_truth
from .ssi import read_modes, write_modes

log = logging.getLogger("towermon")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INSUFFICIENT = 0, 1, 2, 3
ROOT_ENV = "TOWERMON_ROOT"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# Run bookkeeping

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _input_digests(paths) -> dict:
    out = {}
    for p in paths:
        if p is None:
            continue
        p = Path(p)
        if p.is_dir():
            for f in sorted(p.rglob("*.csv")):
                out[str(f.relative_to(p.parent))] = _sha256(f)
        elif p.exists():
            out[p.name] = _sha256(p)
    return out


class Run:
    """Output directory, config digest and manifest for one subcommand call."""

    def __init__(self, command, cfg, out, params, inputs=()):
        self.command = command
        self.cfg = cfg
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.params = {k: v for k, v in params.items() if v is not None}
        self.digest = cfg.digest({"command": command, **self.params})
        self.inputs = list(inputs)
        self.outputs = []

    @property
    def comment(self) -> str:
        return f"config_digest={self.digest}"

    def path(self, name) -> Path:
        p = self.out / name
        self.outputs.append(name)
        return p

    def finish(self) -> None:
        manifest = {
            "command": self.command,
            "config_digest": self.digest,
            "config_source": self.cfg.source,
            "config": self.cfg.as_dict(),
            "parameters": self.params,
            "inputs": _input_digests(self.inputs),
            "outputs": sorted(set(self.outputs)),
            "versions": {"towermon": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__},
            "created_utc": format_utc(datetime.now(timezone.utc)),
        }
        with open(self.out / f"manifest_{self.command}.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


def _data_dir(args) -> Path:
    data = args.data or os.environ.get(ROOT_ENV)
    if not data:
        raise ConfigurationError(f"no data directory given and {ROOT_ENV} is unset")
    return Path(data)


def _out(args, default) -> Path:
    return Path(args.out) if args.out else Path(default)


def _load(data: Path):
    rec = read_campaign(data)
    if rec.is_empty():
        raise DataError(f"{data} contains no samples")
    return rec


# ---------------------------------------------------------------------------
# Subcommands

def cmd_simulate(args, cfg):
    s = cfg.section("simulate")
    name = args.scenario or s["scenario"]
    hours = args.hours if args.hours is not None else cfg.getfloat("simulate", "hours")
    rate = args.rate if args.rate is not None else cfg.getfloat("simulate", "rate")
    seed = args.seed if args.seed is not None else cfg.getint("simulate", "seed")
    snr = cfg.getfloat("simulate", "snr")
    try:
        start = parse_utc(s["start"]) if s.get("start", "").strip() else None
    except ValueError as exc:
        raise ConfigurationError(f"[simulate] start: {exc}") from None
    if hours is not None and hours < 1:
        raise ParameterError("--hours must be at least 1")
    if name in ("events", "tilt") and args.hours is None:
        hours = None
    if name == "tilt" and args.rate is None:
        rate = None
    run = Run("simulate", cfg, _out(args, "data"),
              {"scenario": name, "hours": hours, "rate": rate, "seed": seed, "snr": snr})
    sc = build(name, hours=int(hours) if hours else None, rate=rate, seed=seed, snr=snr,
               start=start)
    files = write_campaign(sc.record, run.out, run.comment)
    run.outputs += [str(Path(f).relative_to(run.out)) for f in files] + ["channels.csv"]
    if sc.models:
        write_truth(sc.models, run.path("truth.csv"), run.comment)
    if sc.temperature is not None:
        write_env(sc.temperature, run.path("temperature.csv"), run.comment)
    if sc.catalog:
        write_catalog(sc.catalog, run.path("catalog.csv"), run.comment)
    run.finish()
    print(f"{name}: {len(files)} waveform files written to {run.out}")


def cmd_ingest(args, cfg):
    src = Path(args.source)
    metas = read_channels(args.channels)
    rec = ingest_csv(src, metas)
    if rec.is_empty():
        raise DataError(f"{src} contains no samples for the declared channels")
    chans = []
    for meta, segs in rec.channels:
        conv = tuple(counts_to_physical(sg, meta, args.gain) if sg.unit in ("counts", "volts")
                     else sg for sg in segs)
        chans.append((meta, conv))
    rec = MultiChannelRecord(tuple(chans), rec.info)
    run = Run("ingest", cfg, _out(args, "campaign"), {"gain": args.gain}, [src, args.channels])
    files = write_campaign(rec, run.out, run.comment)
    run.outputs += [str(Path(f).relative_to(run.out)) for f in files] + ["channels.csv"]
    window = cfg.getfloat("campaign", "window")
    wins = segment_hourly(rec, window, 0.0)
    with open(run.path("coverage.csv"), "w", newline="") as fh:
        fh.write(f"# {run.comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_start"] + rec.keys)
        for win in wins:
            cov = win.info["coverage"]
            w.writerow([format_utc(win.info["window_start"])] + [f"{cov[k]:.4f}" for k in rec.keys])
    run.finish()
    print(f"ingested {len(rec.keys)} channels into {run.out}")


def _response_keys(cfg, rec):
    keys = cfg.keys("campaign", "channels")
    if keys:
        return keys
    inputs = set(cfg.keys("campaign", "input_channels"))
    return [k for k in rec.keys if k not in inputs]


def cmd_identify(args, cfg):
    data = _data_dir(args)
    rec = _load(data)
    window = cfg.getfloat("campaign", "window")
    coverage = cfg.getfloat("campaign", "coverage")
    keys = _response_keys(cfg, rec)
    if not keys:
        raise ConfigurationError("no response channels selected")
    if args.method == "ssi":
        params = cfg.ssi_params()
        run = Run("identify", cfg, _out(args, data), {"method": "ssi", "channels": keys}, [data])
        results = identify_ssi(rec, keys, params, window, coverage, args.workers,
                               keep_diagram=args.diagram)
        if args.diagram:
            write_stabilization(results, run.path("stabilization.csv"), run.comment)
    else:
        inputs = [k for k in cfg.keys("campaign", "input_channels") if k in rec.keys]
        if not inputs:
            raise ConfigurationError("CMIF needs base input channels present in the data")
        band = cfg.floats("cmif", "band") or None
        run = Run("identify", cfg, _out(args, data),
                  {"method": "cmif", "channels": keys, "inputs": inputs}, [data])
        results = identify_cmif(rec, inputs, keys, cfg.getint("cmif", "nfft"),
                                cfg.getfloat("cmif", "overlap"),
                                cfg.getfloat("cmif", "min_prominence"), band,
                                window, coverage, args.workers)
        write_peaks(results, run.path("cmif_peaks.csv"), run.comment)
        avg = mean_cmif(results)
        if avg is not None:
            write_cmif(avg, run.path("cmif.csv"), run.comment)
            if args.svg:
                sel = (avg.freqs > 0) & (avg.freqs <= (band[1] if band else avg.freqs[-1]))
                svg_lines(run.path("cmif.svg"),
                          [(f"curve {k + 1}", avg.freqs[sel], np.log10(avg.values[sel, k]))
                           for k in range(min(3, avg.values.shape[1]))],
                          "CMIF (window mean)", "frequency [Hz]", "log10 singular value^2")
    if not results:
        raise InsufficientDataError("no window passed the coverage threshold")
    width = len(keys) if args.method == "ssi" else 0
    write_modes(run.path("modes.csv"), [r.modes for r in results], width, run.comment)
    write_windows(results, run.path("windows.csv"), run.comment)
    run.finish()
    n_ok = sum(r.status == "ok" for r in results)
    print(f"{args.method}: {n_ok}/{len(results)} windows identified, "
          f"{sum(len(r.modes) for r in results)} modes")


def cmd_track(args, cfg):
    src = Path(args.data or os.environ.get(ROOT_ENV) or ".")
    if not (src / "modes.csv").exists() or not (src / "windows.csv").exists():
        raise DataError(f"{src} has no modes.csv/windows.csv; run identify first")
    baseline = cfg.baseline()
    run = Run("track", cfg, _out(args, src), {}, [src / "modes.csv", src / "windows.csv"])
    estimates = estimates_for_tracking(read_windows(src / "windows.csv"), read_modes(src / "modes.csv"))
    if not estimates:
        raise InsufficientDataError("no identified windows to track")
    trajs = track_modes(estimates, baseline, cfg.getfloat("tracking", "f_tol"),
                        cfg.getfloat("tracking", "mac_min"))
    write_trajectories(trajs, run.path("trajectories.csv"), run.comment)
    stats = {}
    for tr in trajs:
        try:
            stats[tr.mode_label] = mode_statistics(tr)
        except InsufficientDataError as exc:
            log.warning("%s", exc)
    if not stats:
        raise InsufficientDataError("no mode detected in at least two windows")
    write_statistics(stats, run.path("statistics.csv"), run.comment)
    if args.svg:
        t0 = trajs[0].times[0]
        series = [(tr.mode_label, [(t - t0).total_seconds() / 86400 for t in tr.times],
                   tr.frequencies) for tr in trajs]
        svg_lines(run.path("frequencies.svg"), series, "Tracked frequencies",
                  f"days since {format_utc(t0)[:10]}", "frequency [Hz]")
    run.finish()
    for label, s in stats.items():
        print(f"{label}: f={s.mean_f:.4f} Hz  delta={s.delta_f:.2f}%  "
              f"xi={s.mean_xi:.2f}%  detected {s.detection_rate:.0%}")


def cmd_correlate(args, cfg):
    src = Path(args.data or os.environ.get(ROOT_ENV) or ".")
    env_path = args.temperature or cfg.get("environment", "temperature") or None
    if not env_path:
        cand = src / "temperature.csv"
        env_path = cand if cand.exists() else None
    if env_path is None:
        raise ConfigurationError("no temperature series given")
    if not (src / "trajectories.csv").exists():
        raise DataError(f"{src} has no trajectories.csv; run track first")
    env = read_env(env_path)
    split = cfg.get("environment", "regime_split").strip()
    split = float(split) if split else None
    max_lag = cfg.getfloat("environment", "max_lag")
    run = Run("correlate", cfg, _out(args, src), {"regime_split": split, "max_lag": max_lag},
              [src / "trajectories.csv", env_path])
    trajs = read_trajectories(src / "trajectories.csv")
    wanted = args.mode or cfg.keys("environment", "mode") or [t.mode_label for t in trajs]
    rows, lag_rows = [], []
    for tr in trajs:
        if tr.mode_label not in wanted:
            continue
        res = correlate_env(tr, env, max_lag, split)
        below, above = res.per_regime or (float("nan"), float("nan"))
        rows.append([tr.mode_label, f"{res.r:.6f}", f"{res.best_lag:g}", res.n_pairs,
                     f"{below:.6f}", f"{above:.6f}"])
        lag_rows += [[tr.mode_label, int(L), f"{r:.6f}"] for L, r in zip(res.lags, res.r_by_lag)]
    if not rows:
        raise ConfigurationError(f"none of the modes {wanted} found in trajectories.csv")
    for name, head, body in (("correlation.csv", ["mode_label", "r", "best_lag_h", "n_pairs",
                                                  "r_below", "r_above"], rows),
                             ("correlation_lags.csv", ["mode_label", "lag_h", "r"], lag_rows)):
        with open(run.path(name), "w", newline="") as fh:
            fh.write(f"# {run.comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(head)
            w.writerows(body)
    run.finish()
    for r in rows:
        print(f"{r[0]}: r={r[1]} best lag {r[2]} h over {r[3]} windows")


def cmd_levels(args, cfg):
    data = _data_dir(args)
    rec = _load(data)
    acc = [k for k in rec.keys if rec.segments(k) and rec.segments(k)[0].unit in ("m/s^2", "g")]
    if not acc:
        raise DataError("levels need acceleration channels (m/s^2 or g)")
    run = Run("levels", cfg, _out(args, data), {"channels": acc}, [data])
    hourly = hourly_max_abs(rec.select(acc))
    write_levels(hourly, run.path("levels_hourly.csv"), run.comment)
    write_levels(daily_avg_hourly_max(hourly), run.path("levels_daily.csv"), run.comment)
    run.finish()
    print(f"levels for {len(acc)} channels written to {run.out}")


def _catalog(args, cfg, data):
    path = args.catalog or cfg.get("events", "catalog") or None
    if not path and (data / "catalog.csv").exists():
        path = data / "catalog.csv"
    return (load_catalog(path), path) if path else ([], None)


def cmd_events(args, cfg):
    data = _data_dir(args)
    rec = _load(data)
    e = cfg.section("events")
    key = args.channel or e["channel"]
    segs = rec.segments(key)
    catalog, cat_path = _catalog(args, cfg, data)
    band = tuple(cfg.floats("events", "teleseism_band"))
    run = Run("events", cfg, _out(args, data), {"channel": key}, [data, cat_path])
    regional, tele = [], []
    for seg in segs:
        regional += sta_lta_detect(seg, *(cfg.getfloat("events", k)
                                          for k in ("sta", "lta", "on", "off")))
        tele += teleseism_scan(seg, band, cfg.getfloat("events", "teleseism_k"))
    regional = match_catalog(regional, catalog, cfg.getfloat("events", "regional_window"))
    tele = match_catalog(tele, catalog, cfg.getfloat("events", "teleseism_window"))
    write_events(regional, run.path("events_regional.csv"), run.comment)
    write_events(tele, run.path("events_teleseism.csv"), run.comment)
    run.finish()
    for kind, evs in (("regional", regional), ("teleseism", tele)):
        for ev in evs:
            c = ev.matched_catalog
            print(f"{kind} {format_utc(ev.trigger_time)}"
                  + (f" -> {c.location} M{c.magnitude:g} {format_utc(c.origin)}" if c else ""))


def cmd_tilt(args, cfg):
    data = _data_dir(args)
    rec = _load(data)
    t = cfg.section("tilt")
    cutoff = cfg.getfloat("tilt", "cutoff")
    acc = {}
    for axis in ("x", "y"):
        segs = rec.segments(t[axis])
        if not segs:
            raise DataError(f"channel {t[axis]} has no samples")
        seg = max(segs, key=len)
        if seg.unit not in ("m/s^2", "g"):
            raise DataError(f"tilt needs acceleration, {t[axis]} is in {seg.unit}")
        low = filter_array(seg.samples, seg.rate, "lowpass", cutoff, 4, zero_phase=True)
        acc[axis] = seg.with_samples(low)
    run = Run("tilt", cfg, _out(args, data), {}, [data])
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        tilt = tilt_series(acc, cfg.getfloat("tilt", "height"), G_STANDARD, cutoff)
    write_tilt(tilt, run.path("tilt.csv"), cfg.getfloat("tilt", "output_rate"), run.comment)
    try:
        shift = axis_phase_shift(tilt)
    except InsufficientDataError as exc:
        log.warning("phase shift skipped: %s", exc)
        shift = float("nan")
    with open(run.path("tilt_summary.csv"), "w", newline="") as fh:
        fh.write(f"# {run.comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis", "theta_max_rad", "disp_max_mm", "y_delay_h"])
        for axis in tilt.theta:
            w.writerow([axis, f"{np.max(np.abs(tilt.theta[axis])):.6e}",
                        f"{np.max(np.abs(tilt.displacement[axis])):.4f}", f"{shift:.3f}"])
    if args.svg:
        n = len(tilt.theta["x"])
        step = max(1, int(round(tilt.rate * 60)))
        hrs = np.arange(0, n, step) / tilt.rate / 3600
        svg_lines(run.path("tilt.svg"),
                  [(a, hrs, tilt.displacement[a][::step]) for a in tilt.displacement],
                  "Top displacement from tilt", "hours", "displacement [mm]")
    run.finish()
    print(f"tilt: max |theta| x={np.max(np.abs(tilt.theta['x'])):.3e} rad, "
          f"y delay {shift:.2f} h")


def cmd_spectrogram(args, cfg):
    data = _data_dir(args)
    rec = _load(data)
    s = cfg.section("spectrogram")
    key = args.channel or s["channel"]
    segs = rec.segments(key)
    nfft, hop = cfg.getint("spectrogram", "nfft"), cfg.getint("spectrogram", "hop")
    fmax = cfg.getfloat("spectrogram", "fmax")
    segs = [sg for sg in segs if len(sg) >= nfft]
    if not segs:
        raise InsufficientDataError(f"no segment of {key} holds {nfft} samples")
    run = Run("spectrogram", cfg, _out(args, data), {"channel": key}, [data])
    path = run.path("spectrogram.csv")
    # one long-format file covering every segment
    with open(path, "w") as fh:
        fh.write(f"# {run.comment}\n")
    for k, sg in enumerate(segs):
        tmp = run.out / f".spectrogram_{k}.csv"
        write_spectrogram(spectrogram(sg, nfft, hop), tmp, fmax)
        with open(tmp) as src, open(path, "a") as dst:
            lines = src.readlines()
            dst.writelines(lines if k == 0 else lines[1:])
        tmp.unlink()
    longest = max(segs, key=len)
    spec = psd_welch(longest, nfft)
    write_spectrum(spec, run.path("psd.csv"), run.comment)
    if args.svg:
        sel = (spec.freqs > 0) & (spec.freqs <= fmax)
        svg_lines(run.path("psd.svg"), [(key, spec.freqs[sel], np.log10(spec.power[sel]))],
                  f"Welch PSD {key}", "frequency [Hz]", "log10 PSD")
    run.finish()
    print(f"spectrogram of {key}: {len(segs)} segments")


def _read_stats(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))


def cmd_report(args, cfg):
    dirs = [Path(d) for d in args.dirs]
    for d in dirs:
        if not (d / "statistics.csv").exists():
            raise DataError(f"{d} has no statistics.csv; run track first")
    labels = args.labels or [d.name for d in dirs]
    if len(labels) != len(dirs):
        raise ConfigurationError("need one label per campaign directory")
    run = Run("report", cfg, _out(args, dirs[0]), {"labels": labels},
              [d / "statistics.csv" for d in dirs])
    modes = [b.label for b in cfg.baseline()]
    t1 = [[""] + [h for k in range(len(modes)) for h in (f"f_{k + 1} [Hz]", f"Δ_{k + 1} [%]")]]
    t2 = [[""] + [h for k in range(len(modes)) for h in (f"ξ_{k + 1} [%]", f"Δ_{k + 1} [%]")]]
    for label, d in zip(labels, dirs):
        rows = {r["mode_label"]: r for r in _read_stats(d / "statistics.csv")}
        r1, r2 = [label], [label]
        for m in modes:
            r = rows.get(m)
            r1 += [r["mean_f_hz"], r["delta_f_pct"]] if r else ["", ""]
            r2 += [r["mean_xi_pct"], r["delta_xi_pct"]] if r else ["", ""]
        t1.append(r1)
        t2.append(r2)
    text = []
    for name, table in (("table1.csv", t1), ("table2.csv", t2)):
        with open(run.path(name), "w", newline="") as fh:
            fh.write(f"# {run.comment}\n")
            csv.writer(fh, lineterminator="\n").writerows(table)
        text += ["\t".join(row) for row in table] + [""]
    with open(run.path("report.txt"), "w") as fh:
        fh.write(f"# {run.comment}\n" + "\n".join(text))
    if args.svg:
        traj = dirs[0] / "trajectories.csv"
        if traj.exists():
            trajs = read_trajectories(traj)
            t0 = trajs[0].times[0]
            svg_lines(run.path("frequencies.svg"),
                      [(tr.mode_label, [(t - t0).total_seconds() / 86400 for t in tr.times],
                        tr.frequencies) for tr in trajs],
                      "Natural frequencies", f"days since {format_utc(t0)[:10]}", "frequency [Hz]")
    run.finish()
    print("\n".join(text))


# ---------------------------------------------------------------------------
# Parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="towermon", description="Ambient-vibration monitoring of masonry towers.")
    p.add_argument("--config", help="INI configuration file (defaults documented in towermon.config)")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes for window loops")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_cmd(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("data", nargs="?", help=f"campaign directory (default ${ROOT_ENV})")
        sp.add_argument("--out", help="output directory (default: the input directory)")
        return sp

    sp = sub.add_parser("simulate", help="write a synthetic campaign")
    sp.add_argument("--scenario", choices=SCENARIOS)
    sp.add_argument("--out", help="campaign directory to create (default: data)")
    sp.add_argument("--hours", type=float)
    sp.add_argument("--rate", type=float)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("ingest", help="convert waveform CSV into a campaign directory")
    sp.add_argument("source", help="waveform CSV file or directory of station folders")
    sp.add_argument("--channels", required=True, help="channel metadata CSV")
    sp.add_argument("--gain", type=float, default=1.0, help="digitizer volts per count")
    sp.add_argument("--out", help="campaign directory (default: campaign)")
    sp.set_defaults(func=cmd_ingest)

    sp = data_cmd("identify", "modal identification per window")
    sp.add_argument("--method", choices=("ssi", "cmif"), default="ssi")
    sp.add_argument("--diagram", action="store_true", help="also write stabilization.csv")
    sp.add_argument("--svg", action="store_true")
    sp.set_defaults(func=cmd_identify)

    sp = data_cmd("track", "follow baseline modes through identified windows")
    sp.add_argument("--svg", action="store_true")
    sp.set_defaults(func=cmd_track)

    sp = data_cmd("correlate", "correlate tracked frequencies with temperature")
    sp.add_argument("--temperature", help="temperature CSV (timestamp,value)")
    sp.add_argument("--mode", action="append", help="mode label(s) to correlate")
    sp.set_defaults(func=cmd_correlate)

    sp = data_cmd("levels", "hourly maxima and daily averages of acceleration")
    sp.set_defaults(func=cmd_levels)

    sp = data_cmd("events", "STA/LTA and teleseism detection with catalog matching")
    sp.add_argument("--catalog")
    sp.add_argument("--channel")
    sp.set_defaults(func=cmd_events)

    sp = data_cmd("tilt", "quasi-static tilt and top displacement")
    sp.add_argument("--svg", action="store_true")
    sp.set_defaults(func=cmd_tilt)

    sp = data_cmd("spectrogram", "spectrogram and Welch PSD of one channel")
    sp.add_argument("--channel")
    sp.add_argument("--svg", action="store_true")
    sp.set_defaults(func=cmd_spectrogram)

    sp = sub.add_parser("report", help="summary tables of frequencies and damping")
    sp.add_argument("dirs", nargs="+", help="directories holding statistics.csv")
    sp.add_argument("--labels", nargs="+", help="row label per directory")
    sp.add_argument("--out")
    sp.add_argument("--svg", action="store_true")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.workers < 1:
            raise ParameterError("--workers must be at least 1")
        cfg = load_config(args.config)
        args.func(args, cfg)
    except (ConfigurationError, ParameterError) as exc:
        print(f"towermon: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InsufficientDataError as exc:
        print(f"towermon: insufficient data: {exc}", file=sys.stderr)
        return EXIT_INSUFFICIENT
    except (DataError, ParseError, OSError) as exc:
        print(f"towermon: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
