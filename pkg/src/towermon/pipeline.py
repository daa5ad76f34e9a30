"""
Window-level orchestration shared by the CLI and the acceptance tests.

Windows are processed independently (optionally in a process pool) and
reduced in window order, so results never depend on the worker count.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .core import MultiChannelRecord, format_utc, parse_utc, segment_hourly
from .ema import CmifCurves, cmif, frf_h1, pick_peaks
from .errors import DataError, ParameterError
from .ssi import ModeEstimate, SSIParams, StabilizationDiagram, default_block_rows, identify

log = logging.getLogger(__name__)


@dataclass
class WindowResult:
    window_start: datetime
    status: str                      # "ok" or a short reason
    modes: list = field(default_factory=list)
    n_samples: int = 0
    diagram: StabilizationDiagram | None = None
    peaks: list = field(default_factory=list)
    curves: CmifCurves | None = None


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


def _windows(record: MultiChannelRecord, keys, window, coverage) -> list:
    if record.is_empty():
        raise DataError("record holds no samples")
    return segment_hourly(record, window, coverage, required=keys)


def _ssi_task(task) -> WindowResult:
    rec, keys, params, keep_diagram = task
    ws = rec.info["window_start"]
    rate = rec.rate
    i = params.block_rows or default_block_rows(rate, params.f_min)
    blocks = [b for _, b in rec.common_blocks(keys, min_samples=20 * i + 1)]
    n = sum(b.shape[0] for b in blocks)
    if not blocks:
        return WindowResult(ws, "too_short", n_samples=n)
    try:
        diagram, modes = identify(blocks, rate, params, ws)
    except (DataError, ParameterError) as exc:
        log.warning("window %s skipped: %s", format_utc(ws), exc)
        return WindowResult(ws, "failed", n_samples=n)
    return WindowResult(ws, "ok", modes, n, diagram if keep_diagram else None)


def identify_ssi(record: MultiChannelRecord, keys, params: SSIParams = SSIParams(),
                 window: float = 3600.0, coverage: float = 0.95, workers: int = 1,
                 keep_diagram: bool = False) -> list:
    """SSI-Cov on every window that passes the coverage gate.

    Returns a list of ``WindowResult`` in window order.
    """
    keys = list(keys)
    wins = _windows(record.select(keys), keys, window, coverage)
    return _map(_ssi_task, [(w, keys, params, keep_diagram) for w in wins], workers)


def _cmif_task(task) -> WindowResult:
    rec, inputs, outputs, nfft, overlap, prominence, band = task
    ws = rec.info["window_start"]
    keys = list(inputs) + list(outputs)
    blocks = [b for _, b in rec.common_blocks(keys, min_samples=nfft)]
    if not blocks:
        return WindowResult(ws, "too_short")
    # the longest contiguous block carries the window
    b = max(blocks, key=len)
    try:
        frf = frf_h1(b[:, :len(inputs)], b[:, len(inputs):], rec.rate, nfft, overlap)
    except ParameterError as exc:
        log.warning("window %s skipped: %s", format_utc(ws), exc)
        return WindowResult(ws, "failed", n_samples=len(b))
    curves = cmif(frf)
    peaks = pick_peaks(curves, prominence, band)
    modes = [ModeEstimate(f, float("nan"), np.zeros(0, complex), 0, ws, 1)
             for f, c in peaks if c == 0]
    return WindowResult(ws, "ok", modes, len(b), peaks=peaks, curves=curves)


def identify_cmif(record: MultiChannelRecord, inputs, outputs, nfft: int = 4096,
                  overlap: float = 0.5, prominence: float = 0.5, band=None,
                  window: float = 3600.0, coverage: float = 0.95, workers: int = 1) -> list:
    """H1 + CMIF peak picking on every window; base channels are the inputs."""
    keys = list(inputs) + list(outputs)
    wins = _windows(record.select(keys), keys, window, coverage)
    tasks = [(w, list(inputs), list(outputs), nfft, overlap, prominence, band) for w in wins]
    return _map(_cmif_task, tasks, workers)


def mean_cmif(results: list) -> CmifCurves | None:
    curves = [r.curves for r in results if r.curves is not None]
    if not curves:
        return None
    return CmifCurves(curves[0].freqs, np.mean([c.values for c in curves], axis=0))


# ---------------------------------------------------------------------------
# CSV

def write_windows(results: list, path, comment: str | None = None) -> None:
    """One row per analysed window, including windows with no modes."""
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_start", "status", "n_samples", "n_modes"])
        for r in results:
            w.writerow([format_utc(r.window_start), r.status, r.n_samples, len(r.modes)])


def read_windows(path) -> list:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))
    return [(parse_utc(r["window_start"]), r["status"]) for r in rows]


def write_peaks(results: list, path, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_start", "f_hz", "curve", "repeated"])
        for r in results:
            for f, c in r.peaks:
                w.writerow([format_utc(r.window_start), repr(f), c + 1, int(c > 0)])


def write_stabilization(results: list, path, comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_start", "order", "f_hz", "xi", "freq_stable", "damp_stable",
                    "shape_stable"])
        for r in results:
            if r.diagram is None:
                continue
            for sp in r.diagram.poles:
                # lowest order has nothing to compare against: flags left empty
                flags = ["" if v is None else int(v)
                         for v in (sp.freq_stable, sp.damp_stable, sp.shape_stable)]
                w.writerow([format_utc(r.window_start), sp.pole.order, repr(sp.pole.frequency),
                            repr(sp.pole.damping), *flags])


def estimates_for_tracking(windows: list, modes: list) -> list:
    """Join ``read_windows`` and ``read_modes`` output, keeping empty windows."""
    by_start = dict(modes)
    return [(ws, by_start.get(ws, [])) for ws, status in windows if status == "ok"]
