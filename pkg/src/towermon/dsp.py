"""
Signal conditioning: detrending, Butterworth filtering, decimation and
Welch-averaged spectra.

Filters are always realized as second-order sections. At 100 sps a
0.04 Hz corner sits at 8e-4 of Nyquist, where a single transfer-function
polynomial loses most of its significant digits.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import timedelta

import numpy as np
from scipy import signal

from .core import TimeSeriesSegment
from .errors import ParameterError

FILTER_KINDS = ("lowpass", "highpass", "bandpass")


@dataclass(frozen=True)
class Spectrum:
    freqs: np.ndarray
    power: np.ndarray
    resolution: float
    averaging_count: int


@dataclass(frozen=True)
class Spectrogram:
    times: list
    freqs: np.ndarray
    power: np.ndarray  # (n_times, n_freqs)


def detrend(x: TimeSeriesSegment, mode: str = "mean") -> TimeSeriesSegment:
    """Remove the sample mean (``"mean"``) or the least-squares line (``"linear"``)."""
    if len(x) < 2:
        raise ParameterError("detrend needs at least two samples")
    kind = {"mean": "constant", "linear": "linear"}.get(mode)
    if kind is None:
        raise ParameterError(f"unknown detrend mode {mode!r}")
    return x.with_samples(signal.detrend(x.samples, type=kind))


def butter_sos(kind: str, cutoffs, order: int, rate: float) -> np.ndarray:
    """Digital Butterworth design as second-order sections.

    Bilinear transform with prewarping of the corner frequencies. For
    ``bandpass`` the prototype order is ``order``, so the realized filter
    has ``2 * order`` poles.
    """
    if kind not in FILTER_KINDS:
        raise ParameterError(f"unknown filter kind {kind!r}")
    if not 1 <= int(order) <= 8:
        raise ParameterError("order must be in 1..8")
    wn = np.atleast_1d(np.asarray(cutoffs, dtype=float))
    nyq = rate / 2.0
    if kind == "bandpass":
        if wn.size != 2 or not wn[0] < wn[1]:
            raise ParameterError("bandpass needs (low, high) cutoffs with low < high")
    elif wn.size != 1:
        raise ParameterError(f"{kind} needs a single cutoff")
    if np.any(wn <= 0) or np.any(wn >= nyq):
        raise ParameterError(f"cutoffs {wn.tolist()} must lie in (0, {nyq:g}) Hz")
    return signal.butter(int(order), wn if kind == "bandpass" else wn[0], btype=kind,
                         fs=rate, output="sos")


def slowest_time_constant(sos: np.ndarray, rate: float) -> float:
    """Decay time (s) of the pole closest to the unit circle."""
    poles = np.concatenate([np.roots(sec[3:]) for sec in sos])
    r = np.max(np.abs(poles))
    return -1.0 / (rate * np.log(r))


def filter_array(data: np.ndarray, rate: float, kind: str, cutoffs, order: int = 4,
                 zero_phase: bool = False, axis: int = 0) -> np.ndarray:
    """Array-level Butterworth filtering along ``axis``.

    ``zero_phase`` runs the filter forward and backward. That squares the
    magnitude response (a single-pass -3 dB corner becomes -6 dB) and
    removes all group delay. Edges are reflect-padded by three times the
    slowest pole time constant.
    """
    sos = butter_sos(kind, cutoffs, order, rate)
    data = np.asarray(data, dtype=float)
    if not zero_phase:
        return signal.sosfilt(sos, data, axis=axis)
    n = data.shape[axis]
    pad = int(np.ceil(3.0 * slowest_time_constant(sos, rate) * rate))
    pad = max(0, min(pad, n - 1))
    return signal.sosfiltfilt(sos, data, axis=axis, padtype="even", padlen=pad)


def iir_filter(x: TimeSeriesSegment, kind: str, cutoffs, order: int = 4,
               zero_phase: bool = False) -> TimeSeriesSegment:
    return x.with_samples(filter_array(x.samples, x.rate, kind, cutoffs, order, zero_phase))


def decimate_array(data: np.ndarray, rate: float, factor: int, order: int = 8,
                   axis: int = 0) -> np.ndarray:
    if int(factor) != factor or factor < 2:
        raise ParameterError("decimation factor must be an integer >= 2")
    factor = int(factor)
    new_rate = rate / factor
    y = filter_array(data, rate, "lowpass", 0.4 * new_rate, order, zero_phase=True, axis=axis)
    return np.take(y, np.arange(0, y.shape[axis], factor), axis=axis)


def decimate(x: TimeSeriesSegment, factor: int, order: int = 8) -> TimeSeriesSegment:
    """Anti-alias lowpass at 0.4 x the new rate (zero phase), then downsample.

    Order 8 applied forward-backward gives about 87 dB at 1.5 x the new
    Nyquist frequency.
    """
    y = decimate_array(x.samples, x.rate, factor, order)
    return x.with_samples(y, rate=x.rate / int(factor))


def _window(name: str, nfft: int) -> np.ndarray:
    if name == "hann":
        return signal.get_window("hann", nfft)  # periodic
    if name == "rect":
        return np.ones(nfft)
    raise ParameterError(f"unknown window {name!r}")


def _segment_starts(n: int, nfft: int, overlap: float) -> np.ndarray:
    if nfft > n:
        raise ParameterError(f"nfft={nfft} exceeds signal length {n}")
    if not 0 <= overlap < 1:
        raise ParameterError("overlap must be in [0, 1)")
    step = max(1, int(round(nfft * (1.0 - overlap))))
    return np.arange(0, n - nfft + 1, step)


def cross_spectra(x: np.ndarray, y: np.ndarray, rate: float, nfft: int,
                  overlap: float = 0.5, window: str = "hann"):
    """Welch-averaged one-sided cross-spectral density matrices.

    Parameters
    ----------
    x, y : ndarray, shape (n_samples, nx) and (n_samples, ny)
    Returns
    -------
    freqs : ndarray, shape (nfft // 2 + 1,)
    S : ndarray, shape (n_freqs, ny, nx)
        ``S[f, j, k] = E[Y_j(f) conj(X_k(f))]`` scaled as a density.
    count : int
        Number of averaged segments.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float).T).T
    y = np.atleast_2d(np.asarray(y, dtype=float).T).T
    if x.shape[0] != y.shape[0]:
        raise ParameterError("x and y must have the same length")
    starts = _segment_starts(x.shape[0], nfft, overlap)
    w = _window(window, nfft)
    scale = 1.0 / (rate * np.sum(w ** 2))
    nf = nfft // 2 + 1
    S = np.zeros((nf, y.shape[1], x.shape[1]), dtype=complex)
    same = x is y
    for s in starts:
        X = np.fft.rfft(w[:, None] * x[s:s + nfft], axis=0)
        Y = X if same else np.fft.rfft(w[:, None] * y[s:s + nfft], axis=0)
        S += Y[:, :, None] * X.conj()[:, None, :]
    S *= scale / len(starts)
    # one-sided: double everything except DC and (even nfft) Nyquist
    S[1:nf - (1 if nfft % 2 == 0 else 0)] *= 2.0
    return np.fft.rfftfreq(nfft, 1.0 / rate), S, len(starts)


def psd_array(x: np.ndarray, rate: float, nfft: int, overlap: float = 0.5,
              window: str = "hann"):
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    f, S, count = cross_spectra(x, x, rate, nfft, overlap, window)
    return f, S[:, 0, 0].real, count


def psd_welch(x: TimeSeriesSegment, nfft: int = 4096, overlap: float = 0.5,
              window: str = "hann") -> Spectrum:
    f, p, count = psd_array(x.samples, x.rate, nfft, overlap, window)
    return Spectrum(freqs=f, power=np.maximum(p, 0.0), resolution=x.rate / nfft,
                    averaging_count=count)


def spectrogram(x: TimeSeriesSegment, nfft: int = 4096, hop: int | None = None,
                window: str = "hann") -> Spectrogram:
    """Sliding single-segment periodograms; column times are segment centers."""
    hop = nfft // 2 if hop is None else int(hop)
    if hop < 1:
        raise ParameterError("hop must be >= 1")
    data = x.samples
    if nfft > data.size:
        raise ParameterError(f"nfft={nfft} exceeds signal length {data.size}")
    starts = np.arange(0, data.size - nfft + 1, hop)
    w = _window(window, nfft)
    scale = 1.0 / (x.rate * np.sum(w ** 2))
    view = np.lib.stride_tricks.sliding_window_view(data, nfft)
    P = np.empty((starts.size, nfft // 2 + 1))
    for c in range(0, starts.size, 256):
        idx = starts[c:c + 256]
        P[c:c + idx.size] = np.abs(np.fft.rfft(view[idx] * w, axis=1)) ** 2 * scale
    P[:, 1:nfft // 2 + (1 if nfft % 2 else 0)] *= 2.0
    times = [x.start + timedelta(seconds=(s + nfft / 2) / x.rate) for s in starts]
    return Spectrogram(times=times, freqs=np.fft.rfftfreq(nfft, 1.0 / x.rate), power=P)


def write_spectrum(spec: Spectrum, path, comment: str | None = None) -> None:
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("freq,power\n")
        for f, p in zip(spec.freqs.tolist(), spec.power.tolist()):
            fh.write(f"{f!r},{p!r}\n")


def write_spectrogram(sg: Spectrogram, path, fmax: float | None = None,
                      comment: str | None = None) -> None:
    """Long-format CSV ``time,freq,power``."""
    keep = np.ones(sg.freqs.size, bool) if fmax is None else sg.freqs <= fmax
    freqs = sg.freqs[keep].tolist()
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("time,freq,power\n")
        for t, row in zip(sg.times, sg.power[:, keep]):
            stamp = t.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
            fh.writelines(f"{stamp},{f!r},{p!r}\n" for f, p in zip(freqs, row.tolist()))
