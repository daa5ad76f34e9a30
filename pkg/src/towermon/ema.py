"""
Experimental modal analysis with the base station as measured input:
H1 frequency response, complex mode indicator function, peak picking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from .dsp import cross_spectra
from .errors import ParameterError


@dataclass(frozen=True)
class FrfMatrix:
    freqs: np.ndarray
    H: np.ndarray          # (n_freqs, n_outputs, n_inputs)
    coherence: np.ndarray  # (n_freqs, n_outputs) multiple coherence
    averaging_count: int = 0

    @property
    def resolution(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


@dataclass(frozen=True)
class CmifCurves:
    freqs: np.ndarray
    values: np.ndarray  # (n_freqs, n_curves), descending along axis 1


def frf_h1(inputs: np.ndarray, outputs: np.ndarray, rate: float, nfft: int = 4096,
           overlap: float = 0.5, window: str = "hann", eps: float = 1e-10) -> FrfMatrix:
    """H1 estimate ``H = S_yx S_xx^-1`` from Welch-averaged spectral matrices.

    ``S_xx`` is regularized with ``eps * trace(S_xx) / m`` on its diagonal
    so that near-silent input channels do not blow up ``H``.

    Parameters
    ----------
    inputs : ndarray, shape (n_samples, m)
    outputs : ndarray, shape (n_samples, p)
    """
    x = np.asarray(inputs, dtype=float)
    y = np.asarray(outputs, dtype=float)
    x = x[:, None] if x.ndim == 1 else x
    y = y[:, None] if y.ndim == 1 else y
    if x.shape[0] != y.shape[0]:
        raise ParameterError("inputs and outputs must have the same length")
    freqs, Sxx, count = cross_spectra(x, x, rate, nfft, overlap, window)
    if count < 2:
        raise ParameterError(f"H1 needs at least 2 averages, got {count}")
    _, Syx, _ = cross_spectra(x, y, rate, nfft, overlap, window)
    _, Syy, _ = cross_spectra(y, y, rate, nfft, overlap, window)
    m = x.shape[1]
    floor = eps * np.trace(Sxx, axis1=1, axis2=2).real / m
    Sreg = Sxx + floor[:, None, None] * np.eye(m)
    # H Sreg = Syx  ->  Sreg^T H^T = Syx^T
    H = np.linalg.solve(np.swapaxes(Sreg, 1, 2), np.swapaxes(Syx, 1, 2))
    H = np.swapaxes(H, 1, 2)
    explained = np.einsum("fpm,fmk,fpk->fp", H, Sxx, H.conj()).real
    auto = np.einsum("fpp->fp", Syy).real
    with np.errstate(invalid="ignore", divide="ignore"):
        coh = np.where(auto > 0, explained / auto, 0.0)
    return FrfMatrix(freqs, H, np.clip(coh, 0.0, 1.0), count)


def cmif(frf: FrfMatrix) -> CmifCurves:
    """Eigenvalues of ``H^H H`` at each line, largest first (squared singular values)."""
    s = np.linalg.svd(frf.H, compute_uv=False)
    return CmifCurves(frf.freqs, s ** 2)


def pick_peaks(curves: CmifCurves, min_prominence: float = 0.5, band=None,
               repeat_bins: int = 1) -> list:
    """Local maxima of the first CMIF curve with log10 prominence above threshold.

    A second-curve peak within ``repeat_bins`` lines of a first-curve peak
    marks a repeated root and is reported as ``(f, 1)``.

    Returns
    -------
    list of (frequency, curve_index), sorted by frequency.
    """
    f = curves.freqs
    lo, hi = (f[1], f[-1]) if band is None else band
    sel = np.flatnonzero((f >= lo) & (f <= hi))
    if sel.size < 3:
        return []
    tiny = np.finfo(float).tiny

    def peaks_of(curve):
        v = np.log10(np.maximum(curves.values[sel, curve], tiny))
        idx, _ = find_peaks(v, prominence=min_prominence)
        return sel[idx]

    first = peaks_of(0)
    out = [(float(f[k]), 0) for k in first]
    if curves.values.shape[1] > 1 and first.size:
        for k in peaks_of(1):
            if np.min(np.abs(first - k)) <= repeat_bins:
                out.append((float(f[k]), 1))
    return sorted(out)


def peak_prominence_db(freqs: np.ndarray, values: np.ndarray, f0: float,
                       halfwidth: float = 0.5, exclude_bins: int = 3) -> float:
    """Level at ``f0`` above the median of its neighbourhood, in dB (power-like input)."""
    k0 = int(np.argmin(np.abs(freqs - f0)))
    near = np.flatnonzero(np.abs(freqs - f0) <= halfwidth)
    ring = near[np.abs(near - k0) > exclude_bins]
    peak = values[max(k0 - 1, 0):k0 + 2].max()
    return float(10 * np.log10(peak / np.median(values[ring])))


def write_cmif(curves: CmifCurves, path, comment: str | None = None) -> None:
    n = curves.values.shape[1]
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("freq," + ",".join(f"ev{k + 1}" for k in range(n)) + "\n")
        for f, row in zip(curves.freqs.tolist(), curves.values.tolist()):
            fh.write(repr(f) + "," + ",".join(repr(v) for v in row) + "\n")
