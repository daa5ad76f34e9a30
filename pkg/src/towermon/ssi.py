"""
Covariance-driven stochastic subspace identification (SSI-Cov).

Pipeline for one analysis window::

    output_covariances -> block_toeplitz -> realize(n) -> poles_to_modal
                         \\_ stabilization over a model-order sweep -> cluster_modes

The output covariances of a stochastic state-space model
``x[k+1] = A x[k] + w[k]``, ``y[k] = C x[k] + v[k]`` factor as
``Lambda_k = C A^(k-1) G`` for ``k >= 1``. Stacking them in a block
Toeplitz matrix gives ``T = O_i @ Ctrl_i``; the observability factor is
recovered by a truncated SVD and ``A`` follows from its shift structure.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from typing import Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from .core import format_utc, parse_utc
from .errors import DataError, ParameterError
from .modal import mac

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CovarianceSequence:
    """Output covariance matrices ``Lambda_0 .. Lambda_max_lag``."""

    matrices: np.ndarray  # (max_lag + 1, l, l)
    dt: float
    n_samples: int | None = None

    @property
    def max_lag(self) -> int:
        return self.matrices.shape[0] - 1

    @property
    def n_channels(self) -> int:
        return self.matrices.shape[1]

    def __getitem__(self, k):
        return self.matrices[k]


@dataclass(frozen=True)
class StateSpaceRealization:
    A: np.ndarray
    C: np.ndarray
    dt: float
    singular_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    weak_gap: bool = False

    @property
    def order(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class PoleEstimate:
    frequency: float
    damping: float
    shape: np.ndarray
    order: int = 0
    window_start: datetime | None = None
    eigenvalue: complex = 0j


@dataclass(frozen=True)
class StabilizedPole:
    pole: PoleEstimate
    freq_stable: bool | None = None
    damp_stable: bool | None = None
    shape_stable: bool | None = None
    significant: bool = True

    @property
    def stable(self) -> bool:
        return bool(self.freq_stable and self.damp_stable and self.shape_stable
                    and self.significant)


@dataclass(frozen=True)
class StabilizationDiagram:
    poles: list
    orders: tuple
    window_start: datetime | None = None

    def stable_poles(self) -> list:
        return [p.pole for p in self.poles if p.stable]

    def at_order(self, n: int) -> list:
        return [p for p in self.poles if p.pole.order == n]


@dataclass(frozen=True)
class ModeEstimate:
    frequency: float
    damping: float
    shape: np.ndarray
    order: int = 0
    window_start: datetime | None = None
    n_poles: int = 1


@dataclass(frozen=True)
class Tolerances:
    """Stability thresholds between consecutive orders (fractions, not percent)."""

    df: float = 0.01
    dxi: float = 0.05
    mac_min: float = 0.95
    # poles whose covariance contribution stays below significance/sqrt(N)
    # (normalized by channel RMS) are estimation noise; 0 disables the gate
    significance: float = 3.0


@dataclass(frozen=True)
class SSIParams:
    block_rows: int | None = None
    orders: tuple = tuple(range(2, 42, 2))
    tolerances: Tolerances = Tolerances()
    distance_cap: float = 0.02
    min_count: int | None = None
    max_damping: float = 0.2
    f_min: float = 0.5


def default_block_rows(rate: float, f_min: float = 0.5, cap: int = 200) -> int:
    """``ceil(2 * rate / f_min)`` capped at ``cap``."""
    return int(min(math.ceil(2.0 * rate / f_min), cap))


# ---------------------------------------------------------------------------
# Covariances and block Toeplitz

def _as_blocks(Y) -> list:
    if isinstance(Y, np.ndarray):
        Y = [Y]
    blocks = []
    for b in Y:
        b = np.asarray(b, dtype=float)
        if b.ndim == 1:
            b = b[:, None]
        blocks.append(b)
    if not blocks:
        raise ParameterError("no data blocks")
    if len({b.shape[1] for b in blocks}) != 1:
        raise ParameterError("blocks disagree on channel count")
    return blocks


def output_covariances(Y, max_lag: int, dt: float) -> CovarianceSequence:
    """Unbiased output covariances ``(1/(N-k)) sum_t y[t+k] y[t]^T``.

    ``Y`` is an ``(N, l)`` array or a list of such arrays (contiguous
    blocks separated by gaps); lagged products never straddle a gap.
    Sums are evaluated by zero-padded FFT correlation.
    """
    blocks = _as_blocks(Y)
    max_lag = int(max_lag)
    n_total = sum(b.shape[0] for b in blocks)
    if max_lag < 0 or n_total <= 10 * max_lag:
        raise ParameterError(f"need N > 10*max_lag (N={n_total}, max_lag={max_lag})")
    l = blocks[0].shape[1]
    sums = np.zeros((max_lag + 1, l, l))
    counts = np.zeros(max_lag + 1)
    for b in blocks:
        n = b.shape[0]
        if n <= max_lag:
            continue
        nfft = 1 << int(math.ceil(math.log2(n + max_lag + 1)))
        F = np.fft.rfft(b, n=nfft, axis=0)
        for a in range(l):
            r = np.fft.irfft(F[:, a, None] * F.conj(), n=nfft, axis=0)
            sums[:, a, :] += r[:max_lag + 1]
        counts += n - np.arange(max_lag + 1)
    if np.any(counts <= 0):
        raise ParameterError("data blocks too short for the requested lags")
    return CovarianceSequence(sums / counts[:, None, None], dt, n_total)


def block_toeplitz(cov: CovarianceSequence, i: int) -> np.ndarray:
    """Block ``(p, q)`` (1-based) is ``Lambda_{i+p-q}``; shape ``(l*i, l*i)``."""
    i = int(i)
    if i < 1 or cov.max_lag < 2 * i - 1:
        raise ParameterError(f"block_toeplitz with i={i} needs lags up to {2 * i - 1}, "
                             f"have {cov.max_lag}")
    l = cov.n_channels
    T = np.empty((l * i, l * i))
    for p in range(i):
        for q in range(i):
            T[p * l:(p + 1) * l, q * l:(q + 1) * l] = cov.matrices[i + p - q]
    return T


# ---------------------------------------------------------------------------
# Realization

def _realize_from_svd(U, s, n, l, dt, gap_ratio=2.0) -> StateSpaceRealization:
    if n == 0:
        return StateSpaceRealization(np.zeros((0, 0)), np.zeros((l, 0)), dt, s)
    if n > s.size:
        raise ParameterError(f"order {n} exceeds Toeplitz rank bound {s.size}")
    O = U[:, :n] * np.sqrt(s[:n])
    C = O[:l]
    A = np.linalg.lstsq(O[:-l], O[l:], rcond=None)[0]
    weak = n < s.size and s[n] > 0 and s[n - 1] / s[n] < gap_ratio
    return StateSpaceRealization(A, C, dt, s, bool(weak))


def realize(T: np.ndarray, n: int, i: int, l: int, dt: float) -> StateSpaceRealization:
    """Truncated-SVD realization of order ``n``.

    ``O = U_n S_n^(1/2)``, ``C`` is its first block row and
    ``A = pinv(O_up) O_down`` where ``O_up`` drops the last block row and
    ``O_down`` the first. ``weak_gap`` is set when ``s[n-1]/s[n] < 2``.
    """
    if T.shape != (l * i, l * i):
        raise ParameterError(f"T has shape {T.shape}, expected {(l * i, l * i)}")
    U, s, _ = np.linalg.svd(T)
    return _realize_from_svd(U, s, int(n), l, dt)


def pole_parameters(lam: complex) -> tuple:
    """Frequency (Hz) and damping ratio of a continuous-time pole ``lam``."""
    mod = abs(lam)
    return mod / (2 * np.pi), -lam.real / mod


def poles_to_modal(ss: StateSpaceRealization, window_start: datetime | None = None,
                   cond_max: float = 1e12) -> list:
    """Modal parameters from the eigen-decomposition of ``A``.

    Each eigenvalue ``mu`` with positive imaginary part yields one
    estimate; ``lambda = ln(mu)/dt``, ``f = |lambda|/(2 pi)`` and
    ``xi = -Re(lambda)/|lambda|``. Shapes ``C psi`` are scaled so their
    largest entry is ``1 + 0j``.
    """
    n = ss.order
    if n == 0:
        return []
    mu, psi = np.linalg.eig(ss.A)
    if np.linalg.cond(psi) > cond_max:
        raise DataError("state matrix is numerically defective")
    out = []
    for k in np.argsort(mu.imag, kind="stable")[::-1]:
        m = mu[k]
        if m.imag <= 0:
            if m.imag == 0 and m.real < 0:
                log.debug("discarding pole on negative real axis: %r", m)
            continue
        lam = np.log(m) / ss.dt
        f, xi = pole_parameters(lam)
        phi = ss.C @ psi[:, k]
        out.append(PoleEstimate(
            frequency=f,
            damping=xi,
            shape=normalize_shape(phi),
            order=n,
            window_start=window_start,
            eigenvalue=complex(lam),
        ))
    out.sort(key=lambda p: p.frequency)
    return out


def normalize_shape(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=complex)
    k = int(np.argmax(np.abs(phi)))
    if phi[k] == 0:
        return phi.copy()
    return phi / phi[k]


# ---------------------------------------------------------------------------
# Stabilization and clustering

def _compare(pole: PoleEstimate, previous: list, tol: Tolerances) -> StabilizedPole:
    """Flag ``pole`` against the previous order.

    The pole is stable when some previous pole passes all three checks. The
    flags reported come from the previous pole passing the most checks,
    ties broken by frequency distance.
    """
    if not previous:
        return StabilizedPole(pole)
    best_key, best_flags = None, None
    for q in previous:
        df = abs(q.frequency - pole.frequency) / pole.frequency
        dxi = abs(q.damping - pole.damping) / pole.damping if pole.damping > 0 else math.inf
        flags = (df < tol.df, dxi < tol.dxi, mac(q.shape, pole.shape) > tol.mac_min)
        key = (-sum(flags), df)
        if best_key is None or key < best_key:
            best_key, best_flags = key, flags
    return StabilizedPole(pole, *best_flags)


def pole_strengths(ss: StateSpaceRealization, G: np.ndarray, lag0: np.ndarray) -> dict:
    """Lag-1 covariance contribution of every pole, keyed by continuous eigenvalue.

    A conjugate pair adds ``2 Re(c g^T)`` to ``Lambda_1 = C G``; the largest
    entry of ``2 |c g^T|`` is reported after dividing row ``a``, column
    ``b`` by ``sqrt(Lambda0[a,a] Lambda0[b,b])``.
    """
    mu, psi = np.linalg.eig(ss.A)
    g = np.linalg.solve(psi, G)
    rms = np.sqrt(np.clip(np.diag(lag0), 1e-300, None))
    scale = np.outer(rms, rms)
    out = {}
    for k in np.flatnonzero(mu.imag > 0):
        lam = complex(np.log(mu[k]) / ss.dt)
        out[lam] = float(np.max(2 * np.abs(np.outer(ss.C @ psi[:, k], g[k])) / scale))
    return out


def _strength_of(pole: PoleEstimate, strength: dict) -> float:
    if not strength:
        return math.inf
    key = min(strength, key=lambda lam: abs(lam - pole.eigenvalue))
    return strength[key]


def stabilization_from_covariances(cov: CovarianceSequence, orders: Sequence[int], i: int,
                                   tolerances: Tolerances = Tolerances(),
                                   window_start: datetime | None = None) -> StabilizationDiagram:
    orders = tuple(int(n) for n in orders)
    if any(b <= a for a, b in zip(orders, orders[1:])):
        raise ParameterError("orders must be strictly increasing")
    l = cov.n_channels
    T = block_toeplitz(cov, i)
    U, s, Vt = np.linalg.svd(T)
    floor = None
    if tolerances.significance > 0 and cov.n_samples:
        floor = tolerances.significance / math.sqrt(cov.n_samples)
    entries = []
    previous = []
    for n in orders:
        ss = _realize_from_svd(U, s, n, l, cov.dt)
        try:
            poles = poles_to_modal(ss, window_start)
        except DataError:
            log.debug("order %d skipped: defective state matrix", n)
            poles = []
        flagged = [_compare(p, previous, tolerances) for p in poles]
        if floor is not None and poles:
            G = (np.sqrt(s[:n])[:, None] * Vt[:n])[:, -l:]
            strength = pole_strengths(ss, G, cov[0])
            flagged = [replace(f, significant=_strength_of(f.pole, strength) >= floor)
                       for f in flagged]
        entries.extend(flagged)
        previous = poles
    return StabilizationDiagram(entries, orders, window_start)


def stabilization(Y, orders: Sequence[int], i: int, tolerances: Tolerances = Tolerances(),
                  dt: float = 1.0, window_start: datetime | None = None) -> StabilizationDiagram:
    """Sweep model orders on the data ``Y`` and flag stable poles.

    ``Y`` is an ``(N, l)`` array or a list of gap-separated blocks; each
    block is mean-removed first. The Toeplitz SVD is computed once and
    truncated for every order.
    """
    blocks = [b - b.mean(axis=0) for b in _as_blocks(Y)]
    cov = output_covariances(blocks, 2 * int(i), dt)
    return stabilization_from_covariances(cov, orders, i, tolerances, window_start)


def _pole_distance(p: PoleEstimate, q: PoleEstimate, fmax: float) -> float:
    return abs(p.frequency - q.frequency) / fmax + (1.0 - mac(p.shape, q.shape))


def cluster_modes(diagram: StabilizationDiagram, distance_cap: float = 0.02,
                  min_count: int | None = None, max_damping: float = 0.2) -> list:
    """Group stable poles into modes by single-linkage clustering.

    Distance between poles is ``|f_p - f_q| / max(f) + (1 - MAC)``. Clusters
    smaller than ``min_count`` (default: a third of the tested orders) are
    dropped. Each mode reports the median frequency and damping, and the
    shape and order of the member pole closest to those medians.
    """
    poles = [p for p in diagram.stable_poles() if 0 < p.damping < max_damping]
    if min_count is None:
        min_count = max(1, math.ceil(len(diagram.orders) / 3))
    if not poles:
        return []
    if len(poles) == 1:
        labels = np.array([1])
    else:
        fmax = max(p.frequency for p in poles)
        m = len(poles)
        condensed = np.array([_pole_distance(poles[a], poles[b], fmax)
                              for a in range(m) for b in range(a + 1, m)])
        labels = fcluster(linkage(condensed, method="single"), t=distance_cap,
                          criterion="distance")
    modes = []
    for lab in np.unique(labels):
        members = [p for p, g in zip(poles, labels) if g == lab]
        if len(members) < min_count:
            continue
        f_med = float(np.median([p.frequency for p in members]))
        xi_med = float(np.median([p.damping for p in members]))
        rep = min(members, key=lambda p: (abs(p.frequency - f_med) / f_med
                                          + abs(p.damping - xi_med) / xi_med, p.order))
        modes.append(ModeEstimate(f_med, xi_med, rep.shape, rep.order,
                                  diagram.window_start, len(members)))
    modes.sort(key=lambda m: m.frequency)
    return modes


def identify(Y, rate: float, params: SSIParams = SSIParams(),
             window_start: datetime | None = None):
    """Run the whole SSI-Cov chain on one window. Returns ``(diagram, modes)``."""
    i = params.block_rows or default_block_rows(rate, params.f_min)
    diagram = stabilization(Y, params.orders, i, params.tolerances, 1.0 / rate, window_start)
    modes = cluster_modes(diagram, params.distance_cap, params.min_count, params.max_damping)
    return diagram, modes


# ---------------------------------------------------------------------------
# CSV

def modes_header(n_channels: int) -> list:
    return (["window_start", "mode_index", "f_hz", "xi", "order"]
            + [f"shape_re_{k}" for k in range(n_channels)]
            + [f"shape_im_{k}" for k in range(n_channels)])


def mode_rows(modes: Sequence[ModeEstimate]) -> list:
    rows = []
    for idx, m in enumerate(modes):
        stamp = format_utc(m.window_start) if m.window_start is not None else ""
        rows.append([stamp, idx, repr(float(m.frequency)), repr(float(m.damping)), m.order]
                    + [repr(float(v)) for v in m.shape.real]
                    + [repr(float(v)) for v in m.shape.imag])
    return rows


def write_modes(path, windows: Sequence[Sequence[ModeEstimate]], n_channels: int,
                comment: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(modes_header(n_channels))
        for modes in windows:
            w.writerows(mode_rows(modes))


def read_modes(path) -> list:
    """Read ``modes.csv`` back into per-window lists ``[(start, [ModeEstimate])]``."""
    by_window = {}
    with open(path, newline="") as fh:
        lines = (ln for ln in fh if not ln.startswith("#"))
        reader = csv.DictReader(lines)
        n = sum(1 for h in reader.fieldnames or [] if h.startswith("shape_re_"))
        for row in reader:
            start = parse_utc(row["window_start"])
            shape = np.array([float(row[f"shape_re_{k}"]) + 1j * float(row[f"shape_im_{k}"])
                              for k in range(n)])
            by_window.setdefault(start, []).append(ModeEstimate(
                float(row["f_hz"]), float(row["xi"]), shape, int(row["order"]), start))
    return sorted(by_window.items(), key=lambda kv: kv[0])
