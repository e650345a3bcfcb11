"""Windowed DFT of amplitude time series and frequency-locking diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Trajectory
from .model import GroupLabel

MIN_WINDOW_SAMPLES = 8
NO_SYNC_THRESHOLD = 1e-3


@dataclass(frozen=True)
class Spectrum:
    """|DFT| of a complex series on an ascending angular-frequency grid."""

    freqs: np.ndarray
    mags: np.ndarray

    @property
    def bin_width(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


def hann_window(n: int) -> np.ndarray:
    """Symmetric Hann window w_k = (1 - cos(2 pi k / (n - 1))) / 2."""
    if n < 2:
        raise ValueError("Hann window needs n >= 2")
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / (n - 1)))


def series_spectrum(series: np.ndarray, dt: float) -> Spectrum:
    """Magnitude of the unnormalized forward DFT of the Hann-windowed series.

    ``exp(i w0 t)`` peaks at ``+w0``.
    """
    series = np.asarray(series, dtype=complex)
    n = series.size
    if n < MIN_WINDOW_SAMPLES:
        raise ValueError(f"need at least {MIN_WINDOW_SAMPLES} samples, got {n}")
    coeffs = np.fft.fft(hann_window(n) * series)
    freqs = 2.0 * np.pi * np.fft.fftfreq(n, d=dt)
    order = np.argsort(freqs, kind="stable")
    return Spectrum(freqs[order], np.abs(coeffs)[order])


def spectrum(traj: Trajectory, group: GroupLabel = GroupLabel.A, window_fraction: float = 0.5) -> Spectrum:
    """Spectrum of <S^+>_group over the trailing ``window_fraction`` of samples."""
    if not 0 < window_fraction <= 1:
        raise ValueError("window_fraction must lie in (0, 1]")
    amps = traj.amps(group)
    count = int(round(window_fraction * amps.size))
    return series_spectrum(amps[amps.size - count:], traj.dt)


def dominant_frequency(s: Spectrum) -> float | None:
    """Frequency of the largest bin; ties go to the smallest |w|.  None if all zero."""
    if s.mags.size == 0:
        raise ValueError("empty spectrum")
    peak = s.mags.max()
    if peak == 0.0:
        return None
    candidates = np.flatnonzero(s.mags == peak)
    best = candidates[np.argmin(np.abs(s.freqs[candidates]))]
    return float(s.freqs[best])


@dataclass(frozen=True)
class LockingCell:
    """Per-point summary of a two-group run."""

    omega_a: float | None
    omega_b: float | None
    order_a: float
    order_b: float
    relative_phase: float
    bin_width: float

    @property
    def synchronized(self) -> bool:
        return min(self.order_a, self.order_b) >= NO_SYNC_THRESHOLD

    @property
    def frequency_difference(self) -> float:
        """omega_A - omega_B, NaN where either group is unsynchronized."""
        if not self.synchronized or self.omega_a is None or self.omega_b is None:
            return float("nan")
        return self.omega_a - self.omega_b


def locking_cell(
    traj: Trajectory,
    spectrum_fraction: float = 0.5,
    order_last_n: int | None = None,
    order_fraction: float = 0.5,
) -> LockingCell:
    """Dominant frequencies, order parameters and final relative phase of one run."""
    from .dynamics import order_parameter

    sa = spectrum(traj, GroupLabel.A, spectrum_fraction)
    sb = spectrum(traj, GroupLabel.B, spectrum_fraction)
    oa = order_parameter(traj, GroupLabel.A, order_fraction, order_last_n)
    ob = order_parameter(traj, GroupLabel.B, order_fraction, order_last_n)
    phase = float(np.angle(traj.amps_a[-1] * np.conj(traj.amps_b[-1])))
    return LockingCell(dominant_frequency(sa), dominant_frequency(sb), oa, ob, phase, sa.bin_width)


def locking_map(cells: list[list[LockingCell]]) -> np.ndarray:
    """Matrix of omega_A - omega_B with NaN marking unsynchronized cells."""
    return np.array([[c.frequency_difference for c in row] for row in cells], dtype=float)
