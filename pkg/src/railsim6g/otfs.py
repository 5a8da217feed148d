"""Delay-Doppler analysis of tapped-delay-line railway channels.

Grids are indexed ``[m, n]`` for the time-frequency response (subcarrier,
symbol) and ``[k, l]`` for the spreading function (delay bin, Doppler bin).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .channel import FadingProcess, aging_sequence
from .core.rng import stream

# coherence time ~ 0.423 / f_D (Clarke)
_COHERENCE_CONST = 0.423


def _pow2(x: int) -> bool:
    return x >= 4 and (x & (x - 1)) == 0


@dataclass(frozen=True)
class TfGrid:
    subcarriers: int          # M
    symbols: int              # N
    subcarrier_spacing: float
    symbol_duration: float

    def __post_init__(self):
        if not (_pow2(self.subcarriers) and _pow2(self.symbols)):
            raise ValueError("M and N must be powers of two >= 4")
        if not math.isclose(self.subcarrier_spacing * self.symbol_duration, 1.0, rel_tol=1e-9):
            raise ValueError("grid must be critically sampled (T * delta_f = 1)")

    @classmethod
    def critical(cls, M: int, N: int, delta_f: float) -> "TfGrid":
        return cls(M, N, delta_f, 1.0 / delta_f)

    @property
    def delay_resolution(self) -> float:
        return 1.0 / (self.subcarriers * self.subcarrier_spacing)

    @property
    def doppler_resolution(self) -> float:
        return 1.0 / (self.symbols * self.symbol_duration)

    @property
    def frame_duration(self) -> float:
        return self.symbols * self.symbol_duration


@dataclass(frozen=True)
class Tap:
    delay: float
    doppler: float
    gain: complex = 1.0


@dataclass(frozen=True)
class TdlChannel:
    taps: tuple[Tap, ...]
    coherence_time: float = math.inf
    fading_seed: int = 0

    def __post_init__(self):
        for tap in self.taps:
            if tap.delay < 0:
                raise ValueError("tap delays must be >= 0")
            if not np.isfinite(tap.gain):
                raise ValueError("tap gains must be finite")
        if self.coherence_time <= 0:
            raise ValueError("coherence_time must be > 0")

    @classmethod
    def on_grid(cls, grid: TfGrid, bins: Sequence[tuple[float, float, complex]], **kw) -> "TdlChannel":
        """Build taps from (delay bin, Doppler bin, gain) triples; fractional bins allowed."""
        taps = tuple(Tap(k * grid.delay_resolution, l * grid.doppler_resolution, g) for k, l, g in bins)
        return cls(taps, **kw)


@dataclass
class DdSpreadingFunction:
    values: np.ndarray        # (M, N) complex, [delay bin, Doppler bin]
    grid: TfGrid

    @property
    def energy(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    @property
    def delay_resolution(self) -> float:
        return self.grid.delay_resolution

    @property
    def doppler_resolution(self) -> float:
        return self.grid.doppler_resolution


def _check_taps(channel: TdlChannel, grid: TfGrid) -> None:
    max_delay = 1.0 / grid.subcarrier_spacing
    max_doppler = 0.5 / grid.symbol_duration
    for tap in channel.taps:
        if tap.delay >= max_delay or abs(tap.doppler) > max_doppler:
            raise ValueError(f"tap (delay={tap.delay}, doppler={tap.doppler}) outside the "
                             f"unambiguous grid range [0, {max_delay}) x [-{max_doppler}, {max_doppler}]")


def tap_fading(channel: TdlChannel, grid: TfGrid) -> np.ndarray:
    """Per-tap multiplicative small-scale fading over the N symbols, shape (taps, N).

    All ones unless the coherence time is shorter than the frame.
    """
    n_taps, N = len(channel.taps), grid.symbols
    if channel.coherence_time >= grid.frame_duration:
        return np.ones((n_taps, N), dtype=complex)
    fdts = _COHERENCE_CONST * grid.symbol_duration / channel.coherence_time
    rng = stream(channel.fading_seed, "otfs-tap-fading")
    seq = aging_sequence(np.ones(n_taps), FadingProcess(fdts, n_taps), N - 1, rng)
    return seq.T


def tdl_to_tf(channel: TdlChannel, grid: TfGrid) -> np.ndarray:
    """Time-frequency response ``H[m, n] = sum_i g_i exp(j2pi(nu_i n T - tau_i m df))``."""
    _check_taps(channel, grid)
    M, N = grid.subcarriers, grid.symbols
    m = np.arange(M)[:, None]
    n = np.arange(N)[None, :]
    fade = tap_fading(channel, grid)
    H = np.zeros((M, N), dtype=complex)
    for i, tap in enumerate(channel.taps):
        H += (tap.gain * fade[i][None, :]
              * np.exp(2j * np.pi * (tap.doppler * n * grid.symbol_duration
                                     - tap.delay * m * grid.subcarrier_spacing)))
    return H


def sfft(tf: np.ndarray, grid: TfGrid | None = None) -> DdSpreadingFunction:
    """Unitary symplectic finite Fourier transform: DFT over time, inverse DFT over frequency."""
    tf = np.asarray(tf, dtype=complex)
    M, N = tf.shape
    if grid is None:
        grid = TfGrid.critical(M, N, 1.0)
    elif (M, N) != (grid.subcarriers, grid.symbols):
        raise ValueError(f"TF array {tf.shape} does not match grid ({grid.subcarriers}, {grid.symbols})")
    dd = np.fft.ifft(np.fft.fft(tf, axis=1, norm="ortho"), axis=0, norm="ortho")
    return DdSpreadingFunction(dd, grid)


def isfft(dd: DdSpreadingFunction) -> np.ndarray:
    return np.fft.ifft(np.fft.fft(dd.values, axis=0, norm="ortho"), axis=1, norm="ortho")


@dataclass
class LeakageMetrics:
    effective_path_count: int
    compactness: float
    peak_offset: list[float] = field(default_factory=list)


def leakage_metrics(dd: DdSpreadingFunction, truth: TdlChannel,
                    threshold: float = 0.01) -> LeakageMetrics:
    """Sparsity of a discrete spreading function against the taps that produced it.

    effective_path_count: bins holding at least ``threshold`` of the energy.
    compactness: energy fraction in the K strongest bins, K = number of taps.
    peak_offset: per tap, cyclic grid distance from the tap's (fractional)
    position to the nearest effective bin.
    """
    e = dd.energy
    total = float(e.sum())
    M, N = e.shape
    if total == 0.0:
        return LeakageMetrics(0, 1.0, [math.inf] * len(truth.taps))
    strong = e >= threshold * total
    count = int(strong.sum())
    K = max(1, len(truth.taps))
    top = np.sort(e, axis=None)[::-1][:K]
    compactness = float(top.sum() / total)
    ks, ls = np.nonzero(strong)
    offsets = []
    for tap in truth.taps:
        kf = tap.delay / dd.delay_resolution
        lf = (tap.doppler / dd.doppler_resolution) % N
        dk = np.abs(ks - kf)
        dk = np.minimum(dk, M - dk)
        dl = np.abs(ls - lf)
        dl = np.minimum(dl, N - dl)
        offsets.append(float(np.min(np.hypot(dk, dl))) if len(ks) else math.inf)
    return LeakageMetrics(count, compactness, offsets)


def write_dd_csv(dd: DdSpreadingFunction, path: str | Path) -> Path:
    """Dump ``(delay_bin, doppler_bin, magnitude)`` rows."""
    path = Path(path)
    mag = np.abs(dd.values)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["delay_bin", "doppler_bin", "magnitude"])
        for k in range(mag.shape[0]):
            for l in range(mag.shape[1]):
                w.writerow([k, l, repr(float(mag[k, l]))])
    return path
