"""Outer- and middle-ear transfer applied ahead of the filterbank.

The transfer is given as a tabulated magnitude (dB over frequency) and
realized as a minimum-phase FIR so group delay stays small for the
time-domain metrics downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.signal import fftconvolve

from .signals import CalibratedSignal


class EarFilterError(ValueError):
    """Raised for unusable transfer tables or sample rates."""


@dataclass(frozen=True)
class EarTransferTable:
    """Magnitude table (dB vs Hz), interpolated linearly in log-frequency."""

    freqs_hz: np.ndarray
    gains_db: np.ndarray
    field: str = "free"

    def __post_init__(self):
        f = np.asarray(self.freqs_hz, dtype=np.float64)
        g = np.asarray(self.gains_db, dtype=np.float64)
        if f.ndim != 1 or f.shape != g.shape or len(f) < 2:
            raise EarFilterError("table needs matching 1-D frequency/gain columns")
        if np.any(np.diff(f) <= 0) or f[0] <= 0:
            raise EarFilterError("table frequencies must be positive and increasing")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            raise EarFilterError("table contains non-finite entries")
        object.__setattr__(self, "freqs_hz", f)
        object.__setattr__(self, "gains_db", g)

    def gain_db_at(self, freqs_hz) -> np.ndarray:
        """Table gain at arbitrary frequencies; flat extension beyond the ends."""
        f = np.maximum(np.asarray(freqs_hz, dtype=np.float64), 1e-6)
        return np.interp(np.log10(f), np.log10(self.freqs_hz), self.gains_db)

    @classmethod
    def from_text(cls, path, field: str = "free") -> "EarTransferTable":
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise EarFilterError(f"bad table line: {line!r}")
                rows.append((float(parts[0]), float(parts[1])))
        f, g = zip(*rows)
        return cls(np.array(f), np.array(g), field=field)

    @classmethod
    def default_free_field(cls) -> "EarTransferTable":
        ref = resources.files("sqm.data").joinpath("ear_free_field.txt")
        with resources.as_file(ref) as path:
            return cls.from_text(path, field="free")

    @classmethod
    def flat(cls) -> "EarTransferTable":
        """0 dB everywhere; the realized filter is then a near-identity."""
        return cls(np.array([20.0, 20000.0]), np.zeros(2), field="flat")


class EarFilter:
    """Minimum-phase FIR realization of an ear transfer table."""

    def __init__(self, table: EarTransferTable, sample_rate: float = 44100.0,
                 n_taps: int = 4096):
        if sample_rate < 32000.0:
            raise EarFilterError(
                f"sample rate {sample_rate} Hz too low to represent the table band")
        self.table = table
        self.sample_rate = float(sample_rate)
        self.fir = _minimum_phase_fir(table, self.sample_rate, n_taps)

    def apply(self, signal: CalibratedSignal) -> CalibratedSignal:
        if signal.sample_rate != self.sample_rate:
            raise EarFilterError(
                f"signal rate {signal.sample_rate} != filter rate {self.sample_rate}")
        y = fftconvolve(signal.samples, self.fir, mode="full")[:len(signal.samples)]
        return CalibratedSignal(y, signal.sample_rate)

    def freq_response_db(self, freqs_hz) -> np.ndarray:
        f = np.asarray(freqs_hz, dtype=np.float64)
        w = np.exp(-2j * np.pi * np.outer(f, np.arange(len(self.fir))) / self.sample_rate)
        return 20.0 * np.log10(np.abs(w @ self.fir))


def apply_ear_filter(signal: CalibratedSignal, table: EarTransferTable) -> CalibratedSignal:
    """One-shot convenience wrapper around :class:`EarFilter`."""
    return EarFilter(table, signal.sample_rate).apply(signal)


def _minimum_phase_fir(table: EarTransferTable, sample_rate: float, n_taps: int,
                       n_fft: int = 1 << 16) -> np.ndarray:
    """Design a minimum-phase FIR matching the table magnitude.

    Real cepstrum method: fold the cepstrum of log|H| onto causal quefrency
    and exponentiate.  The result is truncated to ``n_taps`` with a half
    Hann tail to suppress truncation ripple.
    """
    freqs = np.fft.rfftfreq(n_fft, 1.0 / sample_rate)
    mag_db = table.gain_db_at(np.maximum(freqs, table.freqs_hz[0]))
    log_mag = mag_db * (np.log(10.0) / 20.0)

    cep = np.fft.irfft(log_mag, n=n_fft)
    folded = np.zeros_like(cep)
    folded[0] = cep[0]
    folded[1:n_fft // 2] = 2.0 * cep[1:n_fft // 2]
    folded[n_fft // 2] = cep[n_fft // 2]
    h_min = np.fft.irfft(np.exp(np.fft.rfft(folded)), n=n_fft)

    fir = h_min[:n_taps].copy()
    tail = n_taps // 4
    fir[-tail:] *= np.hanning(2 * tail)[tail:]
    return fir
