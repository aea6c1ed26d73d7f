"""ERB-scale auditory filterbanks: gammatone and analytical gammachirp.

Channels sit on a 0.1-Cam grid.  The gammatone channel is the classic
4th-order one-zero two-pole IIR cascade (Slaney's recipe) normalized to
unity gain at the channel center.  The gammachirp variant cascades the
same gammatone core with a 4-section minimum-phase asymmetric-compensation
filter approximating exp(c*theta(f)); the chirp coefficient c follows the
estimated per-channel sound-pressure level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._kernels import filter_cascade_bank
from .signals import CalibratedSignal, P_REF

GT_GRID_RANGE_CAM = (1.8, 38.9)
GC_GRID_RANGE_CAM = (2.6, 36.9)
CAM_STEP = 0.1

#: Gammatone constants: order and bandwidth factor.
GT_ORDER = 4
GT_BANDWIDTH_FACTOR = 1.019

#: Chirp-coefficient law c = CHIRP_INTERCEPT - CHIRP_SLOPE * Ps.
CHIRP_INTERCEPT = 3.38
CHIRP_SLOPE = 0.107

#: |c| beyond ~6.04 destabilizes the compensation cascade; clamp with margin.
CHIRP_LIMIT = 5.0

LEVEL_FLOOR_DB = -30.0


class FilterDesignError(ValueError):
    """Raised when a filter design request is invalid or unstable."""


def erb_of(f_hz):
    """Equivalent rectangular bandwidth (normal hearing) at ``f_hz``."""
    f_hz = np.asarray(f_hz, dtype=np.float64)
    return 24.7 * (4.37 * f_hz / 1000.0 + 1.0)


def cam_to_freq(cam):
    """ERB-number (Cam) to frequency in Hz."""
    cam = np.asarray(cam, dtype=np.float64)
    return (np.power(10.0, cam / 21.4) - 1.0) * 1000.0 / 4.37


def freq_to_cam(f_hz):
    """Frequency in Hz to ERB-number (Cam)."""
    f_hz = np.asarray(f_hz, dtype=np.float64)
    return 21.4 * np.log10(4.37 * f_hz / 1000.0 + 1.0)


@dataclass(frozen=True)
class ChannelGrid:
    """Channel center frequencies on a uniform ERB-number grid."""

    cams: np.ndarray
    freqs_hz: np.ndarray
    erbs_hz: np.ndarray
    step_cam: float = CAM_STEP

    @classmethod
    def from_cam_range(cls, start_cam: float, end_cam: float,
                       step_cam: float = CAM_STEP) -> "ChannelGrid":
        n = int(round((end_cam - start_cam) / step_cam)) + 1
        cams = np.round(start_cam + step_cam * np.arange(n), 6)
        freqs = cam_to_freq(cams)
        return cls(cams=cams, freqs_hz=freqs, erbs_hz=erb_of(freqs), step_cam=step_cam)

    @classmethod
    def for_variant(cls, variant: str) -> "ChannelGrid":
        if variant == "gt":
            return cls.from_cam_range(*GT_GRID_RANGE_CAM)
        if variant == "gc":
            return cls.from_cam_range(*GC_GRID_RANGE_CAM)
        raise FilterDesignError(f"unknown filterbank variant {variant!r}")

    @property
    def K(self) -> int:
        return len(self.cams)

    def write_csv(self, path, chirp: Optional[np.ndarray] = None) -> None:
        with open(path, "w") as fh:
            fh.write("k,cam,f_hz,erb_hz,c\n")
            for k in range(self.K):
                c = "" if chirp is None else f"{chirp[k]:.10g}"
                fh.write(f"{k + 1},{self.cams[k]:.10g},{self.freqs_hz[k]:.10g},"
                         f"{self.erbs_hz[k]:.10g},{c}\n")


@dataclass(frozen=True)
class ChannelBank:
    """K per-channel time series sharing one sample rate."""

    grid: ChannelGrid
    data: np.ndarray  # (K, n)
    sample_rate: float

    def __post_init__(self):
        if self.data.ndim != 2 or self.data.shape[0] != self.grid.K:
            raise ValueError(
                f"bank shape {self.data.shape} does not match grid K={self.grid.K}")

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray) -> "ChannelBank":
        return ChannelBank(self.grid, data, self.sample_rate)


def gammatone_sos(freqs_hz: np.ndarray, sample_rate: float) -> np.ndarray:
    """Second-order sections for the 4th-order one-zero two-pole gammatone.

    Returns (K, 4, 6) sos arrays with unity gain at each channel center.
    """
    cf = np.asarray(freqs_hz, dtype=np.float64)
    if np.any(cf >= sample_rate / 2):
        raise FilterDesignError("channel center at or above Nyquist")
    T = 1.0 / sample_rate
    B = GT_BANDWIDTH_FACTOR * 2.0 * np.pi * erb_of(cf)

    cosw = np.cos(2.0 * cf * np.pi * T)
    sinw = np.sin(2.0 * cf * np.pi * T)
    expb = np.exp(B * T)

    a0 = T
    b1 = -2.0 * cosw / expb
    b2 = np.exp(-2.0 * B * T)

    sqrt_p = np.sqrt(3.0 + 2.0 ** 1.5)
    sqrt_m = np.sqrt(3.0 - 2.0 ** 1.5)
    a11 = -(2.0 * T * cosw / expb + 2.0 * sqrt_p * T * sinw / expb) / 2.0
    a12 = -(2.0 * T * cosw / expb - 2.0 * sqrt_p * T * sinw / expb) / 2.0
    a13 = -(2.0 * T * cosw / expb + 2.0 * sqrt_m * T * sinw / expb) / 2.0
    a14 = -(2.0 * T * cosw / expb - 2.0 * sqrt_m * T * sinw / expb) / 2.0

    z = np.exp(2j * cf * np.pi * T)
    damp = np.exp(-(B * T) + 2j * cf * np.pi * T)
    gain = np.abs(
        (-2.0 * z ** 2 * T + 2.0 * damp * T * (cosw - sqrt_m * sinw))
        * (-2.0 * z ** 2 * T + 2.0 * damp * T * (cosw + sqrt_m * sinw))
        * (-2.0 * z ** 2 * T + 2.0 * damp * T * (cosw - sqrt_p * sinw))
        * (-2.0 * z ** 2 * T + 2.0 * damp * T * (cosw + sqrt_p * sinw))
        / (-2.0 / np.exp(2.0 * B * T) - 2.0 * z ** 2 + 2.0 * (1.0 + z ** 2) / expb) ** 4
    )

    K = len(cf)
    sos = np.zeros((K, 4, 6), dtype=np.float64)
    numerators = (a11, a12, a13, a14)
    for s, a1s in enumerate(numerators):
        sos[:, s, 0] = a0
        sos[:, s, 1] = a1s
        sos[:, s, 2] = 0.0
        sos[:, s, 3] = 1.0
        sos[:, s, 4] = b1
        sos[:, s, 5] = b2
    sos[:, 0, 0:3] /= gain[:, None]
    return sos


def asymmetric_compensation_sos(freqs_hz: np.ndarray, chirp: np.ndarray,
                                sample_rate: float,
                                bandwidth_factor: float = GT_BANDWIDTH_FACTOR) -> np.ndarray:
    """Minimum-phase IIR cascade approximating exp(c*theta(f)).

    Four second-order sections per channel in the standard asymmetric-
    compensation parameterization, each normalized to unity gain at the
    channel center.  c == 0 collapses every section to the identity.
    """
    fr = np.asarray(freqs_hz, dtype=np.float64)
    c = np.asarray(chirp, dtype=np.float64)
    b = bandwidth_factor
    erbw = erb_of(fr)

    p0 = 2.0
    p1 = 1.7818 * (1.0 - 0.0791 * b) * (1.0 - 0.1655 * np.abs(c))
    p2 = 0.5689 * (1.0 - 0.1620 * b) * (1.0 - 0.0857 * np.abs(c))
    p4 = 1.0724
    if np.any(p1 <= 0.0):
        raise FilterDesignError(
            "chirp magnitude too large for a stable compensation cascade")

    K = len(fr)
    sos = np.zeros((K, 4, 6), dtype=np.float64)
    for n in range(4):
        r = np.exp(-p1 * (p0 / p4) ** n * 2.0 * np.pi * b * erbw / sample_rate)
        if np.any(r >= 1.0):
            raise FilterDesignError("unstable compensation section (pole radius >= 1)")
        dfr = (p0 * p4) ** n * p2 * c * b * erbw
        phi = 2.0 * np.pi * np.maximum(fr + dfr, 0.0) / sample_rate
        psi = 2.0 * np.pi * np.maximum(fr - dfr, 0.0) / sample_rate

        ap = np.stack([np.ones(K), -2.0 * r * np.cos(phi), r ** 2], axis=1)
        bz = np.stack([np.ones(K), -2.0 * r * np.cos(psi), r ** 2], axis=1)

        w = np.exp(1j * 2.0 * np.pi * fr / sample_rate)
        basis = np.stack([np.ones(K, dtype=complex), w, w ** 2], axis=1)
        nrm = np.abs(np.sum(basis * ap, axis=1) / np.sum(basis * bz, axis=1))
        bz *= nrm[:, None]

        sos[:, n, 0:3] = bz
        sos[:, n, 3] = 1.0
        sos[:, n, 4:6] = ap[:, 1:]
    return sos


def chirp_from_level(ps_db):
    """Chirp coefficient from per-channel level, clamped to the stable range."""
    c = CHIRP_INTERCEPT - CHIRP_SLOPE * np.asarray(ps_db, dtype=np.float64)
    return np.clip(c, -CHIRP_LIMIT, CHIRP_LIMIT)


def smooth_across_channels(values: np.ndarray, half_width: int = 5) -> np.ndarray:
    """Symmetric triangular moving average along the channel axis.

    Default half-width of 5 channels gives an 11-tap kernel spanning 1 Cam
    on the 0.1-Cam grid.  Edges renormalize over the in-range taps, so a
    constant profile is preserved exactly.
    """
    v = np.asarray(values, dtype=np.float64)
    taps = half_width + 1 - np.abs(np.arange(-half_width, half_width + 1))
    taps = taps.astype(np.float64)
    num = np.convolve(v, taps, mode="same")
    den = np.convolve(np.ones_like(v), taps, mode="same")
    return num / den


def _sos_freq_response(sos: np.ndarray, freqs_hz: np.ndarray, sample_rate: float) -> np.ndarray:
    """|H| of a biquad cascade at the given frequencies."""
    w = 2.0 * np.pi * np.asarray(freqs_hz, dtype=np.float64) / sample_rate
    z = np.exp(-1j * w)
    h = np.ones_like(z, dtype=complex)
    for s in range(sos.shape[0]):
        b0, b1, b2, _, a1, a2 = sos[s]
        h *= (b0 + b1 * z + b2 * z * z) / (1.0 + a1 * z + a2 * z * z)
    return np.abs(h)


class GammatoneBank:
    """Fixed-shape gammatone analysis filterbank on an ERB-number grid."""

    def __init__(self, grid: ChannelGrid, sample_rate: float = 44100.0):
        if sample_rate <= 0:
            raise FilterDesignError("sample rate must be positive")
        self.grid = grid
        self.sample_rate = float(sample_rate)
        self.sos = gammatone_sos(grid.freqs_hz, self.sample_rate)

    def analyze(self, signal: CalibratedSignal) -> ChannelBank:
        if signal.sample_rate != self.sample_rate:
            raise FilterDesignError(
                f"signal rate {signal.sample_rate} != design rate {self.sample_rate}")
        data = filter_cascade_bank(signal.samples, self.sos)
        return ChannelBank(self.grid, data, self.sample_rate)

    def freq_response(self, channel: int, freqs_hz) -> np.ndarray:
        return _sos_freq_response(self.sos[channel], np.asarray(freqs_hz), self.sample_rate)

    def impulse_response(self, channel: int, n_samples: int) -> np.ndarray:
        x = np.zeros(n_samples)
        x[0] = 1.0
        return filter_cascade_bank(x, self.sos[channel:channel + 1])[0]


class GammachirpBank:
    """Level-dependent gammachirp bank: gammatone core + compensation cascade."""

    def __init__(self, grid: ChannelGrid, chirp: np.ndarray, sample_rate: float = 44100.0):
        chirp = np.asarray(chirp, dtype=np.float64)
        if chirp.shape != (grid.K,):
            raise FilterDesignError("chirp must supply one coefficient per channel")
        self.grid = grid
        self.sample_rate = float(sample_rate)
        self.chirp = chirp
        core = gammatone_sos(grid.freqs_hz, self.sample_rate)
        comp = asymmetric_compensation_sos(grid.freqs_hz, chirp, self.sample_rate)
        self.sos = np.concatenate([core, comp], axis=1)

    @classmethod
    def from_levels(cls, grid: ChannelGrid, ps_db: np.ndarray,
                    sample_rate: float = 44100.0) -> "GammachirpBank":
        return cls(grid, chirp_from_level(ps_db), sample_rate)

    def analyze(self, signal: CalibratedSignal) -> ChannelBank:
        if signal.sample_rate != self.sample_rate:
            raise FilterDesignError(
                f"signal rate {signal.sample_rate} != design rate {self.sample_rate}")
        data = filter_cascade_bank(signal.samples, self.sos)
        return ChannelBank(self.grid, data, self.sample_rate)

    def freq_response(self, channel: int, freqs_hz) -> np.ndarray:
        return _sos_freq_response(self.sos[channel], np.asarray(freqs_hz), self.sample_rate)

    def impulse_response(self, channel: int, n_samples: int) -> np.ndarray:
        x = np.zeros(n_samples)
        x[0] = 1.0
        return filter_cascade_bank(x, self.sos[channel:channel + 1])[0]


def estimate_channel_levels(bank: ChannelBank, floor_db: float = LEVEL_FLOOR_DB,
                            window: Optional[slice] = None,
                            smooth: bool = True) -> np.ndarray:
    """Per-channel rms level in dB SPL from a gammatone analysis pass.

    Levels are floored at ``floor_db`` (silent channels) and smoothed along
    the Cam axis with the triangular moving average, seeding the
    level-dependent gammachirp design.
    """
    data = bank.data if window is None else bank.data[:, window]
    rms = np.sqrt(np.mean(np.square(data), axis=1))
    with np.errstate(divide="ignore"):
        ps = 20.0 * np.log10(rms / P_REF)
    ps = np.maximum(ps, floor_db)
    if smooth:
        ps = smooth_across_channels(ps)
    return ps
