"""Calibrated test-signal generation and SPL bookkeeping.

All signals are held as sound pressure in pascals so that the SPL of any
segment can be recomputed from the samples alone.  Generators rescale by
their own measured rms, so the requested SPL is hit exactly regardless of
whether the duration covers an integer number of cycles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

#: Reference sound pressure, 20 micropascal.
P_REF = 2e-5

#: Default sampling rate in Hz.
DEFAULT_RATE = 44100.0

NOISE_KINDS = ("nb-noise", "hp-noise", "lp-noise")
SIGNAL_KINDS = ("sine", "am", "fm") + NOISE_KINDS


class StimulusError(ValueError):
    """Raised for out-of-range stimulus parameters."""


@dataclass(frozen=True)
class CalibratedSignal:
    """A sampled sound-pressure waveform in pascals.

    The samples are treated as immutable once constructed; operations that
    change the waveform return a new instance.
    """

    samples: np.ndarray
    sample_rate: float = DEFAULT_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise StimulusError(f"sample_rate must be positive, got {self.sample_rate}")
        if samples.ndim != 1:
            raise StimulusError("signal must be single channel (1-D samples)")
        if not np.all(np.isfinite(samples)):
            raise StimulusError("signal contains non-finite samples")
        object.__setattr__(self, "samples", samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def rms(self) -> float:
        return float(np.sqrt(np.mean(np.square(self.samples))))

    def spl_db(self) -> float:
        """SPL of the whole signal, 20*log10(p_rms / 20 uPa)."""
        r = self.rms()
        if r <= 0.0:
            return -np.inf
        return 20.0 * math.log10(r / P_REF)

    def scaled(self, gain: float) -> "CalibratedSignal":
        return CalibratedSignal(self.samples * gain, self.sample_rate)

    def with_spl(self, level_db_spl: float) -> "CalibratedSignal":
        """Rescale so the measured SPL equals ``level_db_spl`` exactly."""
        r = self.rms()
        if r <= 0.0:
            raise StimulusError("cannot calibrate an all-zero signal to an SPL")
        target_rms = P_REF * 10.0 ** (level_db_spl / 20.0)
        return self.scaled(target_rms / r)


@dataclass(frozen=True)
class StimulusSpec:
    """Declarative description of a test signal.

    ``kind`` selects the generator; fields irrelevant to the kind are left
    at None.  Noise kinds require ``seed`` for determinism.
    """

    kind: str
    carrier_hz: Optional[float] = None
    mod_freq_hz: Optional[float] = None
    mod_depth_fraction: Optional[float] = None
    freq_deviation_hz: Optional[float] = None
    center_hz: Optional[float] = None
    bandwidth_hz: Optional[float] = None
    low_cut_hz: Optional[float] = None
    high_cut_hz: Optional[float] = None
    duration_s: float = 1.0
    level_db_spl: float = 60.0
    seed: Optional[int] = None
    sample_rate: float = DEFAULT_RATE

    def __post_init__(self):
        if self.kind not in SIGNAL_KINDS:
            raise StimulusError(f"unknown stimulus kind {self.kind!r}")
        if self.duration_s <= 0:
            raise StimulusError("duration_s must be positive")
        if self.kind in NOISE_KINDS and self.seed is None:
            raise StimulusError(f"{self.kind} requires a seed for determinism")
        if self.mod_depth_fraction is not None and not 0.0 <= self.mod_depth_fraction <= 1.0:
            raise StimulusError("mod_depth_fraction must be within [0, 1]")

    def render(self) -> CalibratedSignal:
        if self.kind == "sine":
            return gen_sine(self.carrier_hz, self.duration_s, self.level_db_spl,
                            self.sample_rate)
        if self.kind == "am":
            return gen_am(self.carrier_hz, self.mod_freq_hz, self.mod_depth_fraction,
                          self.duration_s, self.level_db_spl, self.sample_rate)
        if self.kind == "fm":
            return gen_fm(self.carrier_hz, self.mod_freq_hz, self.freq_deviation_hz,
                          self.duration_s, self.level_db_spl, self.sample_rate)
        return gen_noise(self)


def _time_axis(duration_s: float, sample_rate: float) -> np.ndarray:
    n = int(round(duration_s * sample_rate))
    if n < 1:
        raise StimulusError("duration too short for one sample")
    return np.arange(n) / sample_rate


def gen_sine(freq_hz: float, duration_s: float, level_db_spl: float,
             sample_rate: float = DEFAULT_RATE) -> CalibratedSignal:
    """Steady sinusoid calibrated to ``level_db_spl``."""
    if freq_hz <= 0 or freq_hz >= sample_rate / 2:
        raise StimulusError(f"frequency {freq_hz} Hz outside (0, Nyquist)")
    if duration_s <= 0:
        raise StimulusError("duration_s must be positive")
    t = _time_axis(duration_s, sample_rate)
    x = np.sin(2.0 * np.pi * freq_hz * t)
    return CalibratedSignal(x, sample_rate).with_spl(level_db_spl)


def gen_am(carrier_hz: float, mod_freq_hz: float, depth: float, duration_s: float,
           level_db_spl: float, sample_rate: float = DEFAULT_RATE) -> CalibratedSignal:
    """Amplitude-modulated tone, (1 + depth*cos) envelope, SPL-calibrated overall."""
    if not 0.0 <= depth <= 1.0:
        raise StimulusError(f"modulation depth {depth} outside [0, 1]")
    if carrier_hz <= 0 or carrier_hz >= sample_rate / 2:
        raise StimulusError(f"carrier {carrier_hz} Hz outside (0, Nyquist)")
    t = _time_axis(duration_s, sample_rate)
    x = (1.0 + depth * np.cos(2.0 * np.pi * mod_freq_hz * t)) * np.sin(2.0 * np.pi * carrier_hz * t)
    return CalibratedSignal(x, sample_rate).with_spl(level_db_spl)


def gen_fm(carrier_hz: float, mod_freq_hz: float, deviation_hz: float, duration_s: float,
           level_db_spl: float, sample_rate: float = DEFAULT_RATE) -> CalibratedSignal:
    """Frequency-modulated tone with instantaneous frequency carrier + dev*cos."""
    lo = carrier_hz - abs(deviation_hz)
    hi = carrier_hz + abs(deviation_hz)
    if lo <= 0 or hi >= sample_rate / 2:
        raise StimulusError(
            f"instantaneous frequency range ({lo}, {hi}) Hz outside (0, Nyquist)")
    t = _time_axis(duration_s, sample_rate)
    if mod_freq_hz > 0 and deviation_hz != 0.0:
        phase = 2.0 * np.pi * carrier_hz * t + (deviation_hz / mod_freq_hz) * np.sin(
            2.0 * np.pi * mod_freq_hz * t)
    else:
        phase = 2.0 * np.pi * carrier_hz * t
    x = np.sin(phase)
    return CalibratedSignal(x, sample_rate).with_spl(level_db_spl)


def gen_noise(spec: StimulusSpec) -> CalibratedSignal:
    """Band-shaped noise per a brick-wall spectral mask.

    Seeded white noise is shaped in the frequency domain; the mask is 1
    inside the requested band and 0 outside, so out-of-band density is at
    the numerical floor.  Deterministic for a fixed seed.
    """
    if spec.kind not in NOISE_KINDS:
        raise StimulusError(f"gen_noise got non-noise kind {spec.kind!r}")
    nyq = spec.sample_rate / 2
    if spec.kind == "nb-noise":
        if spec.center_hz is None or spec.bandwidth_hz is None:
            raise StimulusError("nb-noise needs center_hz and bandwidth_hz")
        lo = spec.center_hz - spec.bandwidth_hz / 2
        hi = spec.center_hz + spec.bandwidth_hz / 2
    elif spec.kind == "hp-noise":
        if spec.low_cut_hz is None:
            raise StimulusError("hp-noise needs low_cut_hz")
        lo, hi = spec.low_cut_hz, spec.high_cut_hz if spec.high_cut_hz else nyq * 0.999
    else:
        if spec.high_cut_hz is None:
            raise StimulusError("lp-noise needs high_cut_hz")
        lo, hi = (spec.low_cut_hz if spec.low_cut_hz else 0.0), spec.high_cut_hz
    if not (0 <= lo < hi < nyq):
        raise StimulusError(f"band edges ({lo}, {hi}) Hz invalid for Nyquist {nyq}")

    rng = np.random.default_rng(spec.seed)
    t = _time_axis(spec.duration_s, spec.sample_rate)
    white = rng.standard_normal(len(t))
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(len(t), 1.0 / spec.sample_rate)
    mask = (freqs >= lo) & (freqs <= hi)
    spectrum[~mask] = 0.0
    shaped = np.fft.irfft(spectrum, n=len(t))
    return CalibratedSignal(shaped, spec.sample_rate).with_spl(spec.level_db_spl)


def steady_slice(n_samples: int, sample_rate: float, warmup_s: float = 0.2) -> slice:
    """Analysis window that skips filter warm-up.

    Discards the first ``warmup_s`` (default 0.2 s) or a quarter of the
    signal, whichever is shorter, so short stimuli keep a usable window.
    """
    start = min(int(round(warmup_s * sample_rate)), n_samples // 4)
    return slice(start, n_samples)


def zwicker_critical_bandwidth(center_hz: float) -> float:
    """Critical bandwidth in Hz at a given center frequency.

    Classic approximation 25 + 75*(1 + 1.4*(f/1000)^2)^0.69; used to pick
    narrow-band noise bandwidths for the sharpness sweeps.
    """
    return 25.0 + 75.0 * (1.0 + 1.4 * (center_hz / 1000.0) ** 2) ** 0.69


class ScaleConvergenceError(RuntimeError):
    """Raised when loudness-targeted scaling fails to converge."""


def scale_to_loudness(signal: CalibratedSignal, target_sone: float,
                      loudness_evaluator: Callable[[CalibratedSignal], float],
                      rel_tol: float = 0.01, max_iter: int = 60) -> CalibratedSignal:
    """Gain-scale a signal until its time-averaged loudness hits a target.

    Bisection on gain in dB; loudness is monotone in level, which justifies
    the bracketing.  The returned copy is within ``rel_tol`` (default 1 %)
    of ``target_sone``.
    """
    if target_sone <= 0:
        raise StimulusError("target_sone must be positive")

    def loud_at(gain_db: float) -> float:
        return loudness_evaluator(signal.scaled(10.0 ** (gain_db / 20.0)))

    evals = 0
    n0 = loud_at(0.0)
    evals += 1
    if n0 <= 0:
        raise ScaleConvergenceError("signal produces zero loudness; cannot scale")
    if abs(n0 - target_sone) <= rel_tol * target_sone:
        return signal.scaled(1.0)

    # Warm start from the sone-doubling trend (~2x per 10 dB), then widen
    # the bracket until it straddles the target.
    guess = 10.0 * math.log2(target_sone / n0)
    lo, hi = guess - 6.0, guess + 6.0
    n_lo, n_hi = loud_at(lo), loud_at(hi)
    evals += 2
    while n_lo > target_sone and evals < max_iter:
        lo -= 10.0
        n_lo = loud_at(lo)
        evals += 1
    while n_hi < target_sone and evals < max_iter:
        hi += 10.0
        n_hi = loud_at(hi)
        evals += 1
    if not (n_lo <= target_sone <= n_hi):
        raise ScaleConvergenceError(
            f"could not bracket target {target_sone} sone within {evals} evaluations")

    while evals < max_iter:
        mid = 0.5 * (lo + hi)
        n_mid = loud_at(mid)
        evals += 1
        if abs(n_mid - target_sone) <= rel_tol * target_sone:
            return signal.scaled(10.0 ** (mid / 20.0))
        if n_mid < target_sone:
            lo = mid
        else:
            hi = mid
    raise ScaleConvergenceError(
        f"no convergence to {target_sone} sone after {max_iter} evaluations")
