"""Stimulus waveform synthesis and charge accounting.

Sign convention (fixed for the whole package): cathodic current at the
stimulation electrode is NEGATIVE, anodic is POSITIVE.  A default stimulus is
a 40 ms low-amplitude priming phase followed by a 5 ms stimulation phase of
opposite polarity and 8x the amplitude, so the two phases carry equal and
opposite charge.

Exactness: charge cancellation is bit-exact, not tolerance-based.  To keep it
that way, balanced specs only admit power-of-two priming ratios (the priming
amplitude ``amp * ratio`` is then exact in binary floating point) and sample
rates at which both phase widths are whole sample counts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

MAX_AMPLITUDE_MA = 4.0    # software limit on requested amplitude
HARDWARE_CAP_MA = 4.5     # current-limiting diode; no sample may ever exceed this
MIN_SAMPLE_RATE_HZ = 1000

CATHODIC = "cathodic"
ANODIC = "anodic"


class AmplitudeRangeError(ValueError):
    """Requested current outside the permitted range."""


class SampleRateError(ValueError):
    """Sample rate too low or not commensurate with the pulse widths."""


class UnbalancedSpecError(ValueError):
    """Spec does not cancel charge and the unbalanced flag was not given."""


def _phase_sample_count(width_ms: float, sample_rate: int) -> int:
    """Number of samples in a phase; the width must be a whole sample count."""
    exact = Fraction(width_ms) * sample_rate / 1000
    if exact.denominator != 1:
        raise SampleRateError(
            f"{width_ms} ms is not a whole number of samples at {sample_rate} Hz"
        )
    return int(exact)


def _check_sample_rate(sample_rate: int) -> None:
    if sample_rate < MIN_SAMPLE_RATE_HZ:
        raise SampleRateError(
            f"sample rate {sample_rate} Hz below minimum {MIN_SAMPLE_RATE_HZ} Hz"
        )


def _is_power_of_two_fraction(x: float) -> bool:
    f = Fraction(x)
    return f.numerator == 1 and (f.denominator & (f.denominator - 1)) == 0


@dataclass(frozen=True)
class PulseSpec:
    """One stimulus: a priming phase then a stimulation phase.

    ``priming_ratio`` scales the stimulation amplitude down for the priming
    phase; with the default 1/8 ratio and 40 ms / 5 ms widths the phases carry
    equal charge.  Pass ``allow_unbalanced=True`` to construct a spec that
    deliberately does not cancel (e.g. for charge-accumulation demos).
    """

    stim_amplitude_ma: float
    stim_width_ms: float = 5.0
    priming_width_ms: float = 40.0
    priming_ratio: float = 0.125
    stim_polarity: str = CATHODIC
    interphase_gap_ms: float = 0.0
    allow_unbalanced: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not 0.0 < self.stim_amplitude_ma <= MAX_AMPLITUDE_MA:
            raise AmplitudeRangeError(
                f"amplitude {self.stim_amplitude_ma} mA outside (0, {MAX_AMPLITUDE_MA}]"
            )
        if self.stim_width_ms <= 0 or self.priming_width_ms < 0:
            raise ValueError("pulse widths must be positive")
        if not 0 <= self.priming_ratio <= 1:
            raise ValueError("priming ratio must be in [0, 1]")
        if self.interphase_gap_ms < 0:
            raise ValueError("interphase gap must be >= 0")
        if self.stim_polarity not in (CATHODIC, ANODIC):
            raise ValueError(f"unknown polarity {self.stim_polarity!r}")
        if not self.allow_unbalanced:
            balanced = (
                Fraction(self.priming_ratio) * Fraction(self.priming_width_ms)
                == Fraction(self.stim_width_ms)
            )
            if not balanced:
                raise UnbalancedSpecError(
                    "priming_ratio * priming_width must equal stim_width; "
                    "pass allow_unbalanced=True for a deliberately unbalanced spec"
                )
            if not _is_power_of_two_fraction(self.priming_ratio):
                raise UnbalancedSpecError(
                    "balanced specs require a power-of-two priming ratio "
                    "so cancellation is exact in floating point"
                )

    @property
    def priming_amplitude_ma(self) -> float:
        return self.stim_amplitude_ma * self.priming_ratio

    @property
    def duration_ms(self) -> float:
        return self.priming_width_ms + self.interphase_gap_ms + self.stim_width_ms


@dataclass(frozen=True)
class StimulusTrain:
    """A repeated stimulus with a fixed inter-stimulus gap."""

    spec: PulseSpec
    count: int = 10
    inter_stimulus_gap_ms: float = 1000.0

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("train count must be >= 1")
        if self.inter_stimulus_gap_ms < 0:
            raise ValueError("inter-stimulus gap must be >= 0")


@dataclass(frozen=True)
class WaveformSamples:
    """Sampled current trace in mA (cathodic negative)."""

    sample_rate_hz: int
    samples: tuple[float, ...]

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise SampleRateError("sample rate must be positive")
        if any(abs(s) > HARDWARE_CAP_MA for s in self.samples):
            raise AmplitudeRangeError(
                f"sample exceeds hardware cap {HARDWARE_CAP_MA} mA"
            )

    @property
    def duration_ms(self) -> float:
        return len(self.samples) * 1000.0 / self.sample_rate_hz

    def __len__(self) -> int:
        return len(self.samples)


def synth_stimulus(spec: PulseSpec, sample_rate_hz: int = 10_000) -> WaveformSamples:
    """Render a spec: priming phase first, then the stimulation phase."""
    _check_sample_rate(sample_rate_hz)
    n_priming = _phase_sample_count(spec.priming_width_ms, sample_rate_hz)
    n_gap = _phase_sample_count(spec.interphase_gap_ms, sample_rate_hz)
    n_stim = _phase_sample_count(spec.stim_width_ms, sample_rate_hz)

    stim_sign = -1.0 if spec.stim_polarity == CATHODIC else 1.0
    priming = (-stim_sign * spec.priming_amplitude_ma,) * n_priming
    gap = (0.0,) * n_gap
    stim = (stim_sign * spec.stim_amplitude_ma,) * n_stim
    return WaveformSamples(sample_rate_hz, priming + gap + stim)


def synth_monophasic(
    amplitude_ma: float, width_ms: float = 5.0, sample_rate_hz: int = 10_000
) -> WaveformSamples:
    """Single cathodic rectangle with no priming phase (baseline waveform)."""
    if not 0.0 <= amplitude_ma <= MAX_AMPLITUDE_MA:
        raise AmplitudeRangeError(
            f"amplitude {amplitude_ma} mA outside [0, {MAX_AMPLITUDE_MA}]"
        )
    _check_sample_rate(sample_rate_hz)
    n = _phase_sample_count(width_ms, sample_rate_hz)
    return WaveformSamples(sample_rate_hz, (-amplitude_ma,) * n)


def net_charge_uc(w: WaveformSamples) -> float:
    """Net charge in microcoulombs (mA * ms).

    ``math.fsum`` makes this exact for rectangular waves: the balanced
    stimulus sums to exactly 0.0, not merely something small.
    """
    return math.fsum(w.samples) * 1000.0 / w.sample_rate_hz


def build_train(
    train: StimulusTrain, sample_rate_hz: int = 10_000
) -> list[tuple[float, WaveformSamples]]:
    """Schedule of (start_ms, waveform); entry k starts at k*(duration+gap)."""
    w = synth_stimulus(train.spec, sample_rate_hz)
    period = train.spec.duration_ms + train.inter_stimulus_gap_ms
    return [(k * period, w) for k in range(train.count)]


def amplitude_to_control(amplitude_ma: float) -> float:
    """Linear map of a current request onto the [0, 1] DAC control range."""
    if not 0.0 <= amplitude_ma <= MAX_AMPLITUDE_MA:
        raise AmplitudeRangeError(
            f"amplitude {amplitude_ma} mA outside [0, {MAX_AMPLITUDE_MA}]"
        )
    return amplitude_ma / MAX_AMPLITUDE_MA


def control_to_amplitude(control: float) -> float:
    if not 0.0 <= control <= 1.0:
        raise AmplitudeRangeError(f"control fraction {control} outside [0, 1]")
    return control * MAX_AMPLITUDE_MA


def quantize_control(control: float, bits: int = 12) -> float:
    """Round a control fraction to the nearest DAC code at the given depth."""
    full_scale = (1 << bits) - 1
    return round(control * full_scale) / full_scale


def write_waveform_csv(w: WaveformSamples, path) -> None:
    dt_ms = 1000.0 / w.sample_rate_hz
    with open(path, "w") as f:
        f.write("time_ms,current_mA\n")
        for i, s in enumerate(w.samples):
            f.write(f"{i * dt_ms:.6g},{s:.6g}\n")


def write_schedule(schedule: list[tuple[float, WaveformSamples]], path) -> None:
    """Line-delimited schedule records for replay or inspection."""
    with open(path, "w") as f:
        for start_ms, w in schedule:
            rec = {
                "start_ms": start_ms,
                "sample_rate_hz": w.sample_rate_hz,
                "current_ma": list(w.samples),
            }
            f.write(json.dumps(rec) + "\n")
