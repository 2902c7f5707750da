"""Two-way cooperative link model: delay, residual carrier offsets, noise.

The link between the interrogating node and the repeating node is
collapsed into a single per-pulse SNR at the interrogator's receiver.
Antenna gains, cable losses and repeater noise figure are all folded
into that one number, because every downstream accuracy result depends
only on the post-processing energy ratio ``2E/N0``.

SNR convention: ``snr_db`` references the mean power of the clean
(delayed, shifted, scaled) signal over the full window it is given.
With ranging and disambiguation frames padded to the same window
length, both pulses then see the same post-processing ``2E/N0``, equal
to ``2 * window_len * 10**(snr_db/10)``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .waveform import SPEED_OF_LIGHT, ComplexBasebandSignal


@dataclass(frozen=True)
class CarrierPlan:
    """Outbound/return carriers and the repeater's oscillator offsets.

    ``offset1``/``offset2`` are the deviations of the repeater's two
    carriers from nominal; both are zero when the nodes are frequency
    locked.
    """

    f_c1: float = 2.45e9
    f_c2: float = 5.8e9
    offset1: float = 0.0
    offset2: float = 0.0

    def __post_init__(self):
        if not (self.f_c1 > 0 and self.f_c2 > 0):
            raise ValueError("carrier frequencies must be positive")


@dataclass(frozen=True)
class ChannelState:
    """One-way geometry plus link quality for a round trip.

    ``snr_db`` may be ``math.inf`` to disable noise entirely.
    """

    true_range: float
    snr_db: float
    carrier: CarrierPlan = CarrierPlan()
    repeater_gain: float = 1.0

    def __post_init__(self):
        if self.true_range < 0:
            raise ValueError("true_range must be >= 0")
        if not self.repeater_gain > 0:
            raise ValueError("repeater_gain must be positive")
        if math.isnan(self.snr_db):
            raise ValueError("snr_db must not be NaN")


def residual_baseband_frequency(f_b: float, carrier: CarrierPlan) -> float:
    """Baseband frequency seen after the down-up-down conversion chain.

    A tone at ``f_b`` comes back at ``f_b - offset1 + offset2``; the two
    drift terms cancel exactly when the repeater is frequency locked (or
    whenever its two offsets happen to be equal).
    """
    return f_b - carrier.offset1 + carrier.offset2


def apply_round_trip_response(
    pulse: ComplexBasebandSignal, state: ChannelState
) -> ComplexBasebandSignal:
    """Deterministic part of the round trip: delay, shift, scale.

    The two-way delay ``2 * true_range / c`` is applied as a spectral
    phase ramp, which is exact for band-limited content and circular
    over the window (callers size the window so the wrap region stays
    empty).  The residual frequency shift ``offset2 - offset1`` is then
    applied across the window, followed by the repeater amplitude gain.
    """
    tau = 2.0 * state.true_range / SPEED_OF_LIGHT
    if tau > pulse.duration:
        raise ValueError(
            f"round-trip delay {tau:.3e} s exceeds the {pulse.duration:.3e} s window"
        )
    n = pulse.n_samples
    fs = pulse.sample_rate
    spectrum = np.fft.fft(pulse.samples)
    freqs = np.fft.fftfreq(n, d=1.0 / fs)
    delayed = np.fft.ifft(spectrum * np.exp(-2j * np.pi * freqs * tau))
    shift = residual_baseband_frequency(0.0, state.carrier)
    if shift != 0.0:
        t = np.arange(n) / fs
        delayed = delayed * np.exp(2j * np.pi * shift * t)
    return ComplexBasebandSignal(delayed * state.repeater_gain, fs)


def noise_power_for(clean: ComplexBasebandSignal, snr_db: float) -> float:
    """Complex noise variance that realizes ``snr_db`` over this window."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    mean_power = clean.energy / clean.n_samples
    return mean_power / (10.0 ** (snr_db / 10.0))


def propagate_round_trip(
    pulse: ComplexBasebandSignal,
    state: ChannelState,
    rng_seed: int,
    noise_power: float | None = None,
) -> ComplexBasebandSignal:
    """Full round trip: delay + residual shift + gain + calibrated noise.

    Noise is circularly symmetric white Gaussian with per-sample variance
    set so the window-average SNR equals ``state.snr_db`` (see the module
    docstring), unless an explicit ``noise_power`` override is given.
    Deterministic for a fixed ``rng_seed``.
    """
    clean = apply_round_trip_response(pulse, state)
    sigma2 = noise_power_for(clean, state.snr_db) if noise_power is None else noise_power
    if sigma2 < 0:
        raise ValueError("noise_power must be >= 0")
    if sigma2 == 0.0:
        return clean
    rng = np.random.default_rng(rng_seed)
    n = clean.n_samples
    noise = math.sqrt(sigma2 / 2.0) * (
        rng.standard_normal(n) + 1j * rng.standard_normal(n)
    )
    return ComplexBasebandSignal(clean.samples + noise, clean.sample_rate)


def post_snr_from_sample_snr(window_len: int, snr_db: float) -> float:
    """Post-processing ``2E/N0`` implied by a window-average sample SNR."""
    if window_len <= 0:
        raise ValueError("window_len must be positive")
    return 2.0 * window_len * 10.0 ** (snr_db / 10.0)


def sample_snr_for_post_snr(window_len: int, post_snr: float) -> float:
    """Window-average sample SNR (dB) that realizes a target ``2E/N0``."""
    if window_len <= 0:
        raise ValueError("window_len must be positive")
    if not post_snr > 0:
        raise ValueError("post_snr must be positive")
    return 10.0 * math.log10(post_snr / (2.0 * window_len))
