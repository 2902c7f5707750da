"""Spectrally sparse ranging waveforms and the accuracy bound they obey.

Everything here works on uniformly sampled complex baseband sequences.
The two ranging tones are rendered at their positive offsets ``f1`` and
``f2`` (carrier handling lives in :mod:`cohsync.channel`), so spectral
moments are taken about the spectral centroid.  With that convention the
mean-squared bandwidth of a long two-tone pulse converges to
``(2*pi*delta_f)**2`` where ``delta_f = (f2 - f1) / 2``.
"""

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299792458.0  # m/s


@dataclass(frozen=True, eq=False)
class ComplexBasebandSignal:
    """A uniformly sampled complex baseband waveform.

    Parameters
    ----------
    samples : ndarray of complex
        Dimensionless complex amplitudes.
    sample_rate : float
        Sample rate in Hz. Must be positive.
    """

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D sequence")
        if not self.sample_rate > 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    @property
    def n_samples(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        """Span of the sample grid in seconds."""
        return self.n_samples / self.sample_rate

    @property
    def energy(self) -> float:
        """Sum of |s[k]|^2 over all samples."""
        return float(np.sum(np.abs(self.samples) ** 2))


@dataclass(frozen=True)
class TwoToneSpec:
    """Tone frequencies of a two-tone ranging pulse, in Hz.

    ``delta_f`` is half the tone separation; the ranging ambiguity period
    is ``1 / (f2 - f1)``.
    """

    f1: float
    f2: float

    def __post_init__(self):
        if not 0 <= self.f1 <= self.f2:
            raise ValueError(f"need 0 <= f1 <= f2, got f1={self.f1}, f2={self.f2}")

    @property
    def delta_f(self) -> float:
        return (self.f2 - self.f1) / 2.0

    @property
    def separation(self) -> float:
        return self.f2 - self.f1


@dataclass(frozen=True)
class WaveformConfig:
    """Full pulse-train definition: ranging tones plus disambiguation tone.

    The disambiguation pulse is one full period of ``f_d``, so its width
    must equal ``1 / f_d`` to within one sample period.
    """

    two_tone: TwoToneSpec
    f_d: float
    ranging_pulse_width: float
    disamb_pulse_width: float
    pri: float
    sample_rate: float

    def __post_init__(self):
        fs = self.sample_rate
        if not fs > 0:
            raise ValueError("sample_rate must be positive")
        if not 0 < self.f_d < fs / 2:
            raise ValueError(f"f_d={self.f_d} must lie in (0, sample_rate/2)")
        if self.two_tone.f2 >= fs / 2:
            raise ValueError(f"f2={self.two_tone.f2} aliases at sample_rate={fs}")
        if abs(self.disamb_pulse_width - 1.0 / self.f_d) > 1.0 / fs:
            raise ValueError(
                "disamb_pulse_width must be one period of f_d to within a sample"
            )
        if self.pri < max(self.ranging_pulse_width, self.disamb_pulse_width):
            raise ValueError("pri must cover the longest pulse")


def generate_two_tone(
    spec: TwoToneSpec, width: float, sample_rate: float
) -> ComplexBasebandSignal:
    """Render a two-tone ranging pulse of the given width.

    The pulse is ``exp(j*2*pi*f1*t) + exp(j*2*pi*f2*t)`` with both tones
    phase-zero at the first sample; the sample count is ``round(width *
    sample_rate)``.

    Raises
    ------
    ValueError
        If ``f2`` would alias, the width is not positive, or the pulse
        would contain fewer than 2 samples.
    """
    if not width > 0:
        raise ValueError(f"width must be positive, got {width}")
    if not sample_rate > 0:
        raise ValueError("sample_rate must be positive")
    if spec.f2 >= sample_rate / 2:
        raise ValueError(
            f"f2={spec.f2} Hz aliases at sample_rate={sample_rate} Hz"
        )
    n = int(round(width * sample_rate))
    if n < 2:
        raise ValueError("pulse must span at least 2 samples")
    t = np.arange(n) / sample_rate
    samples = np.exp(2j * np.pi * spec.f1 * t) + np.exp(2j * np.pi * spec.f2 * t)
    return ComplexBasebandSignal(samples, sample_rate)


def generate_disambiguation(f_d: float, sample_rate: float) -> ComplexBasebandSignal:
    """Render exactly one period of a single complex tone at ``f_d``.

    A one-period pulse keeps the matched-filter output down to a single
    lobe, which is what makes it usable for ambiguity resolution.
    """
    if not 0 < f_d < sample_rate / 2:
        raise ValueError(f"f_d={f_d} must lie in (0, sample_rate/2)")
    n = int(round(sample_rate / f_d))
    if n < 2:
        raise ValueError("disambiguation pulse must span at least 2 samples")
    t = np.arange(n) / sample_rate
    return ComplexBasebandSignal(np.exp(2j * np.pi * f_d * t), sample_rate)


def mean_squared_bandwidth(signal: ComplexBasebandSignal) -> float:
    """Second central moment of the power spectrum, in (rad/s)^2.

    Discrete approximation of the integral form: the DFT power spectrum
    weights ``(2*pi*f)**2`` deviations about the spectral centroid.
    Taking the moment about the centroid removes the carrier-offset term,
    so a pure two-tone pulse converges to ``(2*pi*delta_f)**2``.
    """
    spectrum = np.fft.fft(signal.samples)
    power = np.abs(spectrum) ** 2
    total = power.sum()
    if not total > 0:
        raise ValueError("signal has zero energy")
    omega = 2.0 * np.pi * np.fft.fftfreq(signal.n_samples, d=1.0 / signal.sample_rate)
    centroid = float((omega * power).sum() / total)
    return float((((omega - centroid) ** 2) * power).sum() / total)


def crlb_sigma_r(delta_f: float, post_snr: float) -> float:
    """Lower bound on one-way ranging standard deviation, in meters.

    ``delta_f`` is half the tone separation in Hz and ``post_snr`` is the
    post-processing energy ratio ``2E/N0`` (dimensionless).  The bound is
    ``(c/2) / (beta * sqrt(post_snr))`` with ``beta = 2*pi*delta_f``; the
    ``c/2`` factor converts the round-trip delay deviation to one-way
    range.
    """
    if not delta_f > 0:
        raise ValueError(f"delta_f must be positive, got {delta_f}")
    if not post_snr > 0:
        raise ValueError(f"post_snr must be positive, got {post_snr}")
    beta = 2.0 * np.pi * delta_f
    return SPEED_OF_LIGHT / (2.0 * beta * math.sqrt(post_snr))
