"""Closed-loop scenario runs: pulse trains, environment traces, logging.

A *processing interval* is one full loop iteration: a window of ranging
cycles simulated at the trace's SNR, a grouped standard deviation, and
(in adaptive runs) one controller action that sets the next tone
separation.  With the defaults (200 pulses, one every 105 ms) an
interval spans 21 s of simulated time; simulated time is bookkeeping
only and runs as fast as the math allows.

Reproducibility: every run is a pure function of (config, trace, master
seed).  Per-interval noise streams are derived as
``SeedSequence((master_seed, stream, interval_index))`` so runs are
bit-identical across processes.

Environment traces are sequences of 1-minute-cadence records.  Weather
columns are carried as metadata; when ``loop.weather_coupling`` is on,
a deliberately simple, non-physical mapping modulates the SNR (rain and
humidity subtract dB, wind adds seeded jitter) for qualitative demos.
"""

import csv
import logging
import math
from bisect import bisect_right
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
import scipy.fft

from .channel import ChannelState, apply_round_trip_response, noise_power_for
from .config import EstimatorConfig, LoopConfig, RunConfig
from .control import pi_step
from .ranging import (
    RangeWindowStats,
    _circular_correlation,
    disambiguate_and_refine,
    window_stats,
)
from .waveform import (
    SPEED_OF_LIGHT,
    ComplexBasebandSignal,
    TwoToneSpec,
    WaveformConfig,
    generate_disambiguation,
    generate_two_tone,
)

logger = logging.getLogger(__name__)

# Illustrative weather-to-SNR coupling, intentionally non-physical; used
# only when LoopConfig.weather_coupling is enabled.
RAIN_DB_PER_MMHR = 0.12
HUMIDITY_DB_PER_PCT_OVER_60 = 0.02
WIND_JITTER_DB_PER_MPS = 0.15


@dataclass(frozen=True)
class EnvironmentRecord:
    """One environment sample; weather fields are optional metadata."""

    timestamp_s: float
    snr_db: float
    wind_mps: float = math.nan
    humidity_pct: float = math.nan
    rain_mmhr: float = math.nan
    temp_c: float = math.nan


@dataclass(frozen=True)
class TraceSegment:
    """One piece of a synthetic environment program.

    ``snr_db_end`` turns the segment into a linear ramp; a positive
    ``fluctuation_std_db`` adds a stationary AR(1) perturbation with
    coefficient ``ar_coeff``.  ``start_s``, when given, must match the
    end of the previous segment (segments are contiguous by
    construction).
    """

    duration_s: float
    snr_db: float
    snr_db_end: float | None = None
    fluctuation_std_db: float = 0.0
    ar_coeff: float = 0.9
    wind_mps: float = math.nan
    humidity_pct: float = math.nan
    rain_mmhr: float = math.nan
    temp_c: float = math.nan
    start_s: float | None = None


@dataclass(frozen=True)
class ProcessingIntervalLog:
    """Per-interval run record; ``f2_hz`` is the tone in force that interval."""

    interval_index: int
    f2_hz: float
    sigma_d_m: float
    mean_range_m: float
    snr_db: float
    controller_error_m: float
    timestamp_s: float


def synthesize_trace(
    segments: Sequence[TraceSegment],
    seed: int = 0,
    cadence_s: float = 60.0,
    start_s: float = 0.0,
) -> list[EnvironmentRecord]:
    """Render a piecewise SNR/weather program to cadence-spaced records."""
    if not segments:
        raise ValueError("no segments given")
    records: list[EnvironmentRecord] = []
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    t = start_s
    for idx, seg in enumerate(segments):
        if seg.start_s is not None:
            if seg.start_s < t - 1e-9:
                raise ValueError(f"segment {idx} overlaps the previous one")
            if seg.start_s > t + 1e-9:
                raise ValueError(f"segment {idx} leaves a gap before it")
        n = int(round(seg.duration_s / cadence_s))
        if n < 1:
            raise ValueError(f"segment {idx} shorter than one cadence interval")
        fluct = np.zeros(n)
        if seg.fluctuation_std_db > 0.0:
            if not 0.0 <= seg.ar_coeff < 1.0:
                raise ValueError("ar_coeff must lie in [0, 1)")
            g = rng.standard_normal(n)
            fluct[0] = seg.fluctuation_std_db * g[0]
            drive = math.sqrt(1.0 - seg.ar_coeff**2) * seg.fluctuation_std_db
            for k in range(1, n):
                fluct[k] = seg.ar_coeff * fluct[k - 1] + drive * g[k]
        for k in range(n):
            frac = k / n
            snr = seg.snr_db
            if seg.snr_db_end is not None:
                snr += (seg.snr_db_end - seg.snr_db) * frac
            records.append(
                EnvironmentRecord(
                    timestamp_s=t + k * cadence_s,
                    snr_db=snr + fluct[k],
                    wind_mps=seg.wind_mps,
                    humidity_pct=seg.humidity_pct,
                    rain_mmhr=seg.rain_mmhr,
                    temp_c=seg.temp_c,
                )
            )
        t += n * cadence_s
    return records


_TRACE_FIELDS = ("timestamp_s", "snr_db", "wind_mps", "humidity_pct", "rain_mmhr", "temp_c")
_LOG_FIELDS = ("interval", "f2_hz", "sigma_d_m", "mean_range_m", "snr_db", "error_m", "timestamp_s")


def _fmt(value: float) -> str:
    """Shortest decimal that round-trips the float exactly."""
    return repr(float(value))


def write_trace_csv(path, records: Sequence[EnvironmentRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_TRACE_FIELDS)
        for r in records:
            row = [r.timestamp_s, r.snr_db, r.wind_mps, r.humidity_pct, r.rain_mmhr, r.temp_c]
            writer.writerow(["" if isinstance(v, float) and math.isnan(v) else _fmt(v) for v in row])


def read_trace_csv(path) -> list[EnvironmentRecord]:
    """Parse a trace CSV; only timestamp_s and snr_db columns are required."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty trace file")
        for required in ("timestamp_s", "snr_db"):
            if required not in reader.fieldnames:
                raise ValueError(f"{path}: missing required column '{required}'")
        unknown = set(reader.fieldnames) - set(_TRACE_FIELDS)
        if unknown:
            raise ValueError(f"{path}: unknown trace columns {sorted(unknown)}")
        records = []
        for row in reader:
            def grab(name):
                raw = row.get(name)
                return math.nan if raw in (None, "") else float(raw)

            records.append(
                EnvironmentRecord(
                    timestamp_s=float(row["timestamp_s"]),
                    snr_db=float(row["snr_db"]),
                    wind_mps=grab("wind_mps"),
                    humidity_pct=grab("humidity_pct"),
                    rain_mmhr=grab("rain_mmhr"),
                    temp_c=grab("temp_c"),
                )
            )
    if not records:
        raise ValueError(f"{path}: trace has no records")
    times = [r.timestamp_s for r in records]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError(f"{path}: timestamps must be strictly increasing")
    return records


def write_run_log_csv(path, logs: Sequence[ProcessingIntervalLog]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_LOG_FIELDS)
        for entry in logs:
            writer.writerow(
                [
                    entry.interval_index,
                    _fmt(entry.f2_hz),
                    _fmt(entry.sigma_d_m),
                    _fmt(entry.mean_range_m),
                    _fmt(entry.snr_db),
                    _fmt(entry.controller_error_m),
                    _fmt(entry.timestamp_s),
                ]
            )


def read_run_log_csv(path) -> list[ProcessingIntervalLog]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != list(_LOG_FIELDS):
            raise ValueError(f"{path}: not a run log (unexpected header)")
        return [
            ProcessingIntervalLog(
                interval_index=int(row["interval"]),
                f2_hz=float(row["f2_hz"]),
                sigma_d_m=float(row["sigma_d_m"]),
                mean_range_m=float(row["mean_range_m"]),
                snr_db=float(row["snr_db"]),
                controller_error_m=float(row["error_m"]),
                timestamp_s=float(row["timestamp_s"]),
            )
            for row in reader
        ]


def effective_window_length(
    waveform: WaveformConfig,
    channel_state: ChannelState,
    estimator: EstimatorConfig = EstimatorConfig(),
    window_pad_samples: int = 128,
) -> int:
    """Receive-window length (samples) simulate_window will use.

    The padding covers the round-trip delay plus the interpolator's
    support, then the total is rounded up to an FFT-friendly length.
    """
    fs = waveform.sample_rate
    n_pulse = int(round(waveform.ranging_pulse_width * fs))
    delay = 2.0 * channel_state.true_range / SPEED_OF_LIGHT * fs
    pad = max(
        window_pad_samples,
        int(math.ceil(delay)) + estimator.interp_taps + estimator.neighbors + 8,
    )
    return scipy.fft.next_fast_len(n_pulse + pad)


def simulate_window(
    waveform: WaveformConfig,
    channel_state: ChannelState,
    n_pulses: int,
    estimator: EstimatorConfig = EstimatorConfig(),
    seed=0,
    window_pad_samples: int = 128,
    use_disambiguation: bool = True,
) -> tuple[np.ndarray, int]:
    """Simulate ``n_pulses`` ranging cycles; returns (ranges, gross count).

    Each cycle propagates one ranging frame and one disambiguation frame
    (padded to a common window length, hence equal post-processing
    ``2E/N0``) through the channel with independent noise, matched
    filters both, and runs the full lobe-selection/refinement chain.
    Deterministic for a fixed ``seed``.
    """
    if n_pulses < 1:
        raise ValueError("n_pulses must be >= 1")
    fs = waveform.sample_rate
    pulse_r = generate_two_tone(waveform.two_tone, waveform.ranging_pulse_width, fs)
    pulse_d = generate_disambiguation(waveform.f_d, fs)
    n_win = effective_window_length(waveform, channel_state, estimator, window_pad_samples)

    frame_r = ComplexBasebandSignal(
        np.concatenate([pulse_r.samples, np.zeros(n_win - pulse_r.n_samples)]), fs
    )
    frame_d = ComplexBasebandSignal(
        np.concatenate([pulse_d.samples, np.zeros(n_win - pulse_d.n_samples)]), fs
    )
    clean_r = apply_round_trip_response(frame_r, channel_state)
    clean_d = apply_round_trip_response(frame_d, channel_state)
    sigma2_r = noise_power_for(clean_r, channel_state.snr_db)
    sigma2_d = noise_power_for(clean_d, channel_state.snr_db)

    rng = np.random.default_rng(np.random.SeedSequence(seed))

    def with_noise(clean: np.ndarray, sigma2: float) -> np.ndarray:
        rows = np.broadcast_to(clean, (n_pulses, n_win))
        if sigma2 == 0.0:
            return rows
        noise = rng.standard_normal((n_pulses, n_win, 2))
        return rows + math.sqrt(sigma2 / 2.0) * (noise[..., 0] + 1j * noise[..., 1])

    mf_r_rows = _circular_correlation(with_noise(clean_r.samples, sigma2_r), pulse_r.samples)
    mf_d_rows = _circular_correlation(with_noise(clean_d.samples, sigma2_d), pulse_d.samples)

    expected_lag = 2.0 * channel_state.true_range / SPEED_OF_LIGHT
    ranges = np.empty(n_pulses)
    gross = 0
    for i in range(n_pulses):
        mf_r = ComplexBasebandSignal(mf_r_rows[i], fs)
        mf_d = ComplexBasebandSignal(mf_d_rows[i], fs) if use_disambiguation else None
        est = disambiguate_and_refine(
            mf_r,
            mf_d,
            waveform,
            expected_lag_s=None if use_disambiguation else expected_lag,
            neighbors=estimator.neighbors,
            oversample=estimator.oversample,
            interp_taps=estimator.interp_taps,
            interp_beta=estimator.interp_beta,
        )
        ranges[i] = est.range
        gross += est.gross_error
    return ranges, gross


def _lookup(trace: Sequence[EnvironmentRecord], t: float, times, warned: set) -> EnvironmentRecord:
    """Most recent record at or before t, warning once per hold-over gap."""
    idx = bisect_right(times, t) - 1
    if idx < 0:
        raise ValueError(f"trace does not cover t={t} (starts at {times[0]})")
    if len(times) > 1:
        cadence = float(np.median(np.diff(times)))
        if t - times[idx] > 2.0 * cadence and idx not in warned:
            warned.add(idx)
            logger.warning(
                "trace gap: holding record at t=%.1f s for query t=%.1f s",
                times[idx],
                t,
            )
    return trace[idx]


def _effective_snr(
    rec: EnvironmentRecord, loop: LoopConfig, rng: np.random.Generator
) -> float:
    if not loop.weather_coupling:
        return rec.snr_db
    snr = rec.snr_db
    if not math.isnan(rec.rain_mmhr):
        snr -= RAIN_DB_PER_MMHR * rec.rain_mmhr
    if not math.isnan(rec.humidity_pct):
        snr -= HUMIDITY_DB_PER_PCT_OVER_60 * max(0.0, rec.humidity_pct - 60.0)
    if not math.isnan(rec.wind_mps) and rec.wind_mps > 0:
        snr += rng.normal(0.0, WIND_JITTER_DB_PER_MPS * rec.wind_mps)
    return snr


def _run(
    config: RunConfig,
    trace: Sequence[EnvironmentRecord],
    duration_s: float,
    seed,
    adaptive: bool,
    target_sigma_m: float | None = None,
) -> list[ProcessingIntervalLog]:
    if not trace:
        raise ValueError("trace has no records")
    if not duration_s > 0:
        raise ValueError("duration_s must be positive")
    loop = config.loop
    target = loop.target_sigma_m if target_sigma_m is None else target_sigma_m
    dt = loop.interval_duration_s
    n_intervals = int(duration_s // dt)
    if n_intervals < 1:
        raise ValueError("duration shorter than one processing interval")

    master = config.seed if seed is None else seed
    times = [r.timestamp_s for r in trace]
    warned: set = set()
    weather_rng = np.random.default_rng(np.random.SeedSequence((master, 2)))

    controller = config.controller
    f1 = config.waveform.two_tone.f1
    x = controller.x_prev  # tone separation in force, Hz
    logs: list[ProcessingIntervalLog] = []
    for i in range(n_intervals):
        t = times[0] + i * dt
        rec = _lookup(trace, t, times, warned)
        snr = _effective_snr(rec, loop, weather_rng)
        f2 = f1 + x
        wf = replace(config.waveform, two_tone=TwoToneSpec(f1=f1, f2=f2))
        state = replace(config.channel, snr_db=snr)
        ranges, _ = simulate_window(
            wf,
            state,
            loop.pulses_per_interval,
            config.estimator,
            seed=(master, 1, i),
            window_pad_samples=loop.window_pad_samples,
        )
        stats = window_stats(ranges, loop.group_size, loop.pulses_per_interval)
        error = stats.sigma_d - target
        logs.append(
            ProcessingIntervalLog(
                interval_index=i,
                f2_hz=f2,
                sigma_d_m=stats.sigma_d,
                mean_range_m=stats.mean_range,
                snr_db=snr,
                controller_error_m=error,
                timestamp_s=t,
            )
        )
        if adaptive:
            try:
                controller, x = pi_step(controller, error, dt)
            except ValueError as exc:
                raise RuntimeError(
                    f"controller aborted at interval {i}: {exc}"
                ) from exc
    return logs


def run_fixed_bandwidth(
    config: RunConfig,
    trace: Sequence[EnvironmentRecord],
    duration_s: float,
    seed=None,
) -> list[ProcessingIntervalLog]:
    """Replay a trace with the tone separation held at its configured value."""
    return _run(config, trace, duration_s, seed, adaptive=False)


def run_adaptive(
    config: RunConfig,
    trace: Sequence[EnvironmentRecord],
    duration_s: float,
    target_sigma_m: float | None = None,
    seed=None,
) -> list[ProcessingIntervalLog]:
    """Replay a trace with the PI loop retuning the tone separation.

    Each interval feeds ``sigma_d - target`` into the controller and the
    returned separation (clamped to the configured operating range)
    becomes the next interval's ``f2 = f1 + x``.  ``target_sigma_m``
    overrides the configured setpoint when given.
    """
    return _run(config, trace, duration_s, seed, adaptive=True, target_sigma_m=target_sigma_m)


def ranging_sigma_plant(
    config: RunConfig,
    n_intervals: int = 30,
    seed: int = 0,
    x0_hz: float | None = None,
) -> Callable[[float], np.ndarray]:
    """Closed-loop plant handle for ultimate-gain searches.

    ``plant(k)`` runs the ranging loop under pure proportional control
    ``x = x0 + k * error`` (gain ``k`` in controller units, i.e. the
    same units as ``PiControllerState.k_p``) at the configured channel
    SNR and returns the measured sigma series in controller error units.
    The per-interval noise streams are frozen per ``seed`` and shared
    across gain evaluations, so the handle is deterministic.
    """
    loop = config.loop
    ctl = config.controller
    f1 = config.waveform.two_tone.f1
    x0 = ctl.x_prev if x0_hz is None else x0_hz

    def plant(k: float) -> np.ndarray:
        x = x0
        out = np.empty(n_intervals)
        for i in range(n_intervals):
            wf = replace(config.waveform, two_tone=TwoToneSpec(f1=f1, f2=f1 + x))
            ranges, _ = simulate_window(
                wf,
                config.channel,
                loop.pulses_per_interval,
                config.estimator,
                seed=(seed, 3, i),
                window_pad_samples=loop.window_pad_samples,
            )
            sigma = window_stats(ranges, loop.group_size, loop.pulses_per_interval).sigma_d
            out[i] = sigma * ctl.error_scale
            error_units = (sigma - loop.target_sigma_m) * ctl.error_scale
            x_next = x0 + k * error_units * ctl.output_scale
            x = min(max(x_next, ctl.x_min), ctl.x_max)
        return out

    return plant


def summarize_run(logs: Sequence[ProcessingIntervalLog]) -> dict:
    """Aggregate statistics for a run log, as written to summary JSON."""
    from .coherence import max_coherent_frequency

    if not logs:
        raise ValueError("no intervals logged")
    sigma = np.array([l.sigma_d_m for l in logs])
    f2 = np.array([l.f2_hz for l in logs])
    mean_sigma = float(sigma.mean())
    summary = {
        "intervals": len(logs),
        "sigma_d_m": {
            "mean": mean_sigma,
            "max": float(sigma.max()),
            "min": float(sigma.min()),
            "final": float(sigma[-1]),
        },
        "mean_range_m": float(np.mean([l.mean_range_m for l in logs])),
        "f2_hz": {
            "mean": float(f2.mean()),
            "max": float(f2.max()),
            "min": float(f2.min()),
            "final": float(f2[-1]),
        },
        "max_coherent_frequency_hz": {
            str(p): max_coherent_frequency(mean_sigma, p) for p in (0.9, 0.8, 0.7)
        },
    }
    return summary
