"""Run configuration: schema, defaults, strict (de)serialization.

The JSON document mirrors the dataclasses section by section.  Every
field has a default equal to the reference experiment's operating value
where one exists (20 kHz lower tone, 3.5 MHz upper tone, 143.7 us
ranging pulse, 159.7 us PRI, 25 Msps, 200-pulse windows grouped 40x5,
105 ms pulse period, 10 mm target, K_p = 1e-5, T_i = 3.3 s, 0..7.5 MHz
separation clamp, 2.45/5.8 GHz carriers, 90 m baseline).

Validation is strict: unknown keys are rejected with the dotted path of
the offending entry, wrong types likewise.
"""

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .channel import CarrierPlan, ChannelState
from .control import PiControllerState
from .waveform import TwoToneSpec, WaveformConfig


@dataclass(frozen=True)
class LoopConfig:
    """Processing-interval bookkeeping for closed-loop runs."""

    pulses_per_interval: int = 200
    group_size: int = 5
    pulse_period_s: float = 0.105
    window_pad_samples: int = 128
    target_sigma_m: float = 0.010
    weather_coupling: bool = False

    def __post_init__(self):
        if self.pulses_per_interval % self.group_size != 0:
            raise ValueError("pulses_per_interval must be a multiple of group_size")
        if not self.pulse_period_s > 0:
            raise ValueError("pulse_period_s must be positive")

    @property
    def interval_duration_s(self) -> float:
        return self.pulses_per_interval * self.pulse_period_s


@dataclass(frozen=True)
class EstimatorConfig:
    """Peak-refinement knobs for the range estimator."""

    neighbors: int = 4
    oversample: int = 64
    interp_taps: int = 32
    interp_beta: float = 14.0


@dataclass(frozen=True)
class MonteCarloConfig:
    """Coherence Monte-Carlo defaults for the CLI."""

    n_nodes: int = 2
    trials: int = 10000
    threshold: float = 0.9
    sigma_min_over_lambda: float = 0.01
    sigma_max_over_lambda: float = 0.20
    grid_points: int = 60


@dataclass(frozen=True)
class RunConfig:
    """Everything a scenario run needs, serializable to one JSON document."""

    waveform: WaveformConfig
    channel: ChannelState
    controller: PiControllerState
    loop: LoopConfig = LoopConfig()
    estimator: EstimatorConfig = EstimatorConfig()
    montecarlo: MonteCarloConfig = MonteCarloConfig()
    seed: int = 1


def default_config() -> RunConfig:
    two_tone = TwoToneSpec(f1=20e3, f2=3.5e6)
    waveform = WaveformConfig(
        two_tone=two_tone,
        f_d=1.875e6,
        ranging_pulse_width=143.7e-6,
        disamb_pulse_width=1.0 / 1.875e6,
        pri=159.7e-6,
        sample_rate=25e6,
    )
    channel = ChannelState(true_range=90.0, snr_db=20.0, carrier=CarrierPlan())
    controller = PiControllerState(
        k_p=1e-5, t_i=3.3, x_prev=two_tone.separation, e_prev=0.0
    )
    return RunConfig(waveform=waveform, channel=channel, controller=controller)


# JSON field names per section -> (dataclass path, type)
_WAVEFORM_KEYS = {
    "f1_hz": float,
    "f2_hz": float,
    "disambiguation_hz": float,
    "ranging_pulse_width_s": float,
    "disamb_pulse_width_s": float,
    "pri_s": float,
    "sample_rate_hz": float,
}
_CHANNEL_KEYS = {
    "true_range_m": float,
    "snr_db": float,
    "outbound_carrier_hz": float,
    "return_carrier_hz": float,
    "carrier_offset1_hz": float,
    "carrier_offset2_hz": float,
    "repeater_gain": float,
}
_CONTROLLER_KEYS = {
    "k_p": float,
    "t_i_s": float,
    "x_initial_hz": float,
    "x_min_hz": float,
    "x_max_hz": float,
    "error_scale": float,
    "output_scale": float,
}
_LOOP_KEYS = {
    "pulses_per_interval": int,
    "group_size": int,
    "pulse_period_s": float,
    "window_pad_samples": int,
    "target_sigma_m": float,
    "weather_coupling": bool,
}
_ESTIMATOR_KEYS = {
    "neighbors": int,
    "oversample": int,
    "interp_taps": int,
    "interp_beta": float,
}
_MONTECARLO_KEYS = {
    "n_nodes": int,
    "trials": int,
    "threshold": float,
    "sigma_min_over_lambda": float,
    "sigma_max_over_lambda": float,
    "grid_points": int,
}
_SECTIONS = {
    "waveform": _WAVEFORM_KEYS,
    "channel": _CHANNEL_KEYS,
    "controller": _CONTROLLER_KEYS,
    "loop": _LOOP_KEYS,
    "estimator": _ESTIMATOR_KEYS,
    "montecarlo": _MONTECARLO_KEYS,
}


class ConfigError(ValueError):
    """Schema violation in a run configuration document."""


def _check_section(name: str, data: dict, allowed: dict) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"config section '{name}' must be an object")
    out = {}
    for key, value in data.items():
        if key not in allowed:
            raise ConfigError(f"unknown config key '{name}.{key}'")
        want = allowed[key]
        if want is bool:
            if not isinstance(value, bool):
                raise ConfigError(f"config key '{name}.{key}' must be a boolean")
        elif want is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"config key '{name}.{key}' must be an integer")
        else:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"config key '{name}.{key}' must be a number")
            value = float(value)
            if math.isnan(value):
                raise ConfigError(f"config key '{name}.{key}' must not be NaN")
        out[key] = value
    return out


def config_from_dict(doc: dict) -> RunConfig:
    """Build a validated RunConfig from a plain dict (e.g. parsed JSON).

    Missing keys take their defaults; unknown keys anywhere are rejected
    with the dotted path of the entry.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    base = default_config()
    for key in doc:
        if key not in _SECTIONS and key != "seed":
            raise ConfigError(f"unknown config key '{key}'")

    wf = _check_section("waveform", doc.get("waveform", {}), _WAVEFORM_KEYS)
    ch = _check_section("channel", doc.get("channel", {}), _CHANNEL_KEYS)
    ct = _check_section("controller", doc.get("controller", {}), _CONTROLLER_KEYS)
    lp = _check_section("loop", doc.get("loop", {}), _LOOP_KEYS)
    es = _check_section("estimator", doc.get("estimator", {}), _ESTIMATOR_KEYS)
    mc = _check_section("montecarlo", doc.get("montecarlo", {}), _MONTECARLO_KEYS)

    seed = doc.get("seed", base.seed)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError("config key 'seed' must be an integer")

    try:
        two_tone = TwoToneSpec(
            f1=wf.get("f1_hz", base.waveform.two_tone.f1),
            f2=wf.get("f2_hz", base.waveform.two_tone.f2),
        )
        f_d = wf.get("disambiguation_hz", base.waveform.f_d)
        waveform = WaveformConfig(
            two_tone=two_tone,
            f_d=f_d,
            ranging_pulse_width=wf.get(
                "ranging_pulse_width_s", base.waveform.ranging_pulse_width
            ),
            disamb_pulse_width=wf.get("disamb_pulse_width_s", 1.0 / f_d),
            pri=wf.get("pri_s", base.waveform.pri),
            sample_rate=wf.get("sample_rate_hz", base.waveform.sample_rate),
        )
        carrier = CarrierPlan(
            f_c1=ch.get("outbound_carrier_hz", base.channel.carrier.f_c1),
            f_c2=ch.get("return_carrier_hz", base.channel.carrier.f_c2),
            offset1=ch.get("carrier_offset1_hz", base.channel.carrier.offset1),
            offset2=ch.get("carrier_offset2_hz", base.channel.carrier.offset2),
        )
        channel = ChannelState(
            true_range=ch.get("true_range_m", base.channel.true_range),
            snr_db=ch.get("snr_db", base.channel.snr_db),
            carrier=carrier,
            repeater_gain=ch.get("repeater_gain", base.channel.repeater_gain),
        )
        controller = PiControllerState(
            k_p=ct.get("k_p", base.controller.k_p),
            t_i=ct.get("t_i_s", base.controller.t_i),
            x_prev=ct.get("x_initial_hz", two_tone.separation),
            x_min=ct.get("x_min_hz", base.controller.x_min),
            x_max=ct.get("x_max_hz", base.controller.x_max),
            error_scale=ct.get("error_scale", base.controller.error_scale),
            output_scale=ct.get("output_scale", base.controller.output_scale),
        )
        loop = dataclasses.replace(base.loop, **{k: lp[k] for k in lp})
        estimator = dataclasses.replace(base.estimator, **{k: es[k] for k in es})
        montecarlo = dataclasses.replace(base.montecarlo, **{k: mc[k] for k in mc})
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    return RunConfig(
        waveform=waveform,
        channel=channel,
        controller=controller,
        loop=loop,
        estimator=estimator,
        montecarlo=montecarlo,
        seed=seed,
    )


def config_to_dict(config: RunConfig) -> dict:
    """Fully resolved document (every field explicit) for archiving."""
    wf, ch, ct = config.waveform, config.channel, config.controller
    return {
        "waveform": {
            "f1_hz": wf.two_tone.f1,
            "f2_hz": wf.two_tone.f2,
            "disambiguation_hz": wf.f_d,
            "ranging_pulse_width_s": wf.ranging_pulse_width,
            "disamb_pulse_width_s": wf.disamb_pulse_width,
            "pri_s": wf.pri,
            "sample_rate_hz": wf.sample_rate,
        },
        "channel": {
            "true_range_m": ch.true_range,
            "snr_db": ch.snr_db,
            "outbound_carrier_hz": ch.carrier.f_c1,
            "return_carrier_hz": ch.carrier.f_c2,
            "carrier_offset1_hz": ch.carrier.offset1,
            "carrier_offset2_hz": ch.carrier.offset2,
            "repeater_gain": ch.repeater_gain,
        },
        "controller": {
            "k_p": ct.k_p,
            "t_i_s": ct.t_i,
            "x_initial_hz": ct.x_prev,
            "x_min_hz": ct.x_min,
            "x_max_hz": ct.x_max,
            "error_scale": ct.error_scale,
            "output_scale": ct.output_scale,
        },
        "loop": dataclasses.asdict(config.loop),
        "estimator": dataclasses.asdict(config.estimator),
        "montecarlo": dataclasses.asdict(config.montecarlo),
        "seed": config.seed,
    }


def load_config(path) -> RunConfig:
    """Parse and validate a JSON config file (syntax errors keep their line)."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}")
    return config_from_dict(doc)


def save_config(config: RunConfig, path) -> None:
    Path(path).write_text(
        json.dumps(config_to_dict(config), indent=2) + "\n", encoding="utf-8"
    )
