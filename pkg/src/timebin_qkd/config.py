"""Flat key-value run configuration.

One YAML file per run holds plain ``key: value`` pairs; every key is
optional and falls back to the model defaults.  Unknown keys are
rejected so that typos fail loudly.  Command-line flags override file
values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .electronics import DacConfig
from .keyrate import SecurityParams
from .link import ChannelModel, DetectorModel, DriftState, ReceiverModel, SessionConfig, TimingLayout
from .optics import DEFAULT_BIN_SPACING_S, BeamSplitterSpec, EncoderConfig
from .protocol import DecoyLevels

__all__ = ["ConfigError", "RunConfig", "load_config"]


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """Validated bundle of every model a run may need."""

    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    levels: DecoyLevels = field(default_factory=lambda: DecoyLevels(mu=0.53, nu=0.35))
    dac: DacConfig = field(default_factory=DacConfig)
    channel: ChannelModel = field(default_factory=ChannelModel)
    detector: DetectorModel = field(default_factory=DetectorModel)
    receiver: ReceiverModel = field(default_factory=ReceiverModel)
    drift: DriftState = field(default_factory=DriftState)
    security: SecurityParams = field(default_factory=SecurityParams)
    session: SessionConfig = field(default_factory=SessionConfig)
    timing: TimingLayout = field(default_factory=TimingLayout)
    seed: int = 1
    duration_s: float = 60.0
    target_rate_hz: float = 140e3


_KEYS: dict[str, tuple[str, str]] = {
    # encoder
    "t1": ("encoder", "t1"),
    "t2": ("encoder", "t2"),
    "t3": ("encoder", "t3"),
    "d": ("encoder", "d"),
    "omega_tau": ("encoder", "omega_tau"),
    "modulator_extinction": ("encoder", "modulator_extinction"),
    # decoy levels
    "mu": ("levels", "mu"),
    "nu": ("levels", "nu"),
    "alpha_mu_rad": ("levels", "alpha_mu"),
    "prob_mu": ("levels", "prob_mu"),
    # DAC
    "v1_el": ("dac", "v1_el"),
    "v2_el": ("dac", "v2_el"),
    "v1_c": ("dac", "v1_c"),
    "v2_c": ("dac", "v2_c"),
    "v_pi": ("dac", "v_pi"),
    "pulse_width_s": ("dac", "pulse_width"),
    "slot_t_e_s": ("dac", "slot_t_e"),
    "slot_t_l_s": ("dac", "slot_t_l"),
    "slot_t_minus_s": ("dac", "slot_t_minus"),
    "dac_period_s": ("dac", "period"),
    "dac_sample_interval_s": ("dac", "sample_interval"),
    # channel
    "length_km": ("channel", "length_km"),
    "attenuation_db_per_km": ("channel", "attenuation_db_per_km"),
    "excess_loss_db": ("channel", "excess_loss_db"),
    # detector
    "efficiency": ("detector", "efficiency"),
    "dark_rate_hz": ("detector", "dark_rate_hz"),
    "jitter_sigma_s": ("detector", "jitter_sigma_s"),
    "dead_time_s": ("detector", "dead_time_s"),
    "timetag_resolution_s": ("detector", "timetag_resolution_s"),
    # receiver
    "basis_split": ("receiver", "basis_split"),
    "interferometer_delay_s": ("receiver", "interferometer_delay_s"),
    "phase_bob_rad": ("receiver", "phase_bob_rad"),
    "arm_loss_db": ("receiver", "arm_loss_db"),
    # drift / feedback
    "drift_rate_sigma": ("drift", "drift_rate_sigma"),
    "drift_linear_rate": ("drift", "linear_rate"),
    "drift_sin_amp_rad": ("drift", "sin_amp"),
    "drift_sin_period_s": ("drift", "sin_period_s"),
    "feedback_gain_p": ("drift", "gain_p"),
    "feedback_gain_d": ("drift", "gain_d"),
    "actuation_gain": ("drift", "actuation_gain"),
    "max_current_a": ("drift", "max_current"),
    # security
    "eps_sec": ("security", "eps_sec"),
    "eps_corr": ("security", "eps_corr"),
    "f_ec": ("security", "f_ec"),
    # session
    "clock_hz": ("session", "clock_hz"),
    "prob_alice_z": ("session", "prob_alice_z"),
    "block_s": ("session", "block_s"),
    "feedback_dt_s": ("session", "feedback_dt_s"),
    "feedback": ("session", "feedback"),
    "window_s": ("session", "window_s"),
    # run
    "seed": ("run", "seed"),
    "duration_s": ("run", "duration_s"),
    "target_rate_hz": ("run", "target_rate_hz"),
}


def _build_run_config(groups: dict[str, dict]) -> RunConfig:
    enc = groups["encoder"]
    bs = tuple(
        BeamSplitterSpec(enc.pop(k, 0.5)) for k in ("t1", "t2", "t3")
    )
    lv = {"mu": 0.53, "nu": 0.35}
    lv.update(groups["levels"])
    try:
        encoder = EncoderConfig(bs=bs, **enc)
        levels = DecoyLevels(**lv)
        dac = DacConfig(**groups["dac"])
        channel = ChannelModel(**groups["channel"])
        detector = DetectorModel(**groups["detector"])
        receiver = ReceiverModel(**groups["receiver"])
        drift = DriftState(**groups["drift"])
        security = SecurityParams(**groups["security"])
        session = SessionConfig(**groups["session"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    run = groups["run"]
    timing = TimingLayout(
        clock_hz=session.clock_hz,
        window_s=session.window_s,
    )
    # The receiver can only interfere the bins if its delay matches the
    # encoder's fixed bin spacing.
    if not math.isclose(receiver.interferometer_delay_s, DEFAULT_BIN_SPACING_S):
        raise ConfigError(
            "interferometer_delay_s must match the 10 ns encoder bin spacing"
        )
    return RunConfig(
        encoder=encoder,
        levels=levels,
        dac=dac,
        channel=channel,
        detector=detector,
        receiver=receiver,
        drift=drift,
        security=security,
        session=session,
        timing=timing,
        seed=int(run.get("seed", 1)),
        duration_s=float(run.get("duration_s", 60.0)),
        target_rate_hz=float(run.get("target_rate_hz", 140e3)),
    )


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Build a :class:`RunConfig` from a flat YAML file plus overrides.

    ``overrides`` uses the same flat keys as the file (CLI flags land
    here).  ``path=None`` starts from an empty mapping.
    """
    data: dict = {}
    if path is not None:
        try:
            raw = yaml.safe_load(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold a key-value mapping")
        data.update(raw)
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})

    groups: dict[str, dict] = {
        g: {} for g in ("encoder", "levels", "dac", "channel", "detector",
                        "receiver", "drift", "security", "session", "run")
    }
    for key, value in data.items():
        if key not in _KEYS:
            raise ConfigError(f"unknown configuration key: {key!r}")
        group, attr = _KEYS[key]
        if group == "encoder" and attr in ("t1", "t2", "t3"):
            groups[group][attr] = float(value)
        elif key == "d":
            groups[group][attr] = int(value)
        elif key == "feedback":
            groups[group][attr] = bool(value)
        elif group == "run":
            groups[group][attr] = value
        else:
            groups[group][attr] = float(value)
    return _build_run_config(groups)
