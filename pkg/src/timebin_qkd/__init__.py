"""Simulator for a loop time-bin/decoy-state encoder and the QKD link built on it."""

from .config import ConfigError, RunConfig, load_config
from .electronics import DacConfig, DigitalPattern, Waveform
from .keyrate import BlockCounts, SecurityParams, secret_key_length
from .link import (
    BlockStats,
    ChannelModel,
    ClickRecord,
    DetectorModel,
    DriftState,
    ReceiverModel,
    SessionConfig,
    run_session,
)
from .optics import BeamSplitterSpec, EncoderConfig, PhaseSchedule, TimeBinField
from .protocol import DecoyLevels, Intensity, Slot, Symbol, SymbolPlan

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BeamSplitterSpec",
    "BlockCounts",
    "BlockStats",
    "ChannelModel",
    "ClickRecord",
    "ConfigError",
    "DacConfig",
    "DecoyLevels",
    "DetectorModel",
    "DigitalPattern",
    "DriftState",
    "EncoderConfig",
    "Intensity",
    "PhaseSchedule",
    "ReceiverModel",
    "RunConfig",
    "SecurityParams",
    "SessionConfig",
    "Slot",
    "Symbol",
    "SymbolPlan",
    "TimeBinField",
    "Waveform",
    "load_config",
    "run_session",
    "secret_key_length",
]
