"""Emulation of the FPGA-driven two-comparator DAC that drives the modulator.

Four digital lines feed two comparator pairs whose outputs are summed by
a passive resistive network: one pair serves the key-basis arm slots, the
other the control slot.  Firing one comparator of a pair produces the low
(decoy) voltage, firing both produces the sum (signal) voltage, so the
two intensities need no analog reconfiguration.  Voltages map to
modulator phases linearly through the half-wave voltage ``v_pi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .optics import PhaseSchedule
from .protocol import DecoyLevels, Slot, Symbol, SymbolPlan, alpha_nu, beta_for

__all__ = [
    "DacConfig",
    "DigitalPattern",
    "Waveform",
    "DacConfigurationError",
    "TimingError",
    "CalibrationError",
    "pattern_for",
    "waveform_for",
    "phases_from_waveform",
    "calibrate_voltages",
    "write_waveform_csv",
]


class DacConfigurationError(ValueError):
    """Invalid or mutually inconsistent DAC settings."""


class TimingError(ValueError):
    """A pulse does not line up with any optical transit slot."""


class CalibrationError(ValueError):
    """Requested phases are not reachable with non-negative supply voltages."""


@dataclass(frozen=True)
class DacConfig:
    """Comparator supply voltages, pulse shape and slot timing.

    Slot times mark when each optical component crosses the modulator
    within one clock period: the CW pulse first (control slot), then the
    CCW early and late components separated by the bin spacing.
    """

    v1_el: float = 2.5
    v2_el: float = 2.5
    v1_c: float = 5.0 / 3.0
    v2_c: float = 5.0 / 6.0
    v_pi: float = 5.0
    pulse_width: float = 4e-9
    slot_t_e: float = 50e-9
    slot_t_l: float = 60e-9
    slot_t_minus: float = 20e-9
    period: float = 100e-9
    sample_interval: float = 0.1e-9

    def __post_init__(self) -> None:
        for name in ("v1_el", "v2_el", "v1_c", "v2_c"):
            if getattr(self, name) < 0:
                raise DacConfigurationError(f"{name} must be non-negative")
        if self.v_pi <= 0:
            raise DacConfigurationError("v_pi must be positive")
        if not 0 < self.pulse_width < self.period:
            raise DacConfigurationError("pulse_width must fit inside the period")
        if self.sample_interval <= 0 or self.sample_interval > self.pulse_width / 2:
            raise DacConfigurationError("sample_interval must resolve the pulse")
        slots = self.slot_times()
        if any(not self.pulse_width / 2 <= t <= self.period - self.pulse_width / 2 for t in slots.values()):
            raise DacConfigurationError("slot pulses must fit inside the period")
        times = sorted(slots.values())
        gaps = [b - a for a, b in zip(times, times[1:])]
        if any(g < self.pulse_width for g in gaps):
            raise DacConfigurationError(
                "slot times closer than one pulse width would overlap"
            )
        if self.pulse_width >= self.slot_t_l - self.slot_t_e:
            raise DacConfigurationError("pulse_width must be shorter than the bin spacing")

    def slot_times(self) -> dict[Slot, float]:
        return {
            Slot.EARLY: self.slot_t_e,
            Slot.LATE: self.slot_t_l,
            Slot.CONTROL: self.slot_t_minus,
        }

    def n_samples(self) -> int:
        return int(round(self.period / self.sample_interval))


@dataclass(frozen=True)
class DigitalPattern:
    """States of the four FPGA outputs plus the slot they fire in.

    The key-basis pair and the control pair never fire together; an
    all-zero pattern (idle period) is allowed.
    """

    d_el_1: bool
    d_el_2: bool
    d_c_1: bool
    d_c_2: bool
    slot: Slot

    def __post_init__(self) -> None:
        if (self.d_el_1 or self.d_el_2) and (self.d_c_1 or self.d_c_2):
            raise DacConfigurationError(
                "key-basis and control comparators must not fire in the same period"
            )


@dataclass(frozen=True, eq=False)
class Waveform:
    """Sampled drive voltage over one period."""

    volts: np.ndarray
    sample_interval: float

    def __post_init__(self) -> None:
        if np.any(self.volts < 0):
            raise DacConfigurationError("waveform voltages must be non-negative")

    def sample_at(self, t: float) -> float:
        idx = int(round(t / self.sample_interval))
        if not 0 <= idx < len(self.volts):
            raise TimingError(f"sample time {t} falls outside the period")
        return float(self.volts[idx])


_PATTERNS: dict[tuple[Symbol, str], tuple[bool, bool, bool, bool]] = {
    (Symbol.EARLY, "mu"): (True, True, False, False),
    (Symbol.EARLY, "nu"): (True, False, False, False),
    (Symbol.LATE, "mu"): (True, True, False, False),
    (Symbol.LATE, "nu"): (True, False, False, False),
    (Symbol.MINUS, "mu"): (False, False, True, True),
    (Symbol.MINUS, "nu"): (False, False, True, False),
}


def pattern_for(plan: SymbolPlan) -> DigitalPattern:
    """Digital outputs producing the given plan (two-bin protocol)."""
    if plan.dimension != 2 or not isinstance(plan.symbol, Symbol):
        raise ValueError("the DAC emulation covers the two-bin protocol only")
    from .protocol import slot_for

    bits = _PATTERNS[(plan.symbol, plan.decoy.value)]
    return DigitalPattern(*bits, slot=slot_for(plan))


def waveform_for(pattern: DigitalPattern, cfg: DacConfig) -> Waveform:
    """Summed comparator output for one period: a single rectangular pulse.

    The amplitude is the sum of the fired comparators' supply voltages;
    the pulse is centred on the pattern's slot time.
    """
    volts = np.zeros(cfg.n_samples())
    amplitude = (
        cfg.v1_el * pattern.d_el_1
        + cfg.v2_el * pattern.d_el_2
        + cfg.v1_c * pattern.d_c_1
        + cfg.v2_c * pattern.d_c_2
    )
    if amplitude > 0.0:
        centre = cfg.slot_times()[pattern.slot]
        dt = cfg.sample_interval
        lo = int(round((centre - cfg.pulse_width / 2) / dt))
        hi = int(round((centre + cfg.pulse_width / 2) / dt))
        volts[lo:hi] = amplitude
    return Waveform(volts, cfg.sample_interval)


def _pulse_centres(w: Waveform) -> list[float]:
    on = np.flatnonzero(w.volts > 0)
    if on.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(on) > 1)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [on.size - 1]))
    return [
        float((on[a] + on[b]) / 2.0 * w.sample_interval) for a, b in zip(starts, ends)
    ]


def phases_from_waveform(w: Waveform, cfg: DacConfig) -> PhaseSchedule:
    """Phases the modulator applies, sampled at the optical transit times.

    Every pulse in the waveform must be centred within half a pulse width
    of a slot time, otherwise the light would see a partial edge.
    """
    slots = cfg.slot_times()
    for centre in _pulse_centres(w):
        if min(abs(centre - t) for t in slots.values()) > cfg.pulse_width / 2:
            raise TimingError(
                f"pulse centred at {centre * 1e9:.2f} ns is not aligned with any slot"
            )

    def phase_at(t: float) -> float:
        return math.pi * w.sample_at(t) / cfg.v_pi

    return PhaseSchedule(
        phi_c=phase_at(cfg.slot_t_minus),
        phi_arm=(phase_at(cfg.slot_t_e), phase_at(cfg.slot_t_l)),
    )


def calibrate_voltages(levels: DecoyLevels, cfg: DacConfig) -> DacConfig:
    """Comparator supplies reproducing the protocol phases end to end.

    Comparator 1 alone must produce the decoy phase and the pair summed
    the signal phase, so ``v1 = phase_nu * v_pi / pi`` and
    ``v2 = (phase_mu - phase_nu) * v_pi / pi`` for each pair.
    """
    a_mu, a_nu = levels.alpha_mu, alpha_nu(levels)
    b_mu, b_nu = beta_for(a_mu), beta_for(a_nu)
    scale = cfg.v_pi / math.pi
    v2_el = (a_mu - a_nu) * scale
    v2_c = (b_mu - b_nu) * scale
    if v2_el < 0 or v2_c < 0:
        raise CalibrationError("signal phase below decoy phase is not reachable")
    return replace(
        cfg,
        v1_el=a_nu * scale,
        v2_el=v2_el,
        v1_c=b_nu * scale,
        v2_c=v2_c,
    )


def write_waveform_csv(w: Waveform, path: str | Path) -> None:
    """Export one period of the sampled drive waveform as (time_s, volts)."""
    lines = ["time_s,volts"]
    lines += [
        f"{i * w.sample_interval:.12g},{v:.12g}" for i, v in enumerate(w.volts)
    ]
    Path(path).write_text("\n".join(lines) + "\n")
