"""Complex-field model of a loop time-bin encoder.

The device nests an unbalanced Mach-Zehnder interferometer inside a
Sagnac loop.  The input beamsplitter feeds clockwise (CW) and
counterclockwise (CCW) circulating modes; the Mach-Zehnder splits each
mode into time bins separated by ``bin_spacing``, and phases applied in
distinct modulator time slots (one per arm plus one for the CW pulse)
select both the output state and its intensity.  All functions here are
pure and deterministic; photon statistics live in :mod:`timebin_qkd.link`.

Conventions used throughout:

* reflection at a beamsplitter multiplies the amplitude by ``i``,
  transmission by the real square root of the transmittance;
* ``omega_tau`` is the residual differential phase of the unbalanced
  interferometer arms (zero for a length-matched device);
* the late bin of a two-bin output carries the double-reflection sign,
  so equal phases give perfect destructive interference at the output.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "BeamSplitterSpec",
    "EncoderConfig",
    "PhaseSchedule",
    "TimeBinField",
    "split_input",
    "loop_amplitudes",
    "encoder_output",
    "effective_phases",
    "transmittances",
    "qudit_output",
    "min_transmittance",
    "min_qber",
    "arm_transmittance",
    "ideal_bin_transmittance",
]

DEFAULT_BIN_SPACING_S = 10e-9


def _require_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class BeamSplitterSpec:
    """Lossless beamsplitter; reflectance is implied as ``1 - t``."""

    t: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"transmittance must be in [0, 1], got {self.t}")

    @property
    def r(self) -> float:
        return 1.0 - self.t


@dataclass(frozen=True)
class EncoderConfig:
    """Static description of one encoder device.

    ``bs`` lists the input splitter followed by the two interferometer
    splitters (the two-bin device uses exactly three).  Devices with
    more than two bins are modelled with ideal 50/50 splitting only.

    ``modulator_extinction`` is the fraction of a phase applied in one
    modulator slot that bleeds into the other slots through imperfect
    pulse isolation: an arm phase leaks onto the sibling arm(s), and the
    CW control phase leaks equally onto every arm.  Zero means perfect
    isolation.
    """

    bs: tuple[BeamSplitterSpec, BeamSplitterSpec, BeamSplitterSpec] = (
        BeamSplitterSpec(),
        BeamSplitterSpec(),
        BeamSplitterSpec(),
    )
    d: int = 2
    omega_tau: float = 0.0
    modulator_extinction: float = 0.0

    def __post_init__(self) -> None:
        if self.d < 2:
            raise ValueError(f"dimension must be >= 2, got {self.d}")
        if len(self.bs) != 3:
            raise ValueError("exactly three beamsplitter specs are required")
        if not 0.0 <= self.modulator_extinction <= 1.0:
            raise ValueError("modulator_extinction must be in [0, 1]")
        _require_finite("omega_tau", self.omega_tau)
        if self.d > 2 and not self.is_ideal_split:
            raise ValueError("devices with d > 2 support ideal 50/50 splitters only")

    @property
    def is_ideal_split(self) -> bool:
        return all(b.t == 0.5 for b in self.bs)

    @classmethod
    def ideal(cls, d: int = 2) -> "EncoderConfig":
        return cls(d=d)


@dataclass(frozen=True)
class PhaseSchedule:
    """Phases driven in the modulator slots: one control value plus one per bin.

    Values are interpreted modulo 2*pi.  ``slot`` optionally records which
    modulator time slot carries the active pulse (see
    :mod:`timebin_qkd.protocol`).
    """

    phi_c: float
    phi_arm: tuple[float, ...]
    slot: str | None = None

    def __post_init__(self) -> None:
        _require_finite("phi_c", self.phi_c)
        _require_finite("phi_arm", *self.phi_arm)
        if len(self.phi_arm) < 1:
            raise ValueError("phi_arm must hold at least one value")

    @property
    def phi_e(self) -> float:
        return self.phi_arm[0]

    @property
    def phi_l(self) -> float:
        return self.phi_arm[1]


@dataclass(frozen=True)
class TimeBinField:
    """Complex amplitudes over consecutive time bins (bin 0 is early)."""

    amps: tuple[complex, ...]
    bin_spacing: float = DEFAULT_BIN_SPACING_S

    def __post_init__(self) -> None:
        if len(self.amps) < 1:
            raise ValueError("a field needs at least one bin")
        for a in self.amps:
            if not (math.isfinite(a.real) and math.isfinite(a.imag)):
                raise ValueError(f"non-finite amplitude {a!r}")
        if self.bin_spacing <= 0:
            raise ValueError("bin_spacing must be positive")

    @property
    def d(self) -> int:
        return len(self.amps)

    def intensities(self) -> tuple[float, ...]:
        return tuple(abs(a) ** 2 for a in self.amps)

    def total_intensity(self) -> float:
        return sum(self.intensities())


def _check_dims(cfg: EncoderConfig, ph: PhaseSchedule) -> None:
    if len(ph.phi_arm) != cfg.d:
        raise ValueError(
            f"schedule drives {len(ph.phi_arm)} arms but the device has d={cfg.d}"
        )


def split_input(e0: complex, bs1: BeamSplitterSpec) -> tuple[complex, complex]:
    """Split the input amplitude into the CW (transmitted) and CCW (reflected) modes."""
    cw = math.sqrt(bs1.t) * e0
    ccw = 1j * math.sqrt(bs1.r) * e0
    return cw, ccw


def effective_phases(cfg: EncoderConfig, ph: PhaseSchedule) -> PhaseSchedule:
    """Schedule actually seen by the light, including modulator phase bleed.

    With extinction ``eps``, each arm phase leaks ``eps`` times its value
    onto every other arm slot, and the control phase leaks ``eps`` times
    onto every arm.  The control slot itself is taken as clean: the CW
    pulse crosses the modulator well separated from the arm slots.
    Identity when ``eps == 0``.
    """
    eps = cfg.modulator_extinction
    if eps == 0.0:
        return ph
    total = sum(ph.phi_arm)
    arms = tuple(a + eps * (total - a) + eps * ph.phi_c for a in ph.phi_arm)
    return replace(ph, phi_arm=arms)


def loop_amplitudes(
    e0: complex, cfg: EncoderConfig, ph: PhaseSchedule
) -> tuple[TimeBinField, TimeBinField]:
    """Early/late amplitudes of the CW and CCW modes just before recombination.

    Two-bin devices only.  The CW pulse picks up ``phi_c`` before the
    interferometer; the CCW pair picks up the arm phases.  The late bin of
    each pair reflects twice inside the interferometer, hence the minus
    sign, and additionally carries the residual arm phase ``omega_tau``.
    Phases are applied literally; callers wanting the phase-bleed model go
    through :func:`effective_phases` first (as :func:`encoder_output` does).
    """
    if cfg.d != 2:
        raise ValueError("loop_amplitudes models the two-bin device only")
    _check_dims(cfg, ph)
    t1, t2, t3 = (b.t for b in cfg.bs)
    r1, r2, r3 = (b.r for b in cfg.bs)
    arm = cmath.exp(1j * cfg.omega_tau)
    cw_e = math.sqrt(t1 * t2 * t3) * e0 * cmath.exp(1j * ph.phi_c)
    cw_l = -math.sqrt(t1 * r2 * r3) * e0 * cmath.exp(1j * ph.phi_c) * arm
    ccw_e = 1j * math.sqrt(r1 * t2 * t3) * e0 * cmath.exp(1j * ph.phi_e)
    ccw_l = -1j * math.sqrt(r1 * r2 * r3) * e0 * cmath.exp(1j * ph.phi_l) * arm
    spacing = DEFAULT_BIN_SPACING_S
    return (
        TimeBinField((cw_e, cw_l), spacing),
        TimeBinField((ccw_e, ccw_l), spacing),
    )


def encoder_output(e0: complex, cfg: EncoderConfig, ph: PhaseSchedule) -> TimeBinField:
    """Unnormalized output field of the two-bin encoder.

    Recombining the loop modes at the input splitter gives

        amp_early = sqrt(T2*T3) * e0 * (T1*exp(i*phi_c) - R1*exp(i*phi_e))
        amp_late  = -sqrt(R2*R3) * e0 * exp(i*omega_tau)
                    * (T1*exp(i*phi_c) - R1*exp(i*phi_l))

    which for ideal 50/50 splitters reduces to per-bin transmittance
    ``sin((phi_c - phi_k)/2)**2 / 4`` with a relative phase
    ``(phi_l - phi_e)/2 + pi`` between the bins.
    """
    if cfg.d != 2:
        raise ValueError("encoder_output models the two-bin device only")
    _check_dims(cfg, ph)
    eff = effective_phases(cfg, ph)
    t1, t2, t3 = (b.t for b in cfg.bs)
    r1, r2, r3 = (b.r for b in cfg.bs)
    inner_e = t1 * cmath.exp(1j * eff.phi_c) - r1 * cmath.exp(1j * eff.phi_e)
    inner_l = t1 * cmath.exp(1j * eff.phi_c) - r1 * cmath.exp(1j * eff.phi_l)
    amp_e = math.sqrt(t2 * t3) * e0 * inner_e
    amp_l = -math.sqrt(r2 * r3) * e0 * cmath.exp(1j * cfg.omega_tau) * inner_l
    return TimeBinField((amp_e, amp_l))


def arm_transmittance(t1, arm_split, dphi):
    """General-splitter transmittance of one output bin.

    ``arm_split`` is the product of interferometer splitting factors for
    that bin (T2*T3 for early, R2*R3 for late) and ``dphi`` is ``phi_c``
    minus the bin's arm phase.  Accepts numpy arrays.
    """
    r1 = 1.0 - t1
    return arm_split * (t1 * t1 + r1 * r1 - 2.0 * t1 * r1 * np.cos(dphi))


def ideal_bin_transmittance(d, dphi):
    """Per-bin transmittance of the ideal d-bin device.  Accepts arrays."""
    s = np.sin(np.asarray(dphi) / 2.0)
    return s * s / float(d * d)


def transmittances(cfg: EncoderConfig, ph: PhaseSchedule) -> tuple[float, ...]:
    """Per-bin power transmittance for the given schedule.

    Two-bin devices use the general-splitter form; higher dimensions use
    the ideal tree, ``sin((phi_c - phi_k)/2)**2 / d**2``.
    """
    _check_dims(cfg, ph)
    eff = effective_phases(cfg, ph)
    if cfg.d == 2:
        t1 = cfg.bs[0].t
        t2, t3 = cfg.bs[1].t, cfg.bs[2].t
        r2, r3 = cfg.bs[1].r, cfg.bs[2].r
        return (
            float(arm_transmittance(t1, t2 * t3, eff.phi_c - eff.phi_e)),
            float(arm_transmittance(t1, r2 * r3, eff.phi_c - eff.phi_l)),
        )
    return tuple(
        float(ideal_bin_transmittance(cfg.d, eff.phi_c - phik)) for phik in eff.phi_arm
    )


def qudit_output(e0: complex, cfg: EncoderConfig, ph: PhaseSchedule) -> TimeBinField:
    """Output field of the ideal d-bin device.

    Bin k carries ``(i*e0/d) * exp(i*(phi_c + phi_k)/2) * sin((phi_c - phi_k)/2)``.
    For d = 2 the per-bin intensities coincide with :func:`encoder_output`
    on an ideal device; the amplitude convention differs by the relative
    sign the physical two-bin device puts on its late bin.
    """
    if not cfg.is_ideal_split:
        raise ValueError("the d-bin tree is modelled with ideal splitters only")
    _check_dims(cfg, ph)
    eff = effective_phases(cfg, ph)
    amps = []
    for phik in eff.phi_arm:
        plus = (eff.phi_c + phik) / 2.0
        minus = (eff.phi_c - phik) / 2.0
        amps.append(1j * e0 / cfg.d * cmath.exp(1j * plus) * math.sin(minus))
    return TimeBinField(tuple(amps))


def min_transmittance(t1: float) -> float:
    """Smallest reachable bin transmittance given the input splitter ratio.

    With the arm splitters ideal, a bin that should be dark still passes
    ``(2*T1 - 1)**2 / 4`` because the CW and CCW contributions no longer
    cancel; zero only for a balanced input splitter.
    """
    if not 0.0 <= t1 <= 1.0:
        raise ValueError(f"transmittance must be in [0, 1], got {t1}")
    return 0.25 * (2.0 * t1 - 1.0) ** 2


def min_qber(t1: float) -> float:
    """Intrinsic error floor implied by :func:`min_transmittance`.

    The bright bin always reaches 1/4, so the floor is
    ``T_min / (T_min + 1/4)``.
    """
    tmin = min_transmittance(t1)
    return 4.0 * tmin / (4.0 * tmin + 1.0)


def _refined_extreme(t1: float, pick, n_grid: int) -> float:
    # two-stage grid search: a coarse pass over a full phase period,
    # then a fine pass around the coarse optimum
    dphi = np.linspace(-math.pi, math.pi, n_grid)
    vals = arm_transmittance(t1, 0.25, dphi)
    i = int(pick(vals))
    step = dphi[1] - dphi[0]
    fine = np.linspace(dphi[i] - step, dphi[i] + step, n_grid)
    fine_vals = arm_transmittance(t1, 0.25, fine)
    return float(fine_vals[int(pick(fine_vals))])


def numeric_min_transmittance(t1: float, n_grid: int = 4096) -> float:
    """Grid-searched minimum bin transmittance with ideal arm splitters."""
    return _refined_extreme(t1, np.argmin, n_grid)


def numeric_max_transmittance(t1: float, n_grid: int = 4096) -> float:
    """Grid-searched maximum bin transmittance with ideal arm splitters."""
    return _refined_extreme(t1, np.argmax, n_grid)
