"""Symbol plans and the phase schedules that realize them.

The transmitter runs the efficient three-state protocol: two
time-of-arrival states (early/late) form the key basis and the balanced
superposition state monitors the channel.  Each state is sent at one of
two intensities (signal ``mu``, decoy ``nu``) chosen by scaling the
modulator phase, because the encoder's transmittance is
``sin(phase/2)**2`` shaped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .optics import EncoderConfig, PhaseSchedule, transmittances

__all__ = [
    "Symbol",
    "Intensity",
    "Slot",
    "SymbolPlan",
    "DecoyLevels",
    "alpha_nu",
    "beta_for",
    "schedule_for",
    "slot_for",
    "mean_photon_of",
    "source_mean_for",
    "all_plans",
]


class Symbol(Enum):
    """Logical state: early bin, late bin, or the balanced superposition."""

    EARLY = "E"
    LATE = "L"
    MINUS = "-"


class Intensity(Enum):
    MU = "mu"
    NU = "nu"


class Slot(str, Enum):
    """Modulator time slot carrying the drive pulse for a given state."""

    EARLY = "T_E"
    LATE = "T_L"
    CONTROL = "T_-"


@dataclass(frozen=True)
class SymbolPlan:
    """One transmission decision: which state, at which intensity.

    ``symbol`` is a :class:`Symbol` for the two-bin protocol or an integer
    bin index for d-bin devices; :data:`Symbol.MINUS` doubles as the
    uniform all-bins superposition when ``dimension > 2``.
    """

    symbol: Symbol | int
    decoy: Intensity
    dimension: int = 2

    def __post_init__(self) -> None:
        if self.dimension < 2:
            raise ValueError("dimension must be >= 2")
        if isinstance(self.symbol, Symbol):
            if self.dimension != 2 and self.symbol is not Symbol.MINUS:
                raise ValueError(
                    "early/late symbols are two-bin only; use bin indices for d > 2"
                )
        else:
            if not 0 <= self.symbol < self.dimension:
                raise ValueError(
                    f"bin index {self.symbol} out of range for d={self.dimension}"
                )


@dataclass(frozen=True)
class DecoyLevels:
    """Signal/decoy mean photon numbers and the drive amplitude realizing them.

    ``alpha_mu`` is the arm phase producing the signal intensity (any value
    in (0, pi]; pi maximizes the output).  ``prob_mu`` is the probability of
    choosing the signal intensity for a pulse, used by the finite-key
    decoy estimates.
    """

    mu: float
    nu: float
    alpha_mu: float = math.pi
    prob_mu: float = 0.8

    def __post_init__(self) -> None:
        if self.mu <= 0 or self.nu < 0:
            raise ValueError("mean photon numbers must be positive (nu may be 0)")
        if self.nu >= self.mu:
            raise ValueError(f"decoy intensity must satisfy nu < mu, got {self.nu} >= {self.mu}")
        if not 0.0 < self.alpha_mu <= math.pi:
            raise ValueError("alpha_mu must lie in (0, pi]")
        if not 0.0 < self.prob_mu < 1.0:
            raise ValueError("prob_mu must lie in (0, 1)")

    @property
    def prob_nu(self) -> float:
        return 1.0 - self.prob_mu

    def intensity(self, which: Intensity) -> float:
        return self.mu if which is Intensity.MU else self.nu


def alpha_nu(levels: DecoyLevels) -> float:
    """Arm phase producing the decoy intensity.

    Solves ``sin(a/2)**2 = (nu/mu) * sin(alpha_mu/2)**2`` for the root in
    ``[0, alpha_mu]``; a solution always exists because ``nu < mu``.
    """
    target = (levels.nu / levels.mu) * math.sin(levels.alpha_mu / 2.0) ** 2
    return 2.0 * math.asin(math.sqrt(target))


def beta_for(alpha: float) -> float:
    """Control phase giving the superposition state the same mean photon number.

    The superposition populates both bins, so matching a single-bin state
    driven with ``alpha`` requires ``sin(b/2)**2 = sin(alpha/2)**2 / 2``,
    i.e. ``b`` in ``[0, pi/2]``.
    """
    if not 0.0 <= alpha <= math.pi:
        raise ValueError("alpha must lie in [0, pi]")
    return 2.0 * math.asin(math.sqrt(0.5) * math.sin(alpha / 2.0))


def _uniform_control_phase(alpha: float, d: int) -> float:
    # d-bin generalization: the uniform state spreads over d bins, so the
    # per-bin share is sin(alpha/2)**2 / d.
    return 2.0 * math.asin(math.sin(alpha / 2.0) / math.sqrt(d))


def _drive_phase(plan: SymbolPlan, levels: DecoyLevels) -> float:
    return levels.alpha_mu if plan.decoy is Intensity.MU else alpha_nu(levels)


def slot_for(plan: SymbolPlan) -> Slot:
    """Modulator slot in which the drive pulse for this plan fires."""
    if plan.symbol is Symbol.MINUS:
        return Slot.CONTROL
    if plan.symbol is Symbol.EARLY or plan.symbol == 0:
        return Slot.EARLY
    return Slot.LATE


def schedule_for(plan: SymbolPlan, levels: DecoyLevels) -> PhaseSchedule:
    """Phase schedule realizing a symbol plan.

    Key-basis states drive only their own arm slot with ``alpha``; the
    superposition drives only the control slot with the matched ``beta``.
    """
    alpha = _drive_phase(plan, levels)
    d = plan.dimension
    arms = [0.0] * d
    if plan.symbol is Symbol.MINUS:
        if d == 2:
            phi_c = beta_for(alpha)
        else:
            phi_c = _uniform_control_phase(alpha, d)
        return PhaseSchedule(phi_c=phi_c, phi_arm=tuple(arms), slot=slot_for(plan))
    if plan.symbol is Symbol.EARLY:
        arms[0] = alpha
    elif plan.symbol is Symbol.LATE:
        arms[1] = alpha
    else:
        arms[plan.symbol] = alpha
    return PhaseSchedule(phi_c=0.0, phi_arm=tuple(arms), slot=slot_for(plan))


def mean_photon_of(
    plan: SymbolPlan,
    levels: DecoyLevels,
    cfg: EncoderConfig,
    source_mean: float,
) -> float:
    """Mean photon number leaving the encoder for one pulse of this plan."""
    if source_mean <= 0:
        raise ValueError("source_mean must be positive")
    sched = schedule_for(plan, levels)
    return source_mean * sum(transmittances(cfg, sched))


def source_mean_for(levels: DecoyLevels) -> float:
    """Source intensity making the signal-level output exactly ``mu`` photons.

    A key-basis state driven with ``alpha_mu`` transmits
    ``sin(alpha_mu/2)**2 / 4`` of the source light on an ideal device, so
    the calibrated source carries ``4*mu / sin(alpha_mu/2)**2`` photons per
    pulse.  The decoy relations then put every other plan at its nominal
    intensity automatically.
    """
    return 4.0 * levels.mu / math.sin(levels.alpha_mu / 2.0) ** 2


def all_plans(dimension: int = 2) -> tuple[SymbolPlan, ...]:
    """The six plans of the two-bin protocol, in a fixed documented order."""
    if dimension != 2:
        raise ValueError("the three-state protocol is two-bin")
    return tuple(
        SymbolPlan(sym, dec)
        for sym in (Symbol.EARLY, Symbol.LATE, Symbol.MINUS)
        for dec in (Intensity.MU, Intensity.NU)
    )
