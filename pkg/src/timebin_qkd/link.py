"""Stochastic model of the complete time-bin QKD link.

Photon statistics follow the standard weak-coherent-pulse model: each
detection window sees an independent Poisson variable whose mean is the
optical intensity routed there, so a threshold detector clicks with
probability ``1 - exp(-m)``.  The receiver splits light passively
between a time-of-arrival path (key basis, one detector) and an
unbalanced-interferometer path (monitor basis, two output ports).  The
interferometer maps the two bins onto three arrival windows; only the
central window, where the early bin travelling the long arm overlaps the
late bin travelling the short arm, is basis-conclusive, and the side
windows are discarded for error accounting.

Randomness discipline: key-path quantities are always drawn before
monitor-path quantities, and :func:`run_session` gives every noise
source its own seed-partitioned stream.  Key-basis outcomes are
therefore bit-identical across runs that differ only in the monitor
interferometer phase.

Dead-time corrections are applied to per-click streams
(:func:`detect`, :func:`apply_dead_time`); the rate-level session and
characterization paths neglect them, which is accurate to well below a
percent at the ~100 kHz rates modelled here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .keyrate import BlockCounts
from .optics import EncoderConfig, TimeBinField, encoder_output
from .protocol import (
    DecoyLevels,
    Intensity,
    Symbol,
    SymbolPlan,
    all_plans,
    schedule_for,
    source_mean_for,
)

__all__ = [
    "ChannelModel",
    "DetectorModel",
    "ReceiverModel",
    "DriftState",
    "ClickRecord",
    "Window",
    "TimingLayout",
    "SessionConfig",
    "BlockStats",
    "CharacterizationReport",
    "MetricsError",
    "DET_Z",
    "DET_X_KEEP",
    "DET_X_ERR",
    "db_to_transmittance",
    "emit_pulse",
    "window_means",
    "detect",
    "detect_batch",
    "apply_dead_time",
    "perr_from_clicks",
    "perr_from_counts",
    "er_db_from_perr",
    "perr_from_er_db",
    "evolve_drift",
    "step_feedback",
    "simulate_characterization",
    "run_session",
]

DET_Z = 0
DET_X_KEEP = 1
DET_X_ERR = 2


class MetricsError(ValueError):
    """A metric is undefined for the given click sample."""


class Window(str, Enum):
    Z_EARLY = "z_early"
    Z_LATE = "z_late"
    X_EARLY = "x_early"
    X_CENTER = "x_center"
    X_LATE = "x_late"
    OUTSIDE = "outside"


def db_to_transmittance(loss_db: float) -> float:
    return 10.0 ** (-loss_db / 10.0)


@dataclass(frozen=True)
class ChannelModel:
    """Fiber channel: distributed attenuation plus lumped excess loss."""

    length_km: float = 50.0
    attenuation_db_per_km: float = 0.2
    excess_loss_db: float = 6.4

    def __post_init__(self) -> None:
        if self.length_km < 0 or self.attenuation_db_per_km < 0 or self.excess_loss_db < 0:
            raise ValueError("channel losses must be non-negative")

    @property
    def total_loss_db(self) -> float:
        return self.length_km * self.attenuation_db_per_km + self.excess_loss_db

    @property
    def transmittance(self) -> float:
        return db_to_transmittance(self.total_loss_db)


@dataclass(frozen=True)
class DetectorModel:
    """Threshold single-photon detector.

    Efficiency defaults to 1 because detector inefficiency is normally
    folded into the channel's excess loss together with connector losses.
    """

    efficiency: float = 1.0
    dark_rate_hz: float = 200.0
    jitter_sigma_s: float = 30e-12
    dead_time_s: float = 25e-9
    timetag_resolution_s: float = 1e-12

    def __post_init__(self) -> None:
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("efficiency must lie in [0, 1]")
        for name in ("dark_rate_hz", "jitter_sigma_s", "dead_time_s", "timetag_resolution_s"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class ReceiverModel:
    """Passive basis choice plus an unbalanced monitor interferometer.

    ``basis_split`` is the fraction of light routed to the
    time-of-arrival path; ``interferometer_delay_s`` must equal the
    encoder bin spacing for the central window to interfere.
    """

    basis_split: float = 0.78
    interferometer_delay_s: float = 10e-9
    phase_bob_rad: float = 0.0
    arm_loss_db: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.basis_split < 1.0:
            raise ValueError("basis_split must lie strictly between 0 and 1")
        if self.interferometer_delay_s <= 0:
            raise ValueError("interferometer_delay_s must be positive")
        if self.arm_loss_db < 0:
            raise ValueError("arm_loss_db must be non-negative")


@dataclass(frozen=True)
class DriftState:
    """Receiver phase error and the thermo-electric control loop acting on it.

    The free-running phase performs a Wiener walk of scale
    ``drift_rate_sigma`` optionally superposed on a slow sinusoid and a
    constant ramp.  The controller only observes the monitor-state
    extinction ratio, which is blind to the sign of the phase error, so
    it hill-climbs: it keeps a belief about the sign and flips it
    whenever the error estimate grows by more than ``deadband``.  The
    bounded Peltier current then applies a proportional-plus-derivative
    push through the thermal actuation gain.
    """

    phase_drift: float = 0.0
    drift_rate_sigma: float = 0.05
    linear_rate: float = 0.0
    sin_amp: float = 0.8
    sin_period_s: float = 900.0
    t: float = 0.0
    peltier_current: float = 0.0
    gain_p: float = 1.0
    gain_d: float = 0.1
    actuation_gain: float = 1.0
    max_current: float = 2.0
    deadband: float = 0.01
    direction: int = 1
    prev_theta_est: float = math.nan

    def __post_init__(self) -> None:
        if self.drift_rate_sigma < 0 or self.max_current <= 0 or self.sin_period_s <= 0:
            raise ValueError("invalid drift/controller parameters")
        if abs(self.peltier_current) > self.max_current:
            raise ValueError("peltier_current exceeds its bound")
        if self.direction not in (-1, 1):
            raise ValueError("direction must be +1 or -1")


@dataclass(frozen=True)
class ClickRecord:
    """One detection event.  ``true_symbol`` is a ground-truth tag for
    analysis and stays ``None`` in strict (communication-only) mode."""

    detector_id: int
    timestamp_s: float
    window: Window
    true_symbol: SymbolPlan | None = None


@dataclass(frozen=True)
class TimingLayout:
    """Arrival-window geometry within one clock period."""

    clock_hz: float = 10e6
    window_s: float = 1e-9
    z_bin0_s: float = 30e-9
    x_bin0_s: float = 30e-9
    hist_bin_s: float = 0.1e-9

    @property
    def period_s(self) -> float:
        return 1.0 / self.clock_hz


def emit_pulse(
    plan: SymbolPlan,
    levels: DecoyLevels,
    cfg: EncoderConfig,
    source_mean: float | None = None,
) -> tuple[TimeBinField, float]:
    """Deterministic encoder output for one plan and its total mean photon number.

    ``source_mean`` is the calibrated source intensity in photons per
    pulse (see :func:`timebin_qkd.protocol.source_mean_for`, the default);
    with an ideal device the field then carries exactly the plan's ``mu``
    or ``nu`` photons on average.
    """
    if source_mean is None:
        source_mean = source_mean_for(levels)
    if source_mean <= 0:
        raise ValueError("source_mean must be positive")
    sched = schedule_for(plan, levels)
    field = encoder_output(math.sqrt(source_mean), cfg, sched)
    return field, field.total_intensity()


def window_means(
    field: TimeBinField,
    ch: ChannelModel,
    det: DetectorModel,
    rcv: ReceiverModel,
    theta: float,
) -> dict[tuple[int, Window], float]:
    """Mean photon number delivered to each detector window for one pulse.

    ``theta`` is the total monitor-interferometer phase (receiver setting
    plus drift).  Ordering note: iteration order of the returned dict is
    key path first, then monitor path.
    """
    if field.d != 2:
        raise ValueError("the link model covers two-bin fields")
    eta = ch.transmittance * det.efficiency
    a_e, a_l = (a * math.sqrt(eta) for a in field.amps)
    pz = rcv.basis_split
    xs = (1.0 - pz) * db_to_transmittance(rcv.arm_loss_db)
    rot = complex(math.cos(theta), math.sin(theta))
    keep = max(abs(a_e * rot - a_l) ** 2 / 4.0 * xs, 0.0)
    err = max(abs(a_e * rot + a_l) ** 2 / 4.0 * xs, 0.0)
    side_e = abs(a_e) ** 2 / 4.0 * xs
    side_l = abs(a_l) ** 2 / 4.0 * xs
    return {
        (DET_Z, Window.Z_EARLY): abs(a_e) ** 2 * pz,
        (DET_Z, Window.Z_LATE): abs(a_l) ** 2 * pz,
        (DET_X_KEEP, Window.X_EARLY): side_e,
        (DET_X_KEEP, Window.X_CENTER): keep,
        (DET_X_KEEP, Window.X_LATE): side_l,
        (DET_X_ERR, Window.X_EARLY): side_e,
        (DET_X_ERR, Window.X_CENTER): err,
        (DET_X_ERR, Window.X_LATE): side_l,
    }


def _window_centre(det_id: int, window: Window, timing: TimingLayout, spacing: float) -> float:
    if det_id == DET_Z:
        k = 0 if window is Window.Z_EARLY else 1
        return timing.z_bin0_s + k * spacing
    k = {Window.X_EARLY: 0, Window.X_CENTER: 1, Window.X_LATE: 2}[window]
    return timing.x_bin0_s + k * spacing


def _classify_dark(u: float, det_id: int, timing: TimingLayout, spacing: float) -> Window:
    if det_id == DET_Z:
        candidates = (Window.Z_EARLY, Window.Z_LATE)
    else:
        candidates = (Window.X_EARLY, Window.X_CENTER, Window.X_LATE)
    for w in candidates:
        if abs(u - _window_centre(det_id, w, timing, spacing)) <= timing.window_s / 2:
            return w
    return Window.OUTSIDE


def apply_dead_time(times: np.ndarray, dead_time: float) -> np.ndarray:
    """Greedy dead-time filter on a sorted timestamp array.

    A click survives only if it falls at least ``dead_time`` after the
    previous surviving click.  Only neighbourhoods with raw gaps below
    the dead time are scanned, so the cost is proportional to the number
    of near-coincidences rather than the stream length.
    """
    t = np.asarray(times, dtype=float)
    if dead_time <= 0 or t.size < 2:
        return t.copy()
    if np.any(np.diff(t) < 0):
        t = np.sort(t)
    keep = np.ones(t.size, dtype=bool)
    tight = np.flatnonzero(np.diff(t) < dead_time)
    if tight.size == 0:
        return t.copy()
    splits = np.flatnonzero(np.diff(tight) > 1)
    run_starts = np.concatenate(([0], splits + 1))
    run_ends = np.concatenate((splits, [tight.size - 1]))
    for a, b in zip(run_starts, run_ends):
        first = tight[a]
        last_kept = t[first]
        for j in range(first + 1, tight[b] + 2):
            if t[j] - last_kept < dead_time:
                keep[j] = False
            else:
                last_kept = t[j]
    return t[keep]


def detect(
    field: TimeBinField,
    ch: ChannelModel,
    det: DetectorModel,
    rcv: ReceiverModel,
    drift: DriftState,
    rng: np.random.Generator,
    timing: TimingLayout | None = None,
    true_symbol: SymbolPlan | None = None,
    pulse_index: int = 0,
) -> list[ClickRecord]:
    """Monte-Carlo detection of a single pulse.

    Produces jittered, quantized, dead-time-filtered click records on the
    three detectors, including dark counts over the full clock period.
    Key-path randomness is drawn before monitor-path randomness.  The
    dead-time filter covers the clicks of this call; streams concatenated
    over many pulses should additionally run through
    :func:`apply_dead_time`.
    """
    timing = timing or TimingLayout()
    theta = rcv.phase_bob_rad + drift.phase_drift
    means = window_means(field, ch, det, rcv, theta)
    base = pulse_index * timing.period_s
    spacing = field.bin_spacing
    raw: dict[int, list[tuple[float, Window]]] = {DET_Z: [], DET_X_KEEP: [], DET_X_ERR: []}

    def signal_click(det_id: int, window: Window, mean: float) -> None:
        if rng.random() < -math.expm1(-mean):
            centre = _window_centre(det_id, window, timing, spacing)
            jitter = rng.normal(0.0, det.jitter_sigma_s) if det.jitter_sigma_s else 0.0
            raw[det_id].append((base + centre + jitter, window))

    def dark_clicks(det_id: int) -> None:
        for _ in range(rng.poisson(det.dark_rate_hz * timing.period_s)):
            u = rng.uniform(0.0, timing.period_s)
            raw[det_id].append((base + u, _classify_dark(u, det_id, timing, spacing)))

    for (det_id, window), mean in means.items():
        if det_id == DET_Z:
            signal_click(det_id, window, mean)
    dark_clicks(DET_Z)
    for (det_id, window), mean in means.items():
        if det_id != DET_Z:
            signal_click(det_id, window, mean)
    dark_clicks(DET_X_KEEP)
    dark_clicks(DET_X_ERR)

    res = det.timetag_resolution_s
    records: list[ClickRecord] = []
    for det_id, events in raw.items():
        events.sort()
        last_kept = -math.inf
        for t, window in events:
            if t - last_kept < det.dead_time_s:
                continue
            last_kept = t
            stamp = round(t / res) * res if res > 0 else t
            records.append(ClickRecord(det_id, stamp, window, true_symbol))
    records.sort(key=lambda r: r.timestamp_s)
    return records


def detect_batch(
    field: TimeBinField,
    n_pulses: int,
    ch: ChannelModel,
    det: DetectorModel,
    rcv: ReceiverModel,
    drift: DriftState,
    rng: np.random.Generator,
    chunk: int = 1_000_000,
) -> tuple[dict[tuple[int, Window], int], int]:
    """Vectorized signal-only detection over many identical pulses.

    Returns per-window click counts plus the number of pulses with at
    least one click anywhere (dark counts excluded; see :func:`detect`
    for the per-click model).
    """
    theta = rcv.phase_bob_rad + drift.phase_drift
    means = window_means(field, ch, det, rcv, theta)
    keys = list(means)
    probs = np.array([-math.expm1(-means[k]) for k in keys])
    counts = {k: 0 for k in keys}
    n_any = 0
    left = int(n_pulses)
    while left > 0:
        m = min(chunk, left)
        left -= m
        any_click = np.zeros(m, dtype=bool)
        for k, p in zip(keys, probs):
            hits = rng.random(m) < p
            counts[k] += int(hits.sum())
            any_click |= hits
        n_any += int(any_click.sum())
    return counts, n_any


def er_db_from_perr(p_err: float) -> float:
    """Extinction ratio in dB equivalent to an error probability."""
    if not 0.0 <= p_err <= 1.0:
        raise ValueError("p_err must lie in [0, 1]")
    if p_err == 0.0:
        return math.inf
    if p_err == 1.0:
        return -math.inf
    return 10.0 * math.log10(1.0 / p_err - 1.0)


def perr_from_er_db(er_db: float) -> float:
    if math.isinf(er_db):
        return 0.0 if er_db > 0 else 1.0
    return 1.0 / (1.0 + 10.0 ** (er_db / 10.0))


def perr_from_counts(n_wrong: float, n_correct: float) -> tuple[float, float]:
    """Error probability and its dB extinction ratio from window counts."""
    total = n_wrong + n_correct
    if total <= 0:
        raise MetricsError("no clicks in the assigned windows; the metric is undefined")
    p = n_wrong / total
    return p, er_db_from_perr(p)


def perr_from_clicks(
    clicks, correct_window: Window, wrong_window: Window
) -> tuple[float, float]:
    """Intrinsic error probability of a click stream given a window assignment."""
    n_c = sum(1 for c in clicks if c.window is correct_window)
    n_w = sum(1 for c in clicks if c.window is wrong_window)
    return perr_from_counts(n_w, n_c)


def evolve_drift(
    drift: DriftState, dt: float, rng: np.random.Generator | None = None
) -> DriftState:
    """Advance the free-running phase by ``dt`` and apply the actuator push."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    t2 = drift.t + dt
    delta = drift.linear_rate * dt
    if drift.drift_rate_sigma > 0:
        if rng is None:
            raise ValueError("a random generator is required when drift_rate_sigma > 0")
        delta += drift.drift_rate_sigma * math.sqrt(dt) * rng.standard_normal()
    if drift.sin_amp:
        w = 2.0 * math.pi / drift.sin_period_s
        delta += drift.sin_amp * (math.sin(w * t2) - math.sin(w * drift.t))
    theta = drift.phase_drift + delta - drift.actuation_gain * drift.peltier_current * dt
    return replace(drift, phase_drift=theta, t=t2)


def step_feedback(drift: DriftState, measured_er_minus_db: float, dt: float) -> DriftState:
    """One control step from a fresh extinction-ratio measurement.

    Converts the measured ER of the monitor state back to a phase-error
    magnitude, updates the sign belief (the ER is even in the phase
    error) and sets a bounded proportional-plus-derivative current.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    p = min(max(perr_from_er_db(measured_er_minus_db), 0.0), 1.0)
    theta_est = 2.0 * math.asin(math.sqrt(p))
    direction = drift.direction
    deriv = 0.0
    if math.isfinite(drift.prev_theta_est):
        if theta_est > drift.prev_theta_est + drift.deadband:
            direction = -direction
        deriv = (theta_est - drift.prev_theta_est) / dt
    push = max(drift.gain_p * theta_est + drift.gain_d * deriv, 0.0)
    current = max(-drift.max_current, min(drift.max_current, direction * push))
    return replace(
        drift, peltier_current=current, prev_theta_est=theta_est, direction=direction
    )


@dataclass(frozen=True)
class CharacterizationReport:
    """Intrinsic error metrics of the source with binomial error bars."""

    p_err: float
    p_err_sigma: float
    er_db: float
    er_db_sigma: float
    n_correct: int
    n_wrong: int
    detection_rate_hz: float


def simulate_characterization(
    plan: SymbolPlan,
    levels: DecoyLevels,
    cfg: EncoderConfig,
    det: DetectorModel,
    duration_s: float,
    target_rate_hz: float,
    rng: np.random.Generator,
    timing: TimingLayout | None = None,
) -> tuple[np.ndarray, np.ndarray, CharacterizationReport]:
    """Direct time-of-arrival measurement of one prepared state.

    The source is attenuated so the overall detection rate (signal plus
    dark counts) hits ``target_rate_hz``.  Returns histogram bin edges,
    histogram counts over one period, and the error-metric report.  The
    early window counts as "correct" for the superposition state, which
    populates both bins evenly and therefore sits at ``p_err ~ 0.5``.
    """
    timing = timing or TimingLayout()
    period = timing.period_s
    n_pulses = int(round(duration_s * timing.clock_hz))
    signal_rate = target_rate_hz - det.dark_rate_hz
    if signal_rate <= 0:
        raise ValueError("target rate must exceed the dark rate")
    p_any = signal_rate / timing.clock_hz
    if not 0.0 < p_any < 1.0:
        raise ValueError("target rate must be below the clock rate")
    m_total = -math.log1p(-p_any)

    field, total = emit_pulse(plan, levels, cfg)
    fracs = [i / total for i in field.intensities()]
    spacing = field.bin_spacing
    centres = [timing.z_bin0_s + k * spacing for k in range(field.d)]

    times_parts = []
    window_counts = []
    for frac, centre in zip(fracs, centres):
        p_click = -math.expm1(-m_total * frac)
        n = int(rng.binomial(n_pulses, p_click)) if p_click > 0 else 0
        window_counts.append(n)
        if n:
            t = np.full(n, centre)
            if det.jitter_sigma_s:
                t = t + rng.normal(0.0, det.jitter_sigma_s, n)
            times_parts.append(t)
    n_dark = rng.poisson(det.dark_rate_hz * duration_s)
    dark_times = rng.uniform(0.0, period, n_dark)
    times_parts.append(dark_times)
    times = np.concatenate(times_parts) if times_parts else np.empty(0)
    if det.timetag_resolution_s > 0:
        times = np.round(times / det.timetag_resolution_s) * det.timetag_resolution_s
    times = np.mod(times, period)

    edges = np.arange(0.0, period + timing.hist_bin_s / 2, timing.hist_bin_s)
    hist, _ = np.histogram(times, bins=edges)

    in_window = [
        int(np.count_nonzero(np.abs(times - c) <= timing.window_s / 2)) for c in centres
    ]
    if plan.symbol is Symbol.LATE or plan.symbol == 1:
        correct, wrong = in_window[1], in_window[0]
    else:
        correct, wrong = in_window[0], in_window[1]
    p, er = perr_from_counts(wrong, correct)
    n_tot = wrong + correct
    sigma_p = math.sqrt(max(p * (1.0 - p), 1.0 / n_tot) / n_tot)
    if 0.0 < p < 1.0:
        sigma_er = 10.0 / math.log(10.0) * sigma_p / (p * (1.0 - p))
    else:
        sigma_er = math.inf
    report = CharacterizationReport(
        p_err=p,
        p_err_sigma=sigma_p,
        er_db=er,
        er_db_sigma=sigma_er,
        n_correct=correct,
        n_wrong=wrong,
        detection_rate_hz=times.size / duration_s,
    )
    return edges, hist, report


@dataclass(frozen=True)
class SessionConfig:
    """Protocol-level knobs of one QKD session."""

    clock_hz: float = 10e6
    prob_alice_z: float = 0.93
    block_s: float = 60.0
    feedback_dt_s: float = 0.5
    feedback: bool = True
    window_s: float = 1e-9

    def __post_init__(self) -> None:
        if not 0.0 < self.prob_alice_z < 1.0:
            raise ValueError("prob_alice_z must lie strictly between 0 and 1")
        if self.block_s < self.feedback_dt_s or self.feedback_dt_s <= 0:
            raise ValueError("block_s must cover at least one feedback interval")
        if self.window_s <= 0 or self.window_s * 2 >= 1.0 / self.clock_hz:
            raise ValueError("arrival windows must fit inside the clock period")


@dataclass(frozen=True)
class BlockStats:
    """Per-block summary emitted by :func:`run_session`."""

    t_s: float
    span_s: float
    qber_z: float
    qber_x: float
    det_rate_hz: float
    sifted_bps: float
    counts: BlockCounts


@dataclass
class _PlanOptics:
    plan: SymbolPlan
    m_ze: float
    m_zl: float
    s_sum: float
    cross: complex
    side_e: float
    side_l: float

    def centre_means(self, theta: float) -> tuple[float, float]:
        rot = complex(math.cos(theta), math.sin(theta))
        inter = (self.cross * rot).real / 2.0
        return self.s_sum / 4.0 - inter, self.s_sum / 4.0 + inter  # keep, err


def _plan_optics(
    levels: DecoyLevels,
    cfg: EncoderConfig,
    ch: ChannelModel,
    det: DetectorModel,
    rcv: ReceiverModel,
) -> list[_PlanOptics]:
    eta = ch.transmittance * det.efficiency
    xs = (1.0 - rcv.basis_split) * db_to_transmittance(rcv.arm_loss_db)
    out = []
    for plan in all_plans():
        field, _ = emit_pulse(plan, levels, cfg)
        a_e, a_l = (a * math.sqrt(eta) for a in field.amps)
        out.append(
            _PlanOptics(
                plan=plan,
                m_ze=abs(a_e) ** 2 * rcv.basis_split,
                m_zl=abs(a_l) ** 2 * rcv.basis_split,
                s_sum=(abs(a_e) ** 2 + abs(a_l) ** 2) * xs,
                cross=a_e * a_l.conjugate() * xs,
                side_e=abs(a_e) ** 2 / 4.0 * xs,
                side_l=abs(a_l) ** 2 / 4.0 * xs,
            )
        )
    return out


def _p_click(mean: float) -> float:
    # destructive-interference means can round to tiny negatives
    return -math.expm1(-max(mean, 0.0))


@dataclass
class _Accumulator:
    sifted: int = 0
    wrong_z: int = 0
    n_z_mu: float = 0.0
    n_z_nu: float = 0.0
    n_x_mu: float = 0.0
    n_x_nu: float = 0.0
    m_x_mu: float = 0.0
    m_x_nu: float = 0.0
    clicks: int = 0


def run_session(
    duration_s: float,
    levels: DecoyLevels,
    cfg: EncoderConfig,
    ch: ChannelModel,
    det: DetectorModel,
    rcv: ReceiverModel,
    drift: DriftState,
    session: SessionConfig,
    seed: int,
) -> list[BlockStats]:
    """Simulate a full QKD session and return per-block statistics.

    The session advances in feedback intervals.  Within one interval the
    monitor phase is frozen, every plan's window click probabilities are
    closed forms, and the click counts are sampled from them (the
    Monte-Carlo per-pulse path in :func:`detect` follows the same means).
    Noise streams are seed-partitioned: plan choice, key-path signal,
    key-path darks, monitor-path signal, monitor-path darks, drift.
    """
    r_plan, r_z, r_zdark, r_x, r_xdark, r_drift = (
        np.random.default_rng([seed, i]) for i in range(6)
    )
    plan_optics = _plan_optics(levels, cfg, ch, det, rcv)
    paz = session.prob_alice_z
    plan_probs = np.array(
        [
            paz / 2 * levels.prob_mu,
            paz / 2 * levels.prob_nu,
            paz / 2 * levels.prob_mu,
            paz / 2 * levels.prob_nu,
            (1 - paz) * levels.prob_mu,
            (1 - paz) * levels.prob_nu,
        ]
    )
    dt = session.feedback_dt_s
    period = 1.0 / session.clock_hz
    wfrac = session.window_s / period
    n_step = int(round(session.clock_hz * dt))
    n_steps = int(round(duration_s / dt))
    steps_per_block = max(int(round(session.block_s / dt)), 1)

    blocks: list[BlockStats] = []
    acc = _Accumulator()
    steps_in_block = 0

    for step in range(n_steps):
        counts = r_plan.multinomial(n_step, plan_probs)
        frac = counts / n_step if n_step else counts
        theta = rcv.phase_bob_rad + drift.phase_drift

        # --- key path ---
        ze = [int(r_z.binomial(c, _p_click(po.m_ze))) for c, po in zip(counts, plan_optics)]
        zl = [int(r_z.binomial(c, _p_click(po.m_zl))) for c, po in zip(counts, plan_optics)]
        lam_w = det.dark_rate_hz * dt * wfrac
        dz_e = int(r_zdark.poisson(lam_w))
        dz_l = int(r_zdark.poisson(lam_w))
        dz_out = int(r_zdark.poisson(det.dark_rate_hz * dt * max(1.0 - 2 * wfrac, 0.0)))
        de = r_zdark.multinomial(dz_e, frac) if dz_e else np.zeros(6, dtype=int)
        dl = r_zdark.multinomial(dz_l, frac) if dz_l else np.zeros(6, dtype=int)

        # --- monitor path ---
        keep = []
        err = []
        side = 0
        for c, po in zip(counts, plan_optics):
            m_keep, m_err = po.centre_means(theta)
            keep.append(int(r_x.binomial(c, _p_click(m_keep))))
            err.append(int(r_x.binomial(c, _p_click(m_err))))
            side += int(r_x.binomial(2 * c, _p_click(po.side_e)))
            side += int(r_x.binomial(2 * c, _p_click(po.side_l)))
        dx_keep_c = int(r_xdark.poisson(lam_w))
        dx_err_c = int(r_xdark.poisson(lam_w))
        dx_rest = int(r_xdark.poisson(2 * det.dark_rate_hz * dt * max(1.0 - wfrac, 0.0)))
        dkc = r_xdark.multinomial(dx_keep_c, frac) if dx_keep_c else np.zeros(6, dtype=int)
        dec = r_xdark.multinomial(dx_err_c, frac) if dx_err_c else np.zeros(6, dtype=int)

        # --- bookkeeping ---
        step_keep = 0
        step_err = 0
        for i, po in enumerate(plan_optics):
            sym, dec_level = po.plan.symbol, po.plan.decoy
            if sym in (Symbol.EARLY, Symbol.LATE):
                correct = ze[i] + de[i] if sym is Symbol.EARLY else zl[i] + dl[i]
                wrong = zl[i] + dl[i] if sym is Symbol.EARLY else ze[i] + de[i]
                acc.sifted += correct + wrong
                acc.wrong_z += wrong
                if dec_level is Intensity.MU:
                    acc.n_z_mu += correct + wrong
                else:
                    acc.n_z_nu += correct + wrong
            else:
                k = keep[i] + int(dkc[i])
                e = err[i] + int(dec[i])
                step_keep += k
                step_err += e
                if dec_level is Intensity.MU:
                    acc.n_x_mu += k + e
                    acc.m_x_mu += e
                else:
                    acc.n_x_nu += k + e
                    acc.m_x_nu += e
        acc.clicks += (
            sum(ze) + sum(zl) + dz_e + dz_l + dz_out
            + sum(keep) + sum(err) + side + dx_keep_c + dx_err_c + dx_rest
        )

        # --- control loop, then free-running drift ---
        if session.feedback:
            if step_err == 0:
                er_meas = math.inf
            elif step_keep == 0:
                er_meas = -math.inf
            else:
                er_meas = 10.0 * math.log10(step_keep / step_err)
            drift = step_feedback(drift, er_meas, dt)
        drift = evolve_drift(drift, dt, r_drift)

        steps_in_block += 1
        last = step == n_steps - 1
        if steps_in_block == steps_per_block or (last and steps_in_block > 0):
            span = steps_in_block * dt
            n_x = acc.n_x_mu + acc.n_x_nu
            qber_z = acc.wrong_z / acc.sifted if acc.sifted else 0.0
            block = BlockStats(
                t_s=(step + 1) * dt,
                span_s=span,
                qber_z=qber_z,
                qber_x=(acc.m_x_mu + acc.m_x_nu) / n_x if n_x else 0.0,
                det_rate_hz=acc.clicks / span,
                sifted_bps=acc.sifted / span,
                counts=BlockCounts(
                    n_z_mu=acc.n_z_mu,
                    n_z_nu=acc.n_z_nu,
                    n_x_mu=acc.n_x_mu,
                    n_x_nu=acc.n_x_nu,
                    m_x_mu=acc.m_x_mu,
                    m_x_nu=acc.m_x_nu,
                    qber_z=qber_z,
                    block_size=acc.sifted,
                ),
            )
            blocks.append(block)
            acc = _Accumulator()
            steps_in_block = 0
    return blocks
