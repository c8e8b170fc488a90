import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timebin_qkd.optics import (
    BeamSplitterSpec,
    EncoderConfig,
    PhaseSchedule,
    arm_transmittance,
    effective_phases,
    encoder_output,
    ideal_bin_transmittance,
    loop_amplitudes,
    min_qber,
    min_transmittance,
    numeric_max_transmittance,
    numeric_min_transmittance,
    qudit_output,
    split_input,
    transmittances,
)

IDEAL = EncoderConfig.ideal()

phases = st.floats(-2 * math.pi, 2 * math.pi, allow_nan=False)


def config_with_t1(t1: float) -> EncoderConfig:
    return EncoderConfig(
        bs=(BeamSplitterSpec(t1), BeamSplitterSpec(0.5), BeamSplitterSpec(0.5))
    )


def sched(phi_c, phi_e, phi_l) -> PhaseSchedule:
    return PhaseSchedule(phi_c=phi_c, phi_arm=(phi_e, phi_l))


class TestSplitInput:
    def test_balanced(self):
        cw, ccw = split_input(1.0, BeamSplitterSpec(0.5))
        assert cw == pytest.approx(1 / math.sqrt(2))
        assert ccw == pytest.approx(1j / math.sqrt(2))

    def test_fully_transmissive(self):
        cw, ccw = split_input(1.0, BeamSplitterSpec(1.0))
        assert cw == 1.0
        assert ccw == 0.0

    def test_energy_split(self):
        cw, ccw = split_input(1.0, BeamSplitterSpec(0.45))
        assert abs(cw) ** 2 == pytest.approx(0.45)
        assert abs(ccw) ** 2 == pytest.approx(0.55)

    @given(st.floats(0, 1))
    def test_energy_conserved(self, t1):
        cw, ccw = split_input(1.0, BeamSplitterSpec(t1))
        assert abs(cw) ** 2 + abs(ccw) ** 2 == pytest.approx(1.0, abs=1e-12)


class TestLoopAmplitudes:
    def test_ideal_magnitudes(self):
        cw, ccw = loop_amplitudes(1.0, IDEAL, sched(0, 0, 0))
        for amp in (*cw.amps, *ccw.amps):
            assert abs(amp) == pytest.approx(1 / (2 * math.sqrt(2)), abs=1e-15)

    def test_control_phase_only_on_cw(self):
        cw0, ccw0 = loop_amplitudes(1.0, IDEAL, sched(0, 0, 0))
        cw1, ccw1 = loop_amplitudes(1.0, IDEAL, sched(math.pi, 0, 0))
        for a0, a1 in zip(cw0.amps, cw1.amps):
            assert a1 == pytest.approx(-a0, abs=1e-15)
        assert ccw1.amps == ccw0.amps

    def test_unbalanced_input_energy(self):
        # |cw early|^2 is the product of the three transmittances
        cw, _ = loop_amplitudes(1.0, config_with_t1(0.45), sched(0, 0, 0))
        assert abs(cw.amps[0]) ** 2 == pytest.approx(0.45 * 0.5 * 0.5, abs=1e-15)

    @given(phases, phases, phases, st.floats(0, 1))
    def test_loop_is_lossless_bounded(self, pc, pe, pl, t1):
        cw, ccw = loop_amplitudes(1.0, config_with_t1(t1), sched(pc, pe, pl))
        total = cw.total_intensity() + ccw.total_intensity()
        assert total <= 1.0 + 1e-12


class TestEncoderOutput:
    def test_superposition_at_max_intensity(self):
        out = encoder_output(1.0, IDEAL, sched(math.pi, 0, 0))
        assert out.intensities() == pytest.approx((0.25, 0.25), abs=1e-15)

    def test_equal_phases_dark(self):
        for phi in (0.0, 1.0, 2.5):
            out = encoder_output(1.0, IDEAL, sched(phi, phi, phi))
            assert out.total_intensity() == pytest.approx(0.0, abs=1e-15)

    def test_pure_early(self):
        out = encoder_output(1.0, IDEAL, sched(0, math.pi, 0))
        assert out.intensities()[0] == pytest.approx(0.25, abs=1e-15)
        assert out.intensities()[1] == 0.0

    def test_superposition_relative_phase_is_pi(self):
        out = encoder_output(1.0, IDEAL, sched(math.pi, 0, 0))
        rel = cmath.phase(out.amps[1] / out.amps[0])
        assert abs(abs(rel) - math.pi) < 1e-12

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            encoder_output(1.0, IDEAL, PhaseSchedule(0.0, (0.0, 0.0, 0.0)))

    @given(phases, phases, phases)
    def test_matches_transmittances(self, pc, pe, pl):
        out = encoder_output(1.0, IDEAL, sched(pc, pe, pl))
        ts = transmittances(IDEAL, sched(pc, pe, pl))
        assert out.intensities() == pytest.approx(ts, abs=1e-12)


class TestTransmittances:
    def test_ideal_maximum(self):
        t_e, t_l = transmittances(IDEAL, sched(math.pi, 0, math.pi))
        assert t_e == pytest.approx(0.25, abs=1e-15)
        assert t_l == 0.0

    def test_qudit_prefactor(self):
        cfg = EncoderConfig.ideal(d=4)
        ts = transmittances(cfg, PhaseSchedule(math.pi, (0.0,) * 4))
        assert ts == pytest.approx((1 / 16,) * 4, abs=1e-15)

    def test_general_splitter_floor(self):
        # evaluated independently: T2*T3*(T1^2 + R1^2 - 2*T1*R1)
        expected = 0.25 * (0.45**2 + 0.55**2 - 2 * 0.45 * 0.55)
        t_e, _ = transmittances(config_with_t1(0.45), sched(0, 0, 0))
        assert t_e == pytest.approx(expected, abs=1e-15)
        assert expected == pytest.approx(0.0025, abs=1e-15)

    @given(phases, phases, phases)
    def test_energy_bound_ideal(self, pc, pe, pl):
        t_e, t_l = transmittances(IDEAL, sched(pc, pe, pl))
        assert 0.0 <= t_e <= 0.25 + 1e-12
        assert 0.0 <= t_l <= 0.25 + 1e-12
        assert t_e + t_l <= 0.5 + 1e-12

    @given(phases, phases, phases, st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_energy_bound_general(self, pc, pe, pl, t1, t2, t3):
        cfg = EncoderConfig(bs=(BeamSplitterSpec(t1), BeamSplitterSpec(t2), BeamSplitterSpec(t3)))
        ts = transmittances(cfg, sched(pc, pe, pl))
        assert sum(ts) <= 1.0 + 1e-12

    @given(phases, phases, phases, phases)
    def test_global_phase_invariance(self, pc, pe, pl, shift):
        base = transmittances(IDEAL, sched(pc, pe, pl))
        shifted = transmittances(IDEAL, sched(pc + shift, pe + shift, pl + shift))
        assert shifted == pytest.approx(base, abs=1e-12)

    @given(phases, phases, phases, st.integers(-3, 3))
    def test_two_pi_periodicity(self, pc, pe, pl, k):
        base = transmittances(IDEAL, sched(pc, pe, pl))
        wrapped = transmittances(IDEAL, sched(pc + 2 * math.pi * k, pe, pl))
        assert wrapped == pytest.approx(base, abs=1e-12)

    def test_general_reduces_to_ideal_on_grid(self):
        dphi = np.linspace(-2 * math.pi, 2 * math.pi, 2001)
        general = arm_transmittance(0.5, 0.25, dphi)
        ideal = ideal_bin_transmittance(2, dphi)
        assert np.max(np.abs(general - ideal)) < 1e-12


class TestQuditOutput:
    def test_uniform_superposition(self):
        cfg = EncoderConfig.ideal(d=4)
        out = qudit_output(1.0, cfg, PhaseSchedule(math.pi, (0.0,) * 4))
        for amp in out.amps:
            assert abs(amp) == pytest.approx(0.25, abs=1e-15)

    def test_all_zero_phases_dark(self):
        cfg = EncoderConfig.ideal(d=4)
        out = qudit_output(1.0, cfg, PhaseSchedule(0.0, (0.0,) * 4))
        assert out.total_intensity() == 0.0

    def test_non_ideal_rejected(self):
        with pytest.raises(ValueError):
            qudit_output(1.0, config_with_t1(0.45), sched(0, 0, 0))

    def test_d2_equivalence_with_two_bin_device(self):
        # The d-bin formula and the physical two-bin output agree per bin in
        # magnitude (hence in transmittance).  Their amplitude conventions
        # differ by the two-bin device's relative sign on the late bin, so
        # equality is checked up to that documented per-bin phase.
        rng = np.random.default_rng(42)
        for _ in range(100):
            pc, pe, pl = rng.uniform(-math.pi, math.pi, 3)
            q = qudit_output(1.0, IDEAL, sched(pc, pe, pl))
            e = encoder_output(1.0, IDEAL, sched(pc, pe, pl))
            for qa, ea in zip(q.amps, e.amps):
                assert abs(qa) == pytest.approx(abs(ea), abs=1e-12)
            assert transmittances(IDEAL, sched(pc, pe, pl)) == pytest.approx(
                tuple(abs(a) ** 2 for a in q.amps), abs=1e-12
            )


class TestImperfectionFloor:
    @pytest.mark.parametrize(
        "t1, tmin, qmin",
        [
            (0.5, 0.0, 0.0),
            (0.45, 0.0025, 0.0025 * 4 / (0.0025 * 4 + 1)),
            (1.0, 0.25, 0.5),
        ],
    )
    def test_closed_forms(self, t1, tmin, qmin):
        assert min_transmittance(t1) == pytest.approx(tmin, abs=1e-15)
        assert min_qber(t1) == pytest.approx(qmin, abs=1e-15)

    @pytest.mark.parametrize("t1", [0.3, 0.42, 0.5, 0.55, 0.68, 0.9, 1.0])
    def test_numeric_minimum_matches(self, t1):
        assert abs(numeric_min_transmittance(t1) - min_transmittance(t1)) < 1e-9

    @pytest.mark.parametrize("t1", [0.3, 0.5, 0.77])
    def test_numeric_maximum_is_quarter(self, t1):
        assert abs(numeric_max_transmittance(t1) - 0.25) < 1e-9

    @given(st.floats(0, 1))
    def test_symmetric_about_half(self, t1):
        assert min_transmittance(t1) == pytest.approx(min_transmittance(1 - t1), abs=1e-15)


class TestModulatorExtinction:
    def test_identity_for_perfect_isolation(self):
        ph = sched(0.3, 1.2, -0.7)
        assert effective_phases(IDEAL, ph) is ph

    def test_arm_phase_bleeds_to_sibling(self):
        cfg = EncoderConfig(modulator_extinction=0.01)
        eff = effective_phases(cfg, sched(0.0, math.pi, 0.0))
        assert eff.phi_e == pytest.approx(math.pi)
        assert eff.phi_l == pytest.approx(0.01 * math.pi)
        # wrong bin now leaks the independently evaluated amount
        t_e, t_l = transmittances(cfg, sched(0.0, math.pi, 0.0))
        assert t_l == pytest.approx(math.sin(0.01 * math.pi / 2) ** 2 / 4, abs=1e-15)
        assert t_l > 0.0

    def test_control_bleed_keeps_superposition_balanced(self):
        cfg = EncoderConfig(modulator_extinction=0.01)
        beta = math.pi / 2
        t_e, t_l = transmittances(cfg, sched(beta, 0.0, 0.0))
        assert t_e == pytest.approx(t_l, abs=1e-15)


@settings(max_examples=25)
@given(phases, phases, phases, st.floats(-1.0, 1.0))
def test_residual_arm_phase_preserves_energy(pc, pe, pl, omega_tau):
    cfg = EncoderConfig(omega_tau=omega_tau)
    ts = transmittances(cfg, sched(pc, pe, pl))
    out = encoder_output(1.0, cfg, sched(pc, pe, pl))
    assert sum(ts) <= 0.5 + 1e-12
    assert out.intensities() == pytest.approx(ts, abs=1e-12)
