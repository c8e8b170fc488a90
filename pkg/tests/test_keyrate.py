import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from timebin_qkd.keyrate import (
    ZERO_KEY,
    BlockCounts,
    SecurityParams,
    binary_entropy,
    decoy_bounds,
    secret_key_length,
    security_penalty,
)
from timebin_qkd.protocol import DecoyLevels

SEC = SecurityParams()
LEVELS = DecoyLevels(mu=0.6, nu=0.2, prob_mu=0.7)


def toy_counts(**overrides) -> BlockCounts:
    base = dict(
        n_z_mu=8e5,
        n_z_nu=2e5,
        n_x_mu=4e4,
        n_x_nu=1e4,
        m_x_mu=400.0,
        m_x_nu=150.0,
        qber_z=0.01,
        block_size=1e6,
    )
    base.update(overrides)
    return BlockCounts(**base)


class TestBinaryEntropy:
    def test_half_is_one_bit(self):
        assert binary_entropy(0.5) == 1.0

    def test_endpoints(self):
        assert binary_entropy(0.0) == 0.0
        assert binary_entropy(1.0) == 0.0

    def test_frozen_value(self):
        # computed independently at 30 significant digits
        assert binary_entropy(0.11) == pytest.approx(0.4999159581645280, abs=1e-14)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            binary_entropy(-0.01)
        with pytest.raises(ValueError):
            binary_entropy(1.01)

    @given(st.floats(0.0, 1.0))
    def test_symmetry(self, x):
        assert binary_entropy(x) == pytest.approx(binary_entropy(1 - x), abs=1e-12)

    @given(st.floats(0.0, 0.499), st.floats(0.0005, 0.001))
    def test_monotone_below_half(self, x, dx):
        assert binary_entropy(x + dx) > binary_entropy(x)


def test_security_penalty_closed_form():
    sec = SecurityParams(eps_sec=1e-9, eps_corr=1e-12)
    expected = 6 * math.log2(19 / 1e-9) + math.log2(2 / 1e-12)
    assert security_penalty(sec) == pytest.approx(expected, rel=1e-15)


# ---------------------------------------------------------------------------
# independent brute-force implementation of the one-decoy bounds, written
# step by step from the defining relations; used as a dual-path oracle
# ---------------------------------------------------------------------------


def _brute_force_bounds(counts, levels, sec):
    mu, nu = levels.mu, levels.nu
    pm, pn = levels.prob_mu, 1.0 - levels.prob_mu
    eps = sec.eps_sec / 19.0

    def tau(n):
        from math import exp, factorial

        return pm * exp(-mu) * mu**n / factorial(n) + pn * exp(-nu) * nu**n / factorial(n)

    def delta(total):
        return math.sqrt(total * math.log(1.0 / eps) / 2.0)

    def plus(count, k, p, total):
        return math.exp(k) / p * (count + delta(total))

    def minus(count, k, p, total):
        return math.exp(k) / p * max(count - delta(total), 0.0)

    n_z = counts.n_z_mu + counts.n_z_nu
    n_x = counts.n_x_mu + counts.n_x_nu
    m_x = counts.m_x_mu + counts.m_x_nu
    m_z = counts.qber_z * n_z

    s_z0 = tau(0) * (mu * minus(counts.n_z_nu, nu, pn, n_z) - nu * plus(counts.n_z_mu, mu, pm, n_z)) / (mu - nu)
    s_z0 = min(max(s_z0, 0.0), n_z)
    s_z0_up = min(2.0 * (m_z + delta(n_z)), n_z)

    def s1(n_nu_minus, n_mu_plus, s0_up):
        r = (nu / mu) ** 2
        return tau(1) * mu / (nu * (mu - nu)) * (n_nu_minus - r * n_mu_plus - (1 - r) * s0_up / tau(0))

    s_z1 = s1(minus(counts.n_z_nu, nu, pn, n_z), plus(counts.n_z_mu, mu, pm, n_z), s_z0_up)
    s_z1 = min(max(s_z1, 0.0), n_z - s_z0)

    s_x0_up = min(2.0 * (m_x + delta(n_x)), n_x)
    s_x1 = s1(minus(counts.n_x_nu, nu, pn, n_x), plus(counts.n_x_mu, mu, pm, n_x), s_x0_up)
    s_x1 = min(max(s_x1, 0.0), n_x)

    v_x1 = tau(1) * (plus(counts.m_x_mu, mu, pm, m_x) - minus(counts.m_x_nu, nu, pn, m_x)) / (mu - nu)
    v_x1 = max(v_x1, 0.0)

    if s_z1 <= 0 or s_x1 <= 0:
        return s_z0, 0.0, 0.5
    b = v_x1 / s_x1
    if b >= 0.5:
        return s_z0, s_z1, 0.5
    c, d = s_z1, s_x1
    gamma = math.sqrt(
        (c + d) * (1 - b) * b / (c * d * math.log(2.0))
        * math.log2((c + d) / (c * d * (1 - b) * b) * (21.0 / sec.eps_sec) ** 2)
    )
    return s_z0, s_z1, min(b + gamma, 0.5)


class TestDecoyBounds:
    def test_dual_implementation_agrees(self):
        counts = toy_counts()
        got = decoy_bounds(counts, LEVELS, SEC)
        s0, s1, phi = _brute_force_bounds(counts, LEVELS, SEC)
        assert got.s_z0 == pytest.approx(s0, rel=1e-12, abs=1e-9)
        assert got.s_z1 == pytest.approx(s1, rel=1e-12)
        assert got.phi_z == pytest.approx(phi, rel=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(
        st.floats(1e3, 1e8),
        st.floats(0.01, 0.6),
        st.floats(0.001, 0.2),
        st.floats(0.0, 0.1),
    )
    def test_dual_implementation_agrees_randomized(self, n_z, x_frac, err_frac, qz):
        counts = BlockCounts(
            n_z_mu=0.8 * n_z,
            n_z_nu=0.2 * n_z,
            n_x_mu=0.8 * n_z * x_frac,
            n_x_nu=0.2 * n_z * x_frac,
            m_x_mu=0.8 * n_z * x_frac * err_frac,
            m_x_nu=0.2 * n_z * x_frac * err_frac,
            qber_z=qz,
        )
        got = decoy_bounds(counts, LEVELS, SEC)
        s0, s1, phi = _brute_force_bounds(counts, LEVELS, SEC)
        assert got.s_z0 == pytest.approx(s0, rel=1e-12, abs=1e-9)
        assert got.s_z1 == pytest.approx(s1, rel=1e-12, abs=1e-9)
        assert got.phi_z == pytest.approx(phi, rel=1e-12, abs=1e-12)

    @staticmethod
    def _mixture_counts(lv, eta, y0, big_n, x_frac=0.01):
        # Exact Poisson-mixture expectation: a source of intensity k into a
        # channel with per-photon transmission eta and additive vacuum
        # yield y0 clicks with probability y0 + 1 - exp(-k*eta)
        # (the Poisson average of 1 - (1-eta)^n).
        def clicks(k, p):
            return big_n * p * (y0 + 1 - math.exp(-k * eta))

        avg_click = clicks(lv.mu, lv.prob_mu) + clicks(lv.nu, lv.prob_nu)
        return BlockCounts(
            n_z_mu=clicks(lv.mu, lv.prob_mu),
            n_z_nu=clicks(lv.nu, lv.prob_nu),
            n_x_mu=clicks(lv.mu, lv.prob_mu) * x_frac,
            n_x_nu=clicks(lv.nu, lv.prob_nu) * x_frac,
            m_x_mu=0.0,
            m_x_nu=0.0,
            qber_z=big_n * (lv.prob_mu + lv.prob_nu) * y0 / 2 / avg_click,
        )

    def test_vacuum_bound_asymptote(self):
        # With nu -> 0 the multiphoton slack of the vacuum bound vanishes
        # (it scales with mu*nu) and the lower bound approaches the true
        # vacuum event count N * tau0 * y0.
        eta, y0, big_n = 0.1, 2e-5, 1e16
        lv = DecoyLevels(mu=0.6, nu=1e-6, prob_mu=0.7)
        counts = self._mixture_counts(lv, eta, y0, big_n)
        tau0 = lv.prob_mu * math.exp(-lv.mu) + lv.prob_nu * math.exp(-lv.nu)
        true_vacuum = big_n * tau0 * y0
        got = decoy_bounds(counts, lv, SEC)
        assert 0.9 * true_vacuum <= got.s_z0 <= true_vacuum * (1 + 1e-6)

    def test_single_photon_bound_tightness(self):
        # At a practical decoy level the single-photon lower bound must
        # sit just below the true count N * tau1 * eta.
        eta, big_n = 0.1, 1e16
        lv = DecoyLevels(mu=0.6, nu=0.2, prob_mu=0.7)
        counts = self._mixture_counts(lv, eta, 0.0, big_n)
        tau1 = lv.prob_mu * lv.mu * math.exp(-lv.mu) + lv.prob_nu * lv.nu * math.exp(-lv.nu)
        true_single = big_n * tau1 * eta
        got = decoy_bounds(counts, lv, SEC)
        assert 0.9 * true_single <= got.s_z1 <= true_single * (1 + 1e-9)

    def test_all_error_monitor_basis_kills_key(self):
        counts = toy_counts(m_x_mu=4e4, m_x_nu=1e4, qber_z=0.05)
        got = decoy_bounds(counts, LEVELS, SEC)
        assert got.phi_z == 0.5
        assert secret_key_length(counts, LEVELS, SEC) == 0.0

    def test_collapsed_bounds_return_zero_key_signal(self):
        counts = toy_counts(n_z_mu=40.0, n_z_nu=10.0, n_x_mu=4.0, n_x_nu=1.0,
                            m_x_mu=1.0, m_x_nu=0.0, block_size=50.0)
        got = decoy_bounds(counts, LEVELS, SEC)
        assert got.s_z1 == 0.0
        assert got.phi_z == 0.5
        assert secret_key_length(counts, LEVELS, SEC) == 0.0

    def test_no_counts_returns_zero_key(self):
        counts = BlockCounts(0, 0, 0, 0, 0, 0, qber_z=0.0)
        assert decoy_bounds(counts, LEVELS, SEC) == ZERO_KEY

    @settings(max_examples=60, deadline=None)
    @given(
        st.floats(10, 1e9),
        st.floats(0.0, 1.0),
        st.floats(0.0, 1.0),
        st.floats(0.0, 0.5),
        st.floats(0.0, 0.5),
    )
    def test_bound_sanity(self, n_z, split, x_frac, err_frac, qz):
        counts = BlockCounts(
            n_z_mu=n_z * split,
            n_z_nu=n_z * (1 - split),
            n_x_mu=n_z * x_frac * split,
            n_x_nu=n_z * x_frac * (1 - split),
            m_x_mu=n_z * x_frac * split * err_frac,
            m_x_nu=n_z * x_frac * (1 - split) * err_frac,
            qber_z=qz,
        )
        got = decoy_bounds(counts, LEVELS, SEC)
        assert got.s_z0 >= 0.0
        assert got.s_z1 >= 0.0
        assert got.s_z0 + got.s_z1 <= counts.n_z + 1e-9
        assert 0.0 <= got.phi_z <= 0.5


class TestSecretKeyLength:
    def test_clamped_at_zero(self):
        counts = toy_counts(qber_z=0.3)
        assert secret_key_length(counts, LEVELS, SEC) == 0.0

    def test_single_photon_dominated_limit(self):
        # tiny intensities: nearly every detection stems from a single
        # photon, no errors, enormous block -> l approaches n_z
        lv = DecoyLevels(mu=0.01, nu=0.005, prob_mu=0.7)
        eta, big_n = 0.1, 1e18

        def clicks(k, p):
            return big_n * p * (1 - math.exp(-k * eta))

        counts = BlockCounts(
            n_z_mu=clicks(lv.mu, lv.prob_mu),
            n_z_nu=clicks(lv.nu, lv.prob_nu),
            n_x_mu=clicks(lv.mu, lv.prob_mu) * 0.01,
            n_x_nu=clicks(lv.nu, lv.prob_nu) * 0.01,
            m_x_mu=0.0,
            m_x_nu=0.0,
            qber_z=0.0,
        )
        l = secret_key_length(counts, lv, SEC)
        assert l / counts.n_z > 0.9

    def test_monotone_in_qber_and_threshold(self):
        qbers = [i * 0.2 / 49 for i in range(50)]
        lengths = [
            secret_key_length(toy_counts(qber_z=q), LEVELS, SEC) for q in qbers
        ]
        assert all(a >= b - 1e-6 for a, b in zip(lengths, lengths[1:]))
        assert all(l >= 0.0 for l in lengths)
        assert lengths[0] > 0.0
        assert lengths[-1] == 0.0
        crossing = next(q for q, l in zip(qbers, lengths) if l == 0.0)
        assert 0.05 < crossing < 0.15

    def test_monotone_in_monitor_errors(self):
        scales = [0.0, 0.5, 1.0, 2.0, 5.0, 20.0]
        lengths = [
            secret_key_length(
                toy_counts(m_x_mu=400 * s, m_x_nu=150 * s), LEVELS, SEC
            )
            for s in scales
        ]
        assert all(a >= b - 1e-6 for a, b in zip(lengths, lengths[1:]))

    def test_monotone_in_block_size(self):
        lengths = []
        for scale in (1.0, 2.0, 5.0, 10.0):
            counts = BlockCounts(
                n_z_mu=8e5 * scale,
                n_z_nu=2e5 * scale,
                n_x_mu=4e4 * scale,
                n_x_nu=1e4 * scale,
                m_x_mu=400 * scale,
                m_x_nu=150 * scale,
                qber_z=0.01,
            )
            lengths.append(secret_key_length(counts, LEVELS, SEC))
        assert all(b >= a for a, b in zip(lengths, lengths[1:]))

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.0, 0.5), st.floats(10, 1e7))
    def test_never_negative(self, qz, n_z):
        counts = BlockCounts(
            n_z_mu=0.8 * n_z,
            n_z_nu=0.2 * n_z,
            n_x_mu=0.02 * n_z,
            n_x_nu=0.005 * n_z,
            m_x_mu=0.002 * n_z,
            m_x_nu=0.0005 * n_z,
            qber_z=qz,
        )
        assert secret_key_length(counts, LEVELS, SEC) >= 0.0


class TestCsvInterface:
    def test_roundtrip_and_key_lengths(self, tmp_path):
        from timebin_qkd.keyrate import (
            key_lengths_from_csv,
            read_block_counts_csv,
            write_block_counts_csv,
        )

        rows = [(60.0, 60.0, toy_counts()), (120.0, 60.0, toy_counts(qber_z=0.02))]
        src = tmp_path / "block_counts.csv"
        dst = tmp_path / "key_lengths.csv"
        write_block_counts_csv(src, rows)
        back = read_block_counts_csv(src)
        assert back[0][0] == 60.0
        assert back[0][2].n_z_mu == rows[0][2].n_z_mu
        assert back[1][2].qber_z == 0.02

        out = key_lengths_from_csv(src, dst, LEVELS, SEC)
        assert len(out) == 2
        for (t_s, bits, skr), (_, span, counts) in zip(out, rows):
            assert bits == pytest.approx(secret_key_length(counts, LEVELS, SEC), rel=1e-9)
            assert skr == pytest.approx(bits / span, rel=1e-12)
        lines = dst.read_text().splitlines()
        assert lines[0] == "t_s,key_bits,skr_bps"

    def test_missing_column_rejected(self, tmp_path):
        from timebin_qkd.keyrate import read_block_counts_csv

        bad = tmp_path / "bad.csv"
        bad.write_text("t_s,n_z_mu\n1,2\n")
        with pytest.raises(ValueError):
            read_block_counts_csv(bad)
