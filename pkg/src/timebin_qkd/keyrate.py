"""Finite-key secret-key-length accounting for the one-decoy protocol.

Given per-block sifted counts at two intensities, the one-decoy method
bounds the vacuum and single-photon contributions with Hoeffding
concentration and extracts

    l = s_z0 + s_z1 * (1 - h(phi_z)) - lambda_ec
        - 6*log2(19/eps_sec) - log2(2/eps_corr)

clamped at zero.  Derivation sketch of the bounds, with
``tau_n = sum_k p_k e^{-k} k^n / n!`` the probability of an n-photon
pulse and ``n~_k = (e^k / p_k) * (n_k -+ delta)`` the Hoeffding-corrected
scaled counts (``delta = sqrt(ln(1/eps) * n/2)``, one ``eps = eps_sec/19``
per concentration inequality):

* vacuum lower bound: the combination ``mu*n~_nu - nu*n~_mu`` cancels the
  single-photon term and upper-bounds every multiphoton term, leaving
  ``s_z0 >= tau_0 * (mu*n~_nu^- - nu*n~_mu^+) / (mu - nu)``;
* vacuum upper bound: vacuum detections land in a uniformly random bin,
  so at least half of them show up as errors and
  ``s_z0 <= 2 * (m_z + delta)``;
* single-photon lower bound: ``n~_nu - (nu/mu)^2 n~_mu`` cancels the
  two-photon term, giving
  ``s_z1 >= tau_1 * mu * (n~_nu^- - (nu/mu)^2 n~_mu^+
    - (mu^2 - nu^2)/mu^2 * s_z0^u / tau_0) / (nu * (mu - nu))``;
* single-photon errors: ``m~_mu - m~_nu`` has non-negative coefficients
  for every photon number, so
  ``v_x1 <= tau_1 * (m~_mu^+ - m~_nu^-) / (mu - nu)``;
* the phase-error rate in the key basis is the monitor-basis
  single-photon error rate plus the usual random-sampling correction
  ``gamma``.

Every lower bound is clamped so that the reported vacuum plus
single-photon events never exceed the block size.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from .protocol import DecoyLevels

__all__ = [
    "BlockCounts",
    "SecurityParams",
    "DecoyBounds",
    "ZERO_KEY",
    "binary_entropy",
    "decoy_bounds",
    "secret_key_length",
    "security_penalty",
    "read_block_counts_csv",
    "write_block_counts_csv",
    "write_key_lengths_csv",
    "key_lengths_from_csv",
]


@dataclass(frozen=True)
class BlockCounts:
    """Sifted detection statistics of one analysis block.

    ``n_z_*`` are key-basis counts per intensity, ``n_x_*``/``m_x_*``
    monitor-basis counts and errors, ``qber_z`` the observed key-basis
    error ratio (what error correction will disclose) and ``block_size``
    the number of key bits the block contributes.
    """

    n_z_mu: float
    n_z_nu: float
    n_x_mu: float
    n_x_nu: float
    m_x_mu: float
    m_x_nu: float
    qber_z: float
    block_size: float = 0.0

    def __post_init__(self) -> None:
        for name in ("n_z_mu", "n_z_nu", "n_x_mu", "n_x_nu", "m_x_mu", "m_x_nu"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.m_x_mu > self.n_x_mu or self.m_x_nu > self.n_x_nu:
            raise ValueError("error counts cannot exceed counts")
        if not 0.0 <= self.qber_z <= 1.0:
            raise ValueError("qber_z must lie in [0, 1]")

    @property
    def n_z(self) -> float:
        return self.n_z_mu + self.n_z_nu

    @property
    def n_x(self) -> float:
        return self.n_x_mu + self.n_x_nu

    @property
    def m_x(self) -> float:
        return self.m_x_mu + self.m_x_nu


@dataclass(frozen=True)
class SecurityParams:
    eps_sec: float = 1e-9
    eps_corr: float = 1e-12
    f_ec: float = 1.16

    def __post_init__(self) -> None:
        for name in ("eps_sec", "eps_corr"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.f_ec < 1.0:
            raise ValueError("error-correction inefficiency must be >= 1")


@dataclass(frozen=True)
class DecoyBounds:
    """Concentration-bounded event estimates for one block.

    ``s_z1 == 0`` together with ``phi_z == 0.5`` is the zero-key signal
    emitted when the bounds collapse.
    """

    s_z0: float
    s_z1: float
    phi_z: float
    s_x1: float
    v_x1: float


def binary_entropy(x: float) -> float:
    """Binary entropy in bits; h(0) = h(1) = 0."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"entropy argument must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def _tau_n(levels: DecoyLevels, n: int) -> float:
    """Probability that a transmitted pulse contains exactly n photons."""
    out = 0.0
    for k, p in ((levels.mu, levels.prob_mu), (levels.nu, levels.prob_nu)):
        out += p * math.exp(-k) * k**n / math.factorial(n)
    return out


def _hoeffding_delta(n: float, eps: float) -> float:
    return math.sqrt(max(n, 0.0) / 2.0 * math.log(1.0 / eps))


def _scaled(count: float, k: float, p_k: float, delta: float, sign: float) -> float:
    # Hoeffding-corrected scaled count; the raw count is floored at zero
    # because a negative event count carries no information.
    return math.exp(k) / p_k * max(count + sign * delta, 0.0)


def _gamma(a: float, b: float, c: float, d: float) -> float:
    """Random-sampling correction translating monitor-basis statistics to the key basis."""
    if b <= 0.0 or b >= 1.0 or c <= 0.0 or d <= 0.0:
        return 0.0
    front = (c + d) * (1.0 - b) * b / (c * d * math.log(2.0))
    inner = (c + d) / (c * d * (1.0 - b) * b) * (21.0 / a) ** 2
    return math.sqrt(front * math.log2(inner))


def _single_photon_lower(
    n_minus_nu: float,
    n_plus_mu: float,
    s0_upper: float,
    tau0: float,
    tau1: float,
    mu: float,
    nu: float,
) -> float:
    ratio2 = (nu / mu) ** 2
    bracket = n_minus_nu - ratio2 * n_plus_mu - (1.0 - ratio2) * s0_upper / tau0
    return tau1 * mu / (nu * (mu - nu)) * bracket


ZERO_KEY = DecoyBounds(s_z0=0.0, s_z1=0.0, phi_z=0.5, s_x1=0.0, v_x1=0.0)


def decoy_bounds(
    counts: BlockCounts, levels: DecoyLevels, sec: SecurityParams
) -> DecoyBounds:
    """One-decoy bounds on vacuum events, single-photon events and phase error.

    Returns :data:`ZERO_KEY` (rather than raising) when the statistics are
    too weak to certify any single-photon contribution.
    """
    if counts.n_z <= 0 or counts.n_x <= 0:
        return ZERO_KEY
    if levels.nu <= 0:
        raise ValueError("the one-decoy estimates require a non-vacuum decoy level")
    mu, nu = levels.mu, levels.nu
    p_mu, p_nu = levels.prob_mu, levels.prob_nu
    tau0, tau1 = _tau_n(levels, 0), _tau_n(levels, 1)
    eps = sec.eps_sec / 19.0

    dz = _hoeffding_delta(counts.n_z, eps)
    nz_nu_minus = _scaled(counts.n_z_nu, nu, p_nu, dz, -1.0)
    nz_mu_plus = _scaled(counts.n_z_mu, mu, p_mu, dz, +1.0)

    m_z = counts.qber_z * counts.n_z
    s_z0_upper = min(2.0 * (m_z + dz), counts.n_z)
    s_z0 = tau0 * (mu * nz_nu_minus - nu * nz_mu_plus) / (mu - nu)
    s_z0 = min(max(s_z0, 0.0), counts.n_z)

    s_z1 = _single_photon_lower(nz_nu_minus, nz_mu_plus, s_z0_upper, tau0, tau1, mu, nu)
    s_z1 = min(max(s_z1, 0.0), counts.n_z - s_z0)

    dx = _hoeffding_delta(counts.n_x, eps)
    nx_nu_minus = _scaled(counts.n_x_nu, nu, p_nu, dx, -1.0)
    nx_mu_plus = _scaled(counts.n_x_mu, mu, p_mu, dx, +1.0)
    s_x0_upper = min(2.0 * (counts.m_x + dx), counts.n_x)
    s_x1 = _single_photon_lower(nx_nu_minus, nx_mu_plus, s_x0_upper, tau0, tau1, mu, nu)
    s_x1 = min(max(s_x1, 0.0), counts.n_x)

    dm = _hoeffding_delta(counts.m_x, eps)
    mx_mu_plus = _scaled(counts.m_x_mu, mu, p_mu, dm, +1.0)
    mx_nu_minus = _scaled(counts.m_x_nu, nu, p_nu, dm, -1.0)
    v_x1 = max(tau1 * (mx_mu_plus - mx_nu_minus) / (mu - nu), 0.0)

    # a collapsed single-photon or monitor estimate leaves the phase error
    # unbounded: signal zero extractable key instead of raising
    if s_z1 <= 0.0 or s_x1 <= 0.0:
        return DecoyBounds(s_z0=s_z0, s_z1=0.0, phi_z=0.5, s_x1=s_x1, v_x1=v_x1)
    rate = v_x1 / s_x1
    if rate >= 0.5:
        phi_z = 0.5
    else:
        phi_z = min(rate + _gamma(sec.eps_sec, rate, s_z1, s_x1), 0.5)
    return DecoyBounds(s_z0=s_z0, s_z1=s_z1, phi_z=phi_z, s_x1=s_x1, v_x1=v_x1)


def security_penalty(sec: SecurityParams) -> float:
    """Additive bit cost of the secrecy and correctness parameters."""
    return 6.0 * math.log2(19.0 / sec.eps_sec) + math.log2(2.0 / sec.eps_corr)


def secret_key_length(
    counts: BlockCounts, levels: DecoyLevels, sec: SecurityParams
) -> float:
    """Extractable secret bits for one block, clamped at zero."""
    bounds = decoy_bounds(counts, levels, sec)
    lambda_ec = sec.f_ec * counts.n_z * binary_entropy(counts.qber_z)
    l = (
        bounds.s_z0
        + bounds.s_z1 * (1.0 - binary_entropy(bounds.phi_z))
        - lambda_ec
        - security_penalty(sec)
    )
    return max(l, 0.0)


# --- block-counts CSV interface -------------------------------------------

BLOCK_COUNTS_COLUMNS = (
    "t_s", "span_s", "n_z_mu", "n_z_nu", "n_x_mu", "n_x_nu",
    "m_x_mu", "m_x_nu", "qber_z",
)


def write_block_counts_csv(
    path: str | Path, rows: list[tuple[float, float, BlockCounts]]
) -> None:
    """Write per-block counts as (t_s, span_s, counts...) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(BLOCK_COUNTS_COLUMNS)
        for t_s, span_s, c in rows:
            writer.writerow(
                f"{v:.12g}"
                for v in (
                    t_s, span_s, c.n_z_mu, c.n_z_nu, c.n_x_mu, c.n_x_nu,
                    c.m_x_mu, c.m_x_nu, c.qber_z,
                )
            )


def read_block_counts_csv(path: str | Path) -> list[tuple[float, float, BlockCounts]]:
    """Read rows written by :func:`write_block_counts_csv`."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(BLOCK_COUNTS_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"block-counts file lacks columns: {sorted(missing)}")
        for row in reader:
            counts = BlockCounts(
                n_z_mu=float(row["n_z_mu"]),
                n_z_nu=float(row["n_z_nu"]),
                n_x_mu=float(row["n_x_mu"]),
                n_x_nu=float(row["n_x_nu"]),
                m_x_mu=float(row["m_x_mu"]),
                m_x_nu=float(row["m_x_nu"]),
                qber_z=float(row["qber_z"]),
                block_size=float(row["n_z_mu"]) + float(row["n_z_nu"]),
            )
            out.append((float(row["t_s"]), float(row["span_s"]), counts))
    return out


def write_key_lengths_csv(
    path: str | Path, rows: list[tuple[float, float, float]]
) -> None:
    """Write per-block key output as (t_s, key_bits, skr_bps) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("t_s", "key_bits", "skr_bps"))
        for row in rows:
            writer.writerow(f"{v:.12g}" for v in row)


def key_lengths_from_csv(
    src: str | Path,
    dst: str | Path,
    levels: DecoyLevels,
    sec: SecurityParams,
) -> list[tuple[float, float, float]]:
    """Compute per-block key lengths from a block-counts file.

    Reads :func:`write_block_counts_csv` rows from ``src``, writes
    (t_s, key_bits, skr_bps) to ``dst`` and returns the rows.
    """
    out = []
    for t_s, span_s, counts in read_block_counts_csv(src):
        l = secret_key_length(counts, levels, sec)
        out.append((t_s, l, l / span_s if span_s > 0 else 0.0))
    write_key_lengths_csv(dst, out)
    return out
