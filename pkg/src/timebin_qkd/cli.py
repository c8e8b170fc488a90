"""Command-line harness: device characterization, imperfection sweeps,
full QKD sessions and d-bin transmittance tables.

Every subcommand writes CSV files (the contract; headers name the units)
into ``--out`` and prints a short report.  ``--svg`` additionally renders
simple plots from the same data.  Identical configuration and seed give
bit-identical CSV output.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import keyrate, link, optics
from .config import ConfigError, RunConfig, load_config
from .protocol import Intensity, Symbol, SymbolPlan

__all__ = ["main"]

_STATES = {"E": Symbol.EARLY, "L": Symbol.LATE, "minus": Symbol.MINUS}


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def _svg_line_plot(path: Path, x, series: dict[str, np.ndarray], xlabel: str, ylabel: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4))
    for label, y in series.items():
        ax.plot(x, y, label=label, linewidth=1.0)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if len(series) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _load(args: argparse.Namespace) -> RunConfig:
    overrides = {"seed": args.seed, "duration_s": args.duration}
    return load_config(args.config, overrides)


def cmd_characterize(args: argparse.Namespace) -> int:
    cfg = _load(args)
    plan = SymbolPlan(_STATES[args.state], Intensity(args.decoy))
    rng = np.random.default_rng(cfg.seed)
    rate = args.rate if args.rate is not None else cfg.target_rate_hz
    edges, hist, report = link.simulate_characterization(
        plan, cfg.levels, cfg.encoder, cfg.detector,
        cfg.duration_s, rate, rng, cfg.timing,
    )
    out = Path(args.out)
    _write_csv(
        out / "histogram.csv",
        ["bin_time_s", "counts"],
        zip(edges[:-1], hist.tolist()),
    )
    _write_csv(
        out / "characterization.csv",
        ["state", "decoy", "p_err", "p_err_sigma", "er_db", "er_db_sigma",
         "n_correct", "n_wrong", "detection_rate_hz"],
        [(args.state, args.decoy, report.p_err, report.p_err_sigma,
          report.er_db, report.er_db_sigma, report.n_correct,
          report.n_wrong, report.detection_rate_hz)],
    )
    if args.svg:
        _svg_line_plot(out / "histogram.svg", edges[:-1] * 1e9,
                       {"counts": hist}, "arrival time [ns]", "counts")
    print(f"state {args.state} ({args.decoy}):")
    print(f"  P_err = {report.p_err:.3e} +- {report.p_err_sigma:.1e}")
    print(f"  ER    = {report.er_db:.2f} +- {report.er_db_sigma:.2f} dB")
    print(f"  rate  = {report.detection_rate_hz / 1e3:.1f} kHz "
          f"({report.n_correct + report.n_wrong} windowed clicks)")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    _load(args)  # validates the config even though the sweep only needs t1
    t1s = np.linspace(args.t1_min, args.t1_max, args.points)
    if np.any(t1s < 0) or np.any(t1s > 1):
        raise ConfigError("the t1 range must stay within [0, 1]")
    rows = []
    worst = 0.0
    for t1 in t1s:
        closed_t = optics.min_transmittance(float(t1))
        closed_q = optics.min_qber(float(t1))
        num_t = optics.numeric_min_transmittance(float(t1))
        num_max = optics.numeric_max_transmittance(float(t1))
        num_q = num_t / (num_t + num_max)
        worst = max(worst, abs(num_t - closed_t), abs(num_q - closed_q))
        rows.append((float(t1), closed_t, closed_q, num_t, num_q))
    out = Path(args.out)
    _write_csv(
        out / "imperfection_sweep.csv",
        ["t1", "t_min_closed", "qber_min_closed", "t_min_numeric", "qber_min_numeric"],
        rows,
    )
    if args.svg:
        arr = np.array(rows)
        _svg_line_plot(out / "imperfection_sweep.svg", arr[:, 0],
                       {"T_min": arr[:, 1], "QBER_min": arr[:, 2]},
                       "input splitter transmittance", "value")
    print(f"{len(rows)} rows, closed-form vs numeric worst deviation {worst:.2e}")
    if worst > 1e-9:
        print("error: numeric minimization disagrees with the closed form",
              file=sys.stderr)
        return 1
    return 0


def _plan_distribution(cfg: RunConfig) -> tuple[list[SymbolPlan], np.ndarray]:
    paz = cfg.session.prob_alice_z
    weights = {
        Symbol.EARLY: paz / 2,
        Symbol.LATE: paz / 2,
        Symbol.MINUS: 1 - paz,
    }
    plans = []
    probs = []
    for sym, w in weights.items():
        for dec, p_dec in ((Intensity.MU, cfg.levels.prob_mu),
                           (Intensity.NU, cfg.levels.prob_nu)):
            plans.append(SymbolPlan(sym, dec))
            probs.append(w * p_dec)
    return plans, np.array(probs)


def _export_click_sample(cfg: RunConfig, out: Path, n_pulses: int) -> None:
    # per-pulse Monte-Carlo sample of raw detection records alongside the
    # aggregated session, drawn at the configured initial drift
    rng = np.random.default_rng([cfg.seed, 99])
    plans, probs = _plan_distribution(cfg)
    fields = {plan: link.emit_pulse(plan, cfg.levels, cfg.encoder)[0] for plan in plans}
    records = []
    for i, idx in enumerate(rng.choice(len(plans), size=n_pulses, p=probs)):
        plan = plans[idx]
        records += link.detect(
            fields[plan], cfg.channel, cfg.detector, cfg.receiver, cfg.drift,
            rng, timing=cfg.timing, true_symbol=plan, pulse_index=i,
        )
    _write_csv(
        out / "clicks.csv",
        ["timestamp_s", "detector_id", "window", "true_symbol"],
        [
            (r.timestamp_s, r.detector_id, r.window.value,
             f"{r.true_symbol.symbol.value}/{r.true_symbol.decoy.value}")
            for r in records
        ],
    )


def cmd_qkd_run(args: argparse.Namespace) -> int:
    cfg = _load(args)
    blocks = link.run_session(
        cfg.duration_s, cfg.levels, cfg.encoder, cfg.channel, cfg.detector,
        cfg.receiver, cfg.drift, cfg.session, cfg.seed,
    )
    if not blocks:
        raise ConfigError("duration too short: no analysis block completed")
    rows = []
    for b in blocks:
        l_bits = keyrate.secret_key_length(b.counts, cfg.levels, cfg.security)
        skr = l_bits / b.span_s
        rows.append((b.t_s, b.qber_z, b.qber_x, b.det_rate_hz, b.sifted_bps, skr))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(
        out / "qkd_timeseries.csv",
        ["t_s", "qber_z", "qber_x", "det_rate_hz", "sifted_bps", "skr_bps"],
        rows,
    )
    keyrate.write_block_counts_csv(
        out / "block_counts.csv", [(b.t_s, b.span_s, b.counts) for b in blocks]
    )
    keyrate.key_lengths_from_csv(
        out / "block_counts.csv", out / "key_lengths.csv", cfg.levels, cfg.security
    )
    if args.export_clicks:
        _export_click_sample(cfg, out, args.export_clicks)
    arr = np.array(rows)
    if args.svg:
        _svg_line_plot(out / "qkd_qber.svg", arr[:, 0],
                       {"QBER Z": arr[:, 1], "QBER X": arr[:, 2]},
                       "time [s]", "QBER")
        _svg_line_plot(out / "qkd_rates.svg", arr[:, 0],
                       {"sifted [bps]": arr[:, 4], "secret [bps]": arr[:, 5]},
                       "time [s]", "rate [bps]")
    summary = [
        ("QBER Z [%]", 100 * arr[:, 1]),
        ("QBER X [%]", 100 * arr[:, 2]),
        ("SKR [kbps]", arr[:, 5] / 1e3),
        ("Sifted [kbps]", arr[:, 4] / 1e3),
        ("Detection rate [kHz]", arr[:, 3] / 1e3),
    ]
    print(f"{len(blocks)} blocks of {blocks[0].span_s:.0f} s")
    print(f"{'':24s}{'mean':>10s}{'std':>10s}")
    for label, values in summary:
        print(f"{label:24s}{values.mean():>10.3g}{values.std():>10.2g}")
    return 0


def cmd_qudit(args: argparse.Namespace) -> int:
    _load(args)  # validate shared flags/config even though only d and phases are used
    if args.d not in (2, 4, 8):
        raise ConfigError("supported dimensions: 2, 4, 8")
    enc = optics.EncoderConfig.ideal(d=args.d)
    phi_arm = tuple(args.phi_k) if args.phi_k else (0.0,) * args.d
    if len(phi_arm) != args.d:
        raise ConfigError(f"--phi-k needs exactly {args.d} values")
    sched = optics.PhaseSchedule(phi_c=args.phi_c, phi_arm=phi_arm)
    ts = optics.transmittances(enc, sched)
    field = optics.qudit_output(1.0, enc, sched)
    total = sum(ts)
    rows = [(k, t, abs(a)) for k, (t, a) in enumerate(zip(ts, field.amps))]
    out = Path(args.out)
    _write_csv(
        out / "qudit_transmittances.csv",
        ["bin_index", "transmittance", "amplitude_magnitude"],
        rows,
    )
    if args.svg:
        arr = np.array([(r[0], r[1]) for r in rows])
        _svg_line_plot(out / "qudit_transmittances.svg", arr[:, 0],
                       {"T(k)": arr[:, 1]}, "bin index", "transmittance")
    print(f"d={args.d}: per-bin transmittances {[f'{t:.4g}' for t in ts]}")
    print(f"  sum = {total:.6g} (max reachable 1/d = {1 / args.d:.6g})")
    if total > 1.0 + 1e-12:
        print("error: transmittances exceed unity", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="timebin-qkd",
        description="Time-bin/decoy-state encoder and QKD link simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", type=Path, default=None, help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None, help="random seed")
        p.add_argument("--duration", type=float, default=None, help="simulated seconds")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--svg", action="store_true", help="also render SVG plots")

    p = sub.add_parser("characterize", help="time-of-arrival histogram and intrinsic error")
    common(p)
    p.add_argument("--state", choices=sorted(_STATES), default="E")
    p.add_argument("--decoy", choices=["mu", "nu"], default="mu")
    p.add_argument("--rate", type=float, default=None, help="target detection rate [Hz]")
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("sweep", help="input-splitter imperfection curves")
    common(p)
    p.add_argument("--t1-min", type=float, default=0.3)
    p.add_argument("--t1-max", type=float, default=0.7)
    p.add_argument("--points", type=int, default=81)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("qkd-run", help="full QKD session with per-block key rates")
    common(p)
    p.add_argument("--export-clicks", type=int, default=0, metavar="N",
                   help="also export raw click records for N per-pulse periods")
    p.set_defaults(func=cmd_qkd_run)

    p = sub.add_parser("qudit", help="per-bin transmittances of the d-bin device")
    common(p)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--phi-c", type=float, default=math.pi, help="control phase [rad]")
    p.add_argument("--phi-k", type=float, nargs="*", default=None, help="arm phases [rad]")
    p.set_defaults(func=cmd_qudit)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
