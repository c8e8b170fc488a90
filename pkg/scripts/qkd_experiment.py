#!/usr/bin/env python3
"""One-hour QKD session over the 50 km reference link.

Runs the full stochastic link simulation with Peltier feedback enabled,
computes the finite-key secret rate per 60 s block and prints the
summary table (mean and standard deviation of QBERs and rates).

Usage: python scripts/qkd_experiment.py [out_dir] [--no-feedback]
"""

import sys
from pathlib import Path

from timebin_qkd.cli import main as cli_main

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    argv = [a for a in sys.argv[1:] if a != "--no-feedback"]
    out = Path(argv[0]) if argv else ROOT / "out" / "qkd_experiment"
    args = [
        "qkd-run",
        "--config", str(ROOT / "configs" / "qkd_link.yaml"),
        "--out", str(out),
        "--svg",
    ]
    if "--no-feedback" in sys.argv[1:]:
        # rerun the same link with the stabilization loop disabled to see
        # the monitor basis drift away
        import tempfile

        import yaml

        cfg = yaml.safe_load((ROOT / "configs" / "qkd_link.yaml").read_text())
        cfg["feedback"] = False
        tmp = Path(tempfile.mkstemp(suffix=".yaml")[1])
        tmp.write_text(yaml.safe_dump(cfg))
        args[2] = str(tmp)
    return cli_main(args)


if __name__ == "__main__":
    sys.exit(main())
