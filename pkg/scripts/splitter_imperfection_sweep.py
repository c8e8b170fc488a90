#!/usr/bin/env python3
"""Input-splitter imperfection study.

Sweeps the input beamsplitter transmittance over [0, 1] and writes the
closed-form and numerically minimized transmittance/error floors.

Usage: python scripts/splitter_imperfection_sweep.py [out_dir]
"""

import sys
from pathlib import Path

from timebin_qkd.cli import main as cli_main

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "out" / "imperfection"
    return cli_main([
        "sweep",
        "--t1-min", "0.0",
        "--t1-max", "1.0",
        "--points", "101",
        "--out", str(out),
        "--svg",
    ])


if __name__ == "__main__":
    sys.exit(main())
