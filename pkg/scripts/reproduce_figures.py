"""Run every preset through the CLI and write one CSV per preset.

    python scripts/reproduce_figures.py --out results --workers 4
    python scripts/reproduce_figures.py figure3 figure4

Lindblad presets (figure8-10, table1_*) take minutes per point; use
``--workers`` to spread sweep points over processes.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from entangler.cli import run

ROOT = Path(__file__).resolve().parents[1]
PRESETS = ROOT / "presets"

# presets driven by the collision planner rather than the protocol sweep
PLANNER = {"figure4": "collisions", "shifts": "shifts"}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("names", nargs="*", help="preset names without .cfg (default: all)")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--workers", type=int, default=1)
    args = parser.parse_args(argv)

    names = args.names or sorted(p.stem for p in PRESETS.glob("*.cfg"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    status = 0
    for name in names:
        cfg = PRESETS / f"{name}.cfg"
        if not cfg.exists():
            print(f"{name}: no such preset", file=sys.stderr)
            status = 2
            continue
        command = PLANNER.get(name, "sweep")
        # the ratio sweep has no N axis, so run it once per N
        variants = [(f"{name}_N{N}", ["--set", f"target.N={N}"]) for N in (1, 2, 3)] if name == "figure4" else [(name, [])]
        for label, extra in variants:
            cli_args = [command, "--config", str(cfg), "--out", str(out_dir / f"{label}.csv"), *extra]
            if command == "sweep":
                cli_args += ["--workers", str(args.workers)]
            start = time.perf_counter()
            code = run(cli_args)
            print(f"{label}: exit {code} in {time.perf_counter() - start:.1f} s", file=sys.stderr)
            status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())
