#!/usr/bin/env python3
"""Sweep every demo over a worker-count ladder and collect CSV reports.

Writes one CSV per demo into ./bench_results/ and prints the tables.
Sizes default to something a laptop finishes in a few minutes; pass
--quick for a smoke-sized sweep.
"""

import argparse
import subprocess
import sys
from pathlib import Path


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true")
    parser.add_argument("--workers", default="1,2,4")
    parser.add_argument("--dest", default="bench_results")
    args = parser.parse_args()

    dest = Path(args.dest)
    dest.mkdir(parents=True, exist_ok=True)
    fixtures = Path("fixtures")
    if not (fixtures / "test_256.ppm").exists():
        subprocess.run([sys.executable, "scripts/make_fixtures.py"], check=True)

    q = args.quick
    w = args.workers
    runs = [
        ["bench", "montecarlo", "--instances", "64" if q else "1024",
         "--iterations", "10000" if q else "100000", "--workers", w],
        ["bench", "concordance", "--n", "2" if q else "4", "--width", w],
        ["bench", "jacobi", "--generate", "128" if q else "1024",
         "--nodes", w],
        ["bench", "nbody", "--n", "32" if q else "256",
         "--iterations", "20" if q else "100", "--nodes", w],
        ["bench", "stencil", "--in", str(fixtures / "test_256.ppm"),
         "--kernel", "grey,edge5", "--nodes", w],
        ["bench", "goldbach", "--max-prime", "500" if q else "5000",
         "--g-workers", w],
        ["bench", "mandelbrot", "--width", "100" if q else "700",
         "--height", "60" if q else "400", "--workers", w],
    ]
    for cmd in runs:
        demo = cmd[1]
        full = [sys.executable, "-m", "procnet", *cmd,
                "--csv", str(dest / f"{demo}.csv")]
        print("$", " ".join(full[2:]))
        subprocess.run(full, check=True)
    print(f"\nreports in {dest}/")


if __name__ == "__main__":
    main()
