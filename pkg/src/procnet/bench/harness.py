"""Timing harness: median runtimes, speedup and efficiency vs sequential.

Every configuration is timed ``repeats`` times and the median kept; the
sequential baseline invokes the identical callbacks in a plain loop.
Speedup is sequential median over parallel median, efficiency is speedup
over worker count as a percentage.  Configurations run strictly one after
another so timings never contaminate each other.
"""

from __future__ import annotations

import csv
import statistics
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

CSV_HEADER = ["demo", "config", "workers", "runs", "median_ms", "speedup",
              "efficiency"]


@dataclass
class BenchRow:
    demo: str
    config: str
    workers: int
    runs: int
    median_ms: float
    speedup: float
    efficiency: float

    def as_list(self):
        return [self.demo, self.config, self.workers, self.runs,
                f"{self.median_ms:.3f}", f"{self.speedup:.3f}",
                f"{self.efficiency:.2f}"]


def time_call(fn: Callable[[], object], repeats: int) -> float:
    """Median wall time in milliseconds."""
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append((time.perf_counter() - t0) * 1e3)
    return statistics.median(times)


def bench_run(demo: str, variants, repeats: int = 3,
              csv_path: str | Path | None = None,
              quiet: bool = False) -> list[BenchRow]:
    """Time a list of (config-label, workers, parallel-fn, sequential-fn).

    The sequential callable of each variant provides its baseline; a
    variant may share a baseline by passing the same callable.
    """
    if repeats < 3:
        raise ValueError("need at least 3 repeats for a stable median")
    rows = []
    baselines: dict[int, float] = {}
    for label, workers, parallel_fn, sequential_fn in variants:
        key = id(sequential_fn)
        if key not in baselines:
            baselines[key] = time_call(sequential_fn, repeats)
        seq_ms = baselines[key]
        par_ms = time_call(parallel_fn, repeats)
        speedup = seq_ms / par_ms if par_ms > 0 else 0.0
        rows.append(BenchRow(
            demo=demo, config=label, workers=workers, runs=repeats,
            median_ms=par_ms, speedup=speedup,
            efficiency=100.0 * speedup / workers if workers else 0.0,
        ))
    if not quiet:
        print_table(rows, seq_ms_by_config={
            r.config: baselines[id(v[3])] for r, v in zip(rows, variants)})
    if csv_path is not None:
        write_csv(csv_path, rows)
    return rows


def print_table(rows: list[BenchRow], seq_ms_by_config=None) -> None:
    print(" | ".join(h.rjust(10) for h in CSV_HEADER))
    for row in rows:
        print(" | ".join(str(v).rjust(10) for v in row.as_list()))
    if seq_ms_by_config:
        for config, ms in sorted(set(seq_ms_by_config.items())):
            print(f"sequential baseline [{config}]: {ms:.3f} ms")


def write_csv(path: str | Path, rows: list[BenchRow]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.as_list())
