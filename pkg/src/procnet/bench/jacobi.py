"""Iterative solver for diagonally dominant linear systems.

Each engine node updates its row partition from the previous full guess;
the root compares successive guesses against the error margin and transfers
new to old between phases.  Row updates use one fixed-length dot product per
row, so the solution bytes are identical for any node count.

System files are whitespace-separated decimal text: n, the n x (n+1)
augmented matrix rows, then the n known solution values used for checking.
Several systems may be concatenated in one file.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..engines import EngineConfig, SharedGrid, multicore_engine_run
from ..functionals import RunnableNetwork
from ..protocol import COMPLETED_OK, NORMAL_CONTINUATION, NORMAL_TERMINATION
from ..terminals import EmitDetails, ResultDetails, collect_run, emit_run


@dataclass
class JacobiConfig:
    nodes: int = 2
    margin: float = 1e-12
    file: str | None = None
    generate_n: int | None = 64
    seed: int = 11
    check_writes: bool = False


class LinearSystem:
    def __init__(self):
        self.a = None
        self.b = None
        self.known = None
        self.x_old = None
        self.x_new = None
        self.grid = None
        self.sweeps = 0

    def load(self, a, b, known):
        n = len(b)
        self.a = np.asarray(a, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64)
        self.known = np.asarray(known, dtype=np.float64)
        self.x_old = np.zeros(n)
        self.x_new = np.zeros(n)
        self.grid = SharedGrid(self.x_new)


def generate_system(n: int, seed: int):
    """Random system with a known solution, guaranteed diagonally dominant."""
    rng = np.random.Generator(np.random.PCG64(seed))
    a = rng.uniform(-1.0, 1.0, (n, n))
    off = np.sum(np.abs(a), axis=1) - np.abs(np.diag(a))
    np.fill_diagonal(a, 2.0 * off + 1.0)
    x = rng.uniform(-1.0, 1.0, n)
    b = a @ x
    return a, b, x


def write_systems(path: str | Path, systems) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for a, b, x in systems:
            n = len(b)
            f.write(f"{n}\n")
            for i in range(n):
                row = list(a[i]) + [b[i]]
                f.write(" ".join(f"{v:.17g}" for v in row) + "\n")
            f.write(" ".join(f"{v:.17g}" for v in x) + "\n")


def read_systems(path: str | Path):
    tokens = Path(path).read_text(encoding="utf-8").split()
    pos = 0
    systems = []
    while pos < len(tokens):
        n = int(tokens[pos])
        pos += 1
        rows = np.array(tokens[pos:pos + n * (n + 1)], dtype=np.float64)
        pos += n * (n + 1)
        aug = rows.reshape(n, n + 1)
        x = np.array(tokens[pos:pos + n], dtype=np.float64)
        pos += n
        systems.append((aug[:, :n], aug[:, n], x))
    return systems


def init_source(ctx, params):
    source = params[0]
    if isinstance(source, (str, Path)):
        ctx.systems = read_systems(source)
    else:
        ctx.systems = list(source)
    ctx.index = 0
    return COMPLETED_OK


def create_system(payload, ctx, params):
    if ctx.index >= len(ctx.systems):
        return NORMAL_TERMINATION
    payload.load(*ctx.systems[ctx.index])
    ctx.index += 1
    return NORMAL_CONTINUATION


def partition_rows(payload, nodes):
    payload.grid.partitions = SharedGrid.default_partitions(len(payload.b), nodes)
    return COMPLETED_OK


def sweep_partition(payload, index):
    a, b, x_old, x_new = payload.a, payload.b, payload.x_old, payload.x_new
    sl = payload.grid.partitions[index]
    for r in range(sl.start, sl.stop):
        # one fixed-length dot per row keeps results partition-independent
        s = np.dot(a[r], x_old)
        x_new[r] = (b[r] - s + a[r, r] * x_old[r]) / a[r, r]
    return COMPLETED_OK


def margin_not_met(payload, margin):
    return bool(np.max(np.abs(payload.x_new - payload.x_old)) > margin)


def transfer_guess(payload):
    payload.x_old[:] = payload.x_new
    payload.sweeps += 1
    return COMPLETED_OK


class JacobiResults:
    def __init__(self):
        self.solutions = []
        self.verified = True
        self.max_residual = 0.0


def collect_solution(acc, payload):
    acc.solutions.append(payload.x_new.copy())
    residual = float(np.max(np.abs(payload.x_new - payload.known)))
    acc.max_residual = max(acc.max_residual, residual)
    if residual > 1e-6:
        acc.verified = False
    return COMPLETED_OK


def emit_details(cfg: JacobiConfig) -> EmitDetails:
    if cfg.file is not None:
        source = cfg.file
    else:
        source = [generate_system(cfg.generate_n, cfg.seed)]
    return EmitDetails(
        factory=LinearSystem,
        init=init_source,
        init_data=[source],
        create=create_system,
    )


def engine_config(cfg: JacobiConfig) -> EngineConfig:
    return EngineConfig(
        nodes=cfg.nodes,
        partition=partition_rows,
        calculation=sweep_partition,
        update=transfer_guess,
        error=margin_not_met,
        error_margin=cfg.margin,
        check_writes=cfg.check_writes,
    )


def result_details() -> ResultDetails:
    return ResultDetails(factory=JacobiResults, collect=collect_solution)


def network(cfg: JacobiConfig) -> RunnableNetwork:
    net = RunnableNetwork()
    a = net.new_channel()
    b = net.new_channel()
    e, ecfg, r = emit_details(cfg), engine_config(cfg), result_details()
    net.add_process(lambda: emit_run(e, a), "emit")
    net.add_process(lambda: multicore_engine_run(ecfg, a, b), "engine")
    net.add_process(lambda: collect_run(r, b), "collect", collects=True)
    return net


def run(cfg: JacobiConfig) -> JacobiResults:
    report = network(cfg).run()
    if not report.ok:
        raise RuntimeError(f"jacobi network failed with code {report.code}")
    return report.results[0].result


def run_sequential(cfg: JacobiConfig) -> JacobiResults:
    """Same callbacks in a plain loop: one node, no processes."""
    from types import SimpleNamespace

    ctx = SimpleNamespace()
    init_source(ctx, emit_details(cfg).init_data)
    acc = JacobiResults()
    while True:
        payload = LinearSystem()
        if create_system(payload, ctx, []) == NORMAL_TERMINATION:
            break
        partition_rows(payload, 1)
        while True:
            sweep_partition(payload, 0)
            again = margin_not_met(payload, cfg.margin)
            transfer_guess(payload)
            if not again:
                break
        collect_solution(acc, payload)
    return acc


def registry():
    from ..builder import FunctionRegistry

    reg = FunctionRegistry()
    reg.register("jacobi.system", LinearSystem)
    reg.register("jacobi.init", init_source)
    reg.register("jacobi.create", create_system)
    reg.register("jacobi.partition", partition_rows)
    reg.register("jacobi.calculation", sweep_partition)
    reg.register("jacobi.error", margin_not_met)
    reg.register("jacobi.update", transfer_guess)
    reg.register("jacobi.acc", JacobiResults)
    reg.register("jacobi.collect", collect_solution)
    return reg


def spec(cfg: JacobiConfig) -> dict:
    source = cfg.file if cfg.file else "generate"
    init_data = [source] if cfg.file else [
        [generate_system(cfg.generate_n, cfg.seed)]]
    return {
        "nodes": [
            {"kind": "emit", "config": {
                "factory": "jacobi.system", "init": "jacobi.init",
                "init_data": init_data, "create": "jacobi.create"}},
            {"kind": "multicoreEngine", "config": {
                "nodes": cfg.nodes, "error_margin": cfg.margin,
                "partition": "jacobi.partition",
                "calculation": "jacobi.calculation",
                "error": "jacobi.error", "update": "jacobi.update"}},
            {"kind": "collect", "config": {
                "factory": "jacobi.acc", "collect": "jacobi.collect"}},
        ]
    }
