"""Gravitational N-body stepping on the iterative engine.

Velocity-Verlet integration, staggered so each phase needs a single pass:
a node computes the acceleration of its bodies from the previous positions,
folds in the velocity half-steps, and writes the next positions; the root
transfers new state to old between phases.  Per-body force sums run over
the full body array in a fixed order, so results are bit-identical for any
node count.

Body files are plain text, one body per line: ``mass x y vx vy``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..engines import EngineConfig, SharedGrid, multicore_engine_run
from ..functionals import RunnableNetwork
from ..protocol import COMPLETED_OK, NORMAL_CONTINUATION, NORMAL_TERMINATION
from ..terminals import EmitDetails, ResultDetails, collect_run, emit_run

G = 6.674e-11
SOFTENING2 = 1e-6  # squared softening length, keeps coincident bodies finite


@dataclass
class NBodyConfig:
    file: str | None = None
    n: int = 64
    iterations: int = 100
    dt: float = 0.001
    nodes: int = 2
    out: str | None = None
    seed: int = 5


class BodySystem:
    def __init__(self):
        self.mass = None
        self.pos = None
        self.vel = None
        self.pos_new = None
        self.acc_prev = None
        self.acc_new = None
        self.dt = 0.0
        self.grid = None

    def load(self, mass, pos, vel, dt):
        self.mass = np.asarray(mass, dtype=np.float64)
        self.pos = np.asarray(pos, dtype=np.float64).copy()
        self.vel = np.asarray(vel, dtype=np.float64).copy()
        self.pos_new = self.pos.copy()
        self.acc_prev = np.zeros_like(self.pos)
        self.acc_new = np.zeros_like(self.pos)
        self.dt = dt
        self.grid = SharedGrid(self.pos_new)


def make_bodies(n: int, seed: int):
    rng = np.random.Generator(np.random.PCG64(seed))
    mass = rng.uniform(1e8, 1e10, n)
    pos = rng.uniform(-1.0, 1.0, (n, 2))
    vel = rng.uniform(-0.1, 0.1, (n, 2))
    return mass, pos, vel


def write_bodies(path: str | Path, mass, pos, vel) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for m, p, v in zip(mass, pos, vel):
            f.write(f"{m:.17g} {p[0]:.17g} {p[1]:.17g} {v[0]:.17g} {v[1]:.17g}\n")


def read_bodies(path: str | Path, n: int):
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            rows.append([float(t) for t in line.split()])
    if len(rows) < n:
        raise ValueError(f"body file has {len(rows)} bodies, {n} requested")
    rows = np.array(rows[:n])
    return rows[:, 0], rows[:, 1:3], rows[:, 3:5]


def body_acceleration(mass, pos, k):
    d = pos - pos[k]
    r2 = d[:, 0] ** 2 + d[:, 1] ** 2 + SOFTENING2
    r2[k] = 1.0  # self-term contributes zero through d[k] == 0
    inv = G * mass / (r2 * np.sqrt(r2))
    return (d * inv[:, None]).sum(axis=0)


def init_bodies(ctx, params):
    source, n, dt = params
    if isinstance(source, (str, Path)):
        ctx.bodies = read_bodies(source, n)
    else:
        mass, pos, vel = source
        ctx.bodies = (mass[:n], pos[:n], vel[:n])
    ctx.dt = dt
    ctx.emitted = False
    return COMPLETED_OK


def create_bodies(payload, ctx, params):
    if ctx.emitted:
        return NORMAL_TERMINATION
    payload.load(*ctx.bodies, ctx.dt)
    ctx.emitted = True
    return NORMAL_CONTINUATION


def partition_bodies(payload, nodes):
    n = len(payload.mass)
    payload.grid.partitions = SharedGrid.default_partitions(n, nodes)
    for k in range(n):  # root seeds the first half-step accelerations
        payload.acc_prev[k] = body_acceleration(payload.mass, payload.pos, k)
    return COMPLETED_OK


def step_partition(payload, index):
    sl = payload.grid.partitions[index]
    mass, pos, vel, dt = payload.mass, payload.pos, payload.vel, payload.dt
    for k in range(sl.start, sl.stop):
        acc = body_acceleration(mass, pos, k)
        vel[k] = vel[k] + 0.5 * (payload.acc_prev[k] + acc) * dt
        payload.pos_new[k] = pos[k] + vel[k] * dt + 0.5 * acc * dt * dt
        payload.acc_new[k] = acc
    return COMPLETED_OK


def advance_state(payload):
    payload.pos[:] = payload.pos_new
    payload.acc_prev[:] = payload.acc_new
    return COMPLETED_OK


class NBodyResults:
    def __init__(self):
        self.systems = []

    def state_text(self) -> str:
        lines = []
        for payload in self.systems:
            for m, p, v in zip(payload.mass, payload.pos, payload.vel):
                lines.append(
                    f"{m:.17g} {p[0]:.17g} {p[1]:.17g} {v[0]:.17g} {v[1]:.17g}")
        return "\n".join(lines) + "\n"


def collect_state(acc, payload):
    acc.systems.append(payload)
    return COMPLETED_OK


def emit_details(cfg: NBodyConfig) -> EmitDetails:
    source = cfg.file if cfg.file else make_bodies(cfg.n, cfg.seed)
    return EmitDetails(
        factory=BodySystem,
        init=init_bodies,
        init_data=[source, cfg.n, cfg.dt],
        create=create_bodies,
    )


def engine_config(cfg: NBodyConfig) -> EngineConfig:
    return EngineConfig(
        nodes=cfg.nodes,
        partition=partition_bodies,
        calculation=step_partition,
        update=advance_state,
        iterations=cfg.iterations,
    )


def result_details() -> ResultDetails:
    return ResultDetails(factory=NBodyResults, collect=collect_state)


def network(cfg: NBodyConfig) -> RunnableNetwork:
    net = RunnableNetwork()
    a = net.new_channel()
    b = net.new_channel()
    e, ecfg, r = emit_details(cfg), engine_config(cfg), result_details()
    net.add_process(lambda: emit_run(e, a), "emit")
    net.add_process(lambda: multicore_engine_run(ecfg, a, b), "engine")
    net.add_process(lambda: collect_run(r, b), "collect", collects=True)
    return net


def run(cfg: NBodyConfig) -> NBodyResults:
    report = network(cfg).run()
    if not report.ok:
        raise RuntimeError(f"n-body network failed with code {report.code}")
    results = report.results[0].result
    if cfg.out:
        Path(cfg.out).write_text(results.state_text(), encoding="utf-8")
    return results


def run_sequential(cfg: NBodyConfig) -> NBodyResults:
    from types import SimpleNamespace

    ctx = SimpleNamespace()
    e = emit_details(cfg)
    init_bodies(ctx, e.init_data)
    acc = NBodyResults()
    while True:
        payload = BodySystem()
        if create_bodies(payload, ctx, []) == NORMAL_TERMINATION:
            break
        partition_bodies(payload, 1)
        for _ in range(cfg.iterations):
            step_partition(payload, 0)
            advance_state(payload)
        collect_state(acc, payload)
    return acc


def registry():
    from ..builder import FunctionRegistry

    reg = FunctionRegistry()
    reg.register("nbody.system", BodySystem)
    reg.register("nbody.init", init_bodies)
    reg.register("nbody.create", create_bodies)
    reg.register("nbody.partition", partition_bodies)
    reg.register("nbody.calculation", step_partition)
    reg.register("nbody.update", advance_state)
    reg.register("nbody.acc", NBodyResults)
    reg.register("nbody.collect", collect_state)
    return reg


def spec(cfg: NBodyConfig) -> dict:
    source = cfg.file if cfg.file else make_bodies(cfg.n, cfg.seed)
    return {
        "nodes": [
            {"kind": "emit", "config": {
                "factory": "nbody.system", "init": "nbody.init",
                "init_data": [source, cfg.n, cfg.dt],
                "create": "nbody.create"}},
            {"kind": "multicoreEngine", "config": {
                "nodes": cfg.nodes, "iterations": cfg.iterations,
                "partition": "nbody.partition",
                "calculation": "nbody.calculation",
                "update": "nbody.update"}},
            {"kind": "collect", "config": {
                "factory": "nbody.acc", "collect": "nbody.collect"}},
        ]
    }
