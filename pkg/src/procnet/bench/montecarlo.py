"""Monte Carlo estimation of pi over a worker farm.

Each emitted task evaluates ``iterations`` uniform points in the unit
square and counts how many fall inside the quarter circle; the collector
forms ``4 * within / total``.  Tasks are seeded individually - the task
seed is ``splitmix64(base_seed XOR index)`` - so the estimate is identical
for any worker count and any schedule, and the sequential loop over the
same callbacks reproduces it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..functionals import RunnableNetwork, data_parallel_collect
from ..protocol import COMPLETED_OK, NORMAL_CONTINUATION, NORMAL_TERMINATION
from ..terminals import EmitDetails, ResultDetails, sequential_loop

_MASK = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the splitmix64 mixing function (public domain algorithm)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


@dataclass
class MonteCarloConfig:
    instances: int = 1024
    iterations: int = 100_000
    workers: int = 4
    seed: int = 0x5EED


class PointsTask:
    __slots__ = ("iterations", "within", "seed", "index")

    def __init__(self):
        self.iterations = 0
        self.within = 0
        self.seed = 0
        self.index = 0


def init_tasks(ctx, params):
    ctx.instances, ctx.base_seed = params
    ctx.index = 0
    return COMPLETED_OK


def create_task(task, ctx, params):
    if ctx.index >= ctx.instances:
        return NORMAL_TERMINATION
    task.iterations = params[0]
    task.index = ctx.index
    task.seed = splitmix64(ctx.base_seed ^ ctx.index)
    ctx.index += 1
    return NORMAL_CONTINUATION


def within_op(task, params):
    rng = np.random.Generator(np.random.PCG64(task.seed))
    x = rng.random(task.iterations)
    y = rng.random(task.iterations)
    task.within = int(np.count_nonzero(x * x + y * y <= 1.0))
    return COMPLETED_OK


class PiAccumulator:
    def __init__(self):
        self.iteration_sum = 0
        self.within_sum = 0
        self.estimate = 0.0


def collect_task(acc, task):
    acc.iteration_sum += task.iterations
    acc.within_sum += task.within
    return COMPLETED_OK


def finalise_estimate(acc, params):
    if acc.iteration_sum:
        acc.estimate = 4.0 * acc.within_sum / acc.iteration_sum
    return COMPLETED_OK


def emit_details(cfg: MonteCarloConfig) -> EmitDetails:
    return EmitDetails(
        factory=PointsTask,
        init=init_tasks,
        init_data=[cfg.instances, cfg.seed],
        create=create_task,
        create_data=[cfg.iterations],
    )


def result_details() -> ResultDetails:
    return ResultDetails(
        factory=PiAccumulator,
        collect=collect_task,
        finalise=finalise_estimate,
    )


def network(cfg: MonteCarloConfig) -> RunnableNetwork:
    return data_parallel_collect(
        emit_details(cfg), result_details(), cfg.workers, within_op)


def run(cfg: MonteCarloConfig) -> float:
    report = network(cfg).run()
    if not report.ok:
        raise RuntimeError(f"monte carlo network failed with code {report.code}")
    return report.results[0].result.estimate


def run_sequential(cfg: MonteCarloConfig) -> float:
    acc = sequential_loop(emit_details(cfg), result_details(), ops=[within_op])
    return acc.estimate


def registry():
    from ..builder import FunctionRegistry

    reg = FunctionRegistry()
    reg.register("mc.task", PointsTask)
    reg.register("mc.init", init_tasks)
    reg.register("mc.create", create_task)
    reg.register("mc.within", within_op)
    reg.register("mc.acc", PiAccumulator)
    reg.register("mc.collect", collect_task)
    reg.register("mc.finalise", finalise_estimate)
    return reg


def spec(cfg: MonteCarloConfig) -> dict:
    """Builder document for the farm network."""
    return {
        "nodes": [
            {"kind": "emit", "config": {
                "factory": "mc.task", "init": "mc.init",
                "init_data": [cfg.instances, cfg.seed],
                "create": "mc.create", "create_data": [cfg.iterations]}},
            {"kind": "spreader", "config": {
                "policy": "fan-any", "destinations": cfg.workers}},
            {"kind": "group", "config": {
                "workers": cfg.workers, "in": "any", "out": "any",
                "function": "mc.within"}},
            {"kind": "reducer", "config": {
                "policy": "fan-one", "sources": cfg.workers}},
            {"kind": "collect", "config": {
                "factory": "mc.acc", "collect": "mc.collect",
                "finalise": "mc.finalise"}},
        ]
    }
