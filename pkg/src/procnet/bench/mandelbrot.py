"""Mandelbrot renderer as a line farm.

One payload per image row; any worker takes the next available row, and the
collector reassembles rows by index, so the image bytes are identical for
every worker count.  Pixel (x, y) maps to the complex point

    c = centre + ((x - width/2) * delta, (y - height/2) * delta)

with centre (-0.5, 0).  A point still bounded after ``max_iterations``
steps of z := z^2 + c renders black; escaped points are coloured from the
escape iteration by an integer palette.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import ppm
from ..functionals import RunnableNetwork, data_parallel_collect
from ..protocol import COMPLETED_OK, NORMAL_CONTINUATION, NORMAL_TERMINATION
from ..terminals import EmitDetails, ResultDetails, sequential_loop

CENTRE = (-0.5, 0.0)


@dataclass
class MandelbrotConfig:
    width: int = 350
    height: int = 200
    pixel_delta: float = 0.01
    max_iterations: int = 100
    workers: int = 4
    out: str | None = None


class ImageLine:
    __slots__ = ("y", "width", "height", "pixel_delta", "max_iterations", "colors")

    def __init__(self):
        self.y = 0
        self.width = 0
        self.height = 0
        self.pixel_delta = 0.0
        self.max_iterations = 0
        self.colors = None


def init_lines(ctx, params):
    ctx.width, ctx.height, ctx.pixel_delta, ctx.max_iterations = params
    ctx.row = 0
    return COMPLETED_OK


def create_line(line, ctx, params):
    if ctx.row >= ctx.height:
        return NORMAL_TERMINATION
    line.y = ctx.row
    line.width = ctx.width
    line.height = ctx.height
    line.pixel_delta = ctx.pixel_delta
    line.max_iterations = ctx.max_iterations
    ctx.row += 1
    return NORMAL_CONTINUATION


def escape_counts(cr: np.ndarray, ci: float, max_iterations: int) -> np.ndarray:
    """Iterations completed when |z| first exceeds 2; 0 for bounded points."""
    zr = np.zeros_like(cr)
    zi = np.zeros_like(cr)
    counts = np.zeros(cr.shape, dtype=np.int32)
    active = np.ones(cr.shape, dtype=bool)
    for n in range(1, max_iterations + 1):
        zr2 = zr[active] * zr[active]
        zi2 = zi[active] * zi[active]
        zri = zr[active] * zi[active]
        zr_new = zr2 - zi2 + cr[active]
        zi_new = 2.0 * zri + ci
        zr[active] = zr_new
        zi[active] = zi_new
        escaped = zr_new * zr_new + zi_new * zi_new > 4.0
        idx = np.flatnonzero(active)[escaped]
        counts[idx] = n
        active[idx] = False
        if not active.any():
            break
    return counts


def palette(counts: np.ndarray) -> np.ndarray:
    colors = np.zeros((len(counts), 3), dtype=np.uint8)
    escaped = counts > 0
    n = counts[escaped].astype(np.int64)
    colors[escaped, 0] = (n * 41) % 256
    colors[escaped, 1] = (n * 153) % 256
    colors[escaped, 2] = (n * 101) % 256
    return colors


def calc_colour(line, params):
    xs = np.arange(line.width, dtype=np.float64)
    cr = CENTRE[0] + (xs - line.width / 2) * line.pixel_delta
    ci = CENTRE[1] + (line.y - line.height / 2) * line.pixel_delta
    counts = escape_counts(cr, ci, line.max_iterations)
    line.colors = palette(counts)
    return COMPLETED_OK


class ImageAccumulator:
    def __init__(self):
        self.rows = {}
        self.image = None


def collect_line(acc, line):
    acc.rows[line.y] = (line.colors, line.width, line.height)
    return COMPLETED_OK


def finalise_image(acc, params):
    if not acc.rows:
        return COMPLETED_OK
    _, width, height = next(iter(acc.rows.values()))
    acc.image = np.zeros((height, width, 3), dtype=np.uint8)
    for y, (colors, _, _) in acc.rows.items():
        acc.image[y] = colors
    return COMPLETED_OK


def emit_details(cfg: MandelbrotConfig) -> EmitDetails:
    return EmitDetails(
        factory=ImageLine,
        init=init_lines,
        init_data=[cfg.width, cfg.height, cfg.pixel_delta, cfg.max_iterations],
        create=create_line,
    )


def result_details() -> ResultDetails:
    return ResultDetails(factory=ImageAccumulator, collect=collect_line,
                         finalise=finalise_image)


def network(cfg: MandelbrotConfig) -> RunnableNetwork:
    return data_parallel_collect(
        emit_details(cfg), result_details(), cfg.workers, calc_colour)


def run(cfg: MandelbrotConfig) -> np.ndarray:
    report = network(cfg).run()
    if not report.ok:
        raise RuntimeError(f"mandelbrot network failed with code {report.code}")
    image = report.results[0].result.image
    if cfg.out:
        ppm.write_ppm(cfg.out, image)
    return image


def run_sequential(cfg: MandelbrotConfig) -> np.ndarray:
    acc = sequential_loop(emit_details(cfg), result_details(), ops=[calc_colour])
    return acc.image


def registry():
    from ..builder import FunctionRegistry

    reg = FunctionRegistry()
    reg.register("mandel.line", ImageLine)
    reg.register("mandel.init", init_lines)
    reg.register("mandel.create", create_line)
    reg.register("mandel.calc", calc_colour)
    reg.register("mandel.acc", ImageAccumulator)
    reg.register("mandel.collect", collect_line)
    reg.register("mandel.finalise", finalise_image)
    return reg


def spec(cfg: MandelbrotConfig) -> dict:
    return {
        "nodes": [
            {"kind": "emit", "config": {
                "factory": "mandel.line", "init": "mandel.init",
                "init_data": [cfg.width, cfg.height, cfg.pixel_delta,
                              cfg.max_iterations],
                "create": "mandel.create"}},
            {"kind": "spreader", "config": {
                "policy": "fan-any", "destinations": cfg.workers}},
            {"kind": "group", "config": {
                "workers": cfg.workers, "in": "any", "out": "any",
                "function": "mandel.calc"}},
            {"kind": "reducer", "config": {
                "policy": "fan-one", "sources": cfg.workers}},
            {"kind": "collect", "config": {
                "factory": "mandel.acc", "collect": "mandel.collect",
                "finalise": "mandel.finalise"}},
        ]
    }
