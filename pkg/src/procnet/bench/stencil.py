"""Kernel-based image processing on chained stencil engines.

Every operation is integer arithmetic on 8-bit channels, so outputs are
exact and identical for any node count.  Greyscale uses the classic
fixed-point luma weights (77, 150, 29)/256, which map an already-grey pixel
to itself.  Convolution accumulates ``kernel * neighbourhood`` in int32 with
clamp-to-edge borders, then ``clip(acc // divisor + offset, 0, 255)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import ppm
from ..engines import SharedGrid, StencilConfig, stencil_engine_run
from ..functionals import RunnableNetwork
from ..kernel import CONTRACT_ERROR, FatalError
from ..protocol import COMPLETED_OK, NORMAL_CONTINUATION, NORMAL_TERMINATION
from ..terminals import EmitDetails, ResultDetails, collect_run, emit_run

EDGE3 = np.array([[-1, -1, -1],
                  [-1, 8, -1],
                  [-1, -1, -1]], dtype=np.int32)
EDGE5 = np.array([[-1, -1, -1, -1, -1],
                  [-1, -1, -1, -1, -1],
                  [-1, -1, 24, -1, -1],
                  [-1, -1, -1, -1, -1],
                  [-1, -1, -1, -1, -1]], dtype=np.int32)

KERNELS = {"edge3": EDGE3, "edge5": EDGE5}


@dataclass
class StencilDemoConfig:
    in_file: str
    out_file: str
    nodes: int = 2
    operations: list = field(default_factory=lambda: ["grey", "edge5"])


class ImageTask:
    def __init__(self):
        self.grid = None
        self.out_file = ""

    def load(self, image: np.ndarray, out_file: str):
        front = np.ascontiguousarray(image, dtype=np.uint8)
        self.grid = SharedGrid(front, np.zeros_like(front))
        self.out_file = out_file

    @property
    def image(self) -> np.ndarray:
        return self.grid.front


def read_image(path: str | Path) -> np.ndarray:
    head = Path(path).read_bytes()[:2]
    if head == b"P6":
        return ppm.read_ppm(path)
    if head == b"P5":
        return ppm.read_pgm(path)
    raise ValueError(f"{path}: not a P6/P5 image")


def write_image(path: str | Path, image: np.ndarray) -> None:
    path = str(path)
    if path.endswith(".pgm"):
        ppm.write_pgm(path, image[..., 0] if image.ndim == 3 else image)
    else:
        ppm.write_ppm(path, image if image.ndim == 3 else
                      np.repeat(image[..., None], 3, axis=2))


def init_images(ctx, params):
    ctx.jobs = list(params[0])
    ctx.index = 0
    return COMPLETED_OK


def create_image(payload, ctx, params):
    if ctx.index >= len(ctx.jobs):
        return NORMAL_TERMINATION
    in_file, out_file = ctx.jobs[ctx.index]
    payload.load(read_image(in_file), out_file)
    ctx.index += 1
    return NORMAL_CONTINUATION


def partition_rows(payload, nodes):
    payload.grid.partitions = SharedGrid.default_partitions(
        payload.grid.front.shape[0], nodes)
    return COMPLETED_OK


def greyscale_rows(payload, index):
    img = payload.grid.front
    sl = payload.grid.partitions[index]
    band = img[sl].astype(np.int32)
    if img.ndim == 3:
        luma = (77 * band[..., 0] + 150 * band[..., 1] + 29 * band[..., 2]) >> 8
        img[sl] = luma[..., None].astype(np.uint8)
    else:
        img[sl] = ((77 * band + 150 * band + 29 * band) >> 8).astype(np.uint8)
    return COMPLETED_OK


def check_kernel(kernel: np.ndarray, image_shape) -> None:
    kh, kw = kernel.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise FatalError(CONTRACT_ERROR, "kernel dimensions must be odd")
    if kh > image_shape[0] or kw > image_shape[1]:
        raise FatalError(CONTRACT_ERROR, "kernel larger than image")


def convolve_rows(payload, index, data):
    kernel, divisor, offset = data
    src = payload.grid.front
    dst = payload.grid.back
    check_kernel(kernel, src.shape)
    sl = payload.grid.partitions[index]
    if sl.start >= sl.stop:
        return COMPLETED_OK
    h, w = src.shape[:2]
    pad = kernel.shape[0] // 2
    rows = np.arange(sl.start, sl.stop)
    cols = np.arange(w)
    acc = np.zeros(src[sl].shape, dtype=np.int32)
    for dy in range(kernel.shape[0]):
        ri = np.clip(rows + dy - pad, 0, h - 1)
        band = src[ri].astype(np.int32)
        for dx in range(kernel.shape[1]):
            weight = int(kernel[dy, dx])
            if weight == 0:
                continue
            ci = np.clip(cols + dx - pad, 0, w - 1)
            acc += weight * band[:, ci]
    dst[sl] = np.clip(acc // divisor + offset, 0, 255).astype(np.uint8)
    return COMPLETED_OK


def swap_buffers(payload):
    payload.grid.swap()
    return COMPLETED_OK


class ImageResults:
    def __init__(self):
        self.images = []


def collect_image(acc, payload):
    acc.images.append(payload.image.copy())
    if payload.out_file:
        write_image(payload.out_file, payload.image)
    return COMPLETED_OK


def emit_details(cfg: StencilDemoConfig) -> EmitDetails:
    return EmitDetails(
        factory=ImageTask,
        init=init_images,
        init_data=[[(cfg.in_file, cfg.out_file)]],
        create=create_image,
    )


def result_details() -> ResultDetails:
    return ResultDetails(factory=ImageResults, collect=collect_image)


def engine_configs(cfg: StencilDemoConfig) -> list[StencilConfig]:
    """One engine per operation; the first owns the partitioning."""
    configs = []
    for i, op in enumerate(cfg.operations):
        partition = partition_rows if i == 0 else None
        if op == "grey":
            configs.append(StencilConfig(
                nodes=cfg.nodes, function=greyscale_rows, partition=partition))
        elif op in KERNELS:
            configs.append(StencilConfig(
                nodes=cfg.nodes, convolution=convolve_rows,
                convolution_data=[KERNELS[op], 1, 0],
                partition=partition, update_image_index=swap_buffers))
        else:
            raise ValueError(f"unknown stencil operation {op!r}")
    return configs


def network(cfg: StencilDemoConfig) -> RunnableNetwork:
    net = RunnableNetwork()
    configs = engine_configs(cfg)
    chs = [net.new_channel() for _ in range(len(configs) + 1)]
    e, r = emit_details(cfg), result_details()
    net.add_process(lambda: emit_run(e, chs[0]), "emit")
    for i, ecfg in enumerate(configs):
        net.add_process(
            lambda c=ecfg, a=chs[i], b=chs[i + 1]: stencil_engine_run(c, a, b),
            f"engine-{i}")
    net.add_process(lambda: collect_run(r, chs[-1]), "collect", collects=True)
    return net


def run(cfg: StencilDemoConfig) -> ImageResults:
    report = network(cfg).run()
    if not report.ok:
        raise RuntimeError(f"stencil network failed with code {report.code}")
    return report.results[0].result


def apply_sequential(image: np.ndarray, operations) -> np.ndarray:
    """The same operations applied by one node in one process."""
    payload = ImageTask()
    payload.load(image, "")
    partition_rows(payload, 1)
    for op in operations:
        if op == "grey":
            greyscale_rows(payload, 0)
        else:
            convolve_rows(payload, 0, [KERNELS[op], 1, 0])
            swap_buffers(payload)
    return payload.image.copy()


def run_sequential(cfg: StencilDemoConfig) -> np.ndarray:
    out = apply_sequential(read_image(cfg.in_file), cfg.operations)
    if cfg.out_file:
        write_image(cfg.out_file, out)
    return out


def registry():
    from ..builder import FunctionRegistry

    reg = FunctionRegistry()
    reg.register("img.task", ImageTask)
    reg.register("img.init", init_images)
    reg.register("img.create", create_image)
    reg.register("img.partition", partition_rows)
    reg.register("img.grey", greyscale_rows)
    reg.register("img.convolve", convolve_rows)
    reg.register("img.swap", swap_buffers)
    reg.register("img.acc", ImageResults)
    reg.register("img.collect", collect_image)
    return reg


def spec(cfg: StencilDemoConfig) -> dict:
    nodes = [
        {"kind": "emit", "config": {
            "factory": "img.task", "init": "img.init",
            "init_data": [[(cfg.in_file, cfg.out_file)]],
            "create": "img.create"}},
    ]
    for i, op in enumerate(cfg.operations):
        config = {"nodes": cfg.nodes}
        if i == 0:
            config["partition"] = "img.partition"
        if op == "grey":
            config["function"] = "img.grey"
        else:
            config["convolution"] = "img.convolve"
            config["convolution_data"] = [KERNELS[op], 1, 0]
            config["update_image_index"] = "img.swap"
        nodes.append({"kind": "stencilEngine", "config": config})
    nodes.append({"kind": "collect", "config": {
        "factory": "img.acc", "collect": "img.collect"}})
    return {"nodes": nodes}
