"""Shared-data multi-core engines.

Both engines run a root phase-loop over a pool of node threads against data
shared in place, never copied.  Every phase follows the same discipline: all
nodes read freely but write only inside their own partition, a barrier
separates compute from the root's sequential step, and buffer swaps happen
only at that quiescent point.  Because each node reads only previous-phase
data, engine output is bit-identical for every node count and schedule.

The iterative engine (linear solvers, particle steps) repeats phases either
until an error-margin test passes or for a fixed iteration count.  The
stencil engine applies one pointwise or convolution operation per payload
over a double-buffered image and is designed to be chained, one engine per
operation.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .kernel import CONTRACT_ERROR, Barrier, Channel, FatalError, NetworkShutdown
from .protocol import check_rc, is_terminator
from .tracelog import LogContext, log_event


class SharedGrid:
    """A partitioned data region shared by all nodes of one engine.

    Holds one buffer (iterative use, where old/new live inside the user's
    own arrays) or two (stencil double buffering).  ``front`` is the buffer
    every node may read this phase; ``back`` is where partition-confined
    writes go; ``swap`` flips them between phases.  Partitions slice the
    leading axis.
    """

    def __init__(self, *buffers):
        if not 1 <= len(buffers) <= 2:
            raise ValueError("SharedGrid takes one or two buffers")
        self.buffers = list(buffers)
        self.active = 0
        self.partitions: list[slice] | None = None

    @property
    def front(self):
        return self.buffers[self.active]

    @property
    def back(self):
        if len(self.buffers) == 2:
            return self.buffers[1 - self.active]
        return self.buffers[0]

    def swap(self) -> None:
        if len(self.buffers) == 2:
            self.active = 1 - self.active

    def clone(self) -> "SharedGrid":
        g = SharedGrid(*[np.copy(b) for b in self.buffers])
        g.active = self.active
        g.partitions = list(self.partitions) if self.partitions else None
        return g

    @staticmethod
    def default_partitions(size: int, nodes: int) -> list[slice]:
        """Contiguous ranges of ceil(size/nodes), the last one shorter."""
        step = -(-size // nodes)
        return [slice(min(i * step, size), min((i + 1) * step, size))
                for i in range(nodes)]


class _NodePool:
    """Node threads driven by the root through two barriers per phase.

    In ``checked`` mode no threads run: nodes execute one at a time and each
    write outside the node's partition aborts the engine.  Determinism makes
    the sequential result identical to the parallel one.
    """

    def __init__(self, nodes: int, calculation, checked: bool = False):
        self.nodes = nodes
        self.calculation = calculation
        self.checked = checked
        self.payload = None
        self.stop = False
        self.errors: list[int] = []
        self._threads: list[threading.Thread] = []
        if not checked:
            self.start = Barrier(nodes + 1)
            self.mid = Barrier(nodes + 1)
            self._threads = [
                threading.Thread(target=self._node, args=(i,), daemon=True)
                for i in range(nodes)
            ]
            for t in self._threads:
                t.start()

    def _node(self, index: int) -> None:
        while True:
            try:
                self.start.sync()
            except NetworkShutdown:
                return
            if self.stop:
                return
            try:
                rc = self.calculation(self.payload, index)
                if rc is None or rc < 0:
                    self.errors.append(CONTRACT_ERROR if rc is None else rc)
            except Exception:  # noqa: BLE001 - reported by the root
                self.errors.append(CONTRACT_ERROR)
            try:
                self.mid.sync()
            except NetworkShutdown:
                return

    def phase(self, payload) -> None:
        if self.checked:
            self._checked_phase(payload)
            return
        self.payload = payload
        self.start.sync()
        self.mid.sync()
        if self.errors:
            raise FatalError(self.errors[0], "engine node calculation failed")

    def _checked_phase(self, payload) -> None:
        grid = getattr(payload, "grid", None)
        for i in range(self.nodes):
            before = None
            if grid is not None and grid.partitions is not None:
                before = np.copy(grid.back)
            check_rc(self.calculation(payload, i), "engine node calculation")
            if before is not None:
                outside = np.ones(before.shape[0], dtype=bool)
                outside[grid.partitions[i]] = False
                if not np.array_equal(before[outside], np.asarray(grid.back)[outside]):
                    raise FatalError(
                        CONTRACT_ERROR, f"node {i} wrote outside its partition")

    def shutdown(self) -> None:
        if self.checked:
            return
        self.stop = True
        try:
            self.start.sync()
        except NetworkShutdown:
            pass
        for t in self._threads:
            t.join(5)

    def abort(self, code: int, message: str) -> None:
        if self.checked:
            return
        self.start.poison(code, message)
        self.mid.poison(code, message)


@dataclass
class EngineConfig:
    """Iterative engine: callbacks plus exactly one stopping mode.

    ``partition(payload, nodes)`` runs once per payload on the root;
    ``calculation(payload, node_index)`` runs concurrently on every node per
    phase; ``update(payload)`` is the root's new-to-old transfer; and in
    error-margin mode ``error(payload, margin)`` returns True while another
    iteration is needed.
    """

    nodes: int
    partition: Callable[[Any, int], int]
    calculation: Callable[[Any, int], int]
    update: Callable[[Any], int]
    error: Callable[[Any, float], bool] | None = None
    error_margin: float | None = None
    iterations: int | None = None
    final_out: bool = True
    max_sweeps: int = 100_000
    check_writes: bool = False

    def __post_init__(self):
        if self.nodes < 1:
            raise ValueError("engine needs at least one node")
        margin_mode = self.error_margin is not None
        fixed_mode = self.iterations is not None
        if margin_mode == fixed_mode:
            raise ValueError("set exactly one of error_margin and iterations")
        if margin_mode and self.error is None:
            raise ValueError("error-margin mode needs an error callback")
        if fixed_mode and self.error is not None:
            raise ValueError("fixed-iteration mode takes no error callback")


def multicore_engine_run(cfg: EngineConfig, cin: Channel, cout: Channel,
                         log: LogContext | None = None) -> int:
    """Root process of the iterative engine; forwards per protocol."""
    pool = _NodePool(cfg.nodes, cfg.calculation, cfg.check_writes)
    payloads = 0
    if log:
        log_event(log, "initialised")
    try:
        while True:
            m = cin.read()
            if is_terminator(m):
                cout.write(m)
                return payloads
            if log:
                log_event(log, "inputComplete", m)
            payload = m.payload
            check_rc(cfg.partition(payload, cfg.nodes), "engine partition")
            sweeps = 0
            while True:
                pool.phase(payload)
                sweeps += 1
                if cfg.iterations is not None:
                    again = sweeps < cfg.iterations
                else:
                    again = bool(cfg.error(payload, cfg.error_margin))
                    if again and sweeps >= cfg.max_sweeps:
                        raise FatalError(
                            CONTRACT_ERROR,
                            f"no convergence within {cfg.max_sweeps} sweeps",
                        )
                check_rc(cfg.update(payload), "engine update")
                if not again:
                    break
            payloads += 1
            if cfg.final_out:
                if log:
                    log_event(log, "outputReady", m)
                cout.write(m)
                if log:
                    log_event(log, "outputComplete", m)
    except BaseException as e:
        if isinstance(e, (FatalError, NetworkShutdown)):
            pool.abort(getattr(e, "code", CONTRACT_ERROR), str(e))
        raise
    finally:
        pool.shutdown()


@dataclass
class StencilConfig:
    """One image operation: pointwise ``function`` or ``convolution``.

    The first engine of a chain owns ``partition``; later engines reuse the
    partitions already stored on the payload's grid.  ``update_image_index``
    swaps the double buffer after the phase and is set exactly when the
    operation writes to the back buffer.
    """

    nodes: int
    function: Callable[[Any, int], int] | None = None
    convolution: Callable[[Any, int, list], int] | None = None
    convolution_data: list = field(default_factory=list)
    partition: Callable[[Any, int], int] | None = None
    update_image_index: Callable[[Any], int] | None = None
    check_writes: bool = False

    def __post_init__(self):
        if self.nodes < 1:
            raise ValueError("engine needs at least one node")
        if (self.function is None) == (self.convolution is None):
            raise ValueError("set exactly one of function and convolution")


def stencil_engine_run(cfg: StencilConfig, cin: Channel, cout: Channel,
                       log: LogContext | None = None) -> int:
    """One phase per image payload, then forward to the next engine."""
    if cfg.convolution is not None:
        def op(payload, index):
            return cfg.convolution(payload, index, cfg.convolution_data)
    else:
        op = cfg.function
    pool = _NodePool(cfg.nodes, op, cfg.check_writes)
    payloads = 0
    if log:
        log_event(log, "initialised")
    try:
        while True:
            m = cin.read()
            if is_terminator(m):
                cout.write(m)
                return payloads
            if log:
                log_event(log, "inputComplete", m)
            payload = m.payload
            grid = payload.grid
            if cfg.partition is not None:
                check_rc(cfg.partition(payload, cfg.nodes), "engine partition")
            elif grid.partitions is None:
                raise FatalError(
                    CONTRACT_ERROR,
                    "first engine in a chain must set the partitions",
                )
            pool.phase(payload)
            if cfg.update_image_index is not None:
                check_rc(cfg.update_image_index(payload), "buffer swap")
            payloads += 1
            cout.write(m)
            if log:
                log_event(log, "outputComplete", m)
    except BaseException as e:
        if isinstance(e, (FatalError, NetworkShutdown)):
            pool.abort(getattr(e, "code", CONTRACT_ERROR), str(e))
        raise
    finally:
        pool.shutdown()
