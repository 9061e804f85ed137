"""Functional processes and the pattern constructors built from them.

A worker applies one user function to each payload in place and forwards the
same object, so no copying happens inside a pattern.  Groups run workers in
parallel between shared or indexed channel ends, pipelines chain worker
stages over automatically created channels, and composites combine the two
(a group of pipelines, or a pipeline of groups).

:class:`RunnableNetwork` owns the processes, channels and barriers of a
fully wired network and runs them to termination, poisoning everything on
the first error so the network always unwinds.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

from .kernel import (
    ANY2ONE,
    CONTRACT_ERROR,
    ONE2ANY,
    ONE2ONE,
    Barrier,
    Channel,
    FatalError,
    ProcessHandle,
    first_error_code,
    run_parallel,
)
from .protocol import Data, Terminator, check_rc, is_terminator, terminator_merge
from .terminals import (
    CollectOutcome,
    EmitDetails,
    LocalDetails,
    ResultDetails,
    collect_run,
    emit_run,
)
from .tracelog import LogContext, log_event


@dataclass
class WorkerConfig:
    """One worker: a function, its parameters, and optional local state.

    With ``out_data`` false the worker forwards nothing per payload; at
    termination it emits its finalised local object instead, then the
    terminator.  A barrier, when present, is synced after each computation
    and before the output, giving bulk-synchronous group steps; all members
    of such a group must then see the same number of payloads.
    """

    function: Callable
    data_modifier: list = field(default_factory=list)
    local: LocalDetails | None = None
    out_data: bool = True
    barrier: Barrier | None = None

    def __post_init__(self):
        if not self.out_data and self.local is None:
            raise ValueError("out_data=False requires local details")


def worker_run(cfg: WorkerConfig, cin: Channel, cout: Channel,
               log: LogContext | None = None) -> int:
    local = cfg.local.make() if cfg.local is not None else None
    if log:
        log_event(log, "initialised")
    count = 0
    while True:
        if log:
            log_event(log, "inputReady")
        m = cin.read()
        if is_terminator(m):
            if not cfg.out_data:
                cout.write(Data(local, tag="local"))
            if log:
                log_event(log, "terminated")
                m = terminator_merge(m, Terminator(log.summaries()))
                cout.write(m)
                log.close()
            else:
                cout.write(m)
            return count
        if log:
            log_event(log, "inputComplete", m)
        if local is not None:
            rc = cfg.function(m.payload, cfg.data_modifier, local)
        else:
            rc = cfg.function(m.payload, cfg.data_modifier)
        check_rc(rc, "worker function")
        if cfg.barrier is not None:
            cfg.barrier.sync()
        if cfg.out_data:
            if log:
                log_event(log, "outputReady", m)
            cout.write(m)
            if log:
                log_event(log, "outputComplete", m)
        count += 1


# ---------------------------------------------------------------------------
# network container

@dataclass
class NetworkReport:
    status: str  # "ok" | "error"
    code: int
    wall_ms: float
    results: list[CollectOutcome]
    handles: list[ProcessHandle]
    log_path: str | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


class RunnableNetwork:
    """A wired process network, executable exactly once."""

    def __init__(self):
        self.bodies: list[Callable] = []
        self.tags: list[str] = []
        self._collect_indices: list[int] = []
        self.channels: list[Channel] = []
        self.barriers: list[Barrier] = []
        self.log_path: str | None = None
        self.clock = None
        self._ran = False

    def new_channel(self, kind: str = ONE2ONE) -> Channel:
        ch = Channel(kind)
        self.channels.append(ch)
        return ch

    def new_barrier(self, parties: int) -> Barrier:
        b = Barrier(parties)
        self.barriers.append(b)
        return b

    def add_process(self, body: Callable, tag: str, collects: bool = False) -> None:
        if collects:
            self._collect_indices.append(len(self.bodies))
        self.bodies.append(body)
        self.tags.append(tag)

    def add_fragment(self, fragment: "Fragment") -> None:
        for body, tag, collects in fragment.processes:
            self.add_process(body, tag, collects)
        self.channels.extend(fragment.channels)
        self.barriers.extend(fragment.barriers)

    @property
    def process_count(self) -> int:
        return len(self.bodies)

    def enable_tracing(self) -> list[list]:
        """Record every transferred message, one trace per channel."""
        traces: list[list] = []
        for ch in self.channels:
            trace: list = []
            ch.monitor = trace.append
            traces.append(trace)
        return traces

    def run(self, timeout: float | None = None) -> NetworkReport:
        if self._ran:
            raise FatalError(CONTRACT_ERROR, "network already ran")
        self._ran = True
        if self.clock is not None:
            self.clock.start()
        t0 = time.perf_counter()
        handles = run_parallel(
            self.bodies,
            poison_on_error=[*self.channels, *self.barriers],
            timeout=timeout,
            tags=self.tags,
        )
        wall_ms = (time.perf_counter() - t0) * 1e3
        code = first_error_code(handles)
        results = [handles[i].result for i in self._collect_indices]
        return NetworkReport(
            status="ok" if code == 0 else "error",
            code=code,
            wall_ms=wall_ms,
            results=results,
            handles=handles,
            log_path=self.log_path,
        )


@dataclass
class Fragment:
    """A partial network: processes plus the channels/barriers they own."""

    processes: list[tuple[Callable, str, bool]] = field(default_factory=list)
    channels: list[Channel] = field(default_factory=list)
    barriers: list[Barrier] = field(default_factory=list)

    def add(self, body: Callable, tag: str, collects: bool = False) -> None:
        self.processes.append((body, tag, collects))


# ---------------------------------------------------------------------------
# groups

@dataclass
class GroupConfig:
    """A parallel of identical workers between any- or list-style ends."""

    workers: int
    in_kind: str = "any"  # "any" | "list"
    out_kind: str = "any"  # "any" | "list" | "collect"
    per_worker_modifiers: list[list] | None = None
    synchronised: bool = False

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("group needs at least one worker")
        if self.in_kind not in ("any", "list"):
            raise ValueError(f"bad group input kind {self.in_kind!r}")
        if self.out_kind not in ("any", "list", "collect"):
            raise ValueError(f"bad group output kind {self.out_kind!r}")
        mods = self.per_worker_modifiers
        if mods is not None and len(mods) != self.workers:
            raise ValueError(
                f"group has {self.workers} workers but "
                f"{len(mods)} per-worker modifier lists"
            )


def _worker_local(template: LocalDetails | None, index: int) -> LocalDetails | None:
    # group-built locals learn their worker index through the first init arg
    if template is None:
        return None
    return LocalDetails(
        factory=template.factory,
        init=template.init,
        init_data=[index] + list(template.init_data),
    )


def group_build(
    g: GroupConfig,
    function: Callable | None,
    ins,
    outs,
    *,
    data_modifier: list | None = None,
    local: LocalDetails | None = None,
    out_data: bool = True,
    results: list[ResultDetails] | None = None,
) -> Fragment:
    """Expand a group into worker (or collect) processes over given ends.

    ``ins``/``outs`` are a single shared channel for any-ends and a channel
    list of arity ``workers`` for list ends.
    """
    frag = Fragment()
    n = g.workers

    def end(ends, kind, i):
        if kind == "any":
            return ends if isinstance(ends, Channel) else ends[0]
        if len(ends) != n:
            raise FatalError(
                CONTRACT_ERROR, f"group of {n} given {len(ends)} list ends")
        return ends[i]

    if g.out_kind == "collect":
        if results is None or len(results) != n:
            raise ValueError("collect group needs one ResultDetails per worker")
        for i in range(n):
            cin = end(ins, g.in_kind, i)
            frag.add(
                lambda rd=results[i], c=cin: collect_run(rd, c),
                f"collect-{i}", collects=True,
            )
        return frag

    barrier = Barrier(n) if g.synchronised else None
    if barrier is not None:
        frag.barriers.append(barrier)
    for i in range(n):
        mods = (
            g.per_worker_modifiers[i]
            if g.per_worker_modifiers is not None
            else list(data_modifier or [])
        )
        cfg = WorkerConfig(
            function=function,
            data_modifier=mods,
            local=_worker_local(local, i),
            out_data=out_data,
            barrier=barrier,
        )
        cin = end(ins, g.in_kind, i)
        cout = end(outs, g.out_kind, i)
        frag.add(
            lambda c=cfg, a=cin, b=cout: worker_run(c, a, b),
            f"worker-{i}",
        )
    return frag


# ---------------------------------------------------------------------------
# pipelines

@dataclass
class PipelineConfig:
    """A chain of worker stages; at least two stages, always."""

    stages: int
    stage_ops: list[Callable]
    stage_modifiers: list[list] | None = None
    result: ResultDetails | None = None  # set for the collect-terminated form

    def __post_init__(self):
        if self.stages < 2:
            raise ValueError("pipeline must have at least two stages")
        if len(self.stage_ops) != self.stages:
            raise ValueError(
                f"pipeline of {self.stages} stages given "
                f"{len(self.stage_ops)} stage ops"
            )
        mods = self.stage_modifiers
        if mods is not None and len(mods) != self.stages:
            raise ValueError("one modifier list per stage required")


def pipeline_build(p: PipelineConfig, cin: Channel,
                   cout: Channel | None = None) -> Fragment:
    """Wire the stages over fresh internal channels.

    With ``p.result`` set the chain ends in a collect process and ``cout``
    must be omitted; otherwise the last stage writes to ``cout``.
    """
    frag = Fragment()
    tail_count = 1 if p.result is not None else 0
    if p.result is None and cout is None:
        raise ValueError("open pipeline needs an output end")
    internal = [Channel(ONE2ONE) for _ in range(p.stages - 1 + tail_count)]
    frag.channels.extend(internal)
    ends = [cin] + internal + ([] if p.result is not None else [cout])
    for s in range(p.stages):
        cfg = WorkerConfig(
            function=p.stage_ops[s],
            data_modifier=(p.stage_modifiers[s] if p.stage_modifiers else []),
        )
        frag.add(
            lambda c=cfg, a=ends[s], b=ends[s + 1]: worker_run(c, a, b),
            f"stage-{s}",
        )
    if p.result is not None:
        frag.add(
            lambda rd=p.result, c=ends[-1]: collect_run(rd, c),
            "pipeline-collect", collects=True,
        )
    return frag


# ---------------------------------------------------------------------------
# composites

GROUP_OF_PIPELINE_COLLECTS = "groupOfPipelineCollects"
TASK_PARALLEL_OF_GROUP_COLLECTS = "taskParallelOfGroupCollects"


def composite_build(
    kind: str,
    *,
    stages: int,
    stage_ops: list[Callable],
    result_details: list[ResultDetails],
    groups: int | None = None,
    workers: int | None = None,
    e_details: EmitDetails | None = None,
    cin: Channel | None = None,
) -> Fragment:
    """Expand a composite pattern into a fragment.

    ``groupOfPipelineCollects`` makes ``groups`` parallel collect-terminated
    pipelines all reading the shared ``cin`` end.  ``taskParallelOfGroupCollects``
    is self-contained: its own emit feeds ``workers`` index-aligned lanes
    through ``stages`` sequential groups into a group of collects.
    """
    if kind == GROUP_OF_PIPELINE_COLLECTS:
        if groups is None or cin is None:
            raise ValueError("group-of-pipelines needs groups and an input end")
        if len(result_details) != groups:
            raise ValueError("one ResultDetails per pipeline collect required")
        frag = Fragment()
        for gidx in range(groups):
            p = PipelineConfig(stages=stages, stage_ops=stage_ops,
                               result=result_details[gidx])
            sub = pipeline_build(p, cin)
            for body, tag, collects in sub.processes:
                frag.add(body, f"pipe{gidx}-{tag}", collects)
            frag.channels.extend(sub.channels)
        return frag

    if kind == TASK_PARALLEL_OF_GROUP_COLLECTS:
        if workers is None or e_details is None:
            raise ValueError("task-parallel composite needs workers and emit details")
        if len(result_details) != workers:
            raise ValueError("one ResultDetails per collect lane required")
        from .connectors import FAN_LIST, SpreaderConfig, spread_run

        frag = Fragment()
        feed = Channel(ONE2ONE)
        lanes = [[Channel(ONE2ONE) for _ in range(workers)]
                 for _ in range(stages + 1)]
        frag.channels.append(feed)
        for lane in lanes:
            frag.channels.extend(lane)
        frag.add(lambda: emit_run(e_details, feed), "emit")
        scfg = SpreaderConfig(workers, FAN_LIST)
        frag.add(lambda: spread_run(scfg, feed, lanes[0]), "spread")
        for s in range(stages):
            g = GroupConfig(workers=workers, in_kind="list", out_kind="list")
            sub = group_build(g, stage_ops[s], lanes[s], lanes[s + 1])
            for body, tag, collects in sub.processes:
                frag.add(body, f"stage{s}-{tag}", collects)
        g = GroupConfig(workers=workers, in_kind="list", out_kind="collect")
        sub = group_build(g, None, lanes[stages], None, results=result_details)
        for body, tag, collects in sub.processes:
            frag.add(body, tag, collects)
        return frag

    raise ValueError(f"unknown composite kind {kind!r}")


# ---------------------------------------------------------------------------
# whole-network patterns

def data_parallel_collect(
    e_details: EmitDetails,
    r_details: ResultDetails,
    workers: int,
    function: Callable,
    *,
    data_modifier: list | None = None,
) -> RunnableNetwork:
    """The farm: emit, fan to any, a worker group, fan to one, collect."""
    from .connectors import (
        FAN_ANY,
        FAN_ONE,
        ReducerConfig,
        SpreaderConfig,
        reduce_run,
        spread_run,
    )

    if workers < 1:
        raise ValueError("farm needs at least one worker")
    net = RunnableNetwork()
    feed = net.new_channel(ONE2ONE)
    work = net.new_channel(ONE2ANY)
    done = net.new_channel(ANY2ONE)
    out = net.new_channel(ONE2ONE)
    net.add_process(lambda: emit_run(e_details, feed), "emit")
    scfg = SpreaderConfig(workers, FAN_ANY)
    net.add_process(lambda: spread_run(scfg, feed, work), "fan-any")
    group = group_build(
        GroupConfig(workers=workers, in_kind="any", out_kind="any"),
        function, work, done, data_modifier=list(data_modifier or []),
    )
    net.add_fragment(group)
    rcfg = ReducerConfig(workers, FAN_ONE)
    net.add_process(lambda: reduce_run(rcfg, done, out), "fan-one")
    net.add_process(lambda: collect_run(r_details, out), "collect", collects=True)
    return net


def gop_network(
    e_details: EmitDetails,
    result_details: list[ResultDetails],
    groups: int,
    stages: int,
    stage_ops: list[Callable],
) -> RunnableNetwork:
    """Emit fanned over ``groups`` parallel collect-terminated pipelines."""
    from .connectors import FAN_ANY, SpreaderConfig, spread_run

    net = RunnableNetwork()
    feed = net.new_channel(ONE2ONE)
    shared = net.new_channel(ONE2ANY)
    net.add_process(lambda: emit_run(e_details, feed), "emit")
    scfg = SpreaderConfig(groups, FAN_ANY)
    net.add_process(lambda: spread_run(scfg, feed, shared), "fan-any")
    frag = composite_build(
        GROUP_OF_PIPELINE_COLLECTS,
        stages=stages, stage_ops=stage_ops,
        result_details=result_details, groups=groups, cin=shared,
    )
    net.add_fragment(frag)
    return net


def pog_network(
    e_details: EmitDetails,
    result_details: list[ResultDetails],
    workers: int,
    stages: int,
    stage_ops: list[Callable],
) -> RunnableNetwork:
    """Index-aligned lanes through ``stages`` sequential worker groups."""
    net = RunnableNetwork()
    frag = composite_build(
        TASK_PARALLEL_OF_GROUP_COLLECTS,
        stages=stages, stage_ops=stage_ops,
        result_details=result_details, workers=workers, e_details=e_details,
    )
    net.add_fragment(frag)
    return net
