"""Declarative network construction: describe, validate, wire, run.

A network description is an ordered list of node descriptors (JSON text or
the equivalent dict).  Callbacks are referred to by name and resolved
against a :class:`FunctionRegistry` during validation, never at run time.
``validate`` checks the whole chain - port kind and arity compatibility
between neighbours, stage counts, name resolution - and returns diagnostics
naming the offending node; ``build`` refuses to construct a network unless
validation is clean.  Channels between nodes, inside expanded fragments,
and to the logger process are all created automatically.

Node kinds: emit, emitWithLocal, collect, worker, spreader, reducer,
combine, group, pipeline, composite, multicoreEngine, stencilEngine.
A node may carry ``"log": {"phase": name, "property": extractor-name}``
to attach phase logging; ``"log_file"`` at the top level selects the file
the logger process writes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

from .connectors import (
    FAN_ANY,
    FAN_ONE,
    CombineConfig,
    ReducerConfig,
    SpreaderConfig,
    combine_run,
    reduce_run,
    spread_run,
)
from .engines import EngineConfig, StencilConfig, multicore_engine_run, stencil_engine_run
from .functionals import (
    GROUP_OF_PIPELINE_COLLECTS,
    TASK_PARALLEL_OF_GROUP_COLLECTS,
    GroupConfig,
    PipelineConfig,
    RunnableNetwork,
    WorkerConfig,
    composite_build,
    group_build,
    pipeline_build,
    worker_run,
)
from .kernel import ANY2ONE, ONE2ANY, ONE2ONE
from .terminals import (
    EmitDetails,
    LocalDetails,
    ResultDetails,
    collect_run,
    emit_run,
    emit_with_local_run,
)
from .tracelog import LogContext, NetworkClock, logger_run

KINDS = (
    "emit", "emitWithLocal", "collect", "worker", "spreader", "reducer",
    "combine", "group", "pipeline", "composite", "multicoreEngine",
    "stencilEngine",
)


class SpecParseError(Exception):
    pass


class BuildError(Exception):
    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


class FunctionRegistry:
    """Named callbacks the textual descriptions can refer to."""

    def __init__(self):
        self._functions: dict[str, Callable] = {}

    def register(self, name: str, fn: Callable) -> None:
        if name in self._functions:
            raise ValueError(f"function name {name!r} already registered")
        self._functions[name] = fn

    def update(self, other: "FunctionRegistry") -> "FunctionRegistry":
        for name, fn in other._functions.items():
            if name not in self._functions:
                self._functions[name] = fn
        return self

    def __contains__(self, name: str) -> bool:
        return name in self._functions

    def resolve(self, name: str) -> Callable:
        return self._functions[name]


@dataclass
class NodeDescriptor:
    kind: str
    config: dict
    log_phase: str | None = None
    log_property: str | None = None


@dataclass
class NetworkSpec:
    nodes: list[NodeDescriptor]
    log_file: str | None = None


@dataclass
class Diagnostic:
    node: int
    kind: str
    reason: str

    def __str__(self):
        return f"node {self.node} ({self.kind}): {self.reason}"


def load_spec(text: str) -> NetworkSpec:
    """Parse a JSON network description."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecParseError(
            f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    return spec_from_dict(doc)


def spec_from_dict(doc: dict) -> NetworkSpec:
    if not isinstance(doc, dict) or "nodes" not in doc:
        raise SpecParseError("document must be an object with a 'nodes' list")
    nodes = []
    for i, entry in enumerate(doc["nodes"]):
        kind = entry.get("kind")
        if kind not in KINDS:
            raise SpecParseError(f"node {i}: unknown node kind {kind!r}")
        log = entry.get("log") or {}
        nodes.append(NodeDescriptor(
            kind=kind,
            config=dict(entry.get("config") or {}),
            log_phase=log.get("phase"),
            log_property=log.get("property"),
        ))
    return NetworkSpec(nodes=nodes, log_file=doc.get("log_file"))


# ---------------------------------------------------------------------------
# per-kind configuration: name resolution and detail building

class _Resolver:
    """Collects diagnostics while resolving names for one node."""

    def __init__(self, reg: FunctionRegistry, node: int, kind: str,
                 diagnostics: list[Diagnostic]):
        self.reg = reg
        self.node = node
        self.kind = kind
        self.diagnostics = diagnostics

    def fail(self, reason: str) -> None:
        self.diagnostics.append(Diagnostic(self.node, self.kind, reason))

    def fn(self, cfg: dict, key: str, required: bool = False):
        name = cfg.get(key)
        if name is None:
            if required:
                self.fail(f"missing required field '{key}'")
            return None
        if callable(name):
            return name
        if name not in self.reg:
            self.fail(f"unknown function name '{name}' for field '{key}'")
            return None
        return self.reg.resolve(name)

    def local(self, cfg: dict, key: str = "local") -> LocalDetails | None:
        sub = cfg.get(key)
        if sub is None:
            return None
        return LocalDetails(
            factory=self.fn(sub, "factory", required=True),
            init=self.fn(sub, "init"),
            init_data=list(sub.get("init_data", [])),
        )

    def emit_details(self, cfg: dict) -> EmitDetails | None:
        factory = self.fn(cfg, "factory", required=True)
        create = self.fn(cfg, "create", required=True)
        if factory is None or create is None:
            return None
        return EmitDetails(
            factory=factory,
            create=create,
            create_data=list(cfg.get("create_data", [])),
            init=self.fn(cfg, "init"),
            init_data=list(cfg.get("init_data", [])),
            local=self.local(cfg),
            tag_of=self.fn(cfg, "tag_of"),
        )

    def result_details(self, cfg: dict) -> ResultDetails | None:
        factory = self.fn(cfg, "factory", required=True)
        collect = self.fn(cfg, "collect", required=True)
        if factory is None or collect is None:
            return None
        return ResultDetails(
            factory=factory,
            collect=collect,
            finalise=self.fn(cfg, "finalise"),
            finalise_data=list(cfg.get("finalise_data", [])),
            init=self.fn(cfg, "init"),
            init_data=list(cfg.get("init_data", [])),
        )


# port shapes: ("none",), ("one",), ("any", declared arity), ("list", n)

def _ports(desc: NodeDescriptor, r: _Resolver):
    c = desc.config
    kind = desc.kind
    if kind in ("emit", "emitWithLocal"):
        return ("none",), ("one",)
    if kind == "collect":
        return ("one",), ("none",)
    if kind == "worker":
        return ("one",), ("one",)
    if kind == "spreader":
        n = int(c.get("destinations", 0))
        if n < 1:
            r.fail("spreader needs destinations >= 1")
            n = 1
        policy = c.get("policy", FAN_ANY)
        out = ("any", n) if policy == FAN_ANY else ("list", n)
        return ("one",), out
    if kind == "reducer":
        n = int(c.get("sources", 0))
        if n < 1:
            r.fail("reducer needs sources >= 1")
            n = 1
        policy = c.get("policy", FAN_ONE)
        inp = ("any", n) if policy == FAN_ONE else ("list", n)
        return inp, ("one",)
    if kind == "combine":
        n = int(c.get("sources", 1))
        return (("one",) if n == 1 else ("list", n)), ("one",)
    if kind == "group":
        n = int(c.get("workers", 0))
        if n < 1:
            r.fail("group needs workers >= 1")
            n = 1
        in_kind = c.get("in", "any")
        out_kind = c.get("out", "any")
        inp = ("any", n) if in_kind == "any" else ("list", n)
        if out_kind == "collect":
            out = ("none",)
        elif out_kind == "any":
            out = ("any", n)
        else:
            out = ("list", n)
        return inp, out
    if kind == "pipeline":
        stages = int(c.get("stages", 0))
        if stages < 2:
            r.fail("pipeline requires at least 2 stages")
        out = ("none",) if c.get("result") else ("one",)
        return ("one",), out
    if kind == "composite":
        pattern = c.get("pattern")
        if pattern == GROUP_OF_PIPELINE_COLLECTS:
            n = int(c.get("groups", 0))
            if n < 1:
                r.fail("composite needs groups >= 1")
                n = 1
            return ("any", n), ("none",)
        if pattern == TASK_PARALLEL_OF_GROUP_COLLECTS:
            return ("none",), ("none",)
        r.fail(f"unknown composite pattern {pattern!r}")
        return ("none",), ("none",)
    if kind in ("multicoreEngine", "stencilEngine"):
        return ("one",), ("one",)
    raise AssertionError(kind)


def _producer_count(desc: NodeDescriptor) -> int:
    if desc.kind == "group":
        return int(desc.config.get("workers", 1))
    return 1


def _consumer_count(desc: NodeDescriptor) -> int:
    if desc.kind == "group":
        return int(desc.config.get("workers", 1))
    if desc.kind == "composite":
        return int(desc.config.get("groups", 1))
    return 1


def _resolve_names(desc: NodeDescriptor, r: _Resolver) -> None:
    """Resolve every callback reference, recording diagnostics."""
    c = desc.config
    kind = desc.kind
    if kind in ("emit", "emitWithLocal"):
        r.emit_details(c)
        if kind == "emitWithLocal" and c.get("local") is None:
            r.fail("emitWithLocal requires a local helper")
    elif kind == "collect":
        r.result_details(c)
    elif kind == "worker":
        r.fn(c, "function", required=True)
        r.local(c)
    elif kind == "reducer":
        if c.get("policy") == "sorted-merge":
            r.fn(c, "key", required=True)
    elif kind == "combine":
        r.fn(c, "combine", required=True)
        r.fn(c, "out_factory", required=True)
        r.fn(c, "out_init")
        if c.get("local") is None:
            r.fail("combine requires a local accumulator")
        else:
            r.local(c)
    elif kind == "group":
        if c.get("out") == "collect":
            details = c.get("result_details") or []
            if len(details) != int(c.get("workers", 0)):
                r.fail("collect group needs one result_details entry per worker")
            for d in details:
                r.result_details(d)
        else:
            r.fn(c, "function", required=True)
            r.local(c)
        mods = c.get("per_worker_modifiers")
        if mods is not None and len(mods) != int(c.get("workers", 0)):
            r.fail("per_worker_modifiers length must equal workers")
    elif kind == "pipeline":
        ops = c.get("stage_ops") or []
        if len(ops) != int(c.get("stages", 0)):
            r.fail("one stage op per stage required")
        for i in range(len(ops)):
            r.fn({"op": ops[i]}, "op", required=True)
        if c.get("result"):
            r.result_details(c["result"])
    elif kind == "composite":
        ops = c.get("stage_ops") or []
        stages = int(c.get("stages", 0))
        if len(ops) != stages:
            r.fail("one stage op per stage required")
        for i in range(len(ops)):
            r.fn({"op": ops[i]}, "op", required=True)
        pattern = c.get("pattern")
        details = c.get("result_details") or []
        terminals = int(c.get("groups" if pattern == GROUP_OF_PIPELINE_COLLECTS
                               else "workers", 0))
        if len(details) != terminals:
            r.fail("one result_details entry per collect terminal required")
        for d in details:
            r.result_details(d)
        if pattern == TASK_PARALLEL_OF_GROUP_COLLECTS:
            if c.get("emit") is None:
                r.fail("task-parallel composite needs an emit section")
            else:
                r.emit_details(c["emit"])
    elif kind == "multicoreEngine":
        r.fn(c, "partition", required=True)
        r.fn(c, "calculation", required=True)
        r.fn(c, "update", required=True)
        r.fn(c, "error")
        has_margin = c.get("error_margin") is not None
        has_iters = c.get("iterations") is not None
        if has_margin == has_iters:
            r.fail("set exactly one of error_margin and iterations")
        if has_iters and c.get("error") is not None:
            r.fail("fixed-iteration engine takes no error callback")
        if has_margin and c.get("error") is None:
            r.fail("error-margin engine needs an error callback")
    elif kind == "stencilEngine":
        has_fn = c.get("function") is not None
        has_conv = c.get("convolution") is not None
        if has_fn == has_conv:
            r.fail("set exactly one of function and convolution")
        r.fn(c, "function")
        r.fn(c, "convolution")
        r.fn(c, "partition")
        r.fn(c, "update_image_index")


def validate(spec: NetworkSpec, reg: FunctionRegistry) -> list[Diagnostic]:
    """Static checks only; empty result means the network will build."""
    diagnostics: list[Diagnostic] = []
    if not spec.nodes:
        return [Diagnostic(0, "-", "empty network")]
    ports = []
    for i, desc in enumerate(spec.nodes):
        r = _Resolver(reg, i, desc.kind, diagnostics)
        _resolve_names(desc, r)
        if desc.log_property is not None:
            r.fn({"p": desc.log_property}, "p", required=True)
        ports.append(_ports(desc, r))

    first_in = ports[0][0]
    if first_in != ("none",):
        diagnostics.append(Diagnostic(
            0, spec.nodes[0].kind, "network must start with a source node"))
    last_out = ports[-1][1]
    if last_out != ("none",):
        diagnostics.append(Diagnostic(
            len(spec.nodes) - 1, spec.nodes[-1].kind,
            "network must end in a collecting node"))

    for i in range(len(spec.nodes) - 1):
        out = ports[i][1]
        inp = ports[i + 1][0]
        where = Diagnostic(i + 1, spec.nodes[i + 1].kind, "")
        if out == ("none",):
            where.reason = f"node {i} has no output to feed this node"
            diagnostics.append(where)
            continue
        if inp == ("none",):
            where.reason = "this node accepts no input but is mid-chain"
            diagnostics.append(where)
            continue
        if out[0] != inp[0]:
            where.reason = (
                f"port kinds differ: upstream offers {out[0]}, node expects {inp[0]}")
            diagnostics.append(where)
        elif out[0] in ("any", "list") and out[1] != inp[1]:
            where.reason = (
                f"arity mismatch: upstream {out[0]}({out[1]}) vs "
                f"expected {inp[0]}({inp[1]})")
            diagnostics.append(where)
    return diagnostics


# ---------------------------------------------------------------------------
# building

def _make_channels(net: RunnableNetwork, out, inp, producer: NodeDescriptor,
                   consumer: NodeDescriptor):
    if out[0] == "one":
        return net.new_channel(ONE2ONE)
    if out[0] == "list":
        return [net.new_channel(ONE2ONE) for _ in range(out[1])]
    # any: kind decided by actual process multiplicity on each side
    writers = _producer_count(producer)
    readers = _consumer_count(consumer)
    if writers > 1 and readers > 1:
        raise BuildError([Diagnostic(
            -1, producer.kind, "any-to-any channels are not supported")])
    if writers > 1:
        return net.new_channel(ANY2ONE)
    if readers > 1:
        return net.new_channel(ONE2ANY)
    return net.new_channel(ONE2ONE)


def build(spec: NetworkSpec, reg: FunctionRegistry) -> RunnableNetwork:
    """Instantiate processes and channels; refuses on any diagnostic."""
    diagnostics = validate(spec, reg)
    if diagnostics:
        raise BuildError(diagnostics)
    net = RunnableNetwork()

    log_channel = None
    clock = None
    logged = [d for d in spec.nodes if d.log_phase is not None]
    if logged:
        clock = NetworkClock()
        net.clock = clock
        log_channel = net.new_channel(ANY2ONE)
        net.log_path = spec.log_file

    ports = []
    for i, desc in enumerate(spec.nodes):
        r = _Resolver(reg, i, desc.kind, [])
        ports.append(_ports(desc, r))
    links: list = [None] * (len(spec.nodes) - 1)
    for i in range(len(spec.nodes) - 1):
        links[i] = _make_channels(net, ports[i][1], ports[i + 1][0],
                                  spec.nodes[i], spec.nodes[i + 1])

    expected_log_terminators = 0
    for i, desc in enumerate(spec.nodes):
        ins = links[i - 1] if i > 0 else None
        outs = links[i] if i < len(links) else None
        expected_log_terminators += _expand(
            net, desc, i, reg, ins, outs, log_channel, clock)

    if logged:
        path = spec.log_file
        expected = expected_log_terminators
        ch = log_channel
        net.add_process(lambda: logger_run(ch, path, expected), "logger")
    return net


def _log_ctx(desc: NodeDescriptor, reg: FunctionRegistry, log_channel, clock,
             suffix: str = "") -> LogContext | None:
    if desc.log_phase is None or log_channel is None:
        return None
    prop = None
    if desc.log_property is not None:
        prop = reg.resolve(desc.log_property)
    tag = desc.log_phase + suffix
    return LogContext(log_channel, tag, clock, prop)


def _expand(net: RunnableNetwork, desc: NodeDescriptor, index: int,
            reg: FunctionRegistry, ins, outs, log_channel, clock) -> int:
    """Add the node's processes to the network; returns logged-process count."""
    c = desc.config
    r = _Resolver(reg, index, desc.kind, [])
    logged = 0
    kind = desc.kind

    if kind in ("emit", "emitWithLocal"):
        details = r.emit_details(c)
        log = _log_ctx(desc, reg, log_channel, clock)
        runner = emit_with_local_run if kind == "emitWithLocal" else emit_run
        net.add_process(lambda: runner(details, outs, log), f"{kind}-{index}")
        logged += 1 if log else 0
    elif kind == "collect":
        details = r.result_details(c)
        log = _log_ctx(desc, reg, log_channel, clock)
        net.add_process(lambda: collect_run(details, ins, log),
                        f"collect-{index}", collects=True)
        logged += 1 if log else 0
    elif kind == "worker":
        cfg = WorkerConfig(
            function=r.fn(c, "function", required=True),
            data_modifier=list(c.get("data_modifier", [])),
            local=r.local(c),
            out_data=bool(c.get("out_data", True)),
        )
        log = _log_ctx(desc, reg, log_channel, clock)
        net.add_process(lambda: worker_run(cfg, ins, outs, log),
                        f"worker-{index}")
        logged += 1 if log else 0
    elif kind == "spreader":
        cfg = SpreaderConfig(int(c["destinations"]), c.get("policy", FAN_ANY))
        net.add_process(lambda: spread_run(cfg, ins, outs), f"spreader-{index}")
    elif kind == "reducer":
        cfg = ReducerConfig(int(c["sources"]), c.get("policy", FAN_ONE),
                            key=r.fn(c, "key"))
        net.add_process(lambda: reduce_run(cfg, ins, outs), f"reducer-{index}")
    elif kind == "combine":
        cfg = CombineConfig(
            sources=int(c.get("sources", 1)),
            local=r.local(c),
            out_factory=r.fn(c, "out_factory", required=True),
            combine=r.fn(c, "combine", required=True),
            out_init=r.fn(c, "out_init"),
            out_init_data=list(c.get("out_init_data", [])),
        )
        net.add_process(lambda: combine_run(cfg, ins, outs), f"combine-{index}")
    elif kind == "group":
        gcfg = GroupConfig(
            workers=int(c["workers"]),
            in_kind=c.get("in", "any"),
            out_kind=c.get("out", "any"),
            per_worker_modifiers=c.get("per_worker_modifiers"),
            synchronised=bool(c.get("synchronised", False)),
        )
        if gcfg.out_kind == "collect":
            results = [r.result_details(d) for d in c["result_details"]]
            frag = group_build(gcfg, None, ins, None, results=results)
        else:
            frag = group_build(
                gcfg, r.fn(c, "function", required=True), ins, outs,
                data_modifier=list(c.get("data_modifier", [])),
                local=r.local(c),
                out_data=bool(c.get("out_data", True)),
            )
        net.add_fragment(frag)
    elif kind == "pipeline":
        result = r.result_details(c["result"]) if c.get("result") else None
        pcfg = PipelineConfig(
            stages=int(c["stages"]),
            stage_ops=[r.fn({"op": op}, "op", required=True)
                       for op in c["stage_ops"]],
            stage_modifiers=c.get("stage_modifiers"),
            result=result,
        )
        frag = pipeline_build(pcfg, ins, outs)
        net.add_fragment(frag)
    elif kind == "composite":
        pattern = c["pattern"]
        stage_ops = [r.fn({"op": op}, "op", required=True)
                     for op in c["stage_ops"]]
        results = [r.result_details(d) for d in c["result_details"]]
        if pattern == GROUP_OF_PIPELINE_COLLECTS:
            frag = composite_build(
                pattern, stages=int(c["stages"]), stage_ops=stage_ops,
                result_details=results, groups=int(c["groups"]), cin=ins)
        else:
            frag = composite_build(
                pattern, stages=int(c["stages"]), stage_ops=stage_ops,
                result_details=results, workers=int(c["workers"]),
                e_details=r.emit_details(c["emit"]))
        net.add_fragment(frag)
    elif kind == "multicoreEngine":
        cfg = EngineConfig(
            nodes=int(c["nodes"]),
            partition=r.fn(c, "partition", required=True),
            calculation=r.fn(c, "calculation", required=True),
            update=r.fn(c, "update", required=True),
            error=r.fn(c, "error"),
            error_margin=c.get("error_margin"),
            iterations=c.get("iterations"),
            final_out=bool(c.get("final_out", True)),
            check_writes=bool(c.get("check_writes", False)),
        )
        log = _log_ctx(desc, reg, log_channel, clock)
        net.add_process(lambda: multicore_engine_run(cfg, ins, outs, log),
                        f"engine-{index}")
        logged += 1 if log else 0
    elif kind == "stencilEngine":
        cfg = StencilConfig(
            nodes=int(c["nodes"]),
            function=r.fn(c, "function"),
            convolution=r.fn(c, "convolution"),
            convolution_data=list(c.get("convolution_data", [])),
            partition=r.fn(c, "partition"),
            update_image_index=r.fn(c, "update_image_index"),
        )
        log = _log_ctx(desc, reg, log_channel, clock)
        net.add_process(lambda: stencil_engine_run(cfg, ins, outs, log),
                        f"engine-{index}")
        logged += 1 if log else 0
    else:
        raise AssertionError(kind)
    return logged


def run(net: RunnableNetwork, timeout: float | None = None):
    """Execute a built network once and report."""
    return net.run(timeout=timeout)
