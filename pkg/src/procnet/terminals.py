"""Terminal processes: data sources (Emit) and result sinks (Collect).

User code plugs in through small callback bundles.  Callbacks receive plain
objects and parameter lists and report their outcome with the status codes
from :mod:`procnet.protocol`; a source's ``create`` callback additionally
decides between emitting another payload (``NORMAL_CONTINUATION``) and
ending the stream (``NORMAL_TERMINATION``).

The same callbacks can be driven by :func:`sequential_loop` without any
processes or channels, which is how parallel results are checked against a
plain sequential run of the identical user code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import SimpleNamespace
from typing import Any, Callable

from .kernel import CONTRACT_ERROR, Channel, FatalError
from .protocol import (
    NORMAL_CONTINUATION,
    NORMAL_TERMINATION,
    Data,
    Terminator,
    check_rc,
    is_terminator,
)
from .tracelog import LogContext, log_event


@dataclass
class LocalDetails:
    """Builds and initialises a process-private helper object."""

    factory: Callable[[], Any]
    init: Callable[[Any, list], int] | None = None
    init_data: list = field(default_factory=list)

    def make(self) -> Any:
        obj = self.factory()
        if self.init is not None:
            check_rc(self.init(obj, self.init_data), "local init")
        return obj


@dataclass
class EmitDetails:
    """Callbacks describing how a source creates its payload stream.

    ``init(ctx, init_data)`` runs once against a fresh mutable context (a
    SimpleNamespace private to the source).  Each iteration builds a payload
    with ``factory()`` and calls ``create(payload, ctx, create_data)`` --
    plus the initialised local helper as a final argument when ``local`` is
    set.  ``tag_of(payload)`` overrides the default ``emit-<n>`` trace tag.
    """

    factory: Callable[[], Any]
    create: Callable
    create_data: list = field(default_factory=list)
    init: Callable | None = None
    init_data: list = field(default_factory=list)
    local: LocalDetails | None = None
    tag_of: Callable[[Any], str] | None = None


@dataclass
class ResultDetails:
    """Callbacks describing how a sink accumulates and finalises results.

    The accumulator object comes from ``factory()``; ``collect(acc, payload)``
    runs per payload and ``finalise(acc, finalise_data)`` exactly once after
    the terminator arrives.
    """

    factory: Callable[[], Any]
    collect: Callable[[Any, Any], int]
    finalise: Callable[[Any, list], int] | None = None
    finalise_data: list = field(default_factory=list)
    init: Callable | None = None
    init_data: list = field(default_factory=list)


@dataclass
class CollectOutcome:
    result: Any
    terminator_logs: list


def _emit_loop(d: EmitDetails, out: Channel, with_local: bool,
               log: LogContext | None = None) -> int:
    ctx = SimpleNamespace()
    if log:
        log_event(log, "initialised")
    if d.init is not None:
        check_rc(d.init(ctx, d.init_data), "emit init")
    local = None
    if with_local:
        if d.local is None:
            raise FatalError(CONTRACT_ERROR, "emit-with-local needs local details")
        local = d.local.make()
    seq = 0
    while True:
        payload = d.factory()
        if with_local:
            rc = d.create(payload, ctx, d.create_data, local)
        else:
            rc = d.create(payload, ctx, d.create_data)
        check_rc(rc, "emit create")
        if rc == NORMAL_TERMINATION:
            break
        if rc != NORMAL_CONTINUATION:
            raise FatalError(
                CONTRACT_ERROR,
                f"emit create returned {rc}; expected continuation or termination",
            )
        tag = d.tag_of(payload) if d.tag_of else f"emit-{seq}"
        m = Data(payload, tag=tag)
        if log:
            log_event(log, "outputReady", m)
        out.write(m)
        if log:
            log_event(log, "outputComplete", m)
        seq += 1
    out.write(Terminator(logs=log.summaries() if log else []))
    if log:
        log_event(log, "terminated")
        log.close()
    return seq


def emit_run(d: EmitDetails, out: Channel, log: LogContext | None = None) -> int:
    """Emit zero or more Data messages followed by exactly one Terminator."""
    return _emit_loop(d, out, with_local=False, log=log)


def emit_with_local_run(d: EmitDetails, out: Channel,
                        log: LogContext | None = None) -> int:
    """Like emit_run, with an initialised local helper passed to create."""
    return _emit_loop(d, out, with_local=True, log=log)


def collect_run(d: ResultDetails, cin: Channel,
                log: LogContext | None = None) -> CollectOutcome:
    """Collect payloads until the terminator, then finalise exactly once."""
    acc = d.factory()
    if log:
        log_event(log, "initialised")
    if d.init is not None:
        check_rc(d.init(acc, d.init_data), "collect init")
    while True:
        if log:
            log_event(log, "inputReady")
        m = cin.read()
        if is_terminator(m):
            if d.finalise is not None:
                check_rc(d.finalise(acc, d.finalise_data), "collect finalise")
            logs = list(m.logs)
            if log:
                log_event(log, "terminated")
                logs += log.summaries()
                log.close()
            return CollectOutcome(result=acc, terminator_logs=logs)
        if log:
            log_event(log, "inputComplete", m)
        check_rc(d.collect(acc, m.payload), "collect")


def sequential_loop(e: EmitDetails, r: ResultDetails,
                    ops: list[Callable] | None = None) -> Any:
    """Drive the same callbacks in a plain loop, no processes involved.

    ``ops`` are applied to each payload in order, standing in for the worker
    stages of the parallel network.  Returns the result accumulator.
    """
    ctx = SimpleNamespace()
    if e.init is not None:
        check_rc(e.init(ctx, e.init_data), "emit init")
    local = e.local.make() if e.local is not None else None
    acc = r.factory()
    if r.init is not None:
        check_rc(r.init(acc, r.init_data), "collect init")
    while True:
        payload = e.factory()
        if local is not None:
            rc = e.create(payload, ctx, e.create_data, local)
        else:
            rc = e.create(payload, ctx, e.create_data)
        check_rc(rc, "emit create")
        if rc == NORMAL_TERMINATION:
            break
        for op in ops or []:
            check_rc(op(payload, []), "stage op")
        check_rc(r.collect(acc, payload), "collect")
    if r.finalise is not None:
        check_rc(r.finalise(acc, r.finalise_data), "collect finalise")
    return acc
