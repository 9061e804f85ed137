"""Per-process phase logging of object flow.

Logged processes send one :class:`LogRecord` per event to a shared
``any2one`` log channel; a logger process appends them to a file (and echoes
to the console) as they arrive, so slow phases are visible while the network
runs.  A process with no log context attached creates no log channel and
sends nothing.

File format: one record per line, tab separated ::

    timestampNanos<TAB>tag<TAB>event<TAB>objectId

with objectId empty when the record has none.
"""

from __future__ import annotations

import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .protocol import Data, LogSummary, Terminator, is_terminator

EVENTS = (
    "initialised",
    "inputReady",
    "inputComplete",
    "outputReady",
    "outputComplete",
    "terminated",
)


@dataclass
class LogRecord:
    tag: str
    event: str
    timestamp_ns: int
    object_id: str = ""

    def line(self) -> str:
        return f"{self.timestamp_ns}\t{self.tag}\t{self.event}\t{self.object_id}"


class NetworkClock:
    """Monotonic nanoseconds since network start, shared by all contexts."""

    def __init__(self):
        self.t0 = time.monotonic_ns()

    def start(self) -> None:
        self.t0 = time.monotonic_ns()

    def now(self) -> int:
        return time.monotonic_ns() - self.t0


class LogContext:
    """Attaches one process to the log channel under a phase tag.

    ``prop`` extracts the logged property from a payload; without it the
    envelope's trace tag identifies the object.
    """

    def __init__(self, channel, tag: str, clock: NetworkClock,
                 prop: Callable[[object], str] | None = None):
        self.channel = channel
        self.tag = tag
        self.clock = clock
        self.prop = prop
        self.records = 0

    def object_id(self, message) -> str:
        if message is None:
            return ""
        if isinstance(message, Data):
            if self.prop is not None:
                return str(self.prop(message.payload))
            return message.tag
        return str(message)

    def summaries(self) -> list[LogSummary]:
        return [LogSummary(self.tag, self.records)]

    def close(self) -> None:
        """Shutdown notice: tells the logger this process is done."""
        self.channel.write(Terminator())


def log_event(ctx: LogContext, event: str, message=None) -> None:
    rec = LogRecord(ctx.tag, event, ctx.clock.now(), ctx.object_id(message))
    ctx.records += 1
    ctx.channel.write(rec)


def logger_run(cin, path: str | Path | None,
               expected_terminators: int) -> list[LogRecord]:
    """Drain the log channel to file and console until all notices arrive."""
    records: list[LogRecord] = []
    out = None
    if path is not None:
        try:
            out = open(path, "w", encoding="utf-8")
        except OSError as e:
            print(f"log file {path} unavailable ({e}); console only",
                  file=sys.stderr)
    remaining = expected_terminators
    try:
        while remaining > 0:
            m = cin.read()
            if is_terminator(m):
                remaining -= 1
                continue
            records.append(m)
            print(m.line())
            if out is not None:
                out.write(m.line() + "\n")
    finally:
        if out is not None:
            out.close()
    return records


def parse_log_file(path: str | Path) -> list[LogRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line:
            continue
        ts, tag, event, object_id = line.split("\t")
        records.append(LogRecord(tag, event, int(ts), object_id))
    return records
