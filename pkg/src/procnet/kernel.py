"""Process-execution substrate: rendezvous channels, alternation, barriers.

Processes are plain zero-argument callables run on OS threads; they hold
their channel ends as closure state.  All inter-process communication goes
through unbuffered channels: a write blocks until a matching read has taken
the message, so neither side ever proceeds alone.  Channel kinds:

* ``one2one`` - a single writer and a single reader.
* ``any2one`` - many writers, one reader; writers queue first-in-first-out.
* ``one2any`` - one writer, many readers; each message is taken by exactly
  one reader.

A network shuts down cooperatively: on a fatal error every channel and
barrier of the network is poisoned, and any process blocked on a poisoned
primitive wakes with :class:`NetworkShutdown` and unwinds.
"""

from __future__ import annotations

import random
import sys
import threading
import time
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Sequence

ONE2ONE = "one2one"
ANY2ONE = "any2one"
ONE2ANY = "one2any"
_KINDS = (ONE2ONE, ANY2ONE, ONE2ANY)

# Reserved status codes; user callbacks use their own negative codes.
UNEXPECTED_ERROR = -1
CONTRACT_ERROR = -2
TIMEOUT_ERROR = -3
SHUTDOWN_ERROR = -4


class FatalError(Exception):
    """A process failed; carries the negative code that aborts the network."""

    def __init__(self, code: int, message: str = ""):
        super().__init__(f"fatal error {code}: {message}")
        self.code = code
        self.message = message


class NetworkShutdown(Exception):
    """Raised in processes blocked on a poisoned channel or barrier."""

    def __init__(self, code: int, message: str = ""):
        super().__init__(f"network shutdown ({code}): {message}")
        self.code = code
        self.message = message


# ---------------------------------------------------------------------------
# scheduling jitter, used by tests to randomise interleavings

class _Jitter:
    def __init__(self, seed: int, prob: float, max_us: int):
        self._rng = random.Random(seed)
        self._lock = threading.Lock()
        self.prob = prob
        self.max_us = max_us

    def maybe_sleep(self) -> None:
        with self._lock:
            r = self._rng.random()
            d = self._rng.random()
        if r < self.prob:
            time.sleep(d * self.max_us * 1e-6)


_jitter: _Jitter | None = None


@contextmanager
def schedule_jitter(seed: int, prob: float = 0.25, max_us: int = 100):
    """Randomise channel timing (and the interpreter switch interval).

    Deterministic per seed in the amount of delay injected, not in the
    resulting schedule; used by stress tests to explore interleavings.
    """
    global _jitter
    old_interval = sys.getswitchinterval()
    _jitter = _Jitter(seed, prob, max_us)
    sys.setswitchinterval(1e-5)
    try:
        yield
    finally:
        _jitter = None
        sys.setswitchinterval(old_interval)


def _maybe_jitter() -> None:
    j = _jitter
    if j is not None:
        j.maybe_sleep()


# ---------------------------------------------------------------------------
# channels

class _Slot:
    __slots__ = ("message", "done")

    def __init__(self, message):
        self.message = message
        self.done = False


class _AltSignal:
    """Wakeup relay shared by the channels of one Alternative."""

    def __init__(self):
        self.cond = threading.Condition()
        self.version = 0

    def bump(self) -> None:
        with self.cond:
            self.version += 1
            self.cond.notify_all()


class Channel:
    """Unbuffered rendezvous channel.

    ``write`` returns only once a reader has taken the message; by contract
    the writer never touches the transferred payload again.  Pending writers
    queue first-in-first-out, and each queued message is taken by exactly one
    reader, which covers all three channel kinds with one mechanism.

    ``monitor``, when set, is called with every transferred message while the
    channel lock is held; tests use it to check protocol ordering.
    """

    def __init__(self, kind: str = ONE2ONE):
        if kind not in _KINDS:
            raise ValueError(f"unknown channel kind {kind!r}")
        self.kind = kind
        self._cond = threading.Condition()
        self._slots: deque[_Slot] = deque()
        self._poison: tuple[int, str] | None = None
        self._alt_signals: list[_AltSignal] = []
        self.monitor: Callable[[Any], None] | None = None

    def write(self, message) -> None:
        _maybe_jitter()
        slot = _Slot(message)
        with self._cond:
            self._raise_if_poisoned()
            self._slots.append(slot)
            self._cond.notify_all()
        self._bump_alts()
        with self._cond:
            while not slot.done:
                if self._poison is not None:
                    raise NetworkShutdown(*self._poison)
                self._cond.wait()

    def read(self):
        _maybe_jitter()
        with self._cond:
            while not self._slots:
                self._raise_if_poisoned()
                self._cond.wait()
            self._raise_if_poisoned()
            slot = self._slots.popleft()
            slot.done = True
            if self.monitor is not None:
                self.monitor(slot.message)
            self._cond.notify_all()
            return slot.message

    def poison(self, code: int = SHUTDOWN_ERROR, message: str = "") -> None:
        with self._cond:
            if self._poison is None:
                self._poison = (code, message)
            self._cond.notify_all()
        self._bump_alts()

    @property
    def poisoned(self) -> bool:
        return self._poison is not None

    def pending(self) -> bool:
        with self._cond:
            return bool(self._slots)

    def _raise_if_poisoned(self) -> None:
        if self._poison is not None:
            raise NetworkShutdown(*self._poison)

    def _attach_alt(self, signal: _AltSignal) -> None:
        with self._cond:
            self._alt_signals.append(signal)

    def _bump_alts(self) -> None:
        for s in self._alt_signals:
            s.bump()


ChannelList = Sequence[Channel]


def channel_new(kind: str = ONE2ONE) -> Channel:
    return Channel(kind)


def write(ch: Channel, message) -> None:
    ch.write(message)


def read(ch: Channel):
    return ch.read()


# ---------------------------------------------------------------------------
# alternation

class Alternative:
    """Fair choice over a list of input channels.

    Selection uses rotating priority starting one past the last selected
    index, so an input that is continuously ready is picked at least once in
    every N consecutive calls.
    """

    def __init__(self, inputs: ChannelList):
        if not inputs:
            raise ValueError("Alternative needs at least one input")
        self._inputs = list(inputs)
        self._signal = _AltSignal()
        self._last = len(self._inputs) - 1
        for ch in self._inputs:
            ch._attach_alt(self._signal)

    def select(self) -> int:
        sig = self._signal
        with sig.cond:
            while True:
                v0 = sig.version
                n = len(self._inputs)
                for off in range(1, n + 1):
                    i = (self._last + off) % n
                    ch = self._inputs[i]
                    if ch.poisoned:
                        raise NetworkShutdown(*ch._poison)
                    if ch.pending():
                        self._last = i
                        return i
                while sig.version == v0:
                    sig.cond.wait()


def alt_select(inputs: ChannelList) -> int:
    """One-shot fair select; persistent readers should hold an Alternative."""
    return Alternative(inputs).select()


# ---------------------------------------------------------------------------
# barriers

class Barrier:
    """Reusable synchronisation point for a fixed party count."""

    def __init__(self, parties: int):
        if parties < 1:
            raise ValueError("barrier parties must be >= 1")
        self.parties = parties
        self._barrier = threading.Barrier(parties)
        self._poison: tuple[int, str] | None = None

    def sync(self) -> None:
        try:
            self._barrier.wait()
        except threading.BrokenBarrierError:
            code, msg = self._poison or (SHUTDOWN_ERROR, "barrier aborted")
            raise NetworkShutdown(code, msg) from None

    def poison(self, code: int = SHUTDOWN_ERROR, message: str = "") -> None:
        if self._poison is None:
            self._poison = (code, message)
        self._barrier.abort()


def barrier_sync(b: Barrier) -> None:
    b.sync()


# ---------------------------------------------------------------------------
# parallel execution

@dataclass
class ProcessHandle:
    """Completion record for one process body."""

    tag: str
    status: str  # "ok" | "error"
    code: int = 0
    message: str = ""
    result: Any = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def run_parallel(
    bodies: Iterable[Callable[[], Any]],
    *,
    poison_on_error: Iterable = (),
    timeout: float | None = None,
    tags: Sequence[str] | None = None,
) -> list[ProcessHandle]:
    """Run process bodies in parallel; return their completion statuses.

    The first body to fail poisons everything in ``poison_on_error`` so that
    blocked processes wake up and unwind.  ``timeout`` (seconds) poisons the
    same set if the network has not terminated in time; the affected handles
    report ``TIMEOUT_ERROR``.
    """
    bodies = list(bodies)
    poison_set = list(poison_on_error)
    handles = [
        ProcessHandle(
            tag=(tags[i] if tags else getattr(b, "__name__", "proc") + f"-{i}"),
            status="ok",
        )
        for i, b in enumerate(bodies)
    ]
    if not bodies:
        return handles

    first_error = threading.Lock()
    poisoned = [False]

    def trigger(code: int, message: str) -> None:
        with first_error:
            if poisoned[0]:
                return
            poisoned[0] = True
        for target in poison_set:
            target.poison(code, message)

    def runner(i: int, body: Callable[[], Any]) -> None:
        h = handles[i]
        try:
            h.result = body()
        except FatalError as e:
            h.status, h.code, h.message = "error", e.code, e.message
            print(f"process {h.tag} failed with code {e.code}: {e.message}",
                  file=sys.stderr)
            trigger(e.code, e.message)
        except NetworkShutdown as e:
            h.status, h.code, h.message = "error", e.code, e.message
        except Exception as e:  # noqa: BLE001 - any escape aborts the network
            h.status, h.code, h.message = "error", UNEXPECTED_ERROR, repr(e)
            print(f"process {h.tag} raised {e!r}", file=sys.stderr)
            trigger(UNEXPECTED_ERROR, repr(e))

    threads = [
        threading.Thread(target=runner, args=(i, b), daemon=True)
        for i, b in enumerate(bodies)
    ]
    for t in threads:
        t.start()
    deadline = None if timeout is None else time.monotonic() + timeout
    for i, t in enumerate(threads):
        remaining = None if deadline is None else max(0.0, deadline - time.monotonic())
        t.join(remaining)
        if t.is_alive():
            trigger(TIMEOUT_ERROR, f"network timed out after {timeout}s")
            t.join(5.0)
            if t.is_alive():
                handles[i].status = "error"
                handles[i].code = TIMEOUT_ERROR
                handles[i].message = "process did not unwind after timeout"
    return handles


def first_error_code(handles: Sequence[ProcessHandle]) -> int:
    """First negative code among handles, or 0 when all completed."""
    for h in handles:
        if not h.ok:
            return h.code
    return 0
