"""Connector processes: spreaders (one input, many outputs) and reducers
(many inputs, one output).

Connectors route messages but never compute on payloads.  Every policy is
termination-correct: a spreader delivers exactly one terminator to each of
its ``destinations`` consumers, and a reducer forwards a single merged
terminator downstream only after consuming one from every source.

Cast policies hand each output an independent deep clone of the payload
(``payload.clone()`` when the type provides it, ``copy.deepcopy`` otherwise)
so that no two processes ever share a mutable object.
"""

from __future__ import annotations

import copy
import threading
from dataclasses import dataclass, field
from typing import Any, Callable

from .kernel import CONTRACT_ERROR, Alternative, Channel, FatalError
from .protocol import Data, Terminator, check_rc, is_terminator, terminator_merge
from .terminals import LocalDetails

FAN_ANY = "fan-any"
FAN_LIST = "fan-list-roundrobin"
SEQCAST = "seqcast"
PARCAST = "parcast"
_SPREAD_POLICIES = (FAN_ANY, FAN_LIST, SEQCAST, PARCAST)

FAN_ONE = "fan-one"
FAIR_ALT = "fair-alt"
ROUNDROBIN_MERGE = "roundrobin-merge"
SORTED_MERGE = "sorted-merge"
_REDUCE_POLICIES = (FAN_ONE, FAIR_ALT, ROUNDROBIN_MERGE, SORTED_MERGE)


@dataclass
class SpreaderConfig:
    destinations: int
    policy: str = FAN_ANY

    def __post_init__(self):
        if self.destinations < 1:
            raise ValueError("spreader needs at least one destination")
        if self.policy not in _SPREAD_POLICIES:
            raise ValueError(f"unknown spreader policy {self.policy!r}")


@dataclass
class ReducerConfig:
    sources: int
    policy: str = FAN_ONE
    key: Callable[[Any], Any] | None = None  # sorted-merge only

    def __post_init__(self):
        if self.sources < 1:
            raise ValueError("reducer needs at least one source")
        if self.policy not in _REDUCE_POLICIES:
            raise ValueError(f"unknown reducer policy {self.policy!r}")
        if self.policy == SORTED_MERGE and self.key is None:
            raise ValueError("sorted-merge needs a key extractor")


def clone_payload(payload):
    clone = getattr(payload, "clone", None)
    if callable(clone):
        return clone()
    try:
        return copy.deepcopy(payload)
    except Exception as e:  # noqa: BLE001 - surfaced as a network error
        raise FatalError(CONTRACT_ERROR, f"payload clone failed: {e!r}")


def _cast_copies(m: Data, n: int) -> list[Data]:
    return [Data(clone_payload(m.payload), tag=m.tag) for _ in range(n)]


def spread_run(cfg: SpreaderConfig, cin: Channel, outs) -> None:
    """Route one input stream to ``destinations`` consumers.

    ``outs`` is a single shared channel end for ``fan-any`` and a channel
    list of matching arity for every other policy.
    """
    n = cfg.destinations
    if cfg.policy == FAN_ANY:
        if isinstance(outs, Channel):
            out = outs
        elif len(outs) == 1:
            out = outs[0]
        else:
            raise FatalError(CONTRACT_ERROR, "fan-any takes one shared output end")
        while True:
            m = cin.read()
            if is_terminator(m):
                # every consumer must see a terminator exactly once
                out.write(m)
                for _ in range(n - 1):
                    out.write(Terminator())
                return
            out.write(m)

    if len(outs) != n:
        raise FatalError(
            CONTRACT_ERROR,
            f"spreader has {n} destinations but {len(outs)} output ends",
        )

    if cfg.policy == FAN_LIST:
        i = 0
        while True:
            m = cin.read()
            if is_terminator(m):
                # terminator to the current output, then the remaining ones
                for k in range(n):
                    outs[(i + k) % n].write(m if k == 0 else Terminator())
                return
            outs[i].write(m)
            i = (i + 1) % n
    elif cfg.policy == SEQCAST:
        while True:
            m = cin.read()
            if is_terminator(m):
                outs[0].write(m)
                for out in outs[1:]:
                    out.write(Terminator())
                return
            for out, c in zip(outs, _cast_copies(m, n)):
                out.write(c)
    elif cfg.policy == PARCAST:
        while True:
            m = cin.read()
            if is_terminator(m):
                outs[0].write(m)
                for out in outs[1:]:
                    out.write(Terminator())
                return
            copies = _cast_copies(m, n)
            errors = []

            def put(out, c):
                try:
                    out.write(c)
                except Exception as e:  # noqa: BLE001
                    errors.append(e)

            threads = [
                threading.Thread(target=put, args=(out, c), daemon=True)
                for out, c in zip(outs, copies)
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            if errors:
                raise errors[0]


def reduce_run(cfg: ReducerConfig, ins, out: Channel) -> None:
    """Merge ``sources`` input streams into one, coalescing terminators."""
    if cfg.policy == FAN_ONE:
        ch = ins if isinstance(ins, Channel) else ins[0]
        ut = Terminator()
        remaining = cfg.sources
        while remaining:
            m = ch.read()
            if is_terminator(m):
                ut = terminator_merge(ut, m)
                remaining -= 1
            else:
                out.write(m)
        out.write(ut)
        return

    if len(ins) != cfg.sources:
        raise FatalError(
            CONTRACT_ERROR,
            f"reducer has {cfg.sources} sources but {len(ins)} input ends",
        )
    if cfg.policy == FAIR_ALT:
        _reduce_fair_alt(list(ins), out)
    elif cfg.policy == ROUNDROBIN_MERGE:
        _reduce_roundrobin(list(ins), out)
    else:
        _reduce_sorted(list(ins), out, cfg.key)


def _reduce_fair_alt(ins: list[Channel], out: Channel) -> None:
    live = list(ins)
    ut = Terminator()
    alt = Alternative(live)
    while live:
        i = alt.select()
        m = live[i].read()
        if is_terminator(m):
            ut = terminator_merge(ut, m)
            live.pop(i)
            if live:
                alt = Alternative(live)
        else:
            out.write(m)
    out.write(ut)


def _reduce_roundrobin(ins: list[Channel], out: Channel) -> None:
    live = list(ins)
    ut = Terminator()
    i = 0
    while live:
        m = live[i % len(live)].read()
        if is_terminator(m):
            ut = terminator_merge(ut, m)
            live.pop(i % len(live))
        else:
            out.write(m)
            i += 1
    out.write(ut)


def _reduce_sorted(ins: list[Channel], out: Channel, key) -> None:
    # heads[i] holds the next pending message of input i
    heads: list = [None] * len(ins)
    last_key: list = [None] * len(ins)
    done = [False] * len(ins)
    ut = Terminator()

    def refill(i):
        m = ins[i].read()
        if is_terminator(m):
            done[i] = True
            heads[i] = None
            return m
        k = key(m.payload)
        if last_key[i] is not None and k < last_key[i]:
            raise FatalError(
                CONTRACT_ERROR,
                f"sorted-merge input {i} is not nondecreasing under the key",
            )
        last_key[i] = k
        heads[i] = m
        return None

    for i in range(len(ins)):
        t = refill(i)
        if t is not None:
            ut = terminator_merge(ut, t)
    while not all(done):
        best = None
        for i, m in enumerate(heads):
            if m is None:
                continue
            k = key(m.payload)
            if best is None or k < best[0]:  # stable: strict < keeps lowest index
                best = (k, i)
        _, i = best
        out.write(heads[i])
        t = refill(i)
        if t is not None:
            ut = terminator_merge(ut, t)
    out.write(ut)


@dataclass
class CombineConfig:
    """Fold every incoming payload into one combined output object.

    ``combine(acc, payload)`` folds each input into the accumulator built
    from ``local``; once all terminators have arrived, ``out_factory()``
    builds the single output payload and ``out_init(out, acc, out_init_data)``
    fills it from the accumulator.
    """

    sources: int
    local: LocalDetails
    out_factory: Callable[[], Any]
    combine: Callable[[Any, Any], int]
    out_init: Callable[[Any, Any, list], int] | None = None
    out_init_data: list = field(default_factory=list)


def combine_run(cfg: CombineConfig, ins, out: Channel) -> None:
    acc = cfg.local.make()
    channels = [ins] if isinstance(ins, Channel) else list(ins)
    ut = Terminator()
    remaining = cfg.sources
    live = list(channels)
    i = 0
    while remaining:
        m = live[i % len(live)].read()
        if is_terminator(m):
            ut = terminator_merge(ut, m)
            remaining -= 1
            if not isinstance(ins, Channel):
                live.pop(i % len(live))
        else:
            check_rc(cfg.combine(acc, m.payload), "combine")
            i += 1
    combined = cfg.out_factory()
    if cfg.out_init is not None:
        check_rc(cfg.out_init(combined, acc, cfg.out_init_data), "combine output init")
    out.write(Data(combined, tag="combined"))
    out.write(ut)
