"""Message model and the network-wide graceful-termination protocol.

Channel traffic is either a :class:`Data` envelope around an application
payload or a :class:`Terminator`.  A terminator is the last message ever
sent on a channel; it sweeps through the network shutting every process
down in order, and collects per-process logging summaries on the way.

User callbacks signal their outcome with small integer codes: the constants
below for the normal cases, and any strictly negative integer for an error,
which aborts the whole network with that code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .kernel import CONTRACT_ERROR, FatalError

COMPLETED_OK = 0
NORMAL_CONTINUATION = 1
NORMAL_TERMINATION = 2


def is_error(code: int) -> bool:
    return code < 0


@dataclass
class LogSummary:
    """Per-process record count carried inside a terminator."""

    tag: str
    records: int


@dataclass
class Data:
    """Envelope for one application payload travelling through the network.

    ``tag`` is a trace identifier that stays with the payload across its
    whole traversal; sources assign it, everything else forwards it.
    """

    payload: Any
    tag: str = ""


@dataclass
class Terminator:
    """The final message on a channel; carries accumulated log summaries."""

    logs: list = field(default_factory=list)


Message = Data | Terminator


def is_terminator(m: Message) -> bool:
    """True for the terminator variant; the payload of a Data never counts."""
    return isinstance(m, Terminator)


def terminator_merge(a: Terminator, b: Terminator) -> Terminator:
    """Coalesce two terminators, concatenating their log summaries."""
    if not is_terminator(a) or not is_terminator(b):
        raise FatalError(CONTRACT_ERROR, "terminator_merge needs two terminators")
    return Terminator(logs=list(a.logs) + list(b.logs))


def check_rc(rc: int, context: str) -> int:
    """Abort the network when a user callback reports an error code."""
    if rc is None:
        raise FatalError(CONTRACT_ERROR, f"{context} returned None instead of a status code")
    if rc < 0:
        raise FatalError(rc, f"{context} failed")
    return rc
