"""Composable process networks over rendezvous channels.

Terminal processes feed data in and collect results out, functional
processes transform payloads, connector processes route them, and a
declarative builder wires whole networks from a validated description.
"""

from .kernel import (
    ANY2ONE,
    ONE2ANY,
    ONE2ONE,
    Alternative,
    Barrier,
    Channel,
    FatalError,
    NetworkShutdown,
    ProcessHandle,
    channel_new,
    run_parallel,
    schedule_jitter,
)
from .protocol import (
    COMPLETED_OK,
    NORMAL_CONTINUATION,
    NORMAL_TERMINATION,
    Data,
    Terminator,
    is_terminator,
    terminator_merge,
)

__all__ = [
    "ANY2ONE",
    "ONE2ANY",
    "ONE2ONE",
    "Alternative",
    "Barrier",
    "Channel",
    "FatalError",
    "NetworkShutdown",
    "ProcessHandle",
    "channel_new",
    "run_parallel",
    "schedule_jitter",
    "COMPLETED_OK",
    "NORMAL_CONTINUATION",
    "NORMAL_TERMINATION",
    "Data",
    "Terminator",
    "is_terminator",
    "terminator_merge",
]
