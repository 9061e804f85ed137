"""Goldbach coverage: the largest even number reachable without a gap.

Two phases in one network.  First, a source with a local sieve emits the
seed primes up to ``isqrt(max_prime) + 1``; a worker group marks their
multiples across partitioned segments of [2, max_prime], and a combiner
folds the unmarked numbers into one prime table.  Second, the table is
deep-cloned to every checker worker, each of which tests the evens of its
own partition of [4, 2 * max_prime) for a decomposition into two primes
from the table; the collector reports the largest M such that every even
number in [4, M] decomposed.

Checkers only know primes up to ``max_prime``, so an even E counts as
covered exactly when E = p + q with both p and q at most ``max_prime``;
the brute-force oracle in the tests applies the same bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..connectors import (
    PARCAST,
    ROUNDROBIN_MERGE,
    SEQCAST,
    CombineConfig,
    ReducerConfig,
    SpreaderConfig,
    combine_run,
    reduce_run,
    spread_run,
)
from ..functionals import GroupConfig, RunnableNetwork, group_build
from ..protocol import COMPLETED_OK, NORMAL_CONTINUATION, NORMAL_TERMINATION
from ..terminals import (
    EmitDetails,
    LocalDetails,
    ResultDetails,
    collect_run,
    emit_with_local_run,
)


@dataclass
class GoldbachConfig:
    max_prime: int = 5000
    p_workers: int = 1  # sieve segments; one is typically best
    g_workers: int = 2  # coverage checkers


# --- phase one: distributed sieve ------------------------------------------

class PrimeSeed:
    __slots__ = ("value",)

    def __init__(self):
        self.value = 0


class SeedSieve:
    """Serves the primes below the filter bound, one per call."""

    def __init__(self):
        self.limit = 0
        self.candidate = 1

    def next_prime(self):
        while True:
            self.candidate += 1
            if self.candidate > self.limit:
                return None
            if all(self.candidate % d for d in
                   range(2, int(math.isqrt(self.candidate)) + 1)):
                return self.candidate


def init_seed_sieve(s, params):
    s.limit = params[0]
    return COMPLETED_OK


def create_prime(payload, ctx, params, local):
    p = local.next_prime()
    if p is None:
        return NORMAL_TERMINATION
    payload.value = p
    return NORMAL_CONTINUATION


class SieveSegment:
    """One partition of [2, max_prime] with composite marks."""

    def __init__(self):
        self.lo = 0
        self.hi = 0
        self.marks = None

    def unmarked(self):
        return (np.flatnonzero(~self.marks) + self.lo).tolist()


def init_segment(seg, params):
    index, workers, max_prime = params
    span = max_prime - 1  # numbers 2..max_prime
    step = -(-span // workers)
    seg.lo = 2 + index * step
    seg.hi = min(2 + (index + 1) * step, max_prime + 1)
    seg.marks = np.zeros(max(0, seg.hi - seg.lo), dtype=bool)
    return COMPLETED_OK


def mark_multiples(payload, params, seg):
    p = payload.value
    if seg.hi <= seg.lo:
        return COMPLETED_OK
    start = max(p * p, ((seg.lo + p - 1) // p) * p)
    if start < seg.hi:
        seg.marks[start - seg.lo::p] = True
    return COMPLETED_OK


class PrimePool:
    def __init__(self):
        self.segments = []


def fold_segment(pool, seg):
    pool.segments.append(seg)
    return COMPLETED_OK


class PrimeTable:
    """The combined primes; cast policies clone it per checker."""

    def __init__(self):
        self.primes = np.zeros(0, dtype=np.int64)
        self.members = frozenset()

    def fill(self, primes):
        self.primes = np.array(sorted(primes), dtype=np.int64)
        self.members = frozenset(int(p) for p in primes)

    def clone(self):
        t = PrimeTable()
        t.primes = self.primes.copy()
        t.members = self.members
        return t


def build_table(table, pool, params):
    primes = []
    for seg in sorted(pool.segments, key=lambda s: s.lo):
        primes.extend(seg.unmarked())
    table.fill(primes)
    return COMPLETED_OK


# --- phase two: coverage check ---------------------------------------------

class CoverageRange:
    """Coverage flags for one partition of the even numbers in [4, bound)."""

    def __init__(self):
        self.first_even = 0
        self.covered = None


def init_range(rng_obj, params):
    index, workers, max_prime = params
    evens = (2 * max_prime - 4) // 2  # evens 4, 6, ..., 2*max_prime - 2
    step = -(-evens // workers)
    lo = min(index * step, evens)
    hi = min((index + 1) * step, evens)
    rng_obj.first_even = 4 + 2 * lo
    rng_obj.covered = np.zeros(hi - lo, dtype=bool)
    return COMPLETED_OK


def decomposes(e: int, table: PrimeTable) -> bool:
    for p in table.primes:
        p = int(p)
        if p > e // 2:
            return False
        if (e - p) in table.members:
            return True
    return False


def check_range(payload, params, rng_obj):
    for i in range(len(rng_obj.covered)):
        rng_obj.covered[i] = decomposes(rng_obj.first_even + 2 * i, payload)
    return COMPLETED_OK


class GoldbachResult:
    def __init__(self):
        self.ranges = []
        self.max_continuous = 0

    def finish(self):
        flags = []
        for r in sorted(self.ranges, key=lambda r: r.first_even):
            flags.extend(r.covered.tolist())
        m = 0
        for i, ok in enumerate(flags):
            if not ok:
                break
            m = 4 + 2 * i
        self.max_continuous = m


def collect_range(acc, rng_obj):
    acc.ranges.append(rng_obj)
    return COMPLETED_OK


def finalise_result(acc, params):
    acc.finish()
    return COMPLETED_OK


# --- network ----------------------------------------------------------------

def seed_filter(max_prime: int) -> int:
    return math.isqrt(max_prime) + 1


def network(cfg: GoldbachConfig) -> RunnableNetwork:
    mp = cfg.max_prime
    if mp < 4:
        raise ValueError("max_prime must be at least 4")
    pw, gw = cfg.p_workers, cfg.g_workers
    net = RunnableNetwork()

    emit_out = net.new_channel()
    sieve_in = [net.new_channel() for _ in range(pw)]
    sieve_out = [net.new_channel() for _ in range(pw)]
    combine_in = net.new_channel()
    combine_out = net.new_channel()
    check_in = [net.new_channel() for _ in range(gw)]
    check_out = [net.new_channel() for _ in range(gw)]
    collect_in = net.new_channel()

    e = EmitDetails(
        factory=PrimeSeed,
        create=create_prime,
        local=LocalDetails(factory=SeedSieve, init=init_seed_sieve,
                           init_data=[seed_filter(mp)]),
    )
    net.add_process(lambda: emit_with_local_run(e, emit_out), "emit")

    cast1 = SpreaderConfig(pw, SEQCAST)
    net.add_process(lambda: spread_run(cast1, emit_out, sieve_in), "cast-seeds")

    sieve_group = group_build(
        GroupConfig(workers=pw, in_kind="list", out_kind="list"),
        mark_multiples, sieve_in, sieve_out,
        local=LocalDetails(factory=SieveSegment, init=init_segment,
                           init_data=[pw, mp]),
        out_data=False,
    )
    net.add_fragment(sieve_group)

    red1 = ReducerConfig(pw, ROUNDROBIN_MERGE)
    net.add_process(lambda: reduce_run(red1, sieve_out, combine_in), "merge-segments")

    comb = CombineConfig(
        sources=1,
        local=LocalDetails(factory=PrimePool),
        out_factory=PrimeTable,
        combine=fold_segment,
        out_init=build_table,
    )
    net.add_process(lambda: combine_run(comb, combine_in, combine_out), "combine")

    cast2 = SpreaderConfig(gw, PARCAST)
    net.add_process(lambda: spread_run(cast2, combine_out, check_in), "cast-table")

    check_group = group_build(
        GroupConfig(workers=gw, in_kind="list", out_kind="list"),
        check_range, check_in, check_out,
        local=LocalDetails(factory=CoverageRange, init=init_range,
                           init_data=[gw, mp]),
        out_data=False,
    )
    net.add_fragment(check_group)

    red2 = ReducerConfig(gw, ROUNDROBIN_MERGE)
    net.add_process(lambda: reduce_run(red2, check_out, collect_in), "merge-ranges")

    r = ResultDetails(factory=GoldbachResult, collect=collect_range,
                      finalise=finalise_result)
    net.add_process(lambda: collect_run(r, collect_in), "collect", collects=True)
    return net


def run(cfg: GoldbachConfig) -> int:
    report = network(cfg).run()
    if not report.ok:
        raise RuntimeError(f"goldbach network failed with code {report.code}")
    return report.results[0].result.max_continuous


# --- independent oracles -----------------------------------------------------

def sieve_primes(limit: int) -> np.ndarray:
    marks = np.zeros(limit + 1, dtype=bool)
    marks[:2] = True
    for p in range(2, math.isqrt(limit) + 1):
        if not marks[p]:
            marks[p * p::p] = True
    return np.flatnonzero(~marks)


def brute_force_max_continuous(max_prime: int) -> int:
    """Same even range and prime bound, straight-line implementation."""
    primes = sieve_primes(max_prime)
    members = set(int(p) for p in primes)
    m = 0
    for e in range(4, 2 * max_prime, 2):
        ok = any((e - int(p)) in members for p in primes[primes <= e // 2])
        if not ok:
            break
        m = e
    return m


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % d for d in range(2, math.isqrt(n) + 1))


def decomposes_unbounded(e: int) -> bool:
    """Trial-division check with no bound on the primes."""
    return any(is_prime(p) and is_prime(e - p) for p in range(2, e // 2 + 1))


def registry():
    from ..builder import FunctionRegistry

    reg = FunctionRegistry()
    reg.register("gb.seed", PrimeSeed)
    reg.register("gb.sieve", SeedSieve)
    reg.register("gb.sieve_init", init_seed_sieve)
    reg.register("gb.create", create_prime)
    reg.register("gb.segment", SieveSegment)
    reg.register("gb.segment_init", init_segment)
    reg.register("gb.mark", mark_multiples)
    reg.register("gb.pool", PrimePool)
    reg.register("gb.fold", fold_segment)
    reg.register("gb.table", PrimeTable)
    reg.register("gb.build_table", build_table)
    reg.register("gb.range", CoverageRange)
    reg.register("gb.range_init", init_range)
    reg.register("gb.check", check_range)
    reg.register("gb.acc", GoldbachResult)
    reg.register("gb.collect", collect_range)
    reg.register("gb.finalise", finalise_result)
    return reg


def spec(cfg: GoldbachConfig) -> dict:
    mp, pw, gw = cfg.max_prime, cfg.p_workers, cfg.g_workers
    return {"nodes": [
        {"kind": "emitWithLocal", "config": {
            "factory": "gb.seed", "create": "gb.create",
            "local": {"factory": "gb.sieve", "init": "gb.sieve_init",
                      "init_data": [seed_filter(mp)]}}},
        {"kind": "spreader", "config": {"policy": "seqcast", "destinations": pw}},
        {"kind": "group", "config": {
            "workers": pw, "in": "list", "out": "list",
            "function": "gb.mark", "out_data": False,
            "local": {"factory": "gb.segment", "init": "gb.segment_init",
                      "init_data": [pw, mp]}}},
        {"kind": "reducer", "config": {
            "policy": "roundrobin-merge", "sources": pw}},
        {"kind": "combine", "config": {
            "sources": 1,
            "local": {"factory": "gb.pool"},
            "out_factory": "gb.table", "combine": "gb.fold",
            "out_init": "gb.build_table"}},
        {"kind": "spreader", "config": {"policy": "parcast", "destinations": gw}},
        {"kind": "group", "config": {
            "workers": gw, "in": "list", "out": "list",
            "function": "gb.check", "out_data": False,
            "local": {"factory": "gb.range", "init": "gb.range_init",
                      "init_data": [gw, mp]}}},
        {"kind": "reducer", "config": {
            "policy": "roundrobin-merge", "sources": gw}},
        {"kind": "collect", "config": {
            "factory": "gb.acc", "collect": "gb.collect",
            "finalise": "gb.finalise"}},
    ]}
