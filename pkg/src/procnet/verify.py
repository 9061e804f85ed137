"""Desk-scale exhaustive exploration of abstract network models.

The abstract processes mirror the runtime's repertoire - a source emitting
a fixed object chain then the terminator, round-robin spreaders, workers,
draining reducers, combiners and collectors - over named channels with
finite alphabets.  The explorer enumerates every interleaving of the
composed system under rendezvous synchronisation: an event fires only when
every process whose alphabet contains its channel offers it, with a writer
and a reader both present (channels in ``free_channels``, such as the
collector's completion self-loop, fire without a partner).

On top of the reachability graph it decides deadlock freedom (with
counterexample traces), termination (every reachable state can still reach
an all-final state), divergence (a cycle of hidden events only), and
traces-model refinement between two models under hiding.  Failures or
failures-divergences refinement is out of scope; divergence is handled
separately by cycle detection.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable

UT = "UT"
Event = tuple[str, str]  # (channel, value)
Step = tuple[str, str, str, object]  # (direction "in"/"out", channel, value, next)


class AbstractProcess:
    """A finite process term: states, offered steps, final predicate."""

    name: str = "proc"
    channels: frozenset[str] = frozenset()

    def initial(self):
        raise NotImplementedError

    def steps(self, state) -> list[Step]:
        raise NotImplementedError

    def final(self, state) -> bool:
        return False


class EmitProc(AbstractProcess):
    """Writes a fixed chain of objects, then the terminator, then stops."""

    def __init__(self, chan: str, values: list[str], forward_ut: bool = True):
        self.name = "emit"
        self.chan = chan
        self.values = list(values)
        self.forward_ut = forward_ut
        self.channels = frozenset([chan])

    def initial(self):
        return 0

    def steps(self, state):
        if state < len(self.values):
            return [("out", self.chan, self.values[state], state + 1)]
        if state == len(self.values) and self.forward_ut:
            return [("out", self.chan, UT, state + 1)]
        return []

    def final(self, state):
        return state >= len(self.values) + (1 if self.forward_ut else 0)


class SpreadProc(AbstractProcess):
    """Round-robin spreader; on the terminator, one per remaining output."""

    def __init__(self, cin: str, outs: list[str], alphabet: list[str]):
        self.name = "spread"
        self.cin = cin
        self.outs = list(outs)
        self.alphabet = list(alphabet) + [UT]
        self.channels = frozenset([cin, *outs])

    def initial(self):
        return ("idle", 0)

    def steps(self, state):
        kind = state[0]
        n = len(self.outs)
        if kind == "idle":
            _, i = state
            return [("in", self.cin, v, ("put", i, v)) for v in self.alphabet]
        if kind == "put":
            _, i, v = state
            if v == UT:
                return [("out", self.outs[i], UT, ("end", i, (i + 1) % n))]
            return [("out", self.outs[i], v, ("idle", (i + 1) % n))]
        if kind == "end":
            _, s, cur = state
            if cur == s:
                return []
            return [("out", self.outs[cur], UT, ("end", s, (cur + 1) % n))]
        raise AssertionError(state)

    def final(self, state):
        return state[0] == "end" and state[1] == state[2]


class WorkerProc(AbstractProcess):
    """Applies f to each object; forwards the terminator then stops."""

    def __init__(self, cin: str, cout: str, f: Callable[[str], str],
                 alphabet: list[str], forward_ut: bool = True):
        self.name = "worker"
        self.cin = cin
        self.cout = cout
        self.f = f
        self.alphabet = list(alphabet)
        self.forward_ut = forward_ut
        self.channels = frozenset([cin, cout])

    def initial(self):
        return ("wait",)

    def steps(self, state):
        if state[0] == "wait":
            out = []
            for v in self.alphabet:
                out.append(("in", self.cin, v, ("put", self.f(v), "wait")))
            if self.forward_ut:
                out.append(("in", self.cin, UT, ("put", UT, "done")))
            else:
                out.append(("in", self.cin, UT, ("done",)))
            return out
        if state[0] == "put":
            _, v, nxt = state
            return [("out", self.cout, v, (nxt,) if nxt == "done" else ("wait",))]
        return []

    def final(self, state):
        return state[0] == "done"


class ReduceProc(AbstractProcess):
    """Forwards from any input; after its first terminator, drains the rest
    in index order, then sends one terminator downstream.

    ``committed=True`` reproduces a defective reading that never returns to
    the full choice after forwarding: it keeps reading the first input it
    happened to pick until that input terminates, which deadlocks a farm.
    """

    def __init__(self, ins: list[str], cout: str, alphabet: list[str],
                 committed: bool = False):
        self.name = "reduce"
        self.ins = list(ins)
        self.cout = cout
        self.alphabet = list(alphabet)
        self.committed = committed
        self.channels = frozenset([*ins, cout])

    def initial(self):
        return ("choice",)

    def _accept(self, x: int, back):
        n = len(self.ins)
        out = []
        for v in self.alphabet:
            out.append(("in", self.ins[x], v, ("fwd", v, back(x))))
        out.append(("in", self.ins[x], UT, ("drain", x, (x + 1) % n)))
        return out

    def steps(self, state):
        kind = state[0]
        n = len(self.ins)
        if kind == "choice":
            back = (lambda x: ("locked", x)) if self.committed else (
                lambda x: ("choice",))
            out = []
            for x in range(n):
                out.extend(self._accept(x, back))
            return out
        if kind == "locked":
            _, x = state
            return self._accept(x, lambda _: ("locked", x))
        if kind == "fwd":
            _, v, back = state
            return [("out", self.cout, v, back)]
        if kind == "drain":
            _, s, cur = state
            if cur == s:
                return [("out", self.cout, UT, ("done",))]
            out = []
            for v in self.alphabet:
                out.append(("in", self.ins[cur], v, ("dfwd", v, s, cur)))
            out.append(("in", self.ins[cur], UT, ("drain", s, (cur + 1) % n)))
            return out
        if kind == "dfwd":
            _, v, s, cur = state
            return [("out", self.cout, v, ("drain", s, cur))]
        return []

    def final(self, state):
        return state == ("done",)


class CollectProc(AbstractProcess):
    """Consumes until the terminator, then loops on the completion event."""

    def __init__(self, cin: str, finished: str, alphabet: list[str]):
        self.name = "collect"
        self.cin = cin
        self.finished = finished
        self.alphabet = list(alphabet)
        self.channels = frozenset([cin, finished])

    def initial(self):
        return ("run",)

    def steps(self, state):
        if state == ("run",):
            out = [("in", self.cin, v, ("run",)) for v in self.alphabet]
            out.append(("in", self.cin, UT, ("fin",)))
            return out
        return [("out", self.finished, "true", ("fin",))]

    def final(self, state):
        return state == ("fin",)


class CombineProc(AbstractProcess):
    """Absorbs the stream, then emits one combined object and a terminator."""

    def __init__(self, cin: str, cout: str, alphabet: list[str]):
        self.name = "combine"
        self.cin = cin
        self.cout = cout
        self.alphabet = list(alphabet)
        self.channels = frozenset([cin, cout])

    def initial(self):
        return ("run",)

    def steps(self, state):
        if state == ("run",):
            out = [("in", self.cin, v, ("run",)) for v in self.alphabet]
            out.append(("in", self.cin, UT, ("putc",)))
            return out
        if state == ("putc",):
            return [("out", self.cout, "COMBINED", ("pututc",))]
        if state == ("pututc",):
            return [("out", self.cout, UT, ("done",))]
        return []

    def final(self, state):
        return state == ("done",)


@dataclass
class AbstractModel:
    processes: list[AbstractProcess]
    hidden: frozenset[str] = frozenset()
    free_channels: frozenset[str] = frozenset(["finished"])


@dataclass
class ExplorationResult:
    states: int
    deadlocks: list[tuple[str, ...]]
    terminated: bool
    divergent: bool
    truncated: bool
    graph: dict = field(repr=False, default_factory=dict)
    initial: object = field(repr=False, default=None)
    finals: set = field(repr=False, default_factory=set)

    @property
    def deadlock_free(self) -> bool:
        return not self.deadlocks


def _label(channel: str, value: str) -> str:
    return f"{channel}.{value}"


def explore(model: AbstractModel, state_cap: int = 1_000_000,
            hidden: Iterable[str] | None = None) -> ExplorationResult:
    """Breadth-first walk of the full interleaving graph."""
    procs = model.processes
    hidden_set = frozenset(hidden) if hidden is not None else model.hidden
    participants: dict[str, list[int]] = {}
    for i, p in enumerate(procs):
        for c in p.channels:
            participants.setdefault(c, []).append(i)

    memo: list[dict] = [dict() for _ in procs]

    def offers(i, state):
        got = memo[i].get(state)
        if got is None:
            got = {}
            for direction, c, v, nxt in procs[i].steps(state):
                got.setdefault((c, v), []).append((direction, nxt))
            memo[i][state] = got
        return got

    init = tuple(p.initial() for p in procs)
    graph: dict[tuple, list[tuple[str, tuple]]] = {}
    parents: dict[tuple, tuple | None] = {init: None}
    queue = deque([init])
    truncated = False
    while queue:
        state = queue.popleft()
        if state in graph:
            continue
        edges: list[tuple[str, tuple]] = []
        per_proc = [offers(i, s) for i, s in enumerate(state)]
        candidate_events: set[Event] = set()
        for table in per_proc:
            candidate_events.update(table.keys())
        for (c, v) in candidate_events:
            idxs = participants[c]
            options = []
            ok = True
            has_out = False
            has_in = False
            for i in idxs:
                offer = per_proc[i].get((c, v))
                if not offer:
                    ok = False
                    break
                options.append((i, offer))
                for direction, _ in offer:
                    if direction == "out":
                        has_out = True
                    else:
                        has_in = True
            if not ok:
                continue
            if c not in model.free_channels and not (has_out and has_in):
                continue
            # cartesian product over nondeterministic per-process successors
            combos = [[]]
            for i, offer in options:
                combos = [prev + [(i, nxt)] for prev in combos
                          for _, nxt in offer]
            for combo in combos:
                nxt_state = list(state)
                for i, nxt in combo:
                    nxt_state[i] = nxt
                nxt_state = tuple(nxt_state)
                edges.append((_label(c, v) if c not in hidden_set else None,
                              nxt_state))
                if nxt_state not in parents and nxt_state not in graph:
                    parents[nxt_state] = (state, _label(c, v))
                    queue.append(nxt_state)
        graph[state] = edges
        if len(graph) >= state_cap:
            truncated = True
            break

    finals = {s for s in graph
              if all(p.final(ps) for p, ps in zip(procs, s))}

    deadlocks = []
    for s, edges in graph.items():
        if not edges and s not in finals:
            deadlocks.append(_trace_to(parents, s))

    # termination: every explored state can reach an all-final state
    reverse: dict[tuple, list[tuple]] = {s: [] for s in graph}
    for s, edges in graph.items():
        for _, t in edges:
            if t in reverse:
                reverse[t].append(s)
    reachable_back = set(finals)
    stack = list(finals)
    while stack:
        s = stack.pop()
        for p in reverse[s]:
            if p not in reachable_back:
                reachable_back.add(p)
                stack.append(p)
    terminated = (not truncated and bool(finals)
                  and len(reachable_back) == len(graph))

    divergent = _has_hidden_cycle(graph) if hidden_set else False
    return ExplorationResult(
        states=len(graph),
        deadlocks=deadlocks,
        terminated=terminated,
        divergent=divergent,
        truncated=truncated,
        graph=graph,
        initial=init,
        finals=finals,
    )


def _trace_to(parents, state) -> tuple[str, ...]:
    events = []
    while parents[state] is not None:
        state, label = parents[state]
        events.append(label)
    return tuple(reversed(events))


def _has_hidden_cycle(graph) -> bool:
    WHITE, GREY, BLACK = 0, 1, 2
    color = dict.fromkeys(graph, WHITE)
    for root in graph:
        if color[root] != WHITE:
            continue
        stack = [(root, iter(graph[root]))]
        color[root] = GREY
        while stack:
            node, it = stack[-1]
            advanced = False
            for label, target in it:
                if label is not None or target not in graph:
                    continue
                if color[target] == GREY:
                    return True
                if color[target] == WHITE:
                    color[target] = GREY
                    stack.append((target, iter(graph[target])))
                    advanced = True
                    break
            if not advanced:
                color[node] = BLACK
                stack.pop()
    return False


# ---------------------------------------------------------------------------
# traces under hiding

def _determinize(result: ExplorationResult):
    """Subset construction over the visible-label graph (hidden = epsilon)."""

    def closure(states: frozenset) -> frozenset:
        seen = set(states)
        stack = list(states)
        while stack:
            s = stack.pop()
            for label, t in result.graph.get(s, ()):
                if label is None and t not in seen:
                    seen.add(t)
                    stack.append(t)
        return frozenset(seen)

    start = closure(frozenset([result.initial]))
    dfa: dict[frozenset, dict[str, frozenset]] = {}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node in dfa:
            continue
        moves: dict[str, set] = {}
        for s in node:
            for label, t in result.graph.get(s, ()):
                if label is not None:
                    moves.setdefault(label, set()).add(t)
        table = {}
        for label, targets in moves.items():
            nxt = closure(frozenset(targets))
            table[label] = nxt
            if nxt not in dfa:
                queue.append(nxt)
        dfa[node] = table
    return start, dfa


def trace_set(model: AbstractModel, hide: Iterable[str],
              state_cap: int = 1_000_000) -> frozenset[tuple[str, ...]]:
    """Maximal visible traces; a trailing self-loop event appears once.

    Only defined for terminating models: exploration must complete within
    the cap and reach a final configuration on every path.
    """
    result = explore(model, state_cap=state_cap, hidden=hide)
    if result.truncated:
        raise RuntimeError("exploration truncated; no trace set")
    if not result.terminated:
        raise RuntimeError("model does not terminate; no trace set")
    start, dfa = _determinize(result)
    traces: set[tuple[str, ...]] = set()

    def walk(node, path, on_path):
        table = dfa[node]
        extended = False
        for label, nxt in table.items():
            if nxt in on_path:
                continue  # cut cycles; the looping label was already recorded
            extended = True
            walk(nxt, path + [label], on_path | {nxt})
        if not extended:
            # a trailing self-loop event appears exactly once
            loops = sorted(label for label, nxt in table.items()
                           if nxt == node and (not path or path[-1] != label))
            traces.add(tuple(path + loops))

    walk(start, [], frozenset([start]))
    return frozenset(traces)


@dataclass
class RefinementResult:
    holds: bool
    counterexample: tuple[str, ...] | None = None


def check_refinement(spec_model: AbstractModel, impl_model: AbstractModel,
                     hide: Iterable[str],
                     state_cap: int = 1_000_000) -> RefinementResult:
    """Traces-model refinement: impl's visible traces within spec's."""
    hide = frozenset(hide)
    spec_res = explore(spec_model, state_cap=state_cap, hidden=hide)
    impl_res = explore(impl_model, state_cap=state_cap, hidden=hide)
    for r, who in ((spec_res, "specification"), (impl_res, "implementation")):
        if r.truncated:
            raise RuntimeError(f"{who} exploration truncated")
    s_start, s_dfa = _determinize(spec_res)
    i_start, i_dfa = _determinize(impl_res)
    seen = set()
    queue = deque([(i_start, s_start, ())])
    while queue:
        i_node, s_node, path = queue.popleft()
        if (i_node, s_node) in seen:
            continue
        seen.add((i_node, s_node))
        s_table = s_dfa[s_node]
        for label, i_next in i_dfa[i_node].items():
            if label not in s_table:
                return RefinementResult(False, path + (label,))
            queue.append((i_next, s_table[label], path + (label,)))
    return RefinementResult(True)


def check_equivalence(a: AbstractModel, b: AbstractModel,
                      hide: Iterable[str]) -> RefinementResult:
    """Mutual traces refinement."""
    forward = check_refinement(a, b, hide)
    if not forward.holds:
        return forward
    return check_refinement(b, a, hide)


# ---------------------------------------------------------------------------
# model catalogue

BASE_OBJECTS = ["A", "B", "C", "D", "E"]


def _prime(v: str) -> str:
    return v + "'"


def farm_model(workers: int = 1, objects: int = 5,
               committed_reducer: bool = False,
               drop_final_ut: bool = False) -> AbstractModel:
    """Source, round-robin spreader, worker pool, reducer, collector."""
    values = BASE_OBJECTS[:objects]
    primed = [_prime(v) for v in values]
    b = [f"b.{i}" for i in range(workers)]
    c = [f"c.{i}" for i in range(workers)]
    procs: list[AbstractProcess] = [
        EmitProc("a", values),
        SpreadProc("a", b, values),
    ]
    for i in range(workers):
        procs.append(WorkerProc(b[i], c[i], _prime, values,
                                forward_ut=not drop_final_ut))
    procs.append(ReduceProc(c, "d", primed, committed=committed_reducer))
    procs.append(CollectProc("d", "finished", primed))
    return AbstractModel(processes=procs)


def farm_channels(workers: int = 1) -> frozenset[str]:
    return frozenset(
        ["a", "d"]
        + [f"b.{i}" for i in range(workers)]
        + [f"c.{i}" for i in range(workers)]
    )


def _staged_values(objects: int, stages: int) -> list[list[str]]:
    levels = [BASE_OBJECTS[:objects]]
    for _ in range(stages):
        levels.append([_prime(v) for v in levels[-1]])
    return levels


def _lane_workers(lane: int, stages: int, levels) -> list[AbstractProcess]:
    chans = ["b", "c", "d", "e", "g", "h"][: stages + 1]
    return [
        WorkerProc(f"{chans[s]}.{lane}", f"{chans[s + 1]}.{lane}",
                   _prime, levels[s])
        for s in range(stages)
    ]


def _pipes_system(lanes: int, stages: int, objects: int,
                  lane_order: str) -> AbstractModel:
    """Shared structure of the two composite models: ``lane_order`` only
    changes whether processes are listed pipe-by-pipe or stage-by-stage."""
    levels = _staged_values(objects, stages)
    chans = ["b", "c", "d", "e", "g", "h"][: stages + 1]
    procs: list[AbstractProcess] = [
        EmitProc("a", levels[0]),
        SpreadProc("a", [f"{chans[0]}.{x}" for x in range(lanes)], levels[0]),
    ]
    workers = [_lane_workers(x, stages, levels) for x in range(lanes)]
    if lane_order == "pipes":
        for lane in workers:
            procs.extend(lane)
    else:
        for s in range(stages):
            for lane in workers:
                procs.append(lane[s])
    procs.append(ReduceProc([f"{chans[stages]}.{x}" for x in range(lanes)],
                            "f", levels[stages]))
    procs.append(CollectProc("f", "finished", levels[stages]))
    return AbstractModel(processes=procs)


def gop_model(pipes: int = 2, stages: int = 3, objects: int = 5) -> AbstractModel:
    """A group of ``pipes`` parallel worker pipelines."""
    return _pipes_system(pipes, stages, objects, "pipes")


def pog_model(stages: int = 3, workers: int = 2, objects: int = 5) -> AbstractModel:
    """A pipeline of ``stages`` sequential worker groups."""
    return _pipes_system(workers, stages, objects, "stages")


def composite_channels(lanes: int, stages: int = 3) -> frozenset[str]:
    chans = ["b", "c", "d", "e", "g", "h"][: stages + 1]
    out = {"a", "f"}
    for name in chans:
        out.update(f"{name}.{x}" for x in range(lanes))
    return frozenset(out)


def lone_reader_model() -> AbstractModel:
    """A single process reading a channel nobody writes: deadlock."""

    class Reader(AbstractProcess):
        name = "reader"
        channels = frozenset(["x"])

        def initial(self):
            return 0

        def steps(self, state):
            if state == 0:
                return [("in", "x", "m", 1)]
            return []

        def final(self, state):
            return state == 1

    return AbstractModel(processes=[Reader()])


def rendezvous_pair_model() -> AbstractModel:
    """One writer, one reader, one message: exactly two reachable states."""

    class Writer(AbstractProcess):
        name = "writer"
        channels = frozenset(["x"])

        def initial(self):
            return 0

        def steps(self, state):
            return [("out", "x", "m", 1)] if state == 0 else []

        def final(self, state):
            return state == 1

    class Reader(AbstractProcess):
        name = "reader"
        channels = frozenset(["x"])

        def initial(self):
            return 0

        def steps(self, state):
            return [("in", "x", "m", 1)] if state == 0 else []

        def final(self, state):
            return state == 1

    return AbstractModel(processes=[Writer(), Reader()])
