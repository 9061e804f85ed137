import threading
import time

import pytest

from procnet.connectors import (
    FAIR_ALT,
    FAN_ANY,
    FAN_LIST,
    FAN_ONE,
    PARCAST,
    ROUNDROBIN_MERGE,
    SEQCAST,
    SORTED_MERGE,
    CombineConfig,
    ReducerConfig,
    SpreaderConfig,
    combine_run,
    reduce_run,
    spread_run,
)
from procnet.kernel import ANY2ONE, ONE2ANY, Channel, run_parallel
from procnet.protocol import COMPLETED_OK, Data, Terminator, is_terminator
from procnet.terminals import LocalDetails


def feed(ch, values, terminators=1):
    def body():
        for v in values:
            ch.write(Data(v) if not isinstance(v, (Data, Terminator)) else v)
        for _ in range(terminators):
            ch.write(Terminator())

    return body


def drain(ch):
    def body():
        out = []
        while True:
            m = ch.read()
            out.append(m)
            if is_terminator(m):
                return out

    return body


def values(stream):
    return [m.payload for m in stream if isinstance(m, Data)]


def test_fan_list_round_robin_with_terminator_fanout():
    cin = Channel()
    outs = [Channel() for _ in range(3)]
    handles = run_parallel(
        [feed(cin, ["A", "B", "C", "D"]),
         lambda: spread_run(SpreaderConfig(3, FAN_LIST), cin, outs)]
        + [drain(o) for o in outs],
        poison_on_error=[cin, *outs],
    )
    assert all(h.ok for h in handles)
    streams = [h.result for h in handles[2:]]
    assert values(streams[0]) == ["A", "D"]
    assert values(streams[1]) == ["B"]
    assert values(streams[2]) == ["C"]
    for s in streams:
        assert is_terminator(s[-1]) and sum(is_terminator(m) for m in s) == 1


def test_seqcast_outputs_independent_deep_clones():
    cin = Channel()
    outs = [Channel(), Channel()]
    payload = {"xs": [1, 2]}
    handles = run_parallel(
        [feed(cin, [payload]),
         lambda: spread_run(SpreaderConfig(2, SEQCAST), cin, outs),
         drain(outs[0]), drain(outs[1])],
        poison_on_error=[cin, *outs],
    )
    a = values(handles[2].result)[0]
    b = values(handles[3].result)[0]
    assert a == b == {"xs": [1, 2]}
    a["xs"].append(99)
    assert b == {"xs": [1, 2]}
    assert a is not payload and b is not payload


def test_parcast_matches_seqcast_observably():
    for policy in (SEQCAST, PARCAST):
        cin = Channel()
        outs = [Channel() for _ in range(3)]
        handles = run_parallel(
            [feed(cin, [[1], [2]]),
             lambda: spread_run(SpreaderConfig(3, policy), cin, outs)]
            + [drain(o) for o in outs],
            poison_on_error=[cin, *outs],
        )
        for h in handles[2:]:
            assert values(h.result) == [[1], [2]]


def test_fan_any_slow_consumer_still_terminates():
    # one consumer stalls so long that all data flows through the other;
    # it still picks up its terminator, so the network terminates
    cin = Channel()
    out = Channel(ONE2ANY)
    got = []

    def fast():
        while True:
            m = out.read()
            if is_terminator(m):
                return
            got.append(m.payload)

    def slow():
        time.sleep(0.3)
        m = out.read()
        assert is_terminator(m)

    handles = run_parallel(
        [feed(cin, list(range(6))),
         lambda: spread_run(SpreaderConfig(2, FAN_ANY), cin, out),
         fast, slow],
        poison_on_error=[cin, out],
        timeout=10,
    )
    assert all(h.ok for h in handles)
    assert sorted(got) == list(range(6))


def test_fan_any_payload_identity_preserved():
    # connectors perform no payload computation: same objects pass through
    cin = Channel()
    out = Channel(ONE2ANY)
    sent = [object() for _ in range(4)]
    handles = run_parallel(
        [feed(cin, sent),
         lambda: spread_run(SpreaderConfig(1, FAN_ANY), cin, out),
         drain(out)],
        poison_on_error=[cin, out],
    )
    received = values(handles[2].result)
    assert [id(p) for p in received] == [id(p) for p in sent]


def test_reducer_single_source_identity():
    cin, cout = Channel(), Channel()
    handles = run_parallel(
        [feed(cin, ["A"]),
         lambda: reduce_run(ReducerConfig(1, FAN_ONE), cin, cout),
         drain(cout)],
        poison_on_error=[cin, cout],
    )
    stream = handles[2].result
    assert values(stream) == ["A"]
    assert sum(is_terminator(m) for m in stream) == 1


def test_sorted_merge():
    ins = [Channel(), Channel()]
    cout = Channel()
    handles = run_parallel(
        [feed(ins[0], [1, 4]), feed(ins[1], [2, 3]),
         lambda: reduce_run(
             ReducerConfig(2, SORTED_MERGE, key=lambda p: p), ins, cout),
         drain(cout)],
        poison_on_error=[*ins, cout],
    )
    assert values(handles[3].result) == [1, 2, 3, 4]


def test_sorted_merge_stable_on_ties():
    ins = [Channel(), Channel()]
    cout = Channel()
    handles = run_parallel(
        [feed(ins[0], [("a", 1)]), feed(ins[1], [("b", 1)]),
         lambda: reduce_run(
             ReducerConfig(2, SORTED_MERGE, key=lambda p: p[1]), ins, cout),
         drain(cout)],
        poison_on_error=[*ins, cout],
    )
    assert values(handles[3].result) == [("a", 1), ("b", 1)]


def test_sorted_merge_rejects_decreasing_input():
    ins = [Channel(), Channel()]
    cout = Channel()
    handles = run_parallel(
        [feed(ins[0], [5, 1]), feed(ins[1], [2]),
         lambda: reduce_run(
             ReducerConfig(2, SORTED_MERGE, key=lambda p: p), ins, cout),
         drain(cout)],
        poison_on_error=[*ins, cout],
        timeout=10,
    )
    assert not handles[2].ok
    assert "0" in handles[2].message  # names the offending input index


def test_fan_one_drains_after_first_terminator():
    ch = Channel(ANY2ONE)
    cout = Channel()
    order = threading.Event()

    def first():
        ch.write(Terminator())
        order.set()

    def second():
        order.wait()
        ch.write(Data("B"))
        ch.write(Terminator())

    handles = run_parallel(
        [first, second,
         lambda: reduce_run(ReducerConfig(2, FAN_ONE), ch, cout),
         drain(cout)],
        poison_on_error=[ch, cout],
    )
    stream = handles[3].result
    assert values(stream) == ["B"]
    assert is_terminator(stream[-1]) and sum(is_terminator(m) for m in stream) == 1


@pytest.mark.parametrize("policy", [FAIR_ALT, ROUNDROBIN_MERGE])
def test_merge_policies_preserve_multiset_and_coalesce_terminators(policy):
    ins = [Channel(), Channel(), Channel()]
    cout = Channel()
    handles = run_parallel(
        [feed(ins[0], [1, 2]), feed(ins[1], [3]), feed(ins[2], [4, 5, 6]),
         lambda: reduce_run(ReducerConfig(3, policy), ins, cout),
         drain(cout)],
        poison_on_error=[*ins, cout],
        timeout=10,
    )
    stream = handles[4].result
    assert sorted(values(stream)) == [1, 2, 3, 4, 5, 6]
    assert sum(is_terminator(m) for m in stream) == 1


class IntBag:
    def __init__(self):
        self.items = []


def combine_cfg(sources):
    def fold(acc, payload):
        acc.items.extend(payload)
        return COMPLETED_OK

    def out_init(out, acc, params):
        out.extend(sorted(acc.items))
        return COMPLETED_OK

    return CombineConfig(
        sources=sources,
        local=LocalDetails(factory=IntBag),
        out_factory=list,
        combine=fold,
        out_init=out_init,
    )


def test_combine_zero_inputs_yields_empty_combined_then_terminator():
    cin, cout = Channel(), Channel()
    handles = run_parallel(
        [feed(cin, []),
         lambda: combine_run(combine_cfg(1), cin, cout),
         drain(cout)],
        poison_on_error=[cin, cout],
    )
    stream = handles[2].result
    assert values(stream) == [[]]
    assert is_terminator(stream[-1])


def test_combine_folds_all_inputs_into_one_payload():
    ins = [Channel(), Channel()]
    cout = Channel()
    handles = run_parallel(
        [feed(ins[0], [[2]]), feed(ins[1], [[3], [5]]),
         lambda: combine_run(combine_cfg(2), ins, cout),
         drain(cout)],
        poison_on_error=[*ins, cout],
        timeout=10,
    )
    stream = handles[3].result
    assert values(stream) == [[2, 3, 5]]
