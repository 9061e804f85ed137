import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from procnet.functionals import (
    GROUP_OF_PIPELINE_COLLECTS,
    GroupConfig,
    PipelineConfig,
    WorkerConfig,
    composite_build,
    data_parallel_collect,
    gop_network,
    group_build,
    pipeline_build,
    pog_network,
    worker_run,
)
from procnet.kernel import Channel, run_parallel
from procnet.protocol import (
    COMPLETED_OK,
    NORMAL_CONTINUATION,
    NORMAL_TERMINATION,
    Data,
    Terminator,
    is_terminator,
)
from procnet.terminals import (
    EmitDetails,
    LocalDetails,
    ResultDetails,
    sequential_loop,
)


class Box:
    def __init__(self, value=0):
        self.value = value


def list_emitter(values):
    def create(payload, ctx, params):
        i = getattr(ctx, "i", 0)
        if i >= len(values):
            return NORMAL_TERMINATION
        payload.value = values[i]
        ctx.i = i + 1
        return NORMAL_CONTINUATION

    return EmitDetails(factory=Box, create=create)


class BagAcc:
    def __init__(self):
        self.items = []

    @staticmethod
    def collect(acc, payload):
        acc.items.append(payload.value)
        return COMPLETED_OK


def bag_details():
    return ResultDetails(factory=BagAcc, collect=BagAcc.collect)


def identity(payload, params):
    return COMPLETED_OK


def drain(ch):
    def body():
        out = []
        while True:
            m = ch.read()
            out.append(m)
            if is_terminator(m):
                return out

    return body


def feed(ch, values):
    def body():
        for v in values:
            ch.write(Data(Box(v)))
        ch.write(Terminator())

    return body


def test_worker_identity_forwards_stream():
    cin, cout = Channel(), Channel()
    handles = run_parallel(
        [feed(cin, ["A", "B"]),
         lambda: worker_run(WorkerConfig(function=identity), cin, cout),
         drain(cout)],
        poison_on_error=[cin, cout],
    )
    stream = handles[2].result
    assert [m.payload.value for m in stream if isinstance(m, Data)] == ["A", "B"]
    assert is_terminator(stream[-1])


def test_worker_seeded_function_is_deterministic():
    def within_op(payload, params):
        rng = np.random.Generator(np.random.PCG64(payload.value))
        x = rng.random(1000)
        y = rng.random(1000)
        payload.within = int(np.count_nonzero(x * x + y * y <= 1.0))
        return COMPLETED_OK

    results = []
    for _ in range(2):
        cin, cout = Channel(), Channel()
        handles = run_parallel(
            [feed(cin, [1234]),
             lambda: worker_run(WorkerConfig(function=within_op), cin, cout),
             drain(cout)],
            poison_on_error=[cin, cout],
        )
        payload = [m.payload for m in handles[2].result if isinstance(m, Data)][0]
        assert 0 <= payload.within <= 1000
        results.append(payload.within)
    assert results[0] == results[1]


def test_worker_out_data_false_emits_local_then_terminator():
    class Count:
        n = 0

    def tally(payload, params, local):
        local.n += 1
        return COMPLETED_OK

    cin, cout = Channel(), Channel()
    cfg = WorkerConfig(function=tally, local=LocalDetails(factory=Count),
                       out_data=False)
    handles = run_parallel(
        [feed(cin, ["A", "B", "C"]),
         lambda: worker_run(cfg, cin, cout),
         drain(cout)],
        poison_on_error=[cin, cout],
    )
    stream = handles[2].result
    assert len(stream) == 2
    assert stream[0].payload.n == 3
    assert is_terminator(stream[1])


def test_group_per_worker_modifiers_reach_the_right_worker():
    seen = {}
    lock = threading.Lock()

    def op(payload, params):
        with lock:
            seen[payload.value] = list(params)
        return COMPLETED_OK

    ins = [Channel(), Channel()]
    outs = [Channel(), Channel()]
    g = GroupConfig(workers=2, in_kind="list", out_kind="list",
                    per_worker_modifiers=[[0], [1]])
    frag = group_build(g, op, ins, outs)
    handles = run_parallel(
        [feed(ins[0], ["w0"]), feed(ins[1], ["w1"])]
        + [b for b, _, _ in frag.processes]
        + [drain(outs[0]), drain(outs[1])],
        poison_on_error=[*ins, *outs],
    )
    assert all(h.ok for h in handles)
    assert seen == {"w0": [0], "w1": [1]}


def test_group_modifier_length_mismatch_rejected():
    with pytest.raises(ValueError):
        GroupConfig(workers=2, per_worker_modifiers=[[1]])


def test_any_group_any_single_worker_equals_plain_worker():
    from procnet.kernel import ANY2ONE, ONE2ANY

    cin, cout = Channel(ONE2ANY), Channel(ANY2ONE)
    g = GroupConfig(workers=1, in_kind="any", out_kind="any")
    frag = group_build(g, identity, cin, cout)
    handles = run_parallel(
        [feed(cin, [1, 2, 3])] + [b for b, _, _ in frag.processes]
        + [drain(cout)],
        poison_on_error=[cin, cout],
    )
    assert [m.payload.value for m in handles[-1].result if isinstance(m, Data)] == [1, 2, 3]


def test_synchronised_group_steps_in_lockstep():
    # no worker may start round k+1 output before all finish round k compute
    rounds = {1: [], 2: []}
    lock = threading.Lock()

    def op(payload, params):
        with lock:
            rounds[payload.value // 10].append(("compute", params[0]))
        return COMPLETED_OK

    ins = [Channel() for _ in range(3)]
    outs = [Channel() for _ in range(3)]
    g = GroupConfig(workers=3, in_kind="list", out_kind="list",
                    per_worker_modifiers=[[0], [1], [2]], synchronised=True)
    frag = group_build(g, op, ins, outs)

    readers = []

    def reader(i):
        def body():
            while True:
                m = outs[i].read()
                if is_terminator(m):
                    return
                with lock:
                    rounds[m.payload.value // 10].append(("output", i))

        return body

    for i in range(3):
        readers.append(reader(i))
    # two rounds: payloads 10+r, 20+r to worker r
    handles = run_parallel(
        [feed(ins[i], [10 + i, 20 + i]) for i in range(3)]
        + [b for b, _, _ in frag.processes]
        + readers,
        poison_on_error=[*ins, *outs, *frag.barriers],
        timeout=10,
    )
    assert all(h.ok for h in handles)
    for r in (1, 2):
        events = rounds[r]
        first_output = next(i for i, e in enumerate(events) if e[0] == "output")
        computes_before = sum(1 for e in events[:first_output] if e[0] == "compute")
        assert computes_before == 3


def add_op(k):
    def op(payload, params):
        payload.value += k
        return COMPLETED_OK

    return op


def mul_op(k):
    def op(payload, params):
        payload.value *= k
        return COMPLETED_OK

    return op


def test_pipeline_composes_stage_functions_in_order():
    cin = Channel()
    p = PipelineConfig(stages=2, stage_ops=[add_op(1), mul_op(10)])
    cout = Channel()
    frag = pipeline_build(p, cin, cout)
    handles = run_parallel(
        [feed(cin, [5])] + [b for b, _, _ in frag.processes] + [drain(cout)],
        poison_on_error=[cin, cout, *frag.channels],
    )
    assert [m.payload.value for m in handles[-1].result if isinstance(m, Data)] == [60]


def test_pipeline_single_stage_rejected():
    with pytest.raises(ValueError):
        PipelineConfig(stages=1, stage_ops=[identity])


def test_pipeline_three_stage_collect_variant():
    cin = Channel()
    p = PipelineConfig(stages=3, stage_ops=[add_op(1), add_op(2), add_op(3)],
                       result=bag_details())
    frag = pipeline_build(p, cin)
    handles = run_parallel(
        [feed(cin, [0, 10])] + [b for b, _, _ in frag.processes],
        poison_on_error=[cin, *frag.channels],
    )
    outcome = [h.result for h, (_, _, c) in zip(handles[1:], frag.processes) if c][0]
    assert sorted(outcome.result.items) == [6, 16]


def test_farm_workers_zero_rejected():
    with pytest.raises(ValueError):
        data_parallel_collect(list_emitter([1]), bag_details(), 0, identity)


def test_farm_single_worker_identity_collects_all():
    net = data_parallel_collect(list_emitter([1, 2, 3]), bag_details(), 1, identity)
    report = net.run(timeout=10)
    assert report.ok
    assert sorted(report.results[0].result.items) == [1, 2, 3]


def test_farm_process_count_is_workers_plus_four():
    net = data_parallel_collect(list_emitter([1]), bag_details(), 3, identity)
    assert net.process_count == 3 + 4
    net.run(timeout=10)


def test_farm_matches_sequential_loop():
    op = add_op(7)
    seq = sequential_loop(list_emitter([1, 2, 3, 4]), bag_details(), ops=[op])
    net = data_parallel_collect(list_emitter([1, 2, 3, 4]), bag_details(), 3, op)
    report = net.run(timeout=10)
    assert sorted(report.results[0].result.items) == sorted(seq.items)


@settings(max_examples=20, deadline=None)
@given(
    values=st.lists(st.integers(min_value=-50, max_value=50), min_size=0, max_size=8),
    workers=st.integers(min_value=1, max_value=4),
)
def test_farm_result_multiset_independent_of_workers(values, workers):
    op = mul_op(3)
    expected = sorted(v * 3 for v in values)
    net = data_parallel_collect(list_emitter(values), bag_details(), workers, op)
    report = net.run(timeout=30)
    assert report.ok
    assert sorted(report.results[0].result.items) == expected


def run_collect_network(net):
    report = net.run(timeout=30)
    assert report.ok, report.handles
    items = []
    for outcome in report.results:
        items.extend(outcome.result.items)
    return sorted(items)


def test_gop_degenerate_single_pipe_equals_pipeline_collect():
    ops = [add_op(1), add_op(2), add_op(3)]
    seq = sequential_loop(list_emitter([1, 2]), bag_details(), ops=ops)
    net = gop_network(list_emitter([1, 2]), [bag_details()], 1, 3, ops)
    assert run_collect_network(net) == sorted(seq.items)


def test_pog_single_lane_equals_pipeline_collect():
    ops = [add_op(1), add_op(2), add_op(3)]
    seq = sequential_loop(list_emitter([1, 2]), bag_details(), ops=ops)
    net = pog_network(list_emitter([1, 2]), [bag_details()], 1, 3, ops)
    assert run_collect_network(net) == sorted(seq.items)


@settings(max_examples=15, deadline=None)
@given(values=st.lists(st.integers(min_value=-9, max_value=9), max_size=6))
def test_gop_and_pog_produce_identical_result_multisets(values):
    ops = [add_op(5), mul_op(2), add_op(-3)]
    gop = gop_network(list_emitter(values), [bag_details()] * 2, 2, 3, ops)
    pog = pog_network(list_emitter(values), [bag_details()] * 3, 3, 3, ops)
    assert run_collect_network(gop) == run_collect_network(pog)


def test_composite_result_details_arity_checked():
    with pytest.raises(ValueError):
        composite_build(
            GROUP_OF_PIPELINE_COLLECTS,
            stages=3, stage_ops=[identity] * 3,
            result_details=[bag_details()], groups=2, cin=Channel(),
        )


def test_network_runs_only_once():
    net = data_parallel_collect(list_emitter([1]), bag_details(), 1, identity)
    net.run(timeout=10)
    from procnet.kernel import FatalError

    with pytest.raises(FatalError):
        net.run()
