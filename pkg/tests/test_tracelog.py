from collections import defaultdict

from procnet.builder import build, run, spec_from_dict
from procnet.kernel import ANY2ONE, Channel, run_parallel
from procnet.protocol import Data, Terminator
from procnet.tracelog import (
    LogContext,
    NetworkClock,
    log_event,
    logger_run,
    parse_log_file,
)

from test_builder import farm_doc, make_registry


def test_log_event_record_shape():
    ch = Channel(ANY2ONE)
    clock = NetworkClock()
    ctx = LogContext(ch, "calc", clock)
    got = []

    def sink():
        got.append(ch.read())

    handles = run_parallel(
        [lambda: log_event(ctx, "inputComplete", Data(object(), tag="emit-7")),
         sink],
        poison_on_error=[ch],
    )
    assert all(h.ok for h in handles)
    rec = got[0]
    assert rec.tag == "calc"
    assert rec.event == "inputComplete"
    assert rec.object_id == "emit-7"
    assert rec.timestamp_ns >= 0


def test_property_extractor_overrides_tag():
    ch = Channel(ANY2ONE)
    ctx = LogContext(ch, "t", NetworkClock(), prop=lambda p: f"v{p}")
    got = []
    run_parallel([lambda: log_event(ctx, "outputReady", Data(41, tag="x")),
                  lambda: got.append(ch.read())], poison_on_error=[ch])
    assert got[0].object_id == "v41"


def test_logger_zero_nodes_completes_immediately(tmp_path):
    ch = Channel(ANY2ONE)
    path = tmp_path / "empty.log"
    records = logger_run(ch, path, expected_terminators=0)
    assert records == []
    assert path.read_text() == ""


def test_logger_writes_records_in_arrival_order(tmp_path):
    ch = Channel(ANY2ONE)
    path = tmp_path / "one.log"
    clock = NetworkClock()
    ctx = LogContext(ch, "emit", clock)

    def emitter():
        for i in range(4):
            log_event(ctx, "outputComplete", Data(object(), tag=f"emit-{i}"))
        ctx.close()

    handles = run_parallel(
        [emitter, lambda: logger_run(ch, path, expected_terminators=1)],
        poison_on_error=[ch],
    )
    assert all(h.ok for h in handles)
    records = parse_log_file(path)
    assert [r.object_id for r in records] == [f"emit-{i}" for i in range(4)]
    stamps = [r.timestamp_ns for r in records]
    assert stamps == sorted(stamps)


def test_interleaved_processes_are_per_tag_monotone(tmp_path):
    ch = Channel(ANY2ONE)
    path = tmp_path / "two.log"
    clock = NetworkClock()
    a = LogContext(ch, "a", clock)
    b = LogContext(ch, "b", clock)

    def proc(ctx):
        def body():
            for i in range(20):
                log_event(ctx, "outputComplete", Data(object(), tag=str(i)))
            ctx.close()

        return body

    handles = run_parallel(
        [proc(a), proc(b), lambda: logger_run(ch, path, expected_terminators=2)],
        poison_on_error=[ch],
    )
    assert all(h.ok for h in handles)
    per_tag = defaultdict(list)
    for rec in parse_log_file(path):
        per_tag[rec.tag].append(rec.timestamp_ns)
    assert set(per_tag) == {"a", "b"}
    for stamps in per_tag.values():
        assert stamps == sorted(stamps)


def test_logged_farm_traceability(tmp_path):
    # every emit-side tag must appear in the collect-side records
    doc = farm_doc(workers=2, instances=6)
    doc["nodes"][0]["log"] = {"phase": "emit"}
    doc["nodes"][4]["log"] = {"phase": "collect"}
    doc["log_file"] = str(tmp_path / "farm.log")
    report = run(build(spec_from_dict(doc), make_registry()), timeout=20)
    assert report.ok
    records = parse_log_file(tmp_path / "farm.log")
    emitted = {r.object_id for r in records
               if r.tag == "emit" and r.event == "outputComplete"}
    collected = {r.object_id for r in records
                 if r.tag == "collect" and r.event == "inputComplete"}
    assert emitted == {f"emit-{i}" for i in range(6)}
    assert emitted <= collected


def test_terminator_carries_per_process_record_counts(tmp_path):
    doc = farm_doc(workers=1, instances=3)
    doc["nodes"][0]["log"] = {"phase": "emit"}
    doc["log_file"] = str(tmp_path / "ut.log")
    report = run(build(spec_from_dict(doc), make_registry()), timeout=20)
    assert report.ok
    summaries = report.results[0].terminator_logs
    assert any(s.tag == "emit" and s.records > 0 for s in summaries)


def test_disabled_logging_produces_no_records():
    # three payloads through a logged worker produce records; without a
    # context the very same worker produces none
    from procnet.functionals import WorkerConfig, worker_run

    cin, cout = Channel(), Channel()
    log_ch = Channel(ANY2ONE)
    seen = []
    log_ch.monitor = seen.append

    def feeder():
        for i in range(3):
            cin.write(Data(object(), tag=f"t{i}"))
        cin.write(Terminator())

    def sink():
        while True:
            from procnet.protocol import is_terminator

            if is_terminator(cout.read()):
                return

    ctx = LogContext(log_ch, "calc", NetworkClock())

    def drainer():
        from procnet.protocol import is_terminator

        while True:
            if is_terminator(log_ch.read()):
                return

    handles = run_parallel(
        [feeder, lambda: worker_run(WorkerConfig(function=lambda p, m: 0),
                                    cin, cout, ctx), sink, drainer],
        poison_on_error=[cin, cout, log_ch],
    )
    assert all(h.ok for h in handles)
    logged_count = len(seen) - 1  # minus the shutdown notice
    assert logged_count >= 6  # input + output per payload, at least

    cin2, cout2 = Channel(), Channel()
    quiet = Channel(ANY2ONE)
    seen2 = []
    quiet.monitor = seen2.append

    def feeder2():
        for i in range(3):
            cin2.write(Data(object()))
        cin2.write(Terminator())

    def sink2():
        from procnet.protocol import is_terminator

        while True:
            if is_terminator(cout2.read()):
                return

    run_parallel(
        [feeder2, lambda: worker_run(WorkerConfig(function=lambda p, m: 0),
                                     cin2, cout2), sink2],
        poison_on_error=[cin2, cout2],
    )
    assert seen2 == []
