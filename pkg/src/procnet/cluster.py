"""Channel ends over TCP and the host/worker bootstrap for cluster runs.

Wire format: every frame is a 4-byte big-endian length followed by a UTF-8
JSON body, either ``{"type": <registered-type-name>, "data": <fields>}`` for
a payload or ``{"type": "UT", "logs": [[tag, records], ...]}`` for the
terminator.  The body is canonical ``json.dumps`` output (single space after
',' and ':'), so frames are byte-reproducible.  Only payload types
registered in a :class:`CodecRegistry` can cross the wire; unknown types
are rejected before any bytes are sent.  Trace tags do not travel.

``NetOutputEnd.write`` keeps the rendezvous contract over TCP: it returns
only after the reading side's ``read`` has consumed the message and sent an
acknowledgement frame back.

Cluster runs follow a client-server star: each worker connects to the host,
sends a manifest, and receives its fragment (the function name to apply and
its parameters).  The host drives one request/response exchange per payload
with each worker, so the request graph is loop-free.
"""

from __future__ import annotations

import json
import socket
import struct
import time
from dataclasses import dataclass, field
from typing import Any, Callable

from .connectors import FAN_ANY, FAN_ONE, ReducerConfig, SpreaderConfig, reduce_run, spread_run
from .functionals import RunnableNetwork
from .kernel import CONTRACT_ERROR, FatalError
from .protocol import Data, LogSummary, Terminator, is_terminator
from .terminals import EmitDetails, ResultDetails, collect_run, emit_run

ACK = {"type": "ack"}


def canonical_body(obj: dict) -> bytes:
    return json.dumps(obj).encode("utf-8")


def send_frame(sock: socket.socket, body: bytes) -> None:
    sock.sendall(struct.pack(">I", len(body)) + body)


def recv_frame(sock: socket.socket) -> dict:
    header = _recv_exact(sock, 4)
    (length,) = struct.unpack(">I", header)
    return json.loads(_recv_exact(sock, length).decode("utf-8"))


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    while n:
        chunk = sock.recv(n)
        if not chunk:
            raise FatalError(CONTRACT_ERROR, "connection closed mid-frame")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


class CodecRegistry:
    """Explicit field-level serialisation for payload types."""

    def __init__(self):
        self._by_name: dict[str, tuple[Callable, Callable]] = {}
        self._by_type: dict[type, str] = {}

    def register(self, name: str, cls: type | None,
                 encode: Callable[[Any], Any],
                 decode: Callable[[Any], Any]) -> None:
        if name in self._by_name:
            raise ValueError(f"codec {name!r} already registered")
        self._by_name[name] = (encode, decode)
        if cls is not None:
            self._by_type[cls] = name

    def names(self) -> list[str]:
        return sorted(self._by_name)

    def encode_payload(self, payload) -> tuple[str, Any]:
        name = self._by_type.get(type(payload))
        if name is None:
            raise FatalError(
                CONTRACT_ERROR,
                f"payload type {type(payload).__name__} not registered")
        encode, _ = self._by_name[name]
        return name, encode(payload)

    def decode_payload(self, name: str, data):
        if name not in self._by_name:
            raise FatalError(CONTRACT_ERROR, f"unknown wire type {name!r}")
        _, decode = self._by_name[name]
        return decode(data)


def encode_message(m: Data | Terminator, codecs: CodecRegistry) -> bytes:
    if is_terminator(m):
        return canonical_body(
            {"type": "UT", "logs": [[s.tag, s.records] for s in m.logs]})
    name, data = codecs.encode_payload(m.payload)
    return canonical_body({"type": name, "data": data})


def decode_message(body: dict, codecs: CodecRegistry) -> Data | Terminator:
    kind = body.get("type")
    if kind == "UT":
        return Terminator(
            logs=[LogSummary(tag, records) for tag, records in body.get("logs", [])])
    return Data(codecs.decode_payload(kind, body.get("data")))


class NetOutputEnd:
    """Writer side of a synchronised channel over one TCP connection."""

    def __init__(self, sock: socket.socket, codecs: CodecRegistry):
        self.sock = sock
        self.codecs = codecs

    def write(self, m) -> None:
        send_frame(self.sock, encode_message(m, self.codecs))
        reply = recv_frame(self.sock)
        if reply != ACK:
            raise FatalError(CONTRACT_ERROR, f"expected ack, got {reply!r}")


class NetInputEnd:
    """Reader side: consuming a message acknowledges it to the writer."""

    def __init__(self, sock: socket.socket, codecs: CodecRegistry):
        self.sock = sock
        self.codecs = codecs

    def read(self):
        m = decode_message(recv_frame(self.sock), self.codecs)
        send_frame(self.sock, canonical_body(ACK))
        return m


def net_write(end: NetOutputEnd, m) -> None:
    end.write(m)


def net_read(end: NetInputEnd):
    return end.read()


# ---------------------------------------------------------------------------
# default codecs for the demo payload types

def default_codecs() -> CodecRegistry:
    import base64

    import numpy as np

    from .bench.goldbach import PrimeSeed
    from .bench.mandelbrot import ImageLine
    from .bench.montecarlo import PointsTask

    reg = CodecRegistry()
    reg.register("int", int, lambda v: v, lambda d: int(d))
    reg.register("float", float, lambda v: v, lambda d: float(d))
    reg.register("str", str, lambda v: v, lambda d: str(d))

    def enc_task(t: PointsTask):
        return {"iterations": t.iterations, "within": t.within,
                "seed": t.seed, "index": t.index}

    def dec_task(d):
        t = PointsTask()
        t.iterations, t.within = d["iterations"], d["within"]
        t.seed, t.index = d["seed"], d["index"]
        return t

    reg.register("mc-task", PointsTask, enc_task, dec_task)

    def enc_line(line: ImageLine):
        colors = None
        if line.colors is not None:
            colors = base64.b64encode(
                np.ascontiguousarray(line.colors, dtype=np.uint8).tobytes()
            ).decode("ascii")
        return {"y": line.y, "width": line.width, "height": line.height,
                "pixel_delta": line.pixel_delta,
                "max_iterations": line.max_iterations, "colors": colors}

    def dec_line(d):
        line = ImageLine()
        line.y, line.width, line.height = d["y"], d["width"], d["height"]
        line.pixel_delta = d["pixel_delta"]
        line.max_iterations = d["max_iterations"]
        if d["colors"] is not None:
            raw = base64.b64decode(d["colors"])
            line.colors = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).copy()
        return line

    reg.register("mandel-line", ImageLine, enc_line, dec_line)

    def enc_seed(p: PrimeSeed):
        return {"value": p.value}

    def dec_seed(d):
        p = PrimeSeed()
        p.value = d["value"]
        return p

    reg.register("gb-seed", PrimeSeed, enc_seed, dec_seed)
    return reg


# ---------------------------------------------------------------------------
# host / worker farm

@dataclass
class RemoteFarmJob:
    """Everything the host needs to run a farm across worker nodes."""

    e_details: EmitDetails
    r_details: ResultDetails
    function: str  # registry name applied by workers
    modifier: list = field(default_factory=list)
    workers: int = 1
    port: int = 0
    connect_timeout: float = 30.0


@dataclass
class WorkerLink:
    sock: socket.socket
    manifest: dict


def _handshake(server: socket.socket, expected: int, deadline: float,
               job: RemoteFarmJob) -> list[WorkerLink]:
    links = []
    while len(links) < expected:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise FatalError(
                CONTRACT_ERROR,
                f"only {len(links)} of {expected} workers connected in time")
        server.settimeout(remaining)
        try:
            sock, _ = server.accept()
        except socket.timeout:
            continue
        frame = recv_frame(sock)
        if frame.get("type") != "manifest":
            raise FatalError(CONTRACT_ERROR, f"expected manifest, got {frame!r}")
        send_frame(sock, canonical_body({
            "type": "fragment",
            "data": {"function": job.function, "modifier": job.modifier,
                     "worker": len(links)}}))
        links.append(WorkerLink(sock=sock, manifest=frame.get("data") or {}))
    return links


def _handler_body(link: WorkerLink, wid: int, work, results,
                  codecs: CodecRegistry):
    def body():
        try:
            while True:
                m = work.read()
                if is_terminator(m):
                    send_frame(link.sock, encode_message(m, codecs))
                    reply = recv_frame(link.sock)
                    if reply.get("type") != "UT":
                        raise FatalError(
                            CONTRACT_ERROR,
                            f"worker {wid} replied {reply!r} to the terminator")
                    results.write(Terminator())
                    return
                send_frame(link.sock, encode_message(m, codecs))
                reply = recv_frame(link.sock)
                if reply.get("type") == "error":
                    raise FatalError(
                        int(reply.get("data", {}).get("code", CONTRACT_ERROR)),
                        f"worker {wid}: {reply.get('data', {}).get('message', '')}")
                results.write(decode_message(reply, codecs))
        except OSError as e:
            raise FatalError(CONTRACT_ERROR, f"worker {wid} connection lost: {e}")
        finally:
            link.sock.close()

    return body


def host_run(job: RemoteFarmJob, codecs: CodecRegistry,
             bind: str = "127.0.0.1",
             on_listening: Callable[[int], None] | None = None):
    """Serve ``job.workers`` remote workers and collect all results.

    Returns (collect outcome, bound port).  The emit and collect processes
    run here; each connected worker gets payloads one at a time through its
    own handler process.  ``on_listening`` fires with the bound port before
    the host starts waiting for workers.
    """
    server = socket.create_server((bind, job.port))
    port = server.getsockname()[1]
    if on_listening is not None:
        on_listening(port)
    try:
        deadline = time.monotonic() + job.connect_timeout
        links = _handshake(server, job.workers, deadline, job)
    finally:
        server.close()

    from .kernel import ANY2ONE, ONE2ANY, ONE2ONE

    net = RunnableNetwork()
    feed = net.new_channel(ONE2ONE)
    work = net.new_channel(ONE2ANY)
    results = net.new_channel(ANY2ONE)
    out = net.new_channel(ONE2ONE)
    net.add_process(lambda: emit_run(job.e_details, feed), "emit")
    scfg = SpreaderConfig(job.workers, FAN_ANY)
    net.add_process(lambda: spread_run(scfg, feed, work), "fan-any")
    for wid, link in enumerate(links):
        net.add_process(_handler_body(link, wid, work, results, codecs),
                        f"handler-{wid}")
    rcfg = ReducerConfig(job.workers, FAN_ONE)
    net.add_process(lambda: reduce_run(rcfg, results, out), "fan-one")
    net.add_process(lambda: collect_run(job.r_details, out), "collect",
                    collects=True)
    report = net.run()
    if not report.ok:
        raise FatalError(report.code, "cluster host network failed")
    return report.results[0], port


def worker_run_remote(host: str, port: int, registry, codecs: CodecRegistry,
                      connect_timeout: float = 30.0) -> int:
    """Serve one host until its terminator arrives; returns the exit code."""
    deadline = time.monotonic() + connect_timeout
    sock = None
    while sock is None:
        try:
            sock = socket.create_connection((host, port), timeout=2.0)
        except OSError:
            if time.monotonic() > deadline:
                raise
            time.sleep(0.05)
    sock.settimeout(None)
    try:
        send_frame(sock, canonical_body(
            {"type": "manifest", "data": {"address": sock.getsockname()[0]}}))
        fragment = recv_frame(sock)
        if fragment.get("type") != "fragment":
            return 1
        data = fragment["data"]
        name = data["function"]
        if name not in registry:
            send_frame(sock, canonical_body({
                "type": "error",
                "data": {"code": CONTRACT_ERROR,
                         "message": f"unknown function {name!r}"}}))
            return 1
        fn = registry.resolve(name)
        modifier = list(data.get("modifier", []))
        while True:
            m = decode_message(recv_frame(sock), codecs)
            if is_terminator(m):
                send_frame(sock, encode_message(m, codecs))
                return 0
            rc = fn(m.payload, modifier)
            if rc is None or rc < 0:
                code = CONTRACT_ERROR if rc is None else rc
                send_frame(sock, canonical_body({
                    "type": "error",
                    "data": {"code": code, "message": "function failed"}}))
                return 1
            send_frame(sock, encode_message(m, codecs))
    finally:
        sock.close()
