"""Command line: benchmark demos, the model verifier, cluster runs, and
building networks from description files.

Exit codes: 0 success, 1 validation or usage failure, 2 a user callback
aborted the network (the negative code is printed to standard error).
"""

from __future__ import annotations

import argparse
import sys


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="procnet",
        description="process-network patterns: benchmarks, verification, cluster",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_bench(sub)
    _add_verify(sub)
    _add_cluster(sub)
    _add_run_spec(sub)
    args = parser.parse_args(argv)
    try:
        return args.entry(args)
    except Exception as e:  # noqa: BLE001 - CLI boundary
        print(f"error: {e}", file=sys.stderr)
        return 1


def _workers_list(text: str) -> list[int]:
    return [int(tok) for tok in text.split(",") if tok]


def _add_bench(sub) -> None:
    p = sub.add_parser("bench", help="run a demo and report timings")
    demos = p.add_subparsers(dest="demo", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--csv", default=None, help="write the report here")
    common.add_argument("--repeats", type=int, default=3)
    common.add_argument("--seq", action="store_true",
                        help="run the plain sequential loop only")

    mc = demos.add_parser("montecarlo", parents=[common])
    mc.add_argument("--instances", type=int, default=1024)
    mc.add_argument("--iterations", type=int, default=100_000)
    mc.add_argument("--workers", type=_workers_list, default=[4])
    mc.add_argument("--seed", type=int, default=0x5EED)
    mc.set_defaults(entry=_bench_montecarlo)

    co = demos.add_parser("concordance", parents=[common])
    co.add_argument("--file", default=None)
    co.add_argument("--n", type=int, default=4)
    co.add_argument("--min-seq-len", type=int, default=2)
    co.add_argument("--arch", choices=["gop", "pog"], default="gop")
    co.add_argument("--width", type=_workers_list, default=[2])
    co.add_argument("--out-prefix", default=None)
    co.set_defaults(entry=_bench_concordance)

    ja = demos.add_parser("jacobi", parents=[common])
    ja.add_argument("--file", default=None)
    ja.add_argument("--generate", type=int, default=256, metavar="N")
    ja.add_argument("--seed", type=int, default=11)
    ja.add_argument("--nodes", type=_workers_list, default=[2])
    ja.add_argument("--margin", type=float, default=1e-12)
    ja.set_defaults(entry=_bench_jacobi)

    nb = demos.add_parser("nbody", parents=[common])
    nb.add_argument("--file", default=None)
    nb.add_argument("--n", type=int, default=64)
    nb.add_argument("--iterations", type=int, default=100)
    nb.add_argument("--dt", type=float, default=0.001)
    nb.add_argument("--nodes", type=_workers_list, default=[2])
    nb.add_argument("--out", default=None)
    nb.set_defaults(entry=_bench_nbody)

    st = demos.add_parser("stencil", parents=[common])
    st.add_argument("--in", dest="in_file", required=True)
    st.add_argument("--out", dest="out_file", default="")
    st.add_argument("--nodes", type=_workers_list, default=[2])
    st.add_argument("--kernel", default="grey,edge5",
                    help="comma-separated chain from {grey,edge3,edge5}")
    st.set_defaults(entry=_bench_stencil)

    gb = demos.add_parser("goldbach", parents=[common])
    gb.add_argument("--max-prime", type=int, default=5000)
    gb.add_argument("--p-workers", type=int, default=1)
    gb.add_argument("--g-workers", type=_workers_list, default=[2])
    gb.set_defaults(entry=_bench_goldbach)

    ma = demos.add_parser("mandelbrot", parents=[common])
    ma.add_argument("--width", type=int, default=350)
    ma.add_argument("--height", type=int, default=200)
    ma.add_argument("--pixel-delta", type=float, default=0.01)
    ma.add_argument("--max-iterations", type=int, default=100)
    ma.add_argument("--workers", type=_workers_list, default=[4])
    ma.add_argument("--out", default=None)
    ma.set_defaults(entry=_bench_mandelbrot)


def _report(demo, variants, args):
    from .bench.harness import bench_run

    bench_run(demo, variants, repeats=args.repeats, csv_path=args.csv)
    return 0


def _bench_montecarlo(args) -> int:
    from .bench import montecarlo as mod

    if args.seq:
        cfg = mod.MonteCarloConfig(args.instances, args.iterations, 1, args.seed)
        print(f"pi estimate (sequential): {mod.run_sequential(cfg)}")
        return 0
    variants = []
    seq_cfg = mod.MonteCarloConfig(args.instances, args.iterations, 1, args.seed)
    seq_fn = lambda: mod.run_sequential(seq_cfg)  # noqa: E731
    for w in args.workers:
        cfg = mod.MonteCarloConfig(args.instances, args.iterations, w, args.seed)
        variants.append((f"instances={args.instances}", w,
                         lambda c=cfg: mod.run(c), seq_fn))
    print(f"pi estimate: {mod.run(mod.MonteCarloConfig(args.instances, args.iterations, args.workers[0], args.seed))}")
    return _report("montecarlo", variants, args)


def _bench_concordance(args) -> int:
    from .bench import concordance as mod

    file = args.file or str(mod.DEFAULT_TEXT)
    if args.seq:
        cfg = mod.ConcordanceConfig(file, args.n, args.min_seq_len)
        mod.run_sequential(cfg)
        return 0
    seq_cfg = mod.ConcordanceConfig(file, args.n, args.min_seq_len)
    seq_fn = lambda: mod.run_sequential(seq_cfg)  # noqa: E731
    variants = []
    for w in args.width:
        cfg = mod.ConcordanceConfig(file, args.n, args.min_seq_len,
                                    args.arch, w, args.out_prefix)
        variants.append((f"{args.arch} n={args.n}", w,
                         lambda c=cfg: mod.run(c), seq_fn))
    return _report("concordance", variants, args)


def _bench_jacobi(args) -> int:
    from .bench import jacobi as mod

    base = dict(margin=args.margin, file=args.file,
                generate_n=None if args.file else args.generate,
                seed=args.seed)
    if args.seq:
        res = mod.run_sequential(mod.JacobiConfig(nodes=1, **base))
        print(f"verified: {res.verified} (max residual {res.max_residual:.2e})")
        return 0
    seq_cfg = mod.JacobiConfig(nodes=1, **base)
    seq_fn = lambda: mod.run_sequential(seq_cfg)  # noqa: E731
    variants = []
    for n in args.nodes:
        cfg = mod.JacobiConfig(nodes=n, **base)
        label = args.file or f"n={args.generate}"
        variants.append((label, n, lambda c=cfg: mod.run(c), seq_fn))
    return _report("jacobi", variants, args)


def _bench_nbody(args) -> int:
    from .bench import nbody as mod

    base = dict(file=args.file, n=args.n, iterations=args.iterations,
                dt=args.dt, out=args.out)
    if args.seq:
        mod.run_sequential(mod.NBodyConfig(nodes=1, **base))
        return 0
    seq_cfg = mod.NBodyConfig(nodes=1, **base)
    seq_fn = lambda: mod.run_sequential(seq_cfg)  # noqa: E731
    variants = []
    for n in args.nodes:
        cfg = mod.NBodyConfig(nodes=n, **base)
        variants.append((f"n={args.n} steps={args.iterations}", n,
                         lambda c=cfg: mod.run(c), seq_fn))
    return _report("nbody", variants, args)


def _bench_stencil(args) -> int:
    from .bench import stencil as mod

    operations = [tok for tok in args.kernel.split(",") if tok]
    if args.seq:
        mod.run_sequential(mod.StencilDemoConfig(
            args.in_file, args.out_file, 1, operations))
        return 0
    seq_cfg = mod.StencilDemoConfig(args.in_file, "", 1, operations)
    seq_fn = lambda: mod.run_sequential(seq_cfg)  # noqa: E731
    variants = []
    for n in args.nodes:
        cfg = mod.StencilDemoConfig(args.in_file, args.out_file, n, operations)
        variants.append((args.kernel, n, lambda c=cfg: mod.run(c), seq_fn))
    return _report("stencil", variants, args)


def _bench_goldbach(args) -> int:
    from .bench import goldbach as mod

    if args.seq:
        print(mod.brute_force_max_continuous(args.max_prime))
        return 0
    seq_fn = lambda: mod.brute_force_max_continuous(args.max_prime)  # noqa: E731
    variants = []
    for g in args.g_workers:
        cfg = mod.GoldbachConfig(args.max_prime, args.p_workers, g)
        variants.append((f"max_prime={args.max_prime}", g,
                         lambda c=cfg: mod.run(c), seq_fn))
    print(f"max continuous: {mod.run(mod.GoldbachConfig(args.max_prime, args.p_workers, args.g_workers[0]))}")
    return _report("goldbach", variants, args)


def _bench_mandelbrot(args) -> int:
    from .bench import mandelbrot as mod

    base = dict(width=args.width, height=args.height,
                pixel_delta=args.pixel_delta,
                max_iterations=args.max_iterations, out=args.out)
    if args.seq:
        mod.run_sequential(mod.MandelbrotConfig(workers=1, **base))
        return 0
    seq_cfg = mod.MandelbrotConfig(workers=1, **base)
    seq_fn = lambda: mod.run_sequential(seq_cfg)  # noqa: E731
    variants = []
    for w in args.workers:
        cfg = mod.MandelbrotConfig(workers=w, **base)
        variants.append((f"{args.width}x{args.height}", w,
                         lambda c=cfg: mod.run(c), seq_fn))
    return _report("mandelbrot", variants, args)


# ---------------------------------------------------------------------------

def _add_verify(sub) -> None:
    p = sub.add_parser("verify", help="explore an abstract network model")
    p.add_argument("model", choices=["farm", "gop", "pog"])
    p.add_argument("--workers", type=int, default=2,
                   help="workers (farm) or lanes (gop/pog)")
    p.add_argument("--objects", type=int, default=5, help="alphabet size <= 5")
    p.add_argument("--stages", type=int, default=3, help="gop/pog stages")
    p.add_argument("--state-cap", type=int, default=1_000_000)
    p.set_defaults(entry=_verify_entry)


def _verify_entry(args) -> int:
    from . import verify as v

    if args.model == "farm":
        model = v.farm_model(workers=args.workers, objects=args.objects)
        hide = v.farm_channels(args.workers)
    elif args.model == "gop":
        model = v.gop_model(pipes=args.workers, stages=args.stages,
                            objects=args.objects)
        hide = v.composite_channels(args.workers, args.stages)
    else:
        model = v.pog_model(stages=args.stages, workers=args.workers,
                            objects=args.objects)
        hide = v.composite_channels(args.workers, args.stages)
    res = v.explore(model, state_cap=args.state_cap)
    print(f"model: {args.model}  processes: {len(model.processes)}")
    print(f"states explored: {res.states}"
          + ("  (truncated)" if res.truncated else ""))
    print(f"deadlock free: {res.deadlock_free}")
    if res.deadlocks:
        print(f"  first counterexample: {' -> '.join(res.deadlocks[0]) or '(empty)'}")
    print(f"terminates: {res.terminated}")
    hidden_res = v.explore(model, state_cap=args.state_cap, hidden=hide)
    print(f"divergence free under hiding: {not hidden_res.divergent}")
    if args.model in ("gop", "pog"):
        other = (v.pog_model(stages=args.stages, workers=args.workers,
                             objects=args.objects)
                 if args.model == "gop"
                 else v.gop_model(pipes=args.workers, stages=args.stages,
                                  objects=args.objects))
        eq = v.check_equivalence(model, other, hide)
        print(f"trace-equivalent to the {'pog' if args.model == 'gop' else 'gop'} "
              f"formulation: {eq.holds}")
    return 0 if res.deadlock_free and res.terminated else 1


# ---------------------------------------------------------------------------

def _add_cluster(sub) -> None:
    p = sub.add_parser("cluster", help="host or worker side of a cluster run")
    roles = p.add_subparsers(dest="role", required=True)

    h = roles.add_parser("host")
    h.add_argument("--workers", type=int, required=True)
    h.add_argument("--port", type=int, default=0)
    h.add_argument("--demo", choices=["mandelbrot"], default="mandelbrot")
    h.add_argument("--width", type=int, default=350)
    h.add_argument("--height", type=int, default=200)
    h.add_argument("--pixel-delta", type=float, default=0.01)
    h.add_argument("--max-iterations", type=int, default=100)
    h.add_argument("--out", required=True)
    h.add_argument("--timeout", type=float, default=30.0)
    h.set_defaults(entry=_cluster_host)

    w = roles.add_parser("worker")
    w.add_argument("--host", required=True, metavar="H:P")
    w.add_argument("--timeout", type=float, default=30.0)
    w.set_defaults(entry=_cluster_worker)


def worker_registry():
    """Every function a worker node might be asked to run."""
    from .bench import mandelbrot
    from .builder import FunctionRegistry

    reg = FunctionRegistry()
    reg.register("mandel.calc", mandelbrot.calc_colour)
    reg.register("identity", lambda payload, mods: 0)
    return reg


def _cluster_host(args) -> int:
    from . import ppm
    from .bench import mandelbrot
    from .cluster import RemoteFarmJob, default_codecs, host_run

    cfg = mandelbrot.MandelbrotConfig(
        width=args.width, height=args.height, pixel_delta=args.pixel_delta,
        max_iterations=args.max_iterations)
    job = RemoteFarmJob(
        e_details=mandelbrot.emit_details(cfg),
        r_details=mandelbrot.result_details(),
        function="mandel.calc",
        workers=args.workers,
        port=args.port,
        connect_timeout=args.timeout,
    )
    outcome, port = host_run(
        job, default_codecs(),
        on_listening=lambda p: print(f"listening on port {p}", flush=True))
    ppm.write_ppm(args.out, outcome.result.image)
    print(f"wrote {args.out}")
    return 0


def _cluster_worker(args) -> int:
    from .cluster import default_codecs, worker_run_remote

    host, _, port = args.host.rpartition(":")
    return worker_run_remote(host, int(port), worker_registry(),
                             default_codecs(), connect_timeout=args.timeout)


# ---------------------------------------------------------------------------

def _add_run_spec(sub) -> None:
    p = sub.add_parser("run", help="validate, build and run a network description")
    p.add_argument("spec", help="path to the JSON description")
    p.add_argument("--registry", required=True,
                   choices=["montecarlo", "concordance", "jacobi", "nbody",
                            "stencil", "goldbach", "mandelbrot"],
                   help="demo whose registered callbacks the description uses")
    p.set_defaults(entry=_run_spec)


def _run_spec(args) -> int:
    import importlib
    from pathlib import Path

    from .builder import build, load_spec, validate

    mod = importlib.import_module(f".bench.{args.registry}", package=__package__)
    reg = mod.registry()
    spec = load_spec(Path(args.spec).read_text(encoding="utf-8"))
    diagnostics = validate(spec, reg)
    if diagnostics:
        for d in diagnostics:
            print(str(d), file=sys.stderr)
        return 1
    report = build(spec, reg).run()
    if not report.ok:
        print(f"network failed with code {report.code}", file=sys.stderr)
        return 2
    print(f"ok in {report.wall_ms:.1f} ms "
          f"({len(report.results)} collector(s))")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
