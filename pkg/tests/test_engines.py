import numpy as np
import pytest

from procnet.bench import jacobi, nbody, stencil
from procnet.engines import EngineConfig, SharedGrid
from procnet.ppm import read_ppm, write_ppm
from procnet.protocol import COMPLETED_OK


def test_default_partitions_cover_and_are_disjoint():
    for size, nodes in [(10, 3), (4, 3), (1, 4), (7, 7), (100, 1)]:
        parts = SharedGrid.default_partitions(size, nodes)
        assert len(parts) == nodes
        covered = []
        for sl in parts:
            covered.extend(range(sl.start, sl.stop))
        assert covered == list(range(size))


def test_engine_config_requires_exactly_one_stop_mode():
    kw = dict(nodes=1, partition=lambda p, n: 0, calculation=lambda p, i: 0,
              update=lambda p: 0)
    with pytest.raises(ValueError):
        EngineConfig(**kw)  # neither mode
    with pytest.raises(ValueError):
        EngineConfig(**kw, error=lambda p, m: False, error_margin=1e-3,
                     iterations=5)
    with pytest.raises(ValueError):
        EngineConfig(**kw, iterations=5, error=lambda p, m: False)


def jacobi_cfg(**kw):
    defaults = dict(generate_n=None, margin=1e-12, nodes=1)
    defaults.update(kw)
    return jacobi.JacobiConfig(**defaults)


def run_jacobi_system(a, b, known, nodes, margin=1e-12, check_writes=False):
    cfg = jacobi.JacobiConfig(nodes=nodes, margin=margin,
                              check_writes=check_writes)
    net_cfg_source = [(np.array(a, float), np.array(b, float),
                       np.array(known, float))]

    from types import SimpleNamespace

    from procnet.functionals import RunnableNetwork
    from procnet.terminals import EmitDetails, collect_run, emit_run
    from procnet.engines import multicore_engine_run

    e = EmitDetails(factory=jacobi.LinearSystem, init=jacobi.init_source,
                    init_data=[net_cfg_source], create=jacobi.create_system)
    net = RunnableNetwork()
    ch1, ch2 = net.new_channel(), net.new_channel()
    ecfg = jacobi.engine_config(cfg)
    net.add_process(lambda: emit_run(e, ch1), "emit")
    net.add_process(lambda: multicore_engine_run(ecfg, ch1, ch2), "engine")
    net.add_process(
        lambda: collect_run(jacobi.result_details(), ch2), "collect",
        collects=True)
    report = net.run(timeout=60)
    assert report.ok, report.handles
    return report.results[0].result


def test_jacobi_two_by_two_closed_form():
    # 2x + y = 3, x + 2y = 3 has the solution x = y = 1
    res = run_jacobi_system([[2, 1], [1, 2]], [3, 3], [1, 1], nodes=2)
    assert np.allclose(res.solutions[0], [1.0, 1.0], atol=1e-9)
    assert res.verified


def test_jacobi_identity_matrix_converges_first_sweep():
    b = [4.0, -2.5, 7.0]
    res = run_jacobi_system(np.eye(3), b, b, nodes=1)
    assert np.array_equal(res.solutions[0], b)


def test_jacobi_single_node_equals_sequential_iterate_sequence():
    cfg = jacobi.JacobiConfig(nodes=1, margin=1e-10, generate_n=12, seed=3)
    par = jacobi.run(cfg)
    seq = jacobi.run_sequential(cfg)
    assert np.array_equal(par.solutions[0], seq.solutions[0])


@pytest.mark.parametrize("n", [33])
def test_jacobi_solution_bytes_identical_across_node_counts(n):
    outs = []
    for nodes in (1, 2, 4):
        cfg = jacobi.JacobiConfig(nodes=nodes, margin=1e-12, generate_n=n, seed=9)
        res = jacobi.run(cfg)
        outs.append(res.solutions[0].tobytes())
        assert res.verified
    assert outs[0] == outs[1] == outs[2]


def test_jacobi_write_discipline_debug_mode():
    res = run_jacobi_system([[3, 1], [1, 3]], [4, 4], [1, 1], nodes=2,
                            check_writes=True)
    assert res.verified


def test_jacobi_write_discipline_catches_stray_writes():
    from procnet.engines import _NodePool
    from procnet.kernel import FatalError

    class P:
        pass

    payload = P()
    payload.grid = SharedGrid(np.zeros(4))
    payload.grid.partitions = SharedGrid.default_partitions(4, 2)

    def bad_calc(p, i):
        p.grid.back[:] = 1.0  # writes every row, not just its own
        return COMPLETED_OK

    pool = _NodePool(2, bad_calc, checked=True)
    with pytest.raises(FatalError):
        pool.phase(payload)


def test_jacobi_nonconvergence_hits_sweep_cap():
    # a non-dominant system oscillates; the cap must abort, not hang
    cfg = jacobi.JacobiConfig(nodes=1, margin=1e-12)
    e = jacobi.emit_details(jacobi.JacobiConfig(nodes=1))
    from procnet.engines import multicore_engine_run
    from procnet.functionals import RunnableNetwork
    from procnet.terminals import EmitDetails, collect_run, emit_run

    bad = [(np.array([[1.0, 2.0], [2.0, 1.0]]), np.array([1.0, 1.0]),
            np.array([1 / 3, 1 / 3]))]
    ecfg = jacobi.engine_config(cfg)
    ecfg.max_sweeps = 50
    details = EmitDetails(factory=jacobi.LinearSystem, init=jacobi.init_source,
                          init_data=[bad], create=jacobi.create_system)
    net = RunnableNetwork()
    ch1, ch2 = net.new_channel(), net.new_channel()
    net.add_process(lambda: emit_run(details, ch1), "emit")
    net.add_process(lambda: multicore_engine_run(ecfg, ch1, ch2), "engine")
    net.add_process(lambda: collect_run(jacobi.result_details(), ch2),
                    "collect", collects=True)
    report = net.run(timeout=30)
    assert not report.ok


def test_nbody_single_body_moves_uniformly():
    mass = np.array([1.0])
    pos = np.array([[0.0, 0.0]])
    vel = np.array([[0.5, -0.25]])
    cfg = nbody.NBodyConfig(n=1, iterations=8, dt=1.0, nodes=1)
    cfg_source = (mass, pos, vel)

    from types import SimpleNamespace

    ctx = SimpleNamespace()
    nbody.init_bodies(ctx, [cfg_source, 1, 1.0])
    payload = nbody.BodySystem()
    nbody.create_bodies(payload, ctx, [])
    nbody.partition_bodies(payload, 1)
    for _ in range(8):
        nbody.step_partition(payload, 0)
        nbody.advance_state(payload)
    assert np.array_equal(payload.pos[0], [0.5 * 8, -0.25 * 8])


def test_nbody_symmetric_pair_conserves_momentum_exactly():
    mass = np.array([5e9, 5e9])
    pos = np.array([[-1.0, 0.0], [1.0, 0.0]])
    vel = np.array([[0.0, 0.125], [0.0, -0.125]])
    cfg = nbody.NBodyConfig(n=2, iterations=10, dt=0.25, nodes=2)
    res = run_nbody(cfg, (mass, pos, vel), momentum_probe=True)
    for p in res["momenta"]:
        assert p[0] == 0.0 and p[1] == 0.0
    payload = res["payload"]
    com = (payload.mass[:, None] * payload.pos).sum(axis=0)
    assert com[0] == 0.0 and com[1] == 0.0


def run_nbody(cfg, source, momentum_probe=False):
    from types import SimpleNamespace

    ctx = SimpleNamespace()
    nbody.init_bodies(ctx, [source, cfg.n, cfg.dt])
    payload = nbody.BodySystem()
    nbody.create_bodies(payload, ctx, [])
    nbody.partition_bodies(payload, cfg.nodes)
    momenta = []
    for _ in range(cfg.iterations):
        for i in range(cfg.nodes):
            nbody.step_partition(payload, i)
        nbody.advance_state(payload)
        if momentum_probe:
            # elementwise, not a dot product: BLAS may fuse multiply-adds,
            # which would hide the exact pairwise cancellation being tested
            momenta.append((payload.mass[:, None] * payload.vel).sum(axis=0))
    return {"payload": payload, "momenta": momenta}


def test_nbody_output_bytes_identical_across_node_counts():
    outs = []
    for nodes in (1, 2, 4):
        cfg = nbody.NBodyConfig(n=16, iterations=20, dt=0.01, nodes=nodes, seed=5)
        res = nbody.run(cfg)
        outs.append(res.state_text())
    assert outs[0] == outs[1] == outs[2]


def test_nbody_file_roundtrip(tmp_path):
    mass, pos, vel = nbody.make_bodies(8, seed=2)
    path = tmp_path / "bodies.txt"
    nbody.write_bodies(path, mass, pos, vel)
    m2, p2, v2 = nbody.read_bodies(path, 8)
    assert np.array_equal(mass, m2) and np.array_equal(pos, p2)
    with pytest.raises(ValueError):
        nbody.read_bodies(path, 9)


def make_test_ppm(path, h=24, w=16, seed=7, constant=None):
    rng = np.random.Generator(np.random.PCG64(seed))
    if constant is None:
        img = rng.integers(0, 256, (h, w, 3), dtype=np.uint8)
    else:
        img = np.full((h, w, 3), constant, dtype=np.uint8)
    write_ppm(path, img)
    return img


def test_stencil_edge_kernel_on_constant_image_is_all_zero(tmp_path):
    # the edge kernels sum to zero, so a constant image maps to zero
    src = tmp_path / "const.ppm"
    out = tmp_path / "out.ppm"
    make_test_ppm(src, constant=123)
    cfg = stencil.StencilDemoConfig(str(src), str(out), nodes=2,
                                    operations=["edge3"])
    res = stencil.run(cfg)
    assert np.count_nonzero(res.images[0]) == 0


def test_greyscale_idempotent_on_grey_pixels(tmp_path):
    src = tmp_path / "grey.ppm"
    rng = np.random.Generator(np.random.PCG64(3))
    v = rng.integers(0, 256, (10, 10), dtype=np.uint8)
    write_ppm(src, np.repeat(v[..., None], 3, axis=2))
    cfg = stencil.StencilDemoConfig(str(src), "", nodes=1, operations=["grey"])
    once = stencil.run(cfg).images[0]
    twice = stencil.apply_sequential(once, ["grey"])
    assert np.array_equal(once, twice)
    assert np.array_equal(once[..., 0], v)


def test_stencil_chain_equals_sequential_application(tmp_path):
    src = tmp_path / "in.ppm"
    img = make_test_ppm(src, h=40, w=30, seed=11)
    cfg = stencil.StencilDemoConfig(str(src), "", nodes=3,
                                    operations=["grey", "edge5"])
    par = stencil.run(cfg).images[0]
    seq = stencil.apply_sequential(img, ["grey", "edge5"])
    assert np.array_equal(par, seq)


def test_stencil_identical_across_node_counts(tmp_path):
    src = tmp_path / "in.ppm"
    make_test_ppm(src, h=33, w=21, seed=13)
    outs = []
    for nodes in (1, 2, 4):
        cfg = stencil.StencilDemoConfig(str(src), "", nodes=nodes,
                                        operations=["grey", "edge3"])
        outs.append(stencil.run(cfg).images[0].tobytes())
    assert outs[0] == outs[1] == outs[2]


def test_stencil_kernel_validation(tmp_path):
    from procnet.kernel import FatalError

    with pytest.raises(FatalError):
        stencil.check_kernel(np.ones((2, 2), dtype=np.int32), (10, 10))
    with pytest.raises(FatalError):
        stencil.check_kernel(np.ones((11, 11), dtype=np.int32), (10, 10))


def test_ppm_roundtrip(tmp_path):
    img = make_test_ppm(tmp_path / "x.ppm", h=5, w=7, seed=1)
    assert np.array_equal(read_ppm(tmp_path / "x.ppm"), img)
