import struct
import zlib

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from conftest import SO2_INITIAL, so2_config

from entroreact.crn import PolynomialSystem
from entroreact.grid import Grid, apply_neumann_laplacian, integrate, laplacian_eigenvalue, neumann_laplacian_matrix
from entroreact.solver import (
    CheckpointError,
    Integrator,
    LinearSolverError,
    SimulationConfig,
    StepSizeUnderflow,
    conjugate_gradient,
    init_state,
    load_checkpoint,
    parse_profile,
    run,
    save_checkpoint,
)


def heat_only(n_species=1, d=1.0):
    names = tuple(f"u{i}" for i in range(n_species))
    return PolynomialSystem(tuple(() for _ in range(n_species)), species=names, diffusion=(d,) * n_species)


@pytest.mark.parametrize(
    "profile, expected",
    [
        ("constant(2.5)", lambda x: np.full_like(x, 2.5)),
        ("cosine(1, 0.5, 1)", lambda x: 1 + 0.5 * np.cos(np.pi * x)),
        ("gaussian(1, 2, 0.5, 0.1)", lambda x: 1 + 2 * np.exp(-(((x - 0.5) / 0.1) ** 2))),
        ("step(1, 3, 0.5)", lambda x: np.where(x < 0.5, 1.0, 3.0)),
    ],
)
def test_profiles(profile, expected):
    g = Grid.interval(1.0, 10)
    (x,) = g.coordinates()
    np.testing.assert_allclose(parse_profile(profile)(g, np.random.default_rng(0)), expected(x), rtol=1e-15)


def test_noise_profile_seeded():
    g = Grid.interval(1.0, 50)
    a = parse_profile("noise(1, 0.1)")(g, np.random.default_rng(4))
    b = parse_profile("noise(1, 0.1)")(g, np.random.default_rng(4))
    np.testing.assert_array_equal(a, b)
    assert np.all(np.abs(a - 1) <= 0.1)


@pytest.mark.parametrize("profile", ["cosine(1)", "wave(1)", "constant(x)", "constant"])
def test_bad_profiles(profile):
    with pytest.raises(ValueError):
        parse_profile(profile)


def test_negative_initial_profile_rejected(so2):
    cfg = SimulationConfig(so2, Grid.interval(1.0, 10), ("cosine(0, 1, 1)", "constant(1)", "constant(1)"), 1.0)
    with pytest.raises(ValueError, match="negative"):
        init_state(cfg)


@pytest.mark.parametrize(
    "kw, fragment",
    [
        (dict(dt_init=1.0, dt_max=0.1), "dt_min"),
        (dict(scheme="crank"), "unknown diffusion scheme"),
        (dict(cadence=0.0), "cadence"),
        (dict(diffusion=(1.0, -1.0, 1.0)), "diffusion"),
    ],
)
def test_config_validation(so2, kw, fragment):
    with pytest.raises(ValueError, match=fragment):
        so2_config(so2, 1.0, 10, **kw)


def test_config_needs_one_profile_per_species(so2):
    with pytest.raises(ValueError, match="3 species"):
        SimulationConfig(so2, Grid.interval(1.0, 10), SO2_INITIAL[:2], 1.0)


def test_cg_matches_direct_solve():
    g = Grid.rectangle(1.0, 1.0, 20, 16)
    A = sp.identity(g.size) - 0.01 * neumann_laplacian_matrix(g)
    b = np.random.default_rng(0).random(g.size)
    x, iters = conjugate_gradient(lambda v: A @ v, b)
    np.testing.assert_allclose(x, spla.spsolve(A.tocsc(), b), rtol=1e-10)
    assert iters > 0


def test_cg_raises_when_starved():
    g = Grid.rectangle(1.0, 1.0, 20, 20)
    A = sp.identity(g.size) - 1.0 * neumann_laplacian_matrix(g)
    b = np.random.default_rng(1).random(g.size)
    with pytest.raises(LinearSolverError):
        conjugate_gradient(lambda v: A @ v, b, max_iter=2)


@pytest.mark.parametrize("grid", [Grid.interval(1.0, 40), Grid.interval(1.0, 1), Grid.rectangle(1.0, 1.0, 12, 10)])
def test_implicit_solve(grid):
    integ = Integrator(heat_only(), grid, [1.0])
    b = np.random.default_rng(2).random(grid.shape)
    x = integ._implicit(0.3, b)
    np.testing.assert_allclose(x - 0.3 * apply_neumann_laplacian(grid, x), b, atol=1e-10)


@pytest.mark.parametrize("grid, modes", [(Grid.interval(1.0, 64), (3,)), (Grid.rectangle(1.0, 1.0, 16, 16), (1, 2))])
def test_backward_euler_eigenmode(grid, modes):
    integ = Integrator(heat_only(d=0.7), grid, [0.7], scheme="backward_euler")
    f = np.ones(grid.shape)
    for x, k, L in zip(grid.coordinates(), modes, grid.lengths):
        f = f * np.cos(k * np.pi * x / L)
    dt = 0.01
    lam = laplacian_eigenvalue(grid, modes)
    out = integ.diffuse(f[None], dt)[0]
    np.testing.assert_allclose(out, f / (1 - dt * 0.7 * lam), atol=1e-10)


def test_tr_bdf2_eigenmode():
    grid = Grid.interval(1.0, 64)
    integ = Integrator(heat_only(), grid, [1.0])
    (x,) = grid.coordinates()
    f = np.cos(2 * np.pi * x)
    z = 0.05 * laplacian_eigenvalue(grid, (2,))
    gam = 2 - np.sqrt(2)
    stage = (1 + gam * z / 2) / (1 - gam * z / 2)
    amp = (stage / (gam * (2 - gam)) - (1 - gam) ** 2 / (gam * (2 - gam))) / (1 - gam * z / 2)
    np.testing.assert_allclose(integ.diffuse(f[None], 0.05)[0], amp * f, atol=1e-12)


def test_diffusion_conserves_mass(so2):
    grid = Grid.interval(1.0, 50)
    state = init_state(so2_config(so2, 1.0, 50))
    integ = Integrator(so2, grid, so2.diffusion)
    out = integ.diffuse(state.u, 0.1)
    np.testing.assert_allclose(integrate(grid, out), integrate(grid, state.u), rtol=1e-13)


def test_run_keeps_positivity_and_totals(so2_run, so2):
    series, state = so2_run
    assert state.u.min() >= 0
    M = np.array([vec for _, vec in so2.conservation])
    np.testing.assert_allclose(M @ state.masses(), [2.0, 7.0], rtol=1e-10)
    assert state.t == 10.0
    assert series.t[0] == 0.0 and series.t[-1] == 10.0


def test_records_follow_cadence(so2_run):
    series, _ = so2_run
    t = series.times
    assert np.all(np.diff(t) > 0)
    # one record at or past every multiple of the cadence that a step reaches
    k = np.floor(t[1:-1] / 0.01 + 1e-9)
    assert np.all(np.diff(k) >= 1)


def test_threads_do_not_change_results(so2):
    a, sa = run(so2_config(so2, 0.5, 60, keep_snapshots=False))
    b, sb = run(so2_config(so2, 0.5, 60, keep_snapshots=False, threads=3))
    np.testing.assert_array_equal(sa.u, sb.u)
    np.testing.assert_array_equal(a.rows(), b.rows())


def test_heat_only_reference_is_mean():
    grid = Grid.interval(1.0, 40)
    cfg = SimulationConfig(heat_only(), grid, ("cosine(2, 1, 1)",), 2.0, keep_snapshots=False)
    series, state = run(cfg)
    np.testing.assert_allclose(state.u, 2.0, atol=1e-7)
    assert series.total_distance()[-1] < 1e-7


def test_step_size_underflow(so2):
    cfg = so2_config(so2, 1.0, 20, dt_min=1e-3, dt_init=1e-3, tol=1e-30)
    with pytest.raises(StepSizeUnderflow) as info:
        run(cfg)
    assert info.value.state is not None and len(info.value.series) >= 1


def test_zero_length_run(so2):
    series, state = run(so2_config(so2, 0.0, 20))
    assert len(series) == 0 and state.t == 0.0


def test_checkpoint_roundtrip(so2):
    cfg = so2_config(so2, 0.3, 30)
    _, state = run(cfg)
    back = load_checkpoint(save_checkpoint(state))
    assert back.grid == state.grid
    assert (back.t, back.dt, back.last_dt, back.accepted, back.rejected) == (
        state.t, state.dt, state.last_dt, state.accepted, state.rejected
    )
    np.testing.assert_array_equal(back.u, state.u)


def test_checkpoint_rejects_corruption(so2):
    _, state = run(so2_config(so2, 0.1, 10))
    blob = bytearray(save_checkpoint(state))
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(b"XXXX" + bytes(blob[4:]))
    flipped = bytearray(blob)
    flipped[40] ^= 0xFF
    with pytest.raises(CheckpointError, match="checksum"):
        load_checkpoint(bytes(flipped))
    with pytest.raises(CheckpointError):
        load_checkpoint(bytes(blob[:-12]))
    body = bytes(blob[:4]) + struct.pack("<H", 99) + bytes(blob[6:-4])
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(body + struct.pack("<I", zlib.crc32(body)))


def test_restart_reproduces_unsplit_run(so2):
    cfg = so2_config(so2, 1.0, 40, checkpoint_at=(0.5,))
    saved = []
    full, end_full = run(cfg, on_checkpoint=lambda s: saved.append(save_checkpoint(s)))
    assert len(saved) == 1
    restart = load_checkpoint(saved[0])
    second, end_split = run(so2_config(so2, 1.0, 40), state=restart)
    head = full.t.index(restart.t)
    first = type(full)(full.species, full.grid)
    for name in ("t", "dt", "E", "D"):
        setattr(first, name, getattr(full, name)[: head + 1])
    first.norms = {k: v[: head + 1] for k, v in full.norms.items()}
    merged = first.merged(second)
    np.testing.assert_array_equal(merged.rows(), full.rows())
    np.testing.assert_array_equal(end_split.u, end_full.u)
