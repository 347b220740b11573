import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entroreact.grid import (
    Grid,
    apply_neumann_laplacian,
    entropy_functional,
    fisher_information,
    h1_norm,
    integrate,
    laplacian_eigenvalue,
    llogl_norm,
    lp_norm,
    neumann_laplacian_matrix,
    read_snapshot,
    write_snapshot,
)


def test_grid_geometry():
    g = Grid.rectangle(2.0, 1.0, 4, 5)
    assert g.shape == (4, 5) and g.size == 20 and g.dim == 2
    assert g.spacing == (0.5, 0.2)
    assert g.cell_volume == pytest.approx(0.1)
    x, y = g.coordinates()
    assert x[0, 0] == 0.25 and y[0, 1] == pytest.approx(0.3)


@pytest.mark.parametrize("lengths, cells", [((1.0,), (0,)), ((0.0,), (4,)), ((1.0, 1.0, 1.0), (2, 2, 2))])
def test_grid_rejects(lengths, cells):
    with pytest.raises(ValueError):
        Grid(lengths, cells)


def test_single_cell():
    g = Grid.interval(1.0, 1)
    assert lp_norm(g, np.array([7.0]), np.inf) == 7.0
    assert apply_neumann_laplacian(g, np.array([3.0])).tolist() == [0.0]
    assert neumann_laplacian_matrix(g).toarray().tolist() == [[0.0]]


def test_midpoint_exact_for_linear():
    g = Grid.interval(2.0, 10)
    (x,) = g.coordinates()
    assert integrate(g, 3 * x + 1) == pytest.approx(8.0, rel=1e-14)


def test_norms_constant_field():
    g = Grid.rectangle(2.0, 3.0, 8, 6)
    f = np.full(g.shape, 2.0)
    assert lp_norm(g, f, 1) == pytest.approx(12.0)
    assert lp_norm(g, f, 2) == pytest.approx(2.0 * np.sqrt(6.0))
    assert lp_norm(g, f, np.inf) == 2.0
    assert llogl_norm(g, f) == pytest.approx(6.0 * 2 * np.log(2))


def test_llogl_zero_convention():
    g = Grid.interval(1.0, 4)
    assert llogl_norm(g, np.zeros(4)) == 0.0
    with pytest.raises(ValueError):
        llogl_norm(g, -np.ones(4))


def test_entropy_zero_at_equilibrium():
    # E(u_inf) with mu = -log u_inf is -|Omega| sum u_inf
    g = Grid.interval(1.0, 16)
    uinf = np.array([0.5, 2.0])
    u = np.broadcast_to(uinf[:, None], (2, 16))
    assert entropy_functional(g, u, -np.log(uinf)) == pytest.approx(-2.5, rel=1e-14)


def test_fisher_zero_for_constants_and_positive_otherwise():
    g = Grid.interval(1.0, 32)
    (x,) = g.coordinates()
    assert fisher_information(g, np.ones((1, 32)), [1.0]) == 0.0
    u = np.array([1 + 0.5 * np.cos(np.pi * x)])
    assert fisher_information(g, u, [1.0]) > 0
    assert fisher_information(g, u, [2.0]) == pytest.approx(2 * fisher_information(g, u, [1.0]))


def test_fisher_converges_to_integral():
    # int_0^1 (b pi sin(pi x))^2 / (1 + b cos(pi x)) dx, b = 0.5
    from scipy.integrate import quad

    b = 0.5
    ref = quad(lambda x: (b * np.pi * np.sin(np.pi * x)) ** 2 / (1 + b * np.cos(np.pi * x)), 0, 1)[0]
    g = Grid.interval(1.0, 400)
    (x,) = g.coordinates()
    val = fisher_information(g, np.array([1 + b * np.cos(np.pi * x)]), [1.0])
    assert val == pytest.approx(ref, rel=1e-4)


def test_h1_norm_constant():
    g = Grid.interval(1.0, 8)
    assert h1_norm(g, np.full(8, 3.0)) == pytest.approx(3.0)


@pytest.mark.parametrize("grid", [Grid.interval(1.0, 20), Grid.rectangle(1.0, 2.0, 12, 10)])
def test_laplacian_matrix_matches_stencil(grid):
    rng = np.random.default_rng(0)
    f = rng.standard_normal(grid.shape)
    A = neumann_laplacian_matrix(grid)
    np.testing.assert_allclose(A @ f.ravel(), apply_neumann_laplacian(grid, f).ravel(), atol=1e-9)


@pytest.mark.parametrize("grid, modes", [(Grid.interval(1.0, 30), (3,)), (Grid.rectangle(1.0, 2.0, 16, 12), (2, 5))])
def test_cosine_eigenmodes(grid, modes):
    f = np.ones(grid.shape)
    for x, k, L in zip(grid.coordinates(), modes, grid.lengths):
        f = f * np.cos(k * np.pi * x / L)
    lap = apply_neumann_laplacian(grid, f)
    np.testing.assert_allclose(lap, laplacian_eigenvalue(grid, modes) * f, atol=1e-9)


def test_snapshot_roundtrip():
    g = Grid.rectangle(1.0, 1.0, 3, 4)
    rng = np.random.default_rng(2)
    u = rng.random((2,) + g.shape)
    buf = io.StringIO()
    write_snapshot(buf, g, u, ["A", "B"])
    text = buf.getvalue()
    assert text.splitlines()[0] == "x,y,A,B"
    names, back = read_snapshot(io.StringIO(text), g)
    assert names == ["A", "B"]
    np.testing.assert_array_equal(back, u)


fields = st.lists(st.floats(-100, 100, allow_nan=False), min_size=8, max_size=8)


@settings(max_examples=100, deadline=None)
@given(fields)
def test_laplacian_conserves_mass(vals):
    g = Grid.interval(1.0, 8)
    f = np.array(vals)
    assert abs(integrate(g, apply_neumann_laplacian(g, f))) <= 1e-10 * (1 + np.abs(f).max() * 64)


@settings(max_examples=100, deadline=None)
@given(fields)
def test_laplacian_negative_semidefinite(vals):
    g = Grid.interval(1.0, 8)
    f = np.array(vals)
    assert np.dot(f, apply_neumann_laplacian(g, f)) <= 1e-9 * (1 + np.dot(f, f) * 64)


@settings(max_examples=100, deadline=None)
@given(fields)
def test_norm_ordering_on_unit_interval(vals):
    # |Omega| = 1 so L1 <= L2 <= L4 <= Linf
    g = Grid.interval(1.0, 8)
    f = np.array(vals)
    n = [lp_norm(g, f, p) for p in (1, 2, 4, np.inf)]
    assert all(a <= b * (1 + 1e-12) + 1e-300 for a, b in zip(n, n[1:]))
