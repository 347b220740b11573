import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entroreact.grid import Grid
from entroreact.inequalities import (
    check_gn_chain,
    check_spacetime_interpolation,
    check_xlogx_bound,
    gn_ratio,
    random_band_limited,
    truncation_chi,
)


def test_truncation_chi_pieces():
    s = np.array([-12.0, -7.0, 0.0, 3.0, 5.0, 7.5, 10.0, 11.0])
    np.testing.assert_array_equal(truncation_chi(s, 5.0), [12.0, 4.0, 0, 0, 0, 5.0, 10.0, 11.0])
    assert truncation_chi(7.0, 5.0) == 4.0
    with pytest.raises(ValueError):
        truncation_chi(s, 1.0)


def test_truncation_chi_is_2_lipschitz():
    s = np.linspace(-30, 30, 6001)
    c = truncation_chi(s, 5.0)
    assert np.max(np.abs(np.diff(c)) / np.diff(s)) <= 2 + 1e-9


@pytest.mark.parametrize("grid", [Grid.interval(1.0, 128), Grid.rectangle(1.0, 1.0, 32, 32)])
def test_chain_on_random_fields(grid):
    rng = np.random.default_rng(11)
    for _ in range(40):
        f = random_band_limited(grid, rng)
        rep = check_gn_chain(grid, f, 5.0)
        assert rep.passed, [(r.name, r.slack) for r in rep.records if not r.passed]
        assert [r.name for r in rep.records] == ["split", "low", "h1", "llogl"]


def test_chain_with_constant_adds_records():
    grid = Grid.interval(1.0, 64)
    f = random_band_limited(grid, np.random.default_rng(0))
    C4 = gn_ratio(grid, truncation_chi(f, 5.0))
    rep = check_gn_chain(grid, f, 5.0, C4)
    assert rep["gn"].slack == pytest.approx(0.0, abs=1e-9 * (1 + rep["gn"].rhs))
    assert rep["composite"].passed
    with pytest.raises(KeyError):
        rep["missing"]


def test_chain_rejects_bad_input():
    grid = Grid.interval(1.0, 8)
    with pytest.raises(ValueError, match="exceed 1"):
        check_gn_chain(grid, np.ones(8), 0.5)
    with pytest.raises(ValueError, match="finite"):
        check_gn_chain(grid, np.full(8, np.nan), 5.0)


def test_small_field_has_zero_truncation():
    grid = Grid.interval(1.0, 16)
    rep = check_gn_chain(grid, np.full(16, 4.0), 5.0)
    assert rep["h1"].lhs == 0 and rep["llogl"].lhs == 0


def test_xlogx_equality_and_errors():
    L = np.array([0.1, 1.0, 4.5])
    np.testing.assert_allclose(check_xlogx_bound(np.exp(L), L), 0.0, atol=1e-9)
    # x = 0: slack is 1 - (1 - e^L) = e^L
    assert check_xlogx_bound(0.0, 1.0) == pytest.approx(np.e)
    with pytest.raises(ValueError):
        check_xlogx_bound(-1.0, 1.0)
    with pytest.raises(ValueError):
        check_xlogx_bound(1.0, 0.0)


def test_xlogx_matches_direct_formula():
    rng = np.random.default_rng(5)
    x = rng.uniform(0.01, 100, 1000)
    L = rng.uniform(0.01, 5, 1000)
    direct = (x * np.log(x) - x + 1) - (L * x - np.exp(L) + 1)
    np.testing.assert_allclose(check_xlogx_bound(x, L), direct, rtol=1e-9, atol=1e-9)


def test_interpolation_constant_in_time():
    # for u constant in time and space equality holds
    grid = Grid.interval(1.0, 10)
    t = np.linspace(0, 2, 5)
    snaps = np.full((5, 1, 10), 3.0)
    rep = check_spacetime_interpolation(grid, t, snaps)
    np.testing.assert_allclose(rep.lhs, rep.rhs, rtol=1e-14)
    assert rep.passed and rep.T == 2.0


def test_interpolation_shape_errors():
    grid = Grid.interval(1.0, 4)
    with pytest.raises(ValueError, match="one snapshot"):
        check_spacetime_interpolation(grid, [0.0, 1.0], np.ones((3, 4)))


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 100.0), st.floats(1e-3, 5.0))
def test_xlogx_bound_property(x, L):
    assert check_xlogx_bound(x, L) >= -1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_interpolation_property(seed):
    grid = Grid.interval(1.0, 16)
    rng = np.random.default_rng(seed)
    t = np.cumsum(rng.uniform(0.01, 1.0, 6))
    snaps = rng.uniform(0, 10, (6, 2, 16))
    assert check_spacetime_interpolation(grid, t, snaps).passed
