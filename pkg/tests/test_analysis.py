import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from entroreact.analysis import (
    Sampler,
    complex_balance_residual,
    conservation_laws,
    detect_boundary_equilibria,
    entropy_multipliers,
    find_positive_equilibrium,
    law_basis,
    validate_conditions,
)
from entroreact.crn import PolynomialSystem, mass_action_rhs, parse_network, stoichiometric_matrix


def so2_bisection(sulfur, oxygen):
    """Independent oracle: eliminate along u3 = c and bisect u1^2 u2 - u3^2 = 0."""
    hi = min(sulfur, oxygen - 2 * sulfur)

    def g(c):
        u1, u2 = sulfur - c, (oxygen - 2 * sulfur - c) / 2
        return u1 * u1 * u2 - c * c

    c = brentq(g, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return np.array([sulfur - c, (oxygen - 2 * sulfur - c) / 2, c])


def test_echelon_laws(so2):
    np.testing.assert_array_equal(conservation_laws(so2), [[1, 0, 1], [0, 1, 0.5]])
    assert np.abs(conservation_laws(so2) @ stoichiometric_matrix(so2)).max() == 0


def test_declared_laws_take_precedence(so2):
    M, names = law_basis(so2)
    assert names == ["sulfur", "oxygen"]
    np.testing.assert_array_equal(M, [[1, 0, 1], [2, 2, 3]])


def test_no_laws():
    net = parse_network("species: A\nreaction: 0 <-> A @ 1, 1\ndiffusion: A=1\n")
    assert conservation_laws(net).shape == (0, 1)


def test_so2_equilibrium(so2):
    rep = find_positive_equilibrium(so2, (2.0, 7.0))
    assert rep.converged
    np.testing.assert_allclose(rep.equilibrium, so2_bisection(2.0, 7.0), atol=1e-10)
    np.testing.assert_allclose(rep.equilibrium, [1, 1, 1], atol=1e-10)
    assert rep.max_residual < 1e-12


def test_random_totals_against_bisection(so2):
    rng = np.random.default_rng(3)
    for _ in range(20):
        s = rng.uniform(0.1, 5)
        o = 2 * s + rng.uniform(0.05, 10)
        rep = find_positive_equilibrium(so2, (s, o))
        assert rep.converged
        np.testing.assert_allclose(rep.equilibrium, so2_bisection(s, o), rtol=1e-10, atol=1e-12)


def test_two_species_equilibrium():
    net = parse_network("species: A B\nreaction: A <-> B @ 2, 1\ndiffusion: A=1 B=1\n")
    rep = find_positive_equilibrium(net, (3.0,))
    np.testing.assert_allclose(rep.equilibrium, [1.0, 2.0], rtol=1e-12)
    assert detect_boundary_equilibria(net, (3.0,)) == []


def test_wrong_totals_length(so2):
    with pytest.raises(ValueError, match="2 conservation laws"):
        find_positive_equilibrium(so2, (1.0,))


def test_cb_residual_reassembles_rhs(so2):
    u = np.array([0.3, 2.0, 1.7])
    res = complex_balance_residual(so2, u)
    f = sum(r * c.as_array() for c, r in res.items())
    np.testing.assert_allclose(f, mass_action_rhs(so2, u), rtol=1e-14)


def test_so2_boundary_equilibria(so2):
    found = detect_boundary_equilibria(so2, (2.0, 7.0))
    assert sorted(b.description for b in found) == ["{(0,a,0): a>0}", "{(a,0,0): a>0}"]
    assert all(b.family_dimension == 1 and b.in_class is False for b in found)


def test_boundary_equilibrium_in_class(so2):
    # sulfur = 1, oxygen = 2 is met by (1, 0, 0)
    found = detect_boundary_equilibria(so2, (1.0, 2.0))
    hits = [b for b in found if b.in_class]
    assert [b.description for b in hits] == ["{(a,0,0): a>0}"]


def test_isolated_boundary_point():
    net = parse_network("species: A B\nreaction: A -> 0 @ 1\nreaction: 0 <-> B @ 1, 1\ndiffusion: A=1 B=1\n")
    found = detect_boundary_equilibria(net)
    assert len(found) == 1
    assert found[0].family_dimension == 0
    np.testing.assert_allclose(found[0].point, [0.0, 1.0], atol=1e-12)


def test_entropy_multipliers(so2):
    rep = find_positive_equilibrium(so2, (2.0, 7.0))
    np.testing.assert_allclose(entropy_multipliers(rep), 0.0, atol=1e-12)


def test_conditions_so2(so2):
    d1 = validate_conditions(so2, np.zeros(3), 1, Sampler(samples=2000))
    assert d1.passed
    assert d1.lines()[0] == "(P) not violated on 6000 samples"
    d2 = validate_conditions(so2, np.zeros(3), 2, Sampler(samples=2000))
    assert not d2.growth.passed and d2.quasi_positivity.passed and d2.entropy_inequality.passed
    assert "μ̂=3 exceeds bound 2 for d=2" in d2.growth.summary
    u = d2.growth.witness
    assert np.abs(mass_action_rhs(so2, u)).max() / (u.sum() ** 2 + 1) > 2 * d2.growth.K_estimate


def test_quasi_positivity_violation():
    # f1 = -u2 is negative on the face u1 = 0
    poly = PolynomialSystem((((-1.0, (0.0, 1.0)),), ((0.0, (0.0, 0.0)),)))
    rep = validate_conditions(poly, np.zeros(2), 1, Sampler(samples=500))
    assert not rep.quasi_positivity.passed
    assert rep.quasi_positivity.witness[0] == 0.0
    assert "(P) violated at u=" in rep.quasi_positivity.summary


def test_entropy_violation_and_relaxation():
    # f = +1 (pure source) makes sum f log u positive for u > 1
    poly = PolynomialSystem((((1.0, (0.0,)),),))
    rep = validate_conditions(poly, np.zeros(1), 1, Sampler(samples=500))
    assert rep.quasi_positivity.passed and not rep.entropy_inequality.passed
    relaxed = validate_conditions(poly, np.zeros(1), 1, Sampler(samples=500), relaxation=(1.0, 0.0))
    assert relaxed.entropy_inequality.passed


def test_conditions_bad_dim(so2):
    with pytest.raises(ValueError, match="1 or 2"):
        validate_conditions(so2, np.zeros(3), 3)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 4.0), st.floats(0.1, 8.0))
def test_equilibrium_is_complex_balanced_in_class(so2, s, extra):
    rep = find_positive_equilibrium(so2, (s, 2 * s + extra))
    assert rep.converged
    M, _ = law_basis(so2)
    np.testing.assert_allclose(M @ rep.equilibrium, (s, 2 * s + extra), rtol=1e-10)
    assert np.all(rep.equilibrium > 0)
