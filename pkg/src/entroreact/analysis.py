"""Structural analysis of mass-action networks.

Conservation laws, complex-balance residuals, the positive complex-balanced
equilibrium of a compatibility class, boundary equilibria, and sampling-based
checks of quasi-positivity (P), the entropy inequality (E) and the growth
bound (G).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
import scipy.linalg

from .crn import (
    Complex,
    PolynomialSystem,
    ReactionNetwork,
    System,
    mass_action_rhs,
    reaction_fluxes,
    stoichiometric_matrix,
)

__all__ = [
    "EquilibriumReport",
    "BoundaryEquilibrium",
    "Sampler",
    "ConditionVerdict",
    "GrowthVerdict",
    "ConditionReport",
    "conservation_laws",
    "law_basis",
    "complex_balance_residual",
    "find_positive_equilibrium",
    "detect_boundary_equilibria",
    "entropy_multipliers",
    "validate_conditions",
    "GROWTH_BOUND",
]

#: Admissible growth exponent for each spatial dimension.
GROWTH_BOUND = {1: 3.0, 2: 2.0}


# --------------------------------------------------------------------------
# conservation laws


def _rref(rows: list[list[Fraction]]) -> tuple[list[list[Fraction]], list[int]]:
    A = [row[:] for row in rows]
    pivots = []
    r = 0
    ncols = len(A[0]) if A else 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(A)) if A[i][c] != 0), None)
        if piv is None:
            continue
        A[r], A[piv] = A[piv], A[r]
        p = A[r][c]
        A[r] = [x / p for x in A[r]]
        for i in range(len(A)):
            if i != r and A[i][c] != 0:
                factor = A[i][c]
                A[i] = [a - factor * b for a, b in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
        if r == len(A):
            break
    return A[:r], pivots


def conservation_laws(net: ReactionNetwork) -> np.ndarray:
    """Basis of the left null space of S in reduced row-echelon form.

    Computed in exact rational arithmetic, so the result is deterministic and
    ``laws @ S`` vanishes to round-off. Shape ``(k, N)``; ``k`` may be 0.
    """
    S = stoichiometric_matrix(net)
    n = net.n_species
    rows = [[Fraction(repr(float(x))) for x in col] for col in S.T]
    reduced, pivots = _rref(rows)
    free = [j for j in range(n) if j not in pivots]
    basis = []
    for fj in free:
        vec = [Fraction(0)] * n
        vec[fj] = Fraction(1)
        for row, pc in zip(reduced, pivots):
            vec[pc] = -row[fj]
        basis.append(vec)
    if not basis:
        return np.zeros((0, n))
    normal, _ = _rref(basis)
    return np.array([[float(x) for x in row] for row in normal])


def law_basis(net: ReactionNetwork) -> tuple[np.ndarray, list[str]]:
    """Conservation-law rows that conserved totals refer to, with their names.

    Declared laws from the network file take precedence over the echelon basis.
    """
    if net.conservation:
        names = [name for name, _ in net.conservation]
        return np.array([vec for _, vec in net.conservation], dtype=float), names
    laws = conservation_laws(net)
    return laws, [f"m{i + 1}" for i in range(len(laws))]


# --------------------------------------------------------------------------
# complex balance


def _incidence(net: ReactionNetwork) -> tuple[tuple[Complex, ...], np.ndarray]:
    complexes = net.complexes
    where = {c: i for i, c in enumerate(complexes)}
    A = np.zeros((len(complexes), net.n_reactions))
    for r, rxn in enumerate(net.reactions):
        A[where[rxn.product], r] += 1.0
        A[where[rxn.reactant], r] -= 1.0
    return complexes, A


def _cb_vector(net: ReactionNetwork, u: np.ndarray) -> np.ndarray:
    _, A = _incidence(net)
    return A @ reaction_fluxes(net, u)


def complex_balance_residual(net: ReactionNetwork, u) -> dict[Complex, float]:
    """Inflow minus outflow of every complex at ``u``.

    ``sum_y residual(y) * y`` reassembles ``mass_action_rhs(u)``.
    """
    arr = np.asarray(u, dtype=float)
    if arr.shape != (net.n_species,):
        raise ValueError(f"expected a vector of length {net.n_species}, got shape {arr.shape}")
    complexes, _ = _incidence(net)
    return dict(zip(complexes, _cb_vector(net, arr)))


def _inflow_outflow(net: ReactionNetwork, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    complexes, A = _incidence(net)
    flux = reaction_fluxes(net, u, check=False)
    return np.clip(A, 0, None) @ flux, np.clip(-A, 0, None) @ flux


@dataclass
class EquilibriumReport:
    equilibrium: np.ndarray
    totals: np.ndarray
    cb_residuals: np.ndarray
    newton_iterations: int
    converged: bool
    laws: np.ndarray
    complexes: tuple[Complex, ...] = ()

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.cb_residuals))) if self.cb_residuals.size else 0.0


def _independent_rows(A: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    if A.size == 0:
        return np.zeros(0, dtype=int)
    _, R, perm = scipy.linalg.qr(A.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * max(diag[0], 1.0))) if diag.size else 0
    return np.sort(perm[:rank])


def _gauss_newton(residual, jacobian, w0: np.ndarray, tol: float, max_iter: int):
    """Damped Gauss-Newton with step halving on the residual norm."""
    w = np.array(w0, dtype=float)
    F = residual(w)
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(F)) <= tol:
            return w, F, it - 1, True
        J = jacobian(w)
        step = np.linalg.lstsq(J, -F, rcond=None)[0]
        norm0 = np.linalg.norm(F)
        alpha = 1.0
        while alpha > 1e-12:
            w_try = w + alpha * step
            F_try = residual(w_try)
            if np.all(np.isfinite(F_try)) and np.linalg.norm(F_try) < norm0:
                break
            alpha *= 0.5
        else:
            return w, F, it, bool(np.max(np.abs(F)) <= tol)
        w, F = w_try, F_try
    return w, F, it, bool(np.max(np.abs(F)) <= tol)


def find_positive_equilibrium(
    net: ReactionNetwork,
    totals: Sequence[float],
    *,
    laws: np.ndarray | None = None,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> EquilibriumReport:
    """Positive complex-balanced equilibrium in the class ``laws @ u = totals``.

    Newton's method runs in ``w = log u`` so every iterate is strictly positive.
    Linearly dependent complex-balance equations are pruned with a pivoted QR
    of the complex incidence matrix.
    """
    M = law_basis(net)[0] if laws is None else np.atleast_2d(np.asarray(laws, dtype=float))
    totals = np.asarray(totals, dtype=float).ravel()
    if len(totals) != len(M):
        raise ValueError(
            f"got {len(totals)} conserved totals but the network has {len(M)} conservation laws"
        )
    complexes, A = _incidence(net)
    keep = _independent_rows(A)
    A_red = A[keep]
    if len(keep) + len(M) < net.n_species:
        raise ValueError("equilibrium system is underdetermined")
    Y = net.reactant_matrix()
    k = net.rate_constants()

    def residual(w):
        u = np.exp(w)
        flux = k * np.exp(Y @ w)
        return np.concatenate([A_red @ flux, M @ u - totals])

    def jacobian(w):
        u = np.exp(w)
        flux = k * np.exp(Y @ w)
        return np.vstack([A_red @ (flux[:, None] * Y), M * u[None, :]])

    scale = np.sum(np.abs(totals)) / max(np.sum(np.abs(M)), 1e-300) if len(M) else 1.0
    w0 = np.full(net.n_species, math.log(scale) if scale > 0 else 0.0)
    w, F, iters, converged = _gauss_newton(residual, jacobian, w0, tol, max_iter)
    u = np.exp(w)
    cb = _cb_vector(net, u)
    converged = converged and bool(np.all(u > 0)) and bool(np.max(np.abs(cb), initial=0.0) <= tol)
    return EquilibriumReport(u, totals, cb, iters, converged, M, complexes)


# --------------------------------------------------------------------------
# boundary equilibria


@dataclass
class BoundaryEquilibrium:
    support: tuple[int, ...]
    point: np.ndarray
    family_dimension: int
    description: str
    in_class: bool | None = None


def _describe_family(support: Sequence[int], n: int, point: np.ndarray, dim: int) -> str:
    if dim == len(support):
        letters = "abcdefghijklmnopqrstuvwxyz"
        coords = ["0"] * n
        for pos, j in enumerate(support):
            coords[j] = letters[pos % 26]
        free = ",".join(letters[pos % 26] for pos in range(len(support)))
        return "{(" + ",".join(coords) + "): " + free + ">0}"
    pt = ", ".join(f"{x:.6g}" for x in point)
    if dim == 0:
        return f"isolated point ({pt})"
    return f"{dim}-dimensional family through ({pt})"


def _solve_on_support(net, support, M, totals, tol, max_iter):
    n = net.n_species
    sup = np.array(support)
    _, A = _incidence(net)
    Y = net.reactant_matrix()
    k = net.rate_constants()
    zero = np.setdiff1d(np.arange(n), sup)
    alive = np.all(Y[:, zero] == 0, axis=1) if len(zero) else np.ones(len(Y), bool)
    Ya = Y[alive][:, sup]
    Aa = A[:, alive]
    ka = k[alive]

    def embed(w):
        u = np.zeros(n)
        u[sup] = np.exp(w)
        return u

    def residual(w):
        parts = [Aa @ (ka * np.exp(Ya @ w))]
        if totals is not None:
            parts.append(M[:, sup] @ np.exp(w) - totals)
        return np.concatenate(parts)

    def jacobian(w):
        flux = ka * np.exp(Ya @ w)
        parts = [Aa @ (flux[:, None] * Ya)]
        if totals is not None:
            parts.append(M[:, sup] * np.exp(w)[None, :])
        return np.vstack(parts)

    w0 = np.zeros(len(sup))
    if totals is not None and len(M):
        colsum = np.sum(np.abs(M[:, sup]))
        s = np.sum(np.abs(totals)) / colsum if colsum > 0 else 1.0
        w0 = np.full(len(sup), math.log(s) if s > 0 else 0.0)
    w, F, _, _ = _gauss_newton(residual, jacobian, w0, 0.0, max_iter)
    u = embed(w)
    inflow, outflow = _inflow_outflow(net, u)
    denom = inflow + outflow
    rel = np.where(denom > 0, np.abs(inflow - outflow) / np.where(denom > 0, denom, 1.0), 0.0)
    ok = bool(np.all(np.isfinite(u))) and float(np.max(rel, initial=0.0)) <= tol
    vals = u[sup]
    ok = ok and bool(vals.min() > 1e-10 * max(1.0, vals.max()))
    if totals is not None and len(M):
        ok = ok and bool(np.max(np.abs(M @ u - totals)) <= tol * (1.0 + np.max(np.abs(totals))))
    J_cb = Aa @ ((ka * np.exp(Ya @ w))[:, None] * Ya)
    return u, ok, J_cb


def detect_boundary_equilibria(
    net: ReactionNetwork,
    totals: Sequence[float] | None = None,
    *,
    laws: np.ndarray | None = None,
    max_species: int = 20,
    tol: float = 1e-9,
    rank_tol: float = 1e-9,
    max_iter: int = 200,
) -> list[BoundaryEquilibrium]:
    """Complex-balanced states with at least one zero concentration.

    Every proper subset of species is tried as the zero set. On the remaining
    support the complex-balance equations are solved by Gauss-Newton in log
    coordinates; a solution is accepted when every complex balances to
    relative tolerance ``tol``. A continuum is reported when the restricted
    Jacobian is rank deficient. With ``totals`` each finding is additionally
    checked for a member in the compatibility class ``laws @ u = totals``.
    """
    n = net.n_species
    if n > max_species:
        raise ValueError(f"support enumeration limited to {max_species} species, network has {n}")
    M = law_basis(net)[0] if laws is None else np.atleast_2d(np.asarray(laws, dtype=float))
    tot = None if totals is None else np.asarray(totals, dtype=float).ravel()
    if tot is not None and len(tot) != len(M):
        raise ValueError(f"got {len(tot)} totals for {len(M)} conservation laws")
    found = []
    for size in range(n - 1, 0, -1):
        for support in itertools.combinations(range(n), size):
            u, ok, J = _solve_on_support(net, support, M, None, tol, max_iter)
            if not ok:
                continue
            if J.size:
                sv = np.linalg.svd(J, compute_uv=False)
                rank = int(np.sum(sv > rank_tol * max(sv.max(initial=0.0), 1.0)))
            else:
                rank = 0
            dim = len(support) - rank
            in_class = None
            if tot is not None:
                _, in_class, _ = _solve_on_support(net, support, M, tot, tol, max_iter)
            found.append(
                BoundaryEquilibrium(support, u, dim, _describe_family(support, n, u, dim), in_class)
            )
    return found


def entropy_multipliers(report: EquilibriumReport) -> np.ndarray:
    """mu_i = -log u_{i,inf}, which turns mu_i + log u_i into log(u_i / u_{i,inf})."""
    if not report.converged:
        raise ValueError("equilibrium solve did not converge")
    return -np.log(report.equilibrium)


# --------------------------------------------------------------------------
# structural conditions


@dataclass(frozen=True)
class Sampler:
    """Sampling plan for the condition checks.

    Interior points are drawn uniformly from ``(0, u_max]^N``; every face
    ``u_i = 0`` gets ``face_samples`` points, each other coordinate being
    zeroed as well with probability ``zero_prob`` so edges are covered too.
    """

    samples: int = 10_000
    u_max: float = 10.0
    face_samples: int | None = None
    zero_prob: float = 0.25
    seed: int = 0


@dataclass
class ConditionVerdict:
    name: str
    passed: bool
    samples: int
    witness: np.ndarray | None = None
    value: float | None = None

    @property
    def summary(self) -> str:
        if self.passed:
            return f"({self.name}) not violated on {self.samples} samples"
        pt = ", ".join(f"{x:.17g}" for x in self.witness)
        return f"({self.name}) violated at u=({pt}): value {self.value:.17g}"


@dataclass
class GrowthVerdict:
    exponent: float
    bound: float
    dimension: int
    passed: bool
    K_estimate: float
    witness: np.ndarray | None = None

    @property
    def summary(self) -> str:
        if self.passed:
            return (
                f"(G) growth exponent {self.exponent:g} within bound {self.bound:g} "
                f"for d={self.dimension}"
            )
        return f"(G) μ̂={self.exponent:g} exceeds bound {self.bound:g} for d={self.dimension}"


@dataclass
class ConditionReport:
    quasi_positivity: ConditionVerdict
    entropy_inequality: ConditionVerdict
    growth: GrowthVerdict
    mu: np.ndarray

    @property
    def passed(self) -> bool:
        return self.quasi_positivity.passed and self.entropy_inequality.passed and self.growth.passed

    def lines(self) -> list[str]:
        return [self.quasi_positivity.summary, self.entropy_inequality.summary, self.growth.summary]


def _growth_witness(sys: System, poly: PolynomialSystem, bound: float, K: float, rng) -> np.ndarray | None:
    n = poly.n_species
    top = poly.degree
    directions = []
    for row in poly.terms:
        for c, exps in row:
            if c != 0 and sum(exps) == top:
                directions.append(np.array([1.0 if e > 0 else 0.0 for e in exps]))
    directions.append(np.ones(n))
    directions.extend(rng.random((8, n)) + 0.1)
    for v in directions:
        t = 1.0
        while t < 1e12:
            u = t * v
            ratio = np.max(np.abs(mass_action_rhs(sys, u))) / (np.sum(u) ** bound + 1.0)
            if ratio > 2.0 * K:
                return u
            t *= 2.0
    return None


def validate_conditions(
    f: System,
    mu: Sequence[float],
    d: int,
    sampler: Sampler | None = None,
    *,
    relaxation: tuple[float, float] | None = None,
) -> ConditionReport:
    """Check (P), (E) and (G) for ``f`` with entropy multipliers ``mu``.

    (P) and (E) are tested on samples, so a pass only means no violation was
    found. (G) uses the exact polynomial degree. ``relaxation=(K1, K2)``
    replaces the (E) threshold 0 by ``K1 * sum(u) + K2``.
    """
    if d not in GROWTH_BOUND:
        raise ValueError(f"spatial dimension must be 1 or 2, got {d}")
    sampler = sampler or Sampler()
    n = f.n_species
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (n,):
        raise ValueError(f"expected {n} entropy multipliers, got shape {mu.shape}")
    rng = np.random.default_rng(sampler.seed)
    poly = PolynomialSystem.from_network(f) if isinstance(f, ReactionNetwork) else f
    degree = poly.degree

    # (P): faces u_i = 0
    n_face = sampler.face_samples or sampler.samples
    worst_val, worst_u = 0.0, None
    for i in range(n):
        U = sampler.u_max * (1.0 - rng.random((n, n_face)))
        U[rng.random((n, n_face)) < sampler.zero_prob] = 0.0
        U[i] = 0.0
        fi = mass_action_rhs(f, U)[i]
        j = int(np.argmin(fi))
        if fi[j] < worst_val:
            worst_val, worst_u = float(fi[j]), U[:, j].copy()
    p_pass = not (worst_u is not None and worst_val < -1e-12)
    pos = ConditionVerdict("P", p_pass, n * n_face, None if p_pass else worst_u, None if p_pass else worst_val)

    # (E): interior samples, no exact zeros
    U = sampler.u_max * (1.0 - rng.random((n, sampler.samples)))
    F = mass_action_rhs(f, U)
    vals = np.sum(F * (mu[:, None] + np.log(U)), axis=0)
    norm1 = np.sum(U, axis=0)
    threshold = 1e-12 * (1.0 + norm1**degree)
    if relaxation is not None:
        K1, K2 = relaxation
        threshold = threshold + K1 * norm1 + K2
    excess = vals - threshold
    j = int(np.argmax(excess))
    e_pass = bool(excess[j] <= 0)
    ent = ConditionVerdict(
        "E", e_pass, sampler.samples, None if e_pass else U[:, j].copy(), None if e_pass else float(vals[j])
    )

    # (G): exact degree against the dimension bound
    bound = GROWTH_BOUND[d]
    ratios = np.max(np.abs(F), axis=0) / (norm1**bound + 1.0)
    K = float(ratios.max()) if ratios.size else 0.0
    g_pass = degree <= bound
    witness = None if g_pass else _growth_witness(f, poly, bound, K, rng)
    growth = GrowthVerdict(degree, bound, d, g_pass, K, witness)
    return ConditionReport(pos, ent, growth, mu)
