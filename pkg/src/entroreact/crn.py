"""Chemical reaction networks under mass-action kinetics.

A network is read from a small line-oriented text format::

    species: SO2 O2 SO3
    reaction: 2 SO2 + O2 <-> 2 SO3 @ 1.0, 1.0
    diffusion: SO2=0.2 O2=0.3 SO3=0.25
    conservation: sulfur = SO2 + SO3          # optional, repeatable

and turned into the right-hand side ``f(u)`` of the reaction-diffusion system

    f_i(u) = sum_r k_r (y'_{r,i} - y_{r,i}) prod_j u_j^{y_{r,j}},

i.e. products minus reactants. Vectors and matrices follow the species
declaration order. Every evaluation routine accepts either a single state of
shape ``(N,)`` or a stack of states of shape ``(N, ...)`` (one per grid cell).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "Complex",
    "Reaction",
    "ReactionNetwork",
    "PolynomialSystem",
    "NetworkParseError",
    "parse_network",
    "load_network",
    "render_network",
    "mass_action_rhs",
    "mass_action_jacobian",
    "reaction_fluxes",
    "stoichiometric_matrix",
    "polynomial_rhs",
    "polynomial_jacobian",
]

_NAME = r"[A-Za-z_][A-Za-z0-9_]*"
_NAME_RE = re.compile(rf"^{_NAME}$")
_TERM_RE = re.compile(rf"^(?:(\d+(?:\.\d{{1,6}})?)\s*)?({_NAME})$")
_EMPTY_TOKENS = ("0", "∅")


class NetworkParseError(ValueError):
    """Malformed network text; carries the 1-based line and column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class Complex:
    """Stoichiometric coefficients of one complex, dense over the species."""

    coefficients: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        for c in coeffs:
            if not math.isfinite(c) or c < 0:
                raise ValueError(f"stoichiometric coefficient {c} must be finite and >= 0")
            if 0 < c < 1:
                raise ValueError(f"stoichiometric coefficient {c} must be 0 or >= 1")

    @property
    def order(self) -> float:
        """|y| = sum of coefficients."""
        return float(sum(self.coefficients))

    @property
    def is_empty(self) -> bool:
        return not any(self.coefficients)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.coefficients) if c > 0)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=float)

    def label(self, names: Sequence[str]) -> str:
        if self.is_empty:
            return "0"
        parts = []
        for name, c in zip(names, self.coefficients):
            if c == 0:
                continue
            parts.append(name if c == 1 else f"{_format_coefficient(c)} {name}")
        return " + ".join(parts)


@dataclass(frozen=True)
class Reaction:
    reactant: Complex
    product: Complex
    rate_constant: float

    def __post_init__(self):
        k = float(self.rate_constant)
        object.__setattr__(self, "rate_constant", k)
        if not (math.isfinite(k) and k > 0):
            raise ValueError(f"rate constant {k} must be positive")
        if self.reactant == self.product:
            raise ValueError("reactant and product complexes are identical")
        if len(self.reactant.coefficients) != len(self.product.coefficients):
            raise ValueError("reactant and product have different species counts")


@dataclass(frozen=True)
class ReactionNetwork:
    """Species, reactions and diffusion coefficients of a mass-action system.

    ``conservation`` optionally names a basis of conservation laws. When present,
    conserved totals handed to the equilibrium solver are read against these
    rows instead of the reduced row-echelon basis.
    """

    species: tuple[str, ...]
    reactions: tuple[Reaction, ...]
    diffusion: tuple[float, ...]
    conservation: tuple[tuple[str, tuple[float, ...]], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "reactions", tuple(self.reactions))
        object.__setattr__(self, "diffusion", tuple(float(d) for d in self.diffusion))
        object.__setattr__(
            self,
            "conservation",
            tuple((name, tuple(float(c) for c in vec)) for name, vec in self.conservation),
        )
        n = len(self.species)
        if n < 1:
            raise ValueError("a network needs at least one species")
        if len(set(self.species)) != n:
            raise ValueError("duplicate species name")
        if not self.reactions:
            raise ValueError("a network needs at least one reaction")
        if len(self.diffusion) != n:
            raise ValueError(f"expected {n} diffusion coefficients, got {len(self.diffusion)}")
        for name, d in zip(self.species, self.diffusion):
            if not (math.isfinite(d) and d > 0):
                raise ValueError(f"diffusion coefficient of {name} must be positive, got {d}")
        for r in self.reactions:
            if len(r.reactant.coefficients) != n:
                raise ValueError("reaction refers to a different number of species")
        for name, vec in self.conservation:
            if len(vec) != n:
                raise ValueError(f"conservation law {name!r} has wrong length")
        if self.conservation:
            _check_declared_laws(self)

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def n_reactions(self) -> int:
        return len(self.reactions)

    def index(self, name: str) -> int:
        return self.species.index(name)

    @property
    def complexes(self) -> tuple[Complex, ...]:
        """Distinct complexes in order of first appearance."""
        seen: dict[Complex, None] = {}
        for r in self.reactions:
            seen.setdefault(r.reactant)
            seen.setdefault(r.product)
        return tuple(seen)

    def reactant_matrix(self) -> np.ndarray:
        """R x N matrix of reactant coefficients (the mass-action exponents)."""
        return np.array([r.reactant.coefficients for r in self.reactions], dtype=float)

    def product_matrix(self) -> np.ndarray:
        return np.array([r.product.coefficients for r in self.reactions], dtype=float)

    def rate_constants(self) -> np.ndarray:
        return np.array([r.rate_constant for r in self.reactions], dtype=float)

    def rhs(self, u):
        return mass_action_rhs(self, u)

    def jacobian(self, u):
        return mass_action_jacobian(self, u)


@dataclass(frozen=True)
class PolynomialSystem:
    """Generic polynomial nonlinearity ``f_i(u) = sum_t c_t prod_j u_j^{e_tj}``.

    ``terms[i]`` lists ``(coefficient, exponents)`` pairs for species ``i``.
    Coefficients may have either sign, which is what makes this type useful for
    exercising the structural validators on systems that are not mass action.
    """

    terms: tuple[tuple[tuple[float, tuple[float, ...]], ...], ...]
    growth_hint: float | None = None
    species: tuple[str, ...] = ()
    diffusion: tuple[float, ...] = ()

    def __post_init__(self):
        terms = tuple(
            tuple((float(c), tuple(float(e) for e in exps)) for c, exps in row)
            for row in self.terms
        )
        object.__setattr__(self, "terms", terms)
        n = len(terms)
        for row in terms:
            for c, exps in row:
                if len(exps) != n:
                    raise ValueError(f"monomial exponent vector must have length {n}")
                if not math.isfinite(c):
                    raise ValueError("monomial coefficient must be finite")
                if any(e < 0 or not math.isfinite(e) for e in exps):
                    raise ValueError("monomial exponents must be finite and >= 0")
        if not self.species:
            object.__setattr__(self, "species", tuple(f"u{i + 1}" for i in range(n)))
        else:
            object.__setattr__(self, "species", tuple(self.species))
        if len(self.species) != n:
            raise ValueError("species names do not match the number of equations")
        object.__setattr__(self, "diffusion", tuple(float(d) for d in self.diffusion))
        if self.diffusion and len(self.diffusion) != n:
            raise ValueError("diffusion coefficients do not match the number of equations")

    @property
    def n_species(self) -> int:
        return len(self.terms)

    @property
    def degree(self) -> float:
        """Highest total degree among monomials with a nonzero coefficient."""
        degs = [sum(exps) for row in self.terms for c, exps in row if c != 0]
        return float(max(degs)) if degs else 0.0

    @classmethod
    def from_network(cls, net: ReactionNetwork) -> "PolynomialSystem":
        """Expand a mass-action network, merging equal monomials per species."""
        n = net.n_species
        rows: list[dict[tuple[float, ...], float]] = [{} for _ in range(n)]
        for r in net.reactions:
            exps = r.reactant.coefficients
            for i in range(n):
                net_change = r.product.coefficients[i] - r.reactant.coefficients[i]
                if net_change:
                    rows[i][exps] = rows[i].get(exps, 0.0) + r.rate_constant * net_change
        terms = tuple(
            tuple((c, exps) for exps, c in row.items() if c != 0) for row in rows
        )
        return cls(terms, species=net.species, diffusion=net.diffusion)

    def rhs(self, u):
        return polynomial_rhs(self, u)

    def jacobian(self, u):
        return polynomial_jacobian(self, u)


System = Union[ReactionNetwork, PolynomialSystem]


def _check_declared_laws(net: ReactionNetwork) -> None:
    S = stoichiometric_matrix(net)
    M = np.array([vec for _, vec in net.conservation], dtype=float)
    scale = np.abs(M).max() * max(np.abs(S).max(), 1.0)
    if np.abs(M @ S).max() > 1e-12 * scale:
        bad = int(np.argmax(np.abs(M @ S).max(axis=1)))
        raise ValueError(f"conservation law {net.conservation[bad][0]!r} is not conserved")
    expected = net.n_species - np.linalg.matrix_rank(S)
    if np.linalg.matrix_rank(M) != len(M) or len(M) != expected:
        raise ValueError(
            f"declared conservation laws must be {expected} independent vectors, got {len(M)}"
        )


# --------------------------------------------------------------------------
# parsing and rendering


def _format_coefficient(c: float) -> str:
    return str(int(c)) if float(c).is_integer() else repr(float(c))


def _column(raw: str, token: str, start: int = 0) -> int:
    pos = raw.find(token, start) if token else -1
    return (pos if pos >= 0 else start) + 1


def _parse_complex(text: str, index: dict[str, int], lineno: int, raw: str, offset: int) -> Complex:
    coeffs = [0.0] * len(index)
    stripped = text.strip()
    if stripped in _EMPTY_TOKENS:
        return Complex(tuple(coeffs))
    if not stripped:
        raise NetworkParseError("empty complex (write 0 for the empty complex)", lineno, offset + 1)
    for term in stripped.split("+"):
        token = term.strip()
        col = _column(raw, token, offset)
        m = _TERM_RE.match(token)
        if not m:
            raise NetworkParseError(f"cannot parse term {token!r}", lineno, col)
        coef_text, name = m.groups()
        if name not in index:
            raise NetworkParseError(f"unknown species {name!r}", lineno, _column(raw, name, offset))
        coef = float(coef_text) if coef_text is not None else 1.0
        if coef == 0 or 0 < coef < 1:
            raise NetworkParseError(f"coefficient {coef_text} must be >= 1", lineno, col)
        coeffs[index[name]] += coef
    return Complex(tuple(coeffs))


def _parse_rate(text: str, lineno: int, col: int) -> float:
    try:
        k = float(text)
    except ValueError:
        raise NetworkParseError(f"rate constant {text.strip()!r} is not a number", lineno, col) from None
    if not (math.isfinite(k) and k > 0):
        raise NetworkParseError(f"nonpositive rate constant {text.strip()}", lineno, col)
    return k


def parse_network(text: str) -> ReactionNetwork:
    """Parse the network text format into a validated :class:`ReactionNetwork`.

    A reversible arrow ``<->`` becomes two reactions, forward first, carrying
    the two rate constants after ``@`` in that order.
    """
    species: list[str] | None = None
    diffusion_line: tuple[int, str] | None = None
    reaction_lines: list[tuple[int, str]] = []
    law_lines: list[tuple[int, str]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        key, sep, body = line.partition(":")
        key = key.strip()
        if not sep:
            raise NetworkParseError("expected 'keyword: ...'", lineno, 1)
        if key == "species":
            if species is not None:
                raise NetworkParseError("more than one species line", lineno, 1)
            species = body.split()
            if not species:
                raise NetworkParseError("no species declared", lineno, len(key) + 2)
            seen = set()
            for name in species:
                if not _NAME_RE.match(name):
                    raise NetworkParseError(f"invalid species name {name!r}", lineno, _column(raw, name))
                if name in seen:
                    raise NetworkParseError(f"duplicate species name {name!r}", lineno, _column(raw, name))
                seen.add(name)
        elif key == "reaction":
            reaction_lines.append((lineno, raw))
        elif key == "diffusion":
            if diffusion_line is not None:
                raise NetworkParseError("more than one diffusion line", lineno, 1)
            diffusion_line = (lineno, raw)
        elif key == "conservation":
            law_lines.append((lineno, raw))
        else:
            raise NetworkParseError(f"unknown keyword {key!r}", lineno, _column(raw, key))

    if species is None:
        raise NetworkParseError("missing species line")
    if diffusion_line is None:
        raise NetworkParseError("missing diffusion line")
    if not reaction_lines:
        raise NetworkParseError("no reaction lines")
    index = {name: i for i, name in enumerate(species)}

    reactions: list[Reaction] = []
    for lineno, raw in reaction_lines:
        body_start = raw.index(":") + 1
        body = raw.split("#", 1)[0][body_start:]
        lhs_rhs, at, rates = body.partition("@")
        if not at:
            raise NetworkParseError("missing '@ RATE'", lineno, len(raw.rstrip()) + 1)
        rate_col = body_start + len(lhs_rhs) + 2
        if "<->" in lhs_rhs:
            left, right = lhs_rhs.split("<->", 1)
            parts = rates.split(",")
            if len(parts) != 2:
                raise NetworkParseError("reversible reaction needs two rate constants", lineno, rate_col)
            k_fwd = _parse_rate(parts[0], lineno, rate_col)
            k_bwd = _parse_rate(parts[1], lineno, rate_col)
        elif "->" in lhs_rhs:
            left, right = lhs_rhs.split("->", 1)
            if "," in rates:
                raise NetworkParseError("irreversible reaction takes one rate constant", lineno, rate_col)
            k_fwd = _parse_rate(rates, lineno, rate_col)
            k_bwd = None
        else:
            raise NetworkParseError("missing arrow '->' or '<->'", lineno, body_start + 1)
        y = _parse_complex(left, index, lineno, raw, body_start)
        y_prime = _parse_complex(right, index, lineno, raw, body_start + len(left))
        if y == y_prime:
            raise NetworkParseError("reactant and product complexes are identical", lineno, body_start + 1)
        reactions.append(Reaction(y, y_prime, k_fwd))
        if k_bwd is not None:
            reactions.append(Reaction(y_prime, y, k_bwd))

    lineno, raw = diffusion_line
    d = [None] * len(species)
    for item in raw.split("#", 1)[0].split(":", 1)[1].split():
        name, eq, value = item.partition("=")
        col = _column(raw, item)
        if not eq:
            raise NetworkParseError(f"expected NAME=VALUE, got {item!r}", lineno, col)
        if name not in index:
            raise NetworkParseError(f"unknown species {name!r}", lineno, col)
        try:
            val = float(value)
        except ValueError:
            raise NetworkParseError(f"diffusion value {value!r} is not a number", lineno, col) from None
        if not (math.isfinite(val) and val > 0):
            raise NetworkParseError(f"nonpositive diffusion coefficient for {name}: {value}", lineno, col)
        d[index[name]] = val
    missing = [name for name, val in zip(species, d) if val is None]
    if missing:
        raise NetworkParseError(f"no diffusion coefficient for {', '.join(missing)}", lineno, 1)

    laws = []
    for lineno, raw in law_lines:
        body_start = raw.index(":") + 1
        body = raw.split("#", 1)[0][body_start:]
        name, eq, combo = body.partition("=")
        name = name.strip()
        if not eq or not _NAME_RE.match(name):
            raise NetworkParseError("expected 'conservation: NAME = c1 SPECIES + ...'", lineno, body_start + 1)
        vec = _parse_complex(combo, index, lineno, raw, body_start + len(name) + 1)
        laws.append((name, vec.coefficients))

    try:
        return ReactionNetwork(tuple(species), tuple(reactions), tuple(d), tuple(laws))
    except ValueError as exc:
        raise NetworkParseError(str(exc), law_lines[0][0] if law_lines else 0, 1) from None


def load_network(path) -> ReactionNetwork:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read())


def render_network(net: ReactionNetwork) -> str:
    """Inverse of :func:`parse_network` (reactions are written one per line)."""
    lines = ["species: " + " ".join(net.species)]
    for r in net.reactions:
        lines.append(
            f"reaction: {r.reactant.label(net.species)} -> {r.product.label(net.species)}"
            f" @ {r.rate_constant!r}"
        )
    lines.append(
        "diffusion: " + " ".join(f"{n}={d!r}" for n, d in zip(net.species, net.diffusion))
    )
    for name, vec in net.conservation:
        lines.append(f"conservation: {name} = {Complex(vec).label(net.species)}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# evaluation


def _as_state(u, n: int, *, check_sign: bool = True) -> np.ndarray:
    arr = np.asarray(u, dtype=float)
    if arr.ndim == 0 or arr.shape[0] != n:
        raise ValueError(f"expected a state with leading dimension {n}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("state contains non-finite values")
    if check_sign and np.any(arr < 0):
        raise ValueError("concentrations must be nonnegative")
    return arr


def _monomial(u: np.ndarray, exps: Iterable[float]) -> np.ndarray:
    """prod_j u_j^{e_j} with 0^0 = 1; integer exponents use repeated products."""
    out = np.ones(u.shape[1:])
    for j, e in enumerate(exps):
        if e == 0:
            continue
        if e == 1:
            out = out * u[j]
        elif float(e).is_integer():
            out = out * u[j] ** int(e)
        else:
            out = out * np.power(np.maximum(u[j], 0.0), e)
    return out


def reaction_fluxes(net: ReactionNetwork, u, *, check: bool = True) -> np.ndarray:
    """Mass-action flux ``k_r u^{y_r}`` of every reaction, shape ``(R, ...)``."""
    arr = _as_state(u, net.n_species, check_sign=check) if check else np.asarray(u, dtype=float)
    return np.stack([r.rate_constant * _monomial(arr, r.reactant.coefficients) for r in net.reactions])


def stoichiometric_matrix(net: ReactionNetwork) -> np.ndarray:
    """N x R matrix whose column r is ``y'_r - y_r``."""
    return (net.product_matrix() - net.reactant_matrix()).T


def mass_action_rhs(net: System, u, *, check: bool = True) -> np.ndarray:
    """Evaluate ``f(u)``; equals ``S @ reaction_fluxes(u)`` by construction.

    ``check=False`` skips the sign check; the time integrator uses it for
    intermediate Runge-Kutta stages that may dip below zero by round-off.
    """
    if isinstance(net, PolynomialSystem):
        return polynomial_rhs(net, u, check=check)
    flux = reaction_fluxes(net, u, check=check)
    S = stoichiometric_matrix(net)
    return np.tensordot(S, flux, axes=(1, 0))


def mass_action_jacobian(net: System, u) -> np.ndarray:
    """Analytic ``df_i/du_j``; shape ``(N, N)`` or ``(N, N, ...)`` for stacked states."""
    if isinstance(net, PolynomialSystem):
        return polynomial_jacobian(net, u)
    arr = _as_state(u, net.n_species)
    S = stoichiometric_matrix(net)
    dflux = np.stack([_monomial_gradient(arr, r.rate_constant, r.reactant.coefficients) for r in net.reactions])
    # dflux has shape (R, N, ...)
    return np.tensordot(S, dflux, axes=(1, 0))


def _monomial_gradient(u: np.ndarray, coef: float, exps: Sequence[float]) -> np.ndarray:
    n = len(exps)
    grads = []
    for j in range(n):
        e = exps[j]
        if e == 0:
            grads.append(np.zeros(u.shape[1:]))
            continue
        if 0 < e < 1 and np.any(u[j] == 0):
            raise ValueError(
                f"monomial with exponent {e} in species {j} is not differentiable at u_{j}=0"
            )
        reduced = list(exps)
        reduced[j] = e - 1
        grads.append(coef * e * _monomial(u, reduced))
    return np.stack(grads)


def polynomial_rhs(sys: PolynomialSystem, u, *, check: bool = True) -> np.ndarray:
    arr = _as_state(u, sys.n_species, check_sign=check) if check else np.asarray(u, dtype=float)
    out = np.zeros(arr.shape)
    for i, row in enumerate(sys.terms):
        for c, exps in row:
            out[i] = out[i] + c * _monomial(arr, exps)
    return out


def polynomial_jacobian(sys: PolynomialSystem, u) -> np.ndarray:
    arr = _as_state(u, sys.n_species)
    n = sys.n_species
    out = np.zeros((n, n) + arr.shape[1:])
    for i, row in enumerate(sys.terms):
        for c, exps in row:
            out[i] = out[i] + _monomial_gradient(arr, c, exps)
    return out
