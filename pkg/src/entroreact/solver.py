"""Time integration of ``du_i/dt - d_i Lap u_i = f_i(u)`` with zero-flux boundaries.

One step is a Strang splitting: half a reaction step (classical RK4 on the
pointwise ODE), a full implicit diffusion step, half a reaction step. The
diffusion substep is TR-BDF2 by default, or backward Euler. Step sizes are
controlled by step doubling; slightly negative values (above ``-positivity_floor``)
are clamped to zero, anything below triggers a rejection.
"""

from __future__ import annotations

import math
import re
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .analysis import entropy_multipliers, find_positive_equilibrium, law_basis
from .crn import PolynomialSystem, ReactionNetwork, System, mass_action_rhs
from .diagnostics import DiagnosticsSeries
from .grid import Grid, apply_neumann_laplacian, integrate

__all__ = [
    "SimulationConfig",
    "SimulationState",
    "SimulationError",
    "StepSizeUnderflow",
    "NonFiniteState",
    "LinearSolverError",
    "CheckpointError",
    "Integrator",
    "parse_profile",
    "init_state",
    "run",
    "save_checkpoint",
    "load_checkpoint",
    "conjugate_gradient",
]

SCHEMES = ("tr_bdf2", "backward_euler")
_GAMMA = 2.0 - math.sqrt(2.0)


class SimulationError(RuntimeError):
    """Run aborted; ``series`` and ``state`` hold what was computed so far."""

    def __init__(self, message, series=None, state=None):
        super().__init__(message)
        self.series = series
        self.state = state


class StepSizeUnderflow(SimulationError):
    pass


class NonFiniteState(SimulationError):
    pass


class LinearSolverError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


# --------------------------------------------------------------------------
# initial profiles

_PROFILE_RE = re.compile(r"^\s*([a-z_]+)\s*\(([^)]*)\)\s*$")
_PROFILE_ARITY = {"constant": (1, 1), "cosine": (3, 4), "gaussian": (4, 4), "step": (3, 3), "noise": (2, 2)}


def parse_profile(text: str) -> Callable[[Grid, np.random.Generator], np.ndarray]:
    """Turn ``"cosine(1, 0.5, 1)"`` and friends into a sampler on cell centres.

    ``constant(c)``, ``cosine(a,b,k[,l])`` = a + b cos(k pi x/Lx) cos(l pi y/Ly),
    ``gaussian(a,c,x0,w)`` = a + c exp(-((x-x0)/w)^2), ``step(a,b,x0)`` = a left of
    x0 and b from x0 on, ``noise(a,eps)`` = a + eps * U(-1,1) drawn from the run seed.
    Profiles other than ``cosine`` depend on x only.
    """
    m = _PROFILE_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse profile {text!r}")
    kind, body = m.groups()
    if kind not in _PROFILE_ARITY:
        raise ValueError(f"unknown profile {kind!r}")
    try:
        args = [float(a) for a in body.split(",")] if body.strip() else []
    except ValueError:
        raise ValueError(f"non-numeric argument in profile {text!r}") from None
    lo, hi = _PROFILE_ARITY[kind]
    if not lo <= len(args) <= hi:
        raise ValueError(f"profile {kind} takes {lo}-{hi} arguments, got {len(args)}")

    def sample(grid: Grid, rng: np.random.Generator) -> np.ndarray:
        coords = grid.coordinates()
        x = coords[0]
        if kind == "constant":
            return np.full(grid.shape, args[0])
        if kind == "cosine":
            a, b, k = args[:3]
            out = np.cos(k * np.pi * x / grid.lengths[0])
            if grid.dim == 2:
                l = args[3] if len(args) > 3 else 0.0
                out = out * np.cos(l * np.pi * coords[1] / grid.lengths[1])
            return a + b * out
        if kind == "gaussian":
            a, c, x0, w = args
            return a + c * np.exp(-(((x - x0) / w) ** 2))
        if kind == "step":
            a, b, x0 = args
            return np.where(x < x0, a, b)
        a, eps = args
        return a + eps * rng.uniform(-1.0, 1.0, grid.shape)

    return sample


# --------------------------------------------------------------------------
# configuration and state


@dataclass
class SimulationConfig:
    system: System
    grid: Grid
    initial: Sequence[str]
    t_end: float
    dt_init: float = 1e-3
    dt_min: float = 1e-12
    dt_max: float = 0.1
    safety: float = 0.9
    tol: float = 1e-8
    positivity_floor: float = 1e-13
    cadence: float = 0.01
    seed: int = 0
    diffusion: Sequence[float] | None = None
    totals: Sequence[float] | None = None
    equilibrium: Sequence[float] | None = None
    mu: Sequence[float] | str = "auto"
    scheme: str = "tr_bdf2"
    threads: int = 1
    keep_snapshots: bool = True
    checkpoint_at: Sequence[float] = ()

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if self.t_end < 0:
            raise ValueError("t_end must be >= 0")
        if self.positivity_floor < 0:
            raise ValueError("positivity floor must be >= 0")
        if self.cadence <= 0:
            raise ValueError("diagnostic cadence must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown diffusion scheme {self.scheme!r}; choose from {SCHEMES}")
        if not 0 < self.safety <= 1:
            raise ValueError("safety factor must lie in (0, 1]")
        if len(self.initial) != self.system.n_species:
            raise ValueError(
                f"{len(self.initial)} initial profiles for {self.system.n_species} species"
            )
        if self.diffusion is None:
            self.diffusion = tuple(self.system.diffusion)
        if len(self.diffusion) != self.system.n_species or any(d <= 0 for d in self.diffusion):
            raise ValueError("need one positive diffusion coefficient per species")


@dataclass
class SimulationState:
    grid: Grid
    u: np.ndarray
    t: float = 0.0
    dt: float = 1e-3
    last_dt: float = 0.0
    accepted: int = 0
    rejected: int = 0
    clamped_mass: float = 0.0

    def copy(self) -> "SimulationState":
        return replace(self, u=self.u.copy())

    def masses(self) -> np.ndarray:
        return np.atleast_1d(integrate(self.grid, self.u))


def init_state(config: SimulationConfig) -> SimulationState:
    rng = np.random.default_rng(config.seed)
    fields = []
    for name, profile in zip(config.system.species, config.initial):
        values = parse_profile(profile)(config.grid, rng)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError(f"initial profile {profile!r} for {name} is negative somewhere on the grid")
        fields.append(values)
    return SimulationState(config.grid, np.array(fields, dtype=float), 0.0, config.dt_init)


# --------------------------------------------------------------------------
# linear algebra


def conjugate_gradient(matvec, b: np.ndarray, x0: np.ndarray | None = None, tol: float = 1e-12, max_iter: int | None = None):
    """Unpreconditioned CG for a symmetric positive definite operator.

    Stops when ||r|| <= tol * ||b||; raises LinearSolverError otherwise.
    """
    x = np.array(b if x0 is None else x0, dtype=float, copy=True)
    r = b - matvec(x)
    p = r.copy()
    rr = float(np.vdot(r, r))
    bnorm = float(np.sqrt(np.vdot(b, b)))
    target = tol * bnorm
    max_iter = max_iter or 10 * b.size
    if math.sqrt(rr) <= target:
        return x, 0
    for it in range(1, max_iter + 1):
        Ap = matvec(p)
        alpha = rr / float(np.vdot(p, Ap))
        x += alpha * p
        r -= alpha * Ap
        rr_new = float(np.vdot(r, r))
        if math.sqrt(rr_new) <= target:
            return x, it
        p = r + (rr_new / rr) * p
        rr = rr_new
    raise LinearSolverError(f"CG did not reach tolerance {tol} in {max_iter} iterations")


class Integrator:
    """Splitting integrator for one system on one grid."""

    def __init__(self, system: System, grid: Grid, diffusion: Sequence[float], scheme: str = "tr_bdf2", threads: int = 1):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown diffusion scheme {scheme!r}")
        self.system = system
        self.grid = grid
        self.diffusion = np.asarray(diffusion, dtype=float)
        self.scheme = scheme
        self.threads = max(1, int(threads))
        self._pool = ThreadPoolExecutor(self.threads) if self.threads > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    # reaction -------------------------------------------------------------

    def rhs(self, u: np.ndarray) -> np.ndarray:
        return mass_action_rhs(self.system, u, check=False)

    def reaction(self, u: np.ndarray, dt: float) -> np.ndarray:
        """One classical RK4 step of the pointwise reaction ODE."""
        k1 = self.rhs(u)
        k2 = self.rhs(u + 0.5 * dt * k1)
        k3 = self.rhs(u + 0.5 * dt * k2)
        k4 = self.rhs(u + dt * k3)
        return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    # diffusion ------------------------------------------------------------

    def _implicit(self, c: float, b: np.ndarray) -> np.ndarray:
        """Solve (I - c Lap_h) x = b."""
        grid = self.grid
        if grid.dim == 1:
            n, h = grid.cells[0], grid.h
            s = c / (h * h)
            ab = np.empty((3, n))
            ab[0, :] = -s
            ab[2, :] = -s
            ab[1, :] = 1.0 + 2.0 * s
            ab[1, 0] -= s
            ab[1, -1] -= s
            return scipy.linalg.solve_banded((1, 1), ab, b, check_finite=False)
        x, _ = conjugate_gradient(lambda v: v - c * apply_neumann_laplacian(grid, v), b, x0=b)
        return x

    def _diffuse_one(self, args) -> np.ndarray:
        ui, d, dt = args
        if self.scheme == "backward_euler":
            return self._implicit(dt * d, ui)
        # TR-BDF2: both stages share the matrix I - (gamma/2) dt d Lap
        c = 0.5 * _GAMMA * dt * d
        stage = self._implicit(c, ui + c * apply_neumann_laplacian(self.grid, ui))
        g = _GAMMA * (2.0 - _GAMMA)
        return self._implicit(c, stage / g - ((1.0 - _GAMMA) ** 2 / g) * ui)

    def diffuse(self, u: np.ndarray, dt: float) -> np.ndarray:
        jobs = [(u[i], self.diffusion[i], dt) for i in range(u.shape[0])]
        if self._pool is None:
            parts = [self._diffuse_one(j) for j in jobs]
        else:
            parts = list(self._pool.map(self._diffuse_one, jobs))
        return np.array(parts)

    # composition ----------------------------------------------------------

    def strang(self, u: np.ndarray, dt: float) -> np.ndarray:
        u = self.reaction(u, 0.5 * dt)
        u = self.diffuse(u, dt)
        return self.reaction(u, 0.5 * dt)

    def step(self, u: np.ndarray, dt: float) -> tuple[np.ndarray, float]:
        """Step doubling: returns the two-half-step result and ||coarse - fine||_inf."""
        coarse = self.strang(u, dt)
        fine = self.strang(self.strang(u, 0.5 * dt), 0.5 * dt)
        with np.errstate(invalid="ignore"):
            err = float(np.max(np.abs(fine - coarse)))
        return fine, err

    def advance(self, u: np.ndarray, dt: float, steps: int) -> np.ndarray:
        """``steps`` fixed Strang steps of size dt (no error control)."""
        for _ in range(steps):
            u = self.strang(u, dt)
        return u


# --------------------------------------------------------------------------
# run loop


def _reference(config: SimulationConfig, state: SimulationState):
    """Reference equilibrium and entropy multipliers for the diagnostics."""
    sys = config.system
    ref = None
    if config.equilibrium is not None:
        ref = np.asarray(config.equilibrium, dtype=float)
    elif isinstance(sys, ReactionNetwork):
        M, _ = law_basis(sys)
        totals = config.totals
        if totals is None:
            totals = M @ (state.masses() / state.grid.volume)
        if len(M):
            rep = find_positive_equilibrium(sys, totals)
            if rep.converged:
                ref = rep.equilibrium
    elif isinstance(sys, PolynomialSystem) and not any(sys.terms):
        ref = state.masses() / state.grid.volume
    if isinstance(config.mu, str):
        if config.mu != "auto":
            raise ValueError(f"mu must be 'auto' or a vector, got {config.mu!r}")
        mu = -np.log(ref) if ref is not None and np.all(ref > 0) else np.zeros(sys.n_species)
    else:
        mu = np.asarray(config.mu, dtype=float)
    return ref, mu


def run(
    config: SimulationConfig,
    state: SimulationState | None = None,
    on_checkpoint: Callable[[SimulationState], None] | None = None,
) -> tuple[DiagnosticsSeries, SimulationState]:
    """Integrate to ``config.t_end`` with adaptive steps and record diagnostics.

    Passing ``state`` continues a run (e.g. from a checkpoint). Diagnostics are
    recorded at the first accepted step at or past each multiple of the
    cadence, and at ``t_end``. ``on_checkpoint`` receives a copy of the state at
    the first recorded step at or past each time in ``config.checkpoint_at``.
    """
    state = init_state(config) if state is None else state.copy()
    ref, mu = _reference(config, state)
    series = DiagnosticsSeries(tuple(config.system.species), config.grid)
    if config.keep_snapshots:
        series.snapshots = []
    d = np.asarray(config.diffusion, dtype=float)
    cadence = config.cadence
    pending = sorted(t for t in config.checkpoint_at if t > state.t)

    def record():
        series.record(state.grid, state.u, state.t, state.last_dt, mu, d, ref)

    if config.t_end <= state.t:
        return series, state

    record()
    next_k = math.floor(state.t / cadence + 1e-9) + 1
    integ = Integrator(config.system, config.grid, d, config.scheme, config.threads)
    floor = config.positivity_floor
    cell_vol = config.grid.cell_volume
    try:
        while state.t < config.t_end:
            dt = state.dt
            remaining = config.t_end - state.t
            last = dt * (1.0 + 1e-12) >= remaining
            h = remaining if last else dt
            candidate, err = integ.step(state.u, h)
            finite = bool(np.all(np.isfinite(candidate)))
            if finite and err <= config.tol and candidate.min() >= -floor:
                negative = candidate < 0
                if negative.any():
                    state.clamped_mass += float(-candidate[negative].sum() * cell_vol)
                    candidate[negative] = 0.0
                state.u = candidate
                state.t = config.t_end if last else state.t + h
                state.last_dt = h
                state.accepted += 1
                factor = config.safety * (config.tol / max(err, 1e-300)) ** (1.0 / 3.0)
                state.dt = max(config.dt_min, min(config.dt_max, h * min(1.5, max(0.2, factor))))
                if state.t + 1e-9 * cadence >= next_k * cadence or state.t >= config.t_end:
                    record()
                    next_k = math.floor(state.t / cadence + 1e-9) + 1
                    while pending and state.t >= pending[0]:
                        pending.pop(0)
                        if on_checkpoint is not None:
                            on_checkpoint(state.copy())
            else:
                state.rejected += 1
                if not finite and h <= config.dt_min:
                    raise NonFiniteState(f"non-finite field value at t={state.t!r}", series, state)
                state.dt = 0.5 * h
                if state.dt < config.dt_min:
                    raise StepSizeUnderflow(
                        f"step size fell below dt_min={config.dt_min} at t={state.t!r}", series, state
                    )
    finally:
        integ.close()
    return series, state


# --------------------------------------------------------------------------
# checkpoints

_MAGIC = b"ERCT"
_VERSION = 1


def save_checkpoint(state: SimulationState) -> bytes:
    """Binary checkpoint, little endian.

    Layout: ``ERCT``, u16 version, u8 dim, per axis (f64 length, u32 cells),
    f64 t, f64 dt, f64 last_dt, u64 accepted, u64 rejected, f64 clamped mass,
    u32 species count, f64 cell data per species (C order), u32 CRC-32 of
    everything before it.
    """
    g = state.grid
    parts = [_MAGIC, struct.pack("<HB", _VERSION, g.dim)]
    for L, n in zip(g.lengths, g.cells):
        parts.append(struct.pack("<dI", L, n))
    parts.append(
        struct.pack(
            "<dddQQdI",
            state.t,
            state.dt,
            state.last_dt,
            state.accepted,
            state.rejected,
            state.clamped_mass,
            state.u.shape[0],
        )
    )
    parts.append(np.ascontiguousarray(state.u, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def load_checkpoint(data: bytes) -> SimulationState:
    if len(data) < 4 + 3 + 4 or data[:4] != _MAGIC:
        raise CheckpointError("not a checkpoint (bad magic bytes)")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointError("checkpoint checksum mismatch (corrupt or truncated payload)")
    version, dim = struct.unpack_from("<HB", body, 4)
    if version != _VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {_VERSION})")
    off = 7
    lengths, cells = [], []
    for _ in range(dim):
        L, n = struct.unpack_from("<dI", body, off)
        lengths.append(L)
        cells.append(n)
        off += struct.calcsize("<dI")
    t, dt, last_dt, acc, rej, clamped, nsp = struct.unpack_from("<dddQQdI", body, off)
    off += struct.calcsize("<dddQQdI")
    grid = Grid(tuple(lengths), tuple(cells))
    expected = nsp * grid.size * 8
    if len(body) - off != expected:
        raise CheckpointError("checkpoint payload has the wrong size")
    u = np.frombuffer(body, dtype="<f8", offset=off).astype(float).reshape((nsp,) + grid.shape)
    return SimulationState(grid, u, t, dt, last_dt, acc, rej, clamped)
