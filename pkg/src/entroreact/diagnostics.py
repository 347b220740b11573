"""Diagnostics series and the fits that turn them into verdicts.

A :class:`DiagnosticsSeries` is a time-indexed table of norms, entropy,
Fisher information and distances to a reference equilibrium, optionally with
the field snapshots themselves. The functions below check entropy
monotonicity, the entropy-dissipation balance, space-time norms, exponential
convergence and polynomial growth of sup-norms.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .grid import Grid, entropy_functional, fisher_information, llogl_norm, lp_norm

__all__ = [
    "DiagnosticsSeries",
    "MonotonicityReport",
    "DissipationBalance",
    "ExponentialFit",
    "PolynomialGrowthFit",
    "entropy_monotonicity_report",
    "dissipation_balance",
    "spacetime_norm",
    "fit_exponential_decay",
    "fit_polynomial_growth",
    "sup_norm_envelope",
    "write_series_csv",
    "read_series_csv",
]

_NORM_KEYS = ("L1", "L2", "L4", "Linf", "LlogL", "dist_inf")


@dataclass
class DiagnosticsSeries:
    species: tuple[str, ...]
    grid: Grid | None = None
    t: list[float] = field(default_factory=list)
    dt: list[float] = field(default_factory=list)
    E: list[float] = field(default_factory=list)
    D: list[float] = field(default_factory=list)
    norms: dict[str, list[np.ndarray]] = field(default_factory=lambda: {k: [] for k in _NORM_KEYS})
    snapshots: list[np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.t)

    def record(self, grid: Grid, u: np.ndarray, t: float, dt: float, mu, diffusion, reference=None) -> None:
        """Append one row computed from the fields ``u`` (shape ``(N, *grid.shape)``)."""
        if self.t and not t > self.t[-1]:
            raise ValueError(f"record time {t} does not increase past {self.t[-1]}")
        self.grid = grid
        self.t.append(float(t))
        self.dt.append(float(dt))
        self.E.append(entropy_functional(grid, u, mu))
        self.D.append(fisher_information(grid, u, diffusion))
        self.norms["L1"].append(np.atleast_1d(lp_norm(grid, u, 1)))
        self.norms["L2"].append(np.atleast_1d(lp_norm(grid, u, 2)))
        self.norms["L4"].append(np.atleast_1d(lp_norm(grid, u, 4)))
        self.norms["Linf"].append(np.atleast_1d(lp_norm(grid, u, np.inf)))
        self.norms["LlogL"].append(np.array([llogl_norm(grid, ui) for ui in u]))
        if reference is None:
            dist = np.full(u.shape[0], np.nan)
        else:
            ref = np.asarray(reference, dtype=float).reshape((-1,) + (1,) * grid.dim)
            dist = np.atleast_1d(lp_norm(grid, u - ref, np.inf))
        self.norms["dist_inf"].append(dist)
        if self.snapshots is not None:
            self.snapshots.append(np.array(u, copy=True))

    def array(self, key: str) -> np.ndarray:
        """Per-species column block ``(records, N)`` or a scalar column."""
        if key in self.norms:
            return np.array(self.norms[key]).reshape(len(self.t), len(self.species))
        return np.asarray(getattr(self, key), dtype=float)

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.t, dtype=float)

    def total_distance(self) -> np.ndarray:
        """sum_i ||u_i(t) - u_{i,inf}||_inf per record."""
        return self.array("dist_inf").sum(axis=1)

    def columns(self) -> list[str]:
        cols = ["t", "dt", "E", "D"]
        for key in _NORM_KEYS:
            cols.extend(f"{key}_{sp}" for sp in self.species)
        return cols

    def rows(self) -> np.ndarray:
        blocks = [self.times[:, None], self.array("dt")[:, None], self.array("E")[:, None], self.array("D")[:, None]]
        blocks += [self.array(k) for k in _NORM_KEYS]
        return np.hstack(blocks) if len(self.t) else np.zeros((0, len(self.columns())))

    def merged(self, other: "DiagnosticsSeries") -> "DiagnosticsSeries":
        """Concatenate a continuation run whose first record repeats our last one."""
        start = 1 if other.t and self.t and other.t[0] == self.t[-1] else 0
        out = DiagnosticsSeries(self.species, self.grid)
        out.t = self.t + other.t[start:]
        out.dt = self.dt + other.dt[start:]
        out.E = self.E + other.E[start:]
        out.D = self.D + other.D[start:]
        out.norms = {k: self.norms[k] + other.norms[k][start:] for k in _NORM_KEYS}
        if self.snapshots is not None and other.snapshots is not None:
            out.snapshots = self.snapshots + other.snapshots[start:]
        return out


def write_series_csv(fh, series: DiagnosticsSeries) -> None:
    fh.write(",".join(series.columns()) + "\n")
    for row in series.rows():
        fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def read_series_csv(fh) -> DiagnosticsSeries:
    reader = csv.reader(fh if not isinstance(fh, str) else io.StringIO(fh))
    header = next(reader)
    if header[:4] != ["t", "dt", "E", "D"]:
        raise ValueError("not a diagnostics CSV: expected columns t, dt, E, D first")
    species = tuple(h[len("L1_"):] for h in header if h.startswith("L1_"))
    n = len(species)
    if len(header) != 4 + len(_NORM_KEYS) * n:
        raise ValueError("diagnostics CSV has an unexpected number of columns")
    data = np.array([[float(x) for x in row] for row in reader if row]).reshape(-1, len(header))
    series = DiagnosticsSeries(species)
    series.t, series.dt, series.E, series.D = (list(data[:, j]) for j in range(4))
    for b, key in enumerate(_NORM_KEYS):
        block = data[:, 4 + b * n: 4 + (b + 1) * n]
        series.norms[key] = [row.copy() for row in block]
    return series


# --------------------------------------------------------------------------
# entropy


@dataclass
class MonotonicityReport:
    max_jump: float
    time: float
    max_relative_jump: float


def entropy_monotonicity_report(series: DiagnosticsSeries) -> MonotonicityReport:
    """Largest increase ``E(t_{k+1}) - E(t_k)`` and where it happens.

    ``max_relative_jump`` divides each jump by ``1 + |E(t_k)|``.
    """
    E = series.array("E")
    if len(E) < 2:
        raise ValueError("need at least two records")
    jumps = np.diff(E)
    k = int(np.argmax(jumps))
    rel = jumps / (1.0 + np.abs(E[:-1]))
    return MonotonicityReport(float(jumps[k]), float(series.t[k + 1]), float(rel.max()))


@dataclass
class DissipationBalance:
    residuals: np.ndarray
    intervals: np.ndarray
    envelope: float

    @property
    def max_residual(self) -> float:
        return float(self.residuals.max())


def dissipation_balance(series: DiagnosticsSeries) -> DissipationBalance:
    """Residuals ``(E_{k+1} - E_k) / dt_k + D_k`` of the entropy-dissipation law.

    Under (E) the residual is at most O(dt_k) above zero; ``envelope`` is the
    smallest C with ``residual_k <= C dt_k`` for every interval.
    """
    if len(series) < 2:
        raise ValueError("need at least two records")
    t = series.times
    E = series.array("E")
    D = series.array("D")
    dt = np.diff(t)
    res = np.diff(E) / dt + D[:-1]
    envelope = float(np.max(np.maximum(res, 0.0) / dt))
    return DissipationBalance(res, dt, envelope)


# --------------------------------------------------------------------------
# space-time norms


def _trapezoid(values: np.ndarray, t: np.ndarray) -> np.ndarray:
    if len(t) < 2:
        return np.zeros(values.shape[1:])
    w = np.diff(t)
    return np.tensordot(0.5 * w, values[1:] + values[:-1], axes=(0, 0))


def spacetime_norm(series: DiagnosticsSeries, p: float) -> np.ndarray:
    """||u_i||_{L^p(Q_T)} per species: trapezoid in time, midpoint in space.

    Uses snapshots when present; otherwise p must be 1, 2, 4 or inf, whose
    spatial norms are stored in the series.
    """
    if p < 1:
        raise ValueError(f"L^p norm needs p >= 1, got {p}")
    if len(series) == 0:
        raise ValueError("empty series")
    t = series.times
    if np.isinf(p):
        return series.array("Linf").max(axis=0)
    if series.snapshots:
        grid = series.grid
        per_time = np.array([np.atleast_1d(lp_norm(grid, u, p)) ** p for u in series.snapshots])
    elif p in (1, 2, 4):
        per_time = series.array(f"L{int(p)}") ** p
    else:
        raise ValueError(f"series keeps no snapshots; cannot form the L^{p} norm")
    return _trapezoid(per_time, t) ** (1.0 / p)


def sup_norm_envelope(series: DiagnosticsSeries, horizons: Sequence[float]) -> np.ndarray:
    """M_k = sup over records with t <= T_k of max_i ||u_i(t)||_inf."""
    t = series.times
    linf = series.array("Linf").max(axis=1)
    out = []
    for T in horizons:
        mask = t <= T * (1 + 1e-12)
        if not mask.any():
            raise ValueError(f"no records up to T={T}")
        out.append(linf[mask].max())
    return np.array(out)


# --------------------------------------------------------------------------
# fits


@dataclass
class ExponentialFit:
    amplitude: float
    rate: float
    r_squared: float
    n_points: int


def fit_exponential_decay(times, distances, window: tuple[float, float] | None = None) -> ExponentialFit:
    """Least squares of ``log(distance)`` against ``t``: distance ~ C exp(-rate t).

    The default window is the last 80% of records. Nonpositive distances inside
    the window are dropped; fewer than 5 remaining points is an error.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(distances, dtype=float)
    if window is None:
        start = int(math.floor(0.2 * len(t)))
        mask = np.zeros(len(t), bool)
        mask[start:] = True
    else:
        lo, hi = window
        mask = (t >= lo) & (t <= hi)
    mask &= np.isfinite(y) & (y > 0)
    if mask.sum() < 5:
        raise ValueError(f"only {int(mask.sum())} positive points in the fit window, need 5")
    tt, ly = t[mask], np.log(y[mask])
    slope, intercept = np.polyfit(tt, ly, 1)
    pred = slope * tt + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ExponentialFit(float(np.exp(intercept)), float(-slope), r2, int(mask.sum()))


@dataclass
class PolynomialGrowthFit:
    degree: float
    constant: float
    r_squared: float


def fit_polynomial_growth(horizons, sup_norms) -> PolynomialGrowthFit:
    """Slope of ``log M_k`` against ``log T_k``; ``constant`` bounds M_k <= C T_k^degree."""
    T = np.asarray(horizons, dtype=float)
    M = np.asarray(sup_norms, dtype=float)
    if len(T) < 3:
        raise ValueError("need at least 3 horizons")
    if np.any(np.diff(T) <= 0) or np.any(T <= 0):
        raise ValueError("horizons must be positive and increasing")
    if np.any(M <= 0):
        raise ValueError("sup-norms must be positive")
    lt, lm = np.log(T), np.log(M)
    slope, intercept = np.polyfit(lt, lm, 1)
    pred = slope * lt + intercept
    ss_tot = float(np.sum((lm - lm.mean()) ** 2))
    r2 = 1.0 - float(np.sum((lm - pred) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    constant = float(np.max(M / T**slope))
    return PolynomialGrowthFit(float(slope), constant, r2)
