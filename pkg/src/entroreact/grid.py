"""Cell-centred grids on intervals and rectangles with zero-flux boundaries.

Fields are plain numpy arrays shaped like ``grid.shape``; a stack of species
fields has an extra leading axis, ``(N, *grid.shape)``. Integrals use the
midpoint rule, so every functional below is ``cell_volume * sum(...)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import xlogy

__all__ = [
    "Grid",
    "integrate",
    "lp_norm",
    "llogl_norm",
    "entropy_functional",
    "fisher_information",
    "h1_norm",
    "apply_neumann_laplacian",
    "neumann_laplacian_matrix",
    "laplacian_eigenvalue",
    "write_snapshot",
    "read_snapshot",
]

#: Floor used inside logarithms and for face averages in the Fisher information.
EPS_U = 1e-300


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid on ``[0, L]`` or ``[0, L1] x [0, L2]``."""

    lengths: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self):
        lengths = tuple(float(x) for x in np.atleast_1d(self.lengths))
        cells = tuple(int(n) for n in np.atleast_1d(self.cells))
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "cells", cells)
        if len(lengths) not in (1, 2) or len(cells) != len(lengths):
            raise ValueError("a grid is an interval or a rectangle")
        if any(n < 1 for n in cells):
            raise ValueError("need at least 1 cell per direction")
        if any(not np.isfinite(L) or L <= 0 for L in lengths):
            raise ValueError("domain lengths must be positive")

    @classmethod
    def interval(cls, length: float, n: int) -> "Grid":
        return cls((length,), (n,))

    @classmethod
    def rectangle(cls, lx: float, ly: float, nx: int, ny: int) -> "Grid":
        return cls((lx, ly), (nx, ny))

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.cells))

    @property
    def h(self) -> float:
        return self.spacing[0]

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        """|Omega|."""
        return float(np.prod(self.lengths))

    def axes(self) -> list[np.ndarray]:
        return [(np.arange(n) + 0.5) * h for n, h in zip(self.cells, self.spacing)]

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Cell-centre coordinate arrays, each shaped like the grid."""
        return tuple(np.meshgrid(*self.axes(), indexing="ij"))


def _spatial_axes(grid: Grid, f: np.ndarray) -> tuple[int, ...]:
    if f.shape[f.ndim - grid.dim:] != grid.shape:
        raise ValueError(f"field shape {f.shape} does not end with grid shape {grid.shape}")
    return tuple(range(f.ndim - grid.dim, f.ndim))


def integrate(grid: Grid, f) -> np.ndarray | float:
    """Midpoint rule over the spatial axes; leading axes are kept."""
    f = np.asarray(f, dtype=float)
    out = grid.cell_volume * np.sum(f, axis=_spatial_axes(grid, f))
    return float(out) if np.ndim(out) == 0 else out


def lp_norm(grid: Grid, f, p: float):
    f = np.asarray(f, dtype=float)
    if p < 1:
        raise ValueError(f"L^p norm needs p >= 1, got {p}")
    axes = _spatial_axes(grid, f)
    if np.isinf(p):
        out = np.max(np.abs(f), axis=axes)
    elif p == 1:
        out = grid.cell_volume * np.sum(np.abs(f), axis=axes)
    elif p == 2:
        out = np.sqrt(grid.cell_volume * np.sum(f * f, axis=axes))
    else:
        out = (grid.cell_volume * np.sum(np.abs(f) ** p, axis=axes)) ** (1.0 / p)
    return float(out) if np.ndim(out) == 0 else out


def llogl_norm(grid: Grid, f):
    """||f log f||_{L^1} with 0 log 0 = 0."""
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("L log L norm needs a nonnegative field")
    return integrate(grid, np.abs(xlogy(f, f)))


def entropy_functional(grid: Grid, u, mu) -> float:
    """E(u) = integral of sum_i u_i (mu_i + log u_i) - u_i."""
    u = np.asarray(u, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if u.shape[0] != mu.shape[0] or u.ndim != grid.dim + 1:
        raise ValueError(f"{mu.shape[0]} multipliers for fields of shape {u.shape}")
    if np.any(u < 0):
        raise ValueError("entropy needs nonnegative fields")
    mu_b = mu.reshape((-1,) + (1,) * grid.dim)
    density = xlogy(u, u) + (mu_b - 1.0) * u
    return float(grid.cell_volume * np.sum(density))


def _face_differences(grid: Grid, f: np.ndarray):
    """Yield (difference, face average, spacing) for each direction."""
    spatial = _spatial_axes(grid, f)
    for ax, h in zip(spatial, grid.spacing):
        lo = np.take(f, np.arange(f.shape[ax] - 1), axis=ax)
        hi = np.take(f, np.arange(1, f.shape[ax]), axis=ax)
        yield hi - lo, 0.5 * (hi + lo), h


def fisher_information(grid: Grid, u, d_coeffs, floor: float = EPS_U) -> float:
    """sum_i d_i integral |grad u_i|^2 / u_i on faces; faces with mean <= floor skipped."""
    u = np.asarray(u, dtype=float)
    d = np.asarray(d_coeffs, dtype=float)
    total = 0.0
    for i in range(u.shape[0]):
        acc = 0.0
        for diff, avg, h in _face_differences(grid, u[i]):
            mask = avg > floor
            acc += np.sum((diff[mask] / h) ** 2 / avg[mask])
        total += d[i] * acc
    return float(total * grid.cell_volume)


def h1_norm(grid: Grid, f) -> float:
    """(sum over faces (df/h)^2 + sum over cells f^2)^(1/2), both weighted by the cell volume."""
    f = np.asarray(f, dtype=float)
    grad2 = sum(np.sum((diff / h) ** 2) for diff, _, h in _face_differences(grid, f))
    return float(np.sqrt(grid.cell_volume * (grad2 + np.sum(f * f))))


def apply_neumann_laplacian(grid: Grid, f) -> np.ndarray:
    """3-point / 5-point Laplacian with reflected ghost cells (zero-flux faces)."""
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    for ax, h in zip(_spatial_axes(grid, f), grid.spacing):
        flux = np.diff(f, axis=ax) / h
        pad = [(0, 0)] * f.ndim
        pad[ax] = (1, 1)
        out += np.diff(np.pad(flux, pad), axis=ax) / h
    return out


def _laplacian_1d(n: int, h: float) -> sp.csr_matrix:
    main = np.full(n, -2.0)
    main[0] += 1.0
    main[-1] += 1.0
    off = np.ones(n - 1)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr") / (h * h)


def neumann_laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Sparse matrix of :func:`apply_neumann_laplacian` acting on C-ordered cells."""
    if grid.dim == 1:
        return _laplacian_1d(grid.cells[0], grid.h)
    (nx, ny), (hx, hy) = grid.cells, grid.spacing
    return (
        sp.kron(_laplacian_1d(nx, hx), sp.identity(ny))
        + sp.kron(sp.identity(nx), _laplacian_1d(ny, hy))
    ).tocsr()


def laplacian_eigenvalue(grid: Grid, modes: tuple[int, ...]) -> float:
    """Eigenvalue of the discrete Laplacian for prod cos(k pi x / L)."""
    return float(
        sum(
            -(2.0 / h**2) * (1.0 - np.cos(k * np.pi * h / L))
            for k, h, L in zip(modes, grid.spacing, grid.lengths)
        )
    )


# --------------------------------------------------------------------------
# snapshot CSV


def write_snapshot(fh, grid: Grid, u, names) -> None:
    """Write ``x[,y],species...`` rows, x-major, 17 significant digits."""
    u = np.asarray(u, dtype=float)
    header = ["x", "y"][: grid.dim] + list(names)
    fh.write(",".join(header) + "\n")
    coords = [c.ravel() for c in grid.coordinates()]
    values = u.reshape(len(names), -1)
    for k in range(grid.size):
        row = [c[k] for c in coords] + list(values[:, k])
        fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def read_snapshot(fh, grid: Grid) -> tuple[list[str], np.ndarray]:
    reader = csv.reader(fh if not isinstance(fh, str) else io.StringIO(fh))
    header = next(reader)
    names = header[grid.dim:]
    data = np.array([[float(x) for x in row] for row in reader if row])
    if data.shape[0] != grid.size:
        raise ValueError(f"snapshot has {data.shape[0]} rows, grid has {grid.size} cells")
    return names, data[:, grid.dim:].T.reshape((len(names),) + grid.shape)
