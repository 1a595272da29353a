"""Uniform square grid, field containers, and one-sided difference operators.

The domain is the square (lo, hi)^2 split into n_cells x n_cells cells of
width h.  A scalar field stores one value per cell in an (n, n) array whose
first axis is x and second axis is y, so ``values[i, j]`` sits at the center

    x_i = lo + (i + 1/2) h,    y_j = lo + (j + 1/2) h.

Boundary handling goes through a one-cell ghost frame.  Neumann walls mirror
the first interior cell into the ghost cell (zero normal difference across
the wall); periodic wraps around.  All operators below are built on that
frame, so they agree in the interior and differ only in the ghost rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np


class BoundaryCondition(Enum):
    """Ghost-cell rule applied on all four walls."""

    NEUMANN = "neumann"
    PERIODIC = "periodic"


class InitialDataError(ValueError):
    """Initial datum produced a non-finite or malformed cell average."""


@dataclass(frozen=True)
class GridSpec:
    """Geometry of the uniform n_cells x n_cells grid on (lo, hi)^2."""

    lo: float
    hi: float
    n_cells: int
    h: float = field(init=False)

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"need hi > lo, got [{self.lo}, {self.hi}]")
        if self.n_cells < 2:
            raise ValueError(f"need at least 2 cells per side, got {self.n_cells}")
        object.__setattr__(self, "h", (self.hi - self.lo) / self.n_cells)

    def cell_centers(self) -> np.ndarray:
        """1-D array of the n_cells midpoint coordinates (same in x and y)."""
        return self.lo + (np.arange(self.n_cells) + 0.5) * self.h

    def center_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, Y) coordinate arrays of shape (n_cells, n_cells), x-first."""
        c = self.cell_centers()
        return np.meshgrid(c, c, indexing="ij")


@dataclass(frozen=True)
class ScalarField:
    """Immutable cell-centered field on a grid.

    The value array is copied on construction and marked read-only, so a
    field handed out by one operator cannot be mutated behind the back of
    another.  Values must be finite.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        n = self.grid.n_cells
        if v.shape != (n, n):
            raise ValueError(f"expected shape {(n, n)}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())


@dataclass(frozen=True)
class FaceVelocities:
    """Velocity components on cell faces.

    u has shape (n+1, n): u[i, j] lives on the vertical face between cells
    (i-1, j) and (i, j), so u[0] and u[-1] sit on the left and right walls.
    v has shape (n, n+1) with the analogous layout in y.  Under Neumann
    walls the wall-normal entries are exactly zero by construction.
    """

    grid: GridSpec
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        n = self.grid.n_cells
        u = np.array(self.u, dtype=float)
        v = np.array(self.v, dtype=float)
        if u.shape != (n + 1, n) or v.shape != (n, n + 1):
            raise ValueError(
                f"expected face shapes {(n + 1, n)} and {(n, n + 1)}, "
                f"got {u.shape} and {v.shape}"
            )
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ValueError("face velocities contain non-finite values")
        u.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    def max_magnitude(self) -> float:
        m = 0.0
        if self.u.size:
            m = max(m, float(np.abs(self.u).max()))
        if self.v.size:
            m = max(m, float(np.abs(self.v).max()))
        return m


def pad_with_ghosts(values: np.ndarray, bc: BoundaryCondition,
                    out: np.ndarray | None = None) -> np.ndarray:
    """Return values framed by one ghost layer per the boundary rule.

    Neumann mirrors the adjacent interior cell, periodic wraps.  ``out``
    may supply a preallocated (n+2, n+2) buffer for hot loops.
    """
    n0, n1 = values.shape
    if out is None:
        g = np.empty((n0 + 2, n1 + 2), dtype=float)
    else:
        g = out
    g[1:-1, 1:-1] = values
    if bc is BoundaryCondition.PERIODIC:
        g[0, 1:-1] = values[-1]
        g[-1, 1:-1] = values[0]
        g[1:-1, 0] = values[:, -1]
        g[1:-1, -1] = values[:, 0]
        g[0, 0] = values[-1, -1]
        g[0, -1] = values[-1, 0]
        g[-1, 0] = values[0, -1]
        g[-1, -1] = values[0, 0]
    else:
        g[0, 1:-1] = values[0]
        g[-1, 1:-1] = values[-1]
        g[1:-1, 0] = values[:, 0]
        g[1:-1, -1] = values[:, -1]
        g[0, 0] = values[0, 0]
        g[0, -1] = values[0, -1]
        g[-1, 0] = values[-1, 0]
        g[-1, -1] = values[-1, -1]
    return g


def _check_axis(axis: int):
    if axis not in (1, 2):
        raise ValueError(f"axis must be 1 (x) or 2 (y), got {axis}")


def diff_plus_values(values: np.ndarray, axis: int, h: float,
                     bc: BoundaryCondition) -> np.ndarray:
    """Forward difference (f_shifted - f) / h on raw arrays."""
    g = pad_with_ghosts(values, bc)
    if axis == 1:
        return (g[2:, 1:-1] - g[1:-1, 1:-1]) / h
    return (g[1:-1, 2:] - g[1:-1, 1:-1]) / h


def diff_minus_values(values: np.ndarray, axis: int, h: float,
                      bc: BoundaryCondition) -> np.ndarray:
    """Backward difference (f - f_shifted) / h on raw arrays."""
    g = pad_with_ghosts(values, bc)
    if axis == 1:
        return (g[1:-1, 1:-1] - g[:-2, 1:-1]) / h
    return (g[1:-1, 1:-1] - g[1:-1, :-2]) / h


def laplacian_values(values: np.ndarray, h: float, bc: BoundaryCondition,
                     buf: np.ndarray | None = None) -> np.ndarray:
    """Five-point Laplacian on raw arrays; ``buf`` as in pad_with_ghosts."""
    g = pad_with_ghosts(values, bc, out=buf)
    c = g[1:-1, 1:-1]
    return (g[2:, 1:-1] + g[:-2, 1:-1] + g[1:-1, 2:] + g[1:-1, :-2] - 4.0 * c) / (h * h)


def diff_plus(f: ScalarField, axis: int, bc: BoundaryCondition) -> ScalarField:
    """Forward one-sided difference along axis 1 (x) or 2 (y)."""
    _check_axis(axis)
    return ScalarField(f.grid, diff_plus_values(f.values, axis, f.grid.h, bc))


def diff_minus(f: ScalarField, axis: int, bc: BoundaryCondition) -> ScalarField:
    """Backward one-sided difference along axis 1 (x) or 2 (y)."""
    _check_axis(axis)
    return ScalarField(f.grid, diff_minus_values(f.values, axis, f.grid.h, bc))


def laplacian(f: ScalarField, bc: BoundaryCondition) -> ScalarField:
    """Five-point Laplacian with the ghost rule of ``bc``.

    Identical to composing the backward divergence with the forward
    gradient; under Neumann walls the mirror rule makes the wall-normal
    face differences vanish, which is what zero-flux walls require.
    """
    return ScalarField(f.grid, laplacian_values(f.values, f.grid.h, bc))


def cell_average_init(f: Callable[[np.ndarray, np.ndarray], np.ndarray],
                      grid: GridSpec, rule: str = "gauss2") -> ScalarField:
    """Project pointwise initial data onto cell averages.

    ``rule`` selects the quadrature per cell: "gauss2" (default) uses the
    tensor 2x2 Gauss-Legendre rule, exact for bicubics; "midpoint" samples
    the cell center only.  ``f`` may be vectorized over coordinate arrays
    or scalar-only; scalar callables are lifted with np.vectorize.
    Non-finite averages raise InitialDataError.
    """
    if rule == "gauss2":
        offsets = (-0.5 / np.sqrt(3.0), 0.5 / np.sqrt(3.0))
        weights = (0.5, 0.5)
    elif rule == "midpoint":
        offsets = (0.0,)
        weights = (1.0,)
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")

    X, Y = grid.center_mesh()
    h = grid.h

    def evaluate(xs, ys):
        try:
            out = np.asarray(f(xs, ys), dtype=float)
        except (TypeError, ValueError):
            out = np.asarray(np.vectorize(f)(xs, ys), dtype=float)
        if out.shape != xs.shape:
            out = np.broadcast_to(out, xs.shape)
        return out

    avg = np.zeros_like(X)
    for ox, wx in zip(offsets, weights):
        for oy, wy in zip(offsets, weights):
            avg = avg + (wx * wy) * evaluate(X + ox * h, Y + oy * h)

    if not np.all(np.isfinite(avg)):
        raise InitialDataError("initial datum is non-finite on the grid")
    return ScalarField(grid, avg)
