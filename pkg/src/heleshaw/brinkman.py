"""Brinkman potential solve: (I - mu * Laplacian) W = p.

The operator is symmetric positive definite for mu > 0 under both ghost
rules (the zero-order term keeps the periodic case invertible), so the
iterative solve is plain conjugate gradients, matrix-free on the ghost-
padded stencil.  A dense direct solve over explicitly assembled operator
columns is kept alongside as a cross-check for small grids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    BoundaryCondition,
    FaceVelocities,
    GridSpec,
    ScalarField,
    laplacian_values,
    pad_with_ghosts,
)


class IterationLimitExceeded(RuntimeError):
    """Conjugate gradients hit the iteration cap before the tolerance."""

    def __init__(self, iterations: int, residual: float, target: float):
        super().__init__(
            f"no convergence in {iterations} iterations "
            f"(residual {residual:.3e}, target {target:.3e})"
        )
        self.iterations = iterations
        self.residual = residual
        self.target = target


class SingularMatrix(RuntimeError):
    """Dense factorization failed; the assembled operator is singular."""


@dataclass(frozen=True)
class EllipticSolverConfig:
    """Tolerances for the iterative potential solve.

    rel_tolerance is measured against the right-hand-side norm, with an
    absolute floor so an identically zero pressure converges immediately.
    max_iterations of None means 10 * n_cells**2, resolved at solve time.
    """

    rel_tolerance: float = 1e-12
    max_iterations: int | None = None

    def __post_init__(self):
        if not 0.0 < self.rel_tolerance < 1.0:
            raise ValueError(f"rel_tolerance must be in (0, 1), got {self.rel_tolerance}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError(f"max_iterations must be positive, got {self.max_iterations}")


@dataclass(frozen=True)
class EllipticSolution:
    """Converged potential plus iteration count and final residual norm."""

    W: ScalarField
    iterations: int
    final_residual: float


def apply_helmholtz_values(w: np.ndarray, h: float, mu: float,
                           bc: BoundaryCondition,
                           buf: np.ndarray | None = None) -> np.ndarray:
    return w - mu * laplacian_values(w, h, bc, buf=buf)


def apply_helmholtz(W: ScalarField, mu: float, bc: BoundaryCondition) -> ScalarField:
    """Evaluate (I - mu * Laplacian) W with the ghost rule of ``bc``."""
    if mu <= 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    return ScalarField(W.grid, apply_helmholtz_values(W.values, W.grid.h, mu, bc))


def solve_brinkman(p: ScalarField, mu: float, bc: BoundaryCondition,
                   config: EllipticSolverConfig = EllipticSolverConfig(),
                   initial_guess: ScalarField | None = None) -> EllipticSolution:
    """Solve (I - mu * Laplacian) W = p by conjugate gradients.

    The returned residual is the true residual norm ||p - A W||_2, always
    recomputed before accepting convergence so the CG recurrence cannot
    drift past the tolerance unnoticed.  ``initial_guess`` (typically the
    potential of the previous time step) warm-starts the iteration.
    """
    if mu <= 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    grid = p.grid
    n = grid.n_cells
    h = grid.h
    max_iter = config.max_iterations if config.max_iterations is not None else 10 * n * n
    buf = np.empty((n + 2, n + 2), dtype=float)

    b = p.values
    target = max(config.rel_tolerance * float(np.linalg.norm(b)), 1e-300 * n)

    x = np.array(initial_guess.values if initial_guess is not None else b, dtype=float)
    r = b - apply_helmholtz_values(x, h, mu, bc, buf=buf)
    res = float(np.linalg.norm(r))
    if res <= target:
        return EllipticSolution(ScalarField(grid, x), 0, res)

    d = r.copy()
    rho = float(np.vdot(r, r))
    done = 0
    for k in range(1, max_iter + 1):
        done = k
        ad = apply_helmholtz_values(d, h, mu, bc, buf=buf)
        denom = float(np.vdot(d, ad))
        if denom <= 0.0:
            # Cannot happen for an SPD operator with a nonzero direction;
            # guards against total numerical breakdown.
            break
        alpha = rho / denom
        x += alpha * d
        r -= alpha * ad
        rho_new = float(np.vdot(r, r))
        if np.sqrt(rho_new) <= target:
            r = b - apply_helmholtz_values(x, h, mu, bc, buf=buf)
            res = float(np.linalg.norm(r))
            if res <= target:
                return EllipticSolution(ScalarField(grid, x), k, res)
            rho_new = float(np.vdot(r, r))
            d = r.copy()
            rho = rho_new
            continue
        d = r + (rho_new / rho) * d
        rho = rho_new

    res = float(np.linalg.norm(b - apply_helmholtz_values(x, h, mu, bc, buf=buf)))
    raise IterationLimitExceeded(done, res, target)


def assemble_dense(grid: GridSpec, mu: float, bc: BoundaryCondition) -> np.ndarray:
    """Assemble the (n^2, n^2) operator matrix column by column.

    Each column is apply_helmholtz of a unit basis field, flattened in row-
    major order, so the matrix encodes exactly the same stencil and ghost
    rule as the matrix-free path.
    """
    n = grid.n_cells
    m = n * n
    A = np.empty((m, m), dtype=float)
    e = np.zeros((n, n), dtype=float)
    for k in range(m):
        e.flat[k] = 1.0
        A[:, k] = apply_helmholtz_values(e, grid.h, mu, bc).ravel()
        e.flat[k] = 0.0
    return A


def solve_brinkman_dense(p: ScalarField, mu: float, bc: BoundaryCondition,
                         max_cells: int = 64) -> ScalarField:
    """Direct dense solve of the same system, for cross-checks.

    Refuses grids beyond ``max_cells`` per side; the assembled matrix is
    (n^2, n^2) and exists purely to validate the iterative path.
    """
    if mu <= 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    n = p.grid.n_cells
    if n > max_cells:
        raise ValueError(f"dense solve limited to {max_cells} cells per side, got {n}")
    A = assemble_dense(p.grid, mu, bc)
    try:
        w = np.linalg.solve(A, p.values.ravel())
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from exc
    return ScalarField(p.grid, w.reshape(n, n))


def face_velocities(W: ScalarField, bc: BoundaryCondition) -> FaceVelocities:
    """Forward differences of W on faces: the transport velocity field.

    Under Neumann walls the mirror ghost makes every wall-normal entry an
    exact zero, so no mass is transported through the walls.
    """
    g = pad_with_ghosts(W.values, bc)
    h = W.grid.h
    u = (g[1:, 1:-1] - g[:-1, 1:-1]) / h
    v = (g[1:-1, 1:] - g[1:-1, :-1]) / h
    return FaceVelocities(W.grid, u, v)
