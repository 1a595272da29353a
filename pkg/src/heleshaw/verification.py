"""Self-check battery behind the `verify` CLI command.

Runs the iterative elliptic solver against the dense direct oracle on
random inputs, evaluates every invariant checker on freshly generated
states, and exercises one strict transport step per size.  Everything is
seeded, so a failing row reproduces exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .brinkman import face_velocities, solve_brinkman, solve_brinkman_dense
from .grid import BoundaryCondition, GridSpec, ScalarField
from .invariants import (
    InvariantReport,
    check_density_bounds,
    check_energy_identity,
    check_entropy_l2,
    check_mass_balance,
    check_potential_bounds,
)
from .transport import (
    CflConfig,
    CflMode,
    ModelParams,
    cfl_dt,
    convex_coefficients,
    pressure,
    transport_step,
)

DENSE_ORACLE_LIMIT = 32
_MUS = (0.1, 1.0, 10.0)


@dataclass(frozen=True)
class CheckRow:
    name: str
    passed: bool
    residual: float
    tolerance: float


def _row(name: str, residual: float, tolerance: float) -> CheckRow:
    return CheckRow(name, residual <= tolerance, residual, tolerance)


def _from_report(prefix: str, rep: InvariantReport) -> CheckRow:
    return CheckRow(f"{prefix}{rep.name}", rep.passed, rep.residual, rep.tolerance)


def _random_mixture(rng: np.random.Generator, grid: GridSpec,
                    ceiling: float) -> ScalarField:
    """Sum of a few random Gaussians, analytically below ``ceiling``."""
    k = int(rng.integers(1, 4))
    amps = rng.uniform(0.1, 1.0, size=k)
    amps *= rng.uniform(0.3, 0.9) * ceiling / amps.sum()
    X, Y = grid.center_mesh()
    vals = np.zeros_like(X)
    span = grid.hi - grid.lo
    for a in amps:
        cx, cy = rng.uniform(grid.lo + 0.25 * span, grid.hi - 0.25 * span, size=2)
        width = rng.uniform(2.0, 30.0) / span ** 2
        vals += a * np.exp(-width * ((X - cx) ** 2 + (Y - cy) ** 2))
    return ScalarField(grid, vals)


def run_battery(seed: int = 0, sizes: tuple[int, ...] = (8, 12, 16),
                inject_fault: bool = False) -> list[CheckRow]:
    """Full battery; ``inject_fault`` corrupts one update to prove the
    checks can fail (test hook)."""
    for n in sizes:
        if n > DENSE_ORACLE_LIMIT:
            raise ValueError(
                f"size {n} exceeds the dense-oracle limit {DENSE_ORACLE_LIMIT}"
            )
    rows: list[CheckRow] = []
    for idx, n in enumerate(sizes):
        rng = np.random.default_rng(seed * 100003 + idx)
        grid = GridSpec(0.0, 1.0, n)
        mu = _MUS[idx % len(_MUS)]
        for bc in BoundaryCondition:
            tag = f"[n={n},mu={mu:g},{bc.value}] "
            p = ScalarField(grid, rng.random((n, n)))
            sol = solve_brinkman(p, mu, bc)
            dense = solve_brinkman_dense(p, mu, bc)
            diff = float(np.abs(sol.W.values - dense.values).max())
            rows.append(_row(tag + "solver_vs_dense", diff, 1e-10))
            rows.append(_from_report(tag, check_potential_bounds(sol.W, p)))
            rows.append(_from_report(tag, check_energy_identity(sol.W, p, mu, bc)))
        rows.extend(_transport_rows(rng, n, inject_fault and idx == 0))
    return rows


def _transport_rows(rng: np.random.Generator, n: int, fault: bool) -> list[CheckRow]:
    params = ModelParams(mu=1.0, a=1.0, gamma=3.0, alpha=1.0, beta=1.0, theta=1.0)
    cfl = CflConfig(mode=CflMode.STRICT_ENTROPY)
    bc = BoundaryCondition.NEUMANN if n % 2 == 0 else BoundaryCondition.PERIODIC
    grid = GridSpec(-2.5, 2.5, n)
    tag = f"[step,n={n},{bc.value}] "

    n0 = _random_mixture(rng, grid, params.n_infinity)
    p0 = pressure(n0, params)
    W0 = solve_brinkman(p0, params.mu, bc).W
    vel = face_velocities(W0, bc)
    dt, n_max = cfl_dt(vel, params, cfl)
    n1 = transport_step(n0, vel, p0, dt, params, bc, cfl=cfl)
    if fault:
        broken = np.array(n1.values)
        broken[n // 2, n // 2] += 1e-6
        n1 = ScalarField(grid, broken)

    rows = [
        _from_report(tag, check_density_bounds(n1, n_max)),
        _from_report(tag, check_mass_balance(n0, n1, p0, dt, params)),
        _from_report(tag, check_entropy_l2(n0, n1, W0, p0, dt, params, bc)),
    ]
    coeffs = convex_coefficients(n0, vel, p0, dt, params)
    neg = max(0.0, *(float(-coeffs[k].min())
                     for k in ("a1", "east", "west", "north", "south")))
    rows.append(_row(tag + "convex_weights_nonnegative", neg, 0.0))
    combo = float((coeffs["a1"] + coeffs["a2"]).min())
    rows.append(_row(tag + "convex_combo_nonnegative", -combo, 1e-14))
    return rows


def format_rows(rows: list[CheckRow]) -> list[str]:
    width = max(len(r.name) for r in rows)
    lines = []
    for r in rows:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{status}  {r.name:<{width}}  residual={r.residual: .3e}"
                     f"  tolerance={r.tolerance:.3e}")
    return lines
