"""Density transport: pressure law, growth law, stabilized fluxes, CFL.

The density update is explicit Euler on

    n_t = div(n grad W) + n G(p),    p = a n^gamma,  G(p) = alpha - beta p^theta,

with centered face fluxes stabilized by an upwinding term proportional to
|velocity| times the face jump.  Under the strict time-step restriction the
update is a convex combination of neighboring values plus a growth factor,
which is what pins the density inside [0, n_max] for all time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import minimize_scalar

from .grid import BoundaryCondition, FaceVelocities, ScalarField, pad_with_ghosts


class CflViolation(RuntimeError):
    """A step was attempted with dt above the certified bound."""


class NonFiniteState(RuntimeError):
    """The updated density left the floating-point range."""


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the model plus derived ceilings.

    Derived values, all fixed by the constructor:

    p_homeostatic : pressure where growth switches off, (alpha/beta)^(1/theta)
    n_infinity    : density matching that pressure, (p_homeostatic/a)^(1/gamma)
    g_max         : largest growth rate over admissible pressures (= alpha)
    max_growth_rate : sup over s >= 0 of (s/a)^(1/gamma) G(s), the fastest the
                      density itself can grow; enters the runaway ceiling
                      n_max(dt) = n_infinity + 4 dt * max_growth_rate.
    """

    mu: float = 1.0
    a: float = 1.0
    gamma: float = 2.0
    alpha: float = 1.0
    beta: float = 1.0
    theta: float = 1.0
    p_homeostatic: float = field(init=False)
    n_infinity: float = field(init=False)
    g_max: float = field(init=False)
    max_growth_rate: float = field(init=False)

    def __post_init__(self):
        for name in ("mu", "a", "gamma", "alpha", "beta", "theta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.mu <= 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.a <= 0.0:
            raise ValueError(f"a must be positive, got {self.a}")
        if self.gamma < 2.0:
            raise ValueError(f"gamma must be at least 2, got {self.gamma}")
        if self.alpha <= 0.0 or self.beta <= 0.0 or self.theta <= 0.0:
            raise ValueError("alpha, beta, theta must all be positive")
        p_m = (self.alpha / self.beta) ** (1.0 / self.theta)
        n_inf = (p_m / self.a) ** (1.0 / self.gamma)
        object.__setattr__(self, "p_homeostatic", p_m)
        object.__setattr__(self, "n_infinity", n_inf)
        object.__setattr__(self, "g_max", self.alpha)
        object.__setattr__(self, "max_growth_rate", self._source_sup())
        # Growth must vanish at the homeostatic pressure by construction.
        residual = abs(self.alpha - self.beta * p_m ** self.theta)
        if residual > 1e-12 * max(1.0, self.alpha):
            raise ValueError(f"inconsistent homeostatic pressure, G(P) = {residual:.3e}")

    def _source_sup(self) -> float:
        # sup_{s in [0, P]} (s/a)^(1/gamma) (alpha - beta s^theta); the
        # integrand is zero at both ends and unimodal in between, so a
        # bounded scalar minimization of the negative nails it.
        p_m = self.p_homeostatic

        def neg(s: float) -> float:
            return -((s / self.a) ** (1.0 / self.gamma)) * (
                self.alpha - self.beta * s ** self.theta
            )

        res = minimize_scalar(neg, bounds=(0.0, p_m), method="bounded",
                              options={"xatol": 1e-14 * max(1.0, p_m)})
        best = max(0.0, -float(res.fun))
        # Coarse scan guards against a pathological bracket.
        scan = np.linspace(0.0, p_m, 257)
        best = max(best, float(np.max(-np.vectorize(neg)(scan))))
        return best

    def n_max_for_dt(self, dt: float) -> float:
        """Certified density ceiling when stepping with time step dt."""
        return self.n_infinity + 4.0 * dt * self.max_growth_rate


class CflMode(Enum):
    """How the step size is chosen from the current velocity field.

    STRICT enforces the bound-preserving restriction (density provably
    stays in [0, n_max]).  STRICT_ENTROPY additionally halves the
    transport part so the discrete L2 entropy inequality holds step by
    step.  PRACTICAL_LINEAR is a plain advective CFL number without the
    nonlinear safeguards; invariant violations are then only warned about.
    """

    STRICT = "strict"
    STRICT_ENTROPY = "strict_entropy"
    PRACTICAL_LINEAR = "practical"


@dataclass(frozen=True)
class CflConfig:
    """Step-size policy.

    safety multiplies the strict bound (margin for the velocity field
    changing within the step).  practical_number is the advective CFL
    number used by PRACTICAL_LINEAR.  dt_cap optionally caps the step
    from above, e.g. for time-accuracy studies; a smaller step never
    invalidates the strict guarantees.
    """

    mode: CflMode = CflMode.STRICT
    safety: float = 0.9
    practical_number: float = 0.45
    dt_cap: float = math.inf

    def __post_init__(self):
        if not 0.0 < self.safety <= 1.0:
            raise ValueError(f"safety must be in (0, 1], got {self.safety}")
        if self.practical_number <= 0.0:
            raise ValueError(f"practical_number must be positive, got {self.practical_number}")
        if not self.dt_cap > 0.0:
            raise ValueError(f"dt_cap must be positive, got {self.dt_cap}")


def pressure_values(n: np.ndarray, params: ModelParams) -> np.ndarray:
    return params.a * np.abs(n) ** params.gamma


def growth_values(p: np.ndarray, params: ModelParams) -> np.ndarray:
    return params.alpha - params.beta * p ** params.theta


def pressure(n: ScalarField, params: ModelParams) -> ScalarField:
    """Pressure law p = a |n|^gamma (the modulus tolerates round-off dips)."""
    return ScalarField(n.grid, pressure_values(n.values, params))


def growth(p: ScalarField, params: ModelParams) -> ScalarField:
    """Growth rate G(p) = alpha - beta p^theta."""
    return ScalarField(p.grid, growth_values(p.values, params))


def strict_dt_bound(max_face_speed: float, n_max: float, params: ModelParams,
                    h: float, mode: CflMode = CflMode.STRICT) -> float:
    """Largest certified step for a given velocity bound and density ceiling.

    The transport part limits dt to h / (8 M + h g_max) with M the largest
    face speed; the pressure nonlinearity limits it to mu / (4 gamma a n_max^gamma).
    STRICT_ENTROPY additionally requires dt <= h / (16 M).
    """
    transport = h / (8.0 * max_face_speed + h * params.g_max)
    stiffness = params.mu / (4.0 * params.gamma * params.a * n_max ** params.gamma)
    bound = min(transport, stiffness)
    if mode is CflMode.STRICT_ENTROPY and max_face_speed > 0.0:
        bound = min(bound, h / (16.0 * max_face_speed))
    return bound


def cfl_dt(vel: FaceVelocities, params: ModelParams, config: CflConfig,
           dt_prev: float | None = None) -> tuple[float, float]:
    """Choose the next step size; returns (dt, certified n_max).

    The strict bound depends on the density ceiling, which itself depends
    on dt, so the step is seeded from dt_prev (or the grid spacing), then
    halved until it is certified against its own ceiling.  Shrinking dt
    only shrinks the ceiling, so the loop terminates after a few rounds.
    """
    h = vel.grid.h
    speed = vel.max_magnitude()
    if dt_prev is None or not math.isfinite(dt_prev) or dt_prev <= 0.0:
        dt_prev = h

    if config.mode is CflMode.PRACTICAL_LINEAR:
        dt = config.practical_number * h / max(speed, 1e-14)
        dt = min(dt, config.dt_cap)
        return dt, params.n_max_for_dt(dt)

    dt = config.safety * strict_dt_bound(speed, params.n_max_for_dt(dt_prev),
                                         params, h, config.mode)
    dt = min(dt, config.dt_cap)
    for _ in range(200):
        if dt <= strict_dt_bound(speed, params.n_max_for_dt(dt), params, h, config.mode):
            return dt, params.n_max_for_dt(dt)
        dt *= 0.5
    raise CflViolation("could not certify a positive step size")


def numerical_fluxes(n: ScalarField, vel: FaceVelocities,
                     bc: BoundaryCondition) -> tuple[np.ndarray, np.ndarray]:
    """Stabilized mass fluxes on faces, shaped like (vel.u, vel.v).

    Each flux is the centered average transported by the face velocity
    minus half the face jump times the speed, i.e. a local Lax-Friedrichs
    form whose viscosity vanishes with the velocity.  Neumann walls carry
    exactly zero flux because the wall velocity and the mirrored jump both
    vanish there.
    """
    g = pad_with_ghosts(n.values, bc)
    nx = g[:, 1:-1]
    avg1 = 0.5 * (nx[:-1] + nx[1:])
    jump1 = nx[1:] - nx[:-1]
    f1 = -vel.u * avg1 - 0.5 * np.abs(vel.u) * jump1

    ny = g[1:-1, :]
    avg2 = 0.5 * (ny[:, :-1] + ny[:, 1:])
    jump2 = ny[:, 1:] - ny[:, :-1]
    f2 = -vel.v * avg2 - 0.5 * np.abs(vel.v) * jump2
    return f1, f2


def transport_step(n: ScalarField, vel: FaceVelocities, p: ScalarField,
                   dt: float, params: ModelParams, bc: BoundaryCondition,
                   cfl: CflConfig | None = None) -> ScalarField:
    """One explicit density update n - dt div(flux) + dt n G(p).

    When ``cfl`` is given and strict, the call refuses (CflViolation) any
    dt above the certified bound for the supplied velocity field; the
    ceiling is evaluated self-consistently at this dt.  Non-finite results
    raise NonFiniteState.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    h = n.grid.h
    if cfl is not None and cfl.mode is not CflMode.PRACTICAL_LINEAR:
        bound = strict_dt_bound(vel.max_magnitude(), params.n_max_for_dt(dt),
                                params, h, cfl.mode)
        if dt > bound * (1.0 + 1e-12):
            raise CflViolation(f"dt = {dt:.6e} exceeds certified bound {bound:.6e}")

    f1, f2 = numerical_fluxes(n, vel, bc)
    div = (f1[1:] - f1[:-1]) / h + (f2[:, 1:] - f2[:, :-1]) / h
    source = n.values * growth_values(p.values, params)
    new = n.values - dt * div + dt * source
    if not np.all(np.isfinite(new)):
        raise NonFiniteState(f"density became non-finite at dt = {dt:.6e}")
    return ScalarField(n.grid, new)


def convex_coefficients(n: ScalarField, vel: FaceVelocities, p: ScalarField,
                        dt: float, params: ModelParams) -> dict[str, np.ndarray]:
    """Rewrite one step as a convex combination of neighbor values.

    Returns the weights of the five-point combination

        n_new = a1 n + b n_east + z n_west + e n_north + t n_south + n a2

    with b, z, e, t the upwinded transfer weights, a1 = 1 - (b+z+e+t),
    and a2 = dt (G(p) + div of the velocity).  Under the strict bound all
    transfer weights and a1 are nonnegative and a2 >= -1, which is the
    mechanism behind the density bounds.
    """
    h = n.grid.h
    r = dt / (2.0 * h)
    u, v = vel.u, vel.v
    up, um = u[1:], u[:-1]
    vp, vm = v[:, 1:], v[:, :-1]

    b = r * (up + np.abs(up))
    z = r * (np.abs(um) - um)
    e = r * (vp + np.abs(vp))
    t = r * (np.abs(vm) - vm)
    a1 = 1.0 - (b + z + e + t)
    divv = (up - um) / h + (vp - vm) / h
    a2 = dt * (growth_values(p.values, params) + divv)
    return {"a1": a1, "a2": a2, "east": b, "west": z, "north": e, "south": t}
