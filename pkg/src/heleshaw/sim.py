"""Time-stepping driver, configuration, convergence studies, file output.

State advances by the explicit loop: velocities from the current potential,
step size from the CFL policy, density update, new pressure, new potential
(warm-started from the old one).  The potential stored in a state always
belongs to the stored pressure, so every frame on disk is self-consistent.

Frames are plain CSV, one file per field per snapshot, with a one-line
header carrying the exact time; the diagnostics table records one row per
step.  Both use 17 significant digits so values round-trip exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .brinkman import EllipticSolverConfig, face_velocities, solve_brinkman
from .expressions import ExpressionError, compile_expression
from .grid import (
    BoundaryCondition,
    GridSpec,
    InitialDataError,
    ScalarField,
    cell_average_init,
)
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
    pressure,
    transport_step,
)

log = logging.getLogger(__name__)

FLOAT_FMT = "%.17g"


class IncompatibleGrids(ValueError):
    """Restriction factor does not evenly divide the fine grid."""


def initial_condition(init: str) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Resolve an initial-data name to a pointwise function of (x, y).

    Accepted forms: "gaussian1" (single centered pulse), "gaussian2" (two
    offset pulses), "uniform:<c>", "custom:<expression over x, y>".
    """
    text = init.strip()
    low = text.lower()
    if low == "gaussian1":
        return lambda x, y: 0.5 * np.exp(-10.0 * (x ** 2 + y ** 2))
    if low == "gaussian2":
        return lambda x, y: (
            0.5 * np.exp(-10.0 * ((x - 0.7) ** 2 + y ** 2))
            + 0.5 * np.exp(-20.0 * ((x + 0.6) ** 2 + (y - 0.2) ** 2))
        )
    if low.startswith("uniform:"):
        try:
            c = float(text.split(":", 1)[1])
        except ValueError as exc:
            raise ValueError(f"bad uniform value in {init!r}") from exc
        if not math.isfinite(c):
            raise ValueError(f"uniform value must be finite, got {c}")
        return lambda x, y: np.full(np.shape(x), c, dtype=float)
    if low.startswith("custom:"):
        return compile_expression(text.split(":", 1)[1])
    raise ValueError(
        f"unknown initial data {init!r}; expected gaussian1, gaussian2, "
        f"uniform:<value>, or custom:<expression>"
    )


@dataclass(frozen=True)
class SimConfig:
    """Complete description of one run."""

    lo: float = -2.5
    hi: float = 2.5
    n_cells: int = 64
    bc: BoundaryCondition = BoundaryCondition.NEUMANN
    params: ModelParams = field(default_factory=ModelParams)
    cfl: CflConfig = field(default_factory=CflConfig)
    elliptic: EllipticSolverConfig = field(default_factory=EllipticSolverConfig)
    t_end: float = 1.0
    output_every: int = 0
    output_dir: str | None = None
    init: str = "gaussian1"
    check_invariants: bool = True

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"need hi > lo, got [{self.lo}, {self.hi}]")
        if self.n_cells < 4:
            raise ValueError(f"need at least 4 cells per side, got {self.n_cells}")
        # t_end = 0 is allowed and produces the initial frame only.
        if not (math.isfinite(self.t_end) and self.t_end >= 0.0):
            raise ValueError(f"t_end must be finite and nonnegative, got {self.t_end}")
        if self.output_every < 0:
            raise ValueError(f"output_every must be nonnegative, got {self.output_every}")
        initial_condition(self.init)  # validates the name/expression eagerly

    def grid(self) -> GridSpec:
        return GridSpec(self.lo, self.hi, self.n_cells)


@dataclass(frozen=True)
class SimState:
    """Snapshot after a completed step (or the initial projection).

    p always equals pressure(n, params); W is solved from p to the elliptic
    tolerance.  last_n_max is the density ceiling certified for last_dt.
    """

    t: float
    step: int
    n: ScalarField
    W: ScalarField
    p: ScalarField
    last_dt: float
    last_n_max: float
    cg_iterations: int


@dataclass(frozen=True)
class StepRecord:
    step: int
    t: float
    dt: float
    mass: float
    min_n: float
    max_n: float
    max_W: float
    cg_iters: int
    mass_residual: float
    entropy_residual: float
    bounds_residual: float


@dataclass
class Diagnostics:
    """Per-step records plus the full invariant reports behind them."""

    records: list[StepRecord] = field(default_factory=list)
    reports: list[list[InvariantReport]] = field(default_factory=list)

    def failed_reports(self) -> list[InvariantReport]:
        return [r for per_step in self.reports for r in per_step if not r.passed]

    def write_csv(self, path):
        lines = ["step,t,dt,mass,min_n,max_n,max_W,cg_iters,"
                 "mass_residual,entropy_residual,bounds_residual"]
        for r in self.records:
            lines.append(",".join([
                str(r.step),
                FLOAT_FMT % r.t,
                FLOAT_FMT % r.dt,
                FLOAT_FMT % r.mass,
                FLOAT_FMT % r.min_n,
                FLOAT_FMT % r.max_n,
                FLOAT_FMT % r.max_W,
                str(r.cg_iters),
                FLOAT_FMT % r.mass_residual,
                FLOAT_FMT % r.entropy_residual,
                FLOAT_FMT % r.bounds_residual,
            ]))
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def init_state(cfg: SimConfig) -> SimState:
    """Project the initial datum and solve the initial potential."""
    grid = cfg.grid()
    f = initial_condition(cfg.init)
    try:
        n0 = cell_average_init(f, grid)
    except (ArithmeticError, FloatingPointError) as exc:
        raise InitialDataError(f"initial datum failed to evaluate: {exc}") from exc
    p0 = pressure(n0, cfg.params)
    sol = solve_brinkman(p0, cfg.params.mu, cfg.bc, cfg.elliptic)
    return SimState(
        t=0.0,
        step=0,
        n=n0,
        W=sol.W,
        p=p0,
        last_dt=grid.h,
        last_n_max=cfg.params.n_infinity,
        cg_iterations=sol.iterations,
    )


def step(state: SimState, cfg: SimConfig, target_t: float | None = None) -> SimState:
    """Advance one step; lands exactly on target_t when within reach.

    The step never stretches beyond the CFL proposal, so the certified
    ceiling survives a landing unchanged (a smaller dt only tightens it).
    """
    params = cfg.params
    vel = face_velocities(state.W, cfg.bc)
    dt, n_max = cfl_dt(vel, params, cfg.cfl, dt_prev=state.last_dt)
    t_new = None
    if target_t is not None:
        remaining = target_t - state.t
        if remaining <= 0.0:
            raise ValueError(f"target time {target_t} not ahead of t = {state.t}")
        if dt >= remaining:
            dt = remaining
            n_max = params.n_max_for_dt(dt)
            t_new = target_t
    if t_new is None:
        t_new = state.t + dt

    n_new = transport_step(state.n, vel, state.p, dt, params, cfg.bc, cfl=cfg.cfl)
    p_new = pressure(n_new, params)
    sol = solve_brinkman(p_new, params.mu, cfg.bc, cfg.elliptic, initial_guess=state.W)
    return SimState(
        t=t_new,
        step=state.step + 1,
        n=n_new,
        W=sol.W,
        p=p_new,
        last_dt=dt,
        last_n_max=n_max,
        cg_iterations=sol.iterations,
    )


def step_reports(old: SimState, new: SimState, cfg: SimConfig) -> list[InvariantReport]:
    """Evaluate every applicable invariant across one completed step."""
    reports = [
        check_density_bounds(new.n, new.last_n_max),
        check_potential_bounds(new.W, new.p),
        check_mass_balance(old.n, new.n, old.p, new.last_dt, cfg.params),
    ]
    if cfg.cfl.mode is CflMode.STRICT_ENTROPY:
        reports.append(
            check_entropy_l2(old.n, new.n, old.W, old.p, new.last_dt, cfg.params, cfg.bc)
        )
    if cfg.bc is BoundaryCondition.PERIODIC:
        reports.append(check_energy_identity(new.W, new.p, cfg.params.mu, cfg.bc))
    return reports


def _record(new: SimState, reports: list[InvariantReport]) -> StepRecord:
    by_name = {r.name: r for r in reports}
    h2 = new.n.grid.h ** 2
    return StepRecord(
        step=new.step,
        t=new.t,
        dt=new.last_dt,
        mass=h2 * float(np.sum(new.n.values)),
        min_n=new.n.min(),
        max_n=new.n.max(),
        max_W=new.W.max(),
        cg_iters=new.cg_iterations,
        mass_residual=by_name["mass_balance"].residual if "mass_balance" in by_name else math.nan,
        entropy_residual=by_name["entropy_l2"].residual if "entropy_l2" in by_name else math.nan,
        bounds_residual=by_name["density_bounds"].residual if "density_bounds" in by_name else math.nan,
    )


def _warn_failures(reports: list[InvariantReport], step_no: int, mode: CflMode):
    for r in reports:
        if not r.passed:
            level = logging.WARNING if mode is CflMode.PRACTICAL_LINEAR else logging.ERROR
            log.log(level, "step %d: invariant %s violated (residual %.3e > %.3e)",
                    step_no, r.name, r.residual, r.tolerance)


class _Output:
    """Frame and diagnostics writer bound to one directory."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.frames_written: list[tuple[int, float]] = []

    def frame(self, state: SimState):
        if self.frames_written and self.frames_written[-1][0] == state.step:
            return
        for name, fld in (("n", state.n), ("W", state.W), ("p", state.p)):
            write_frame(self.dir / f"{name}_{state.step:08d}.csv", fld, state.t, name)
        self.frames_written.append((state.step, state.t))

    def diagnostics(self, diag: Diagnostics):
        diag.write_csv(self.dir / "diag.csv")

    def failure_marker(self, state: SimState, exc: Exception):
        text = (f"run failed at step {state.step}, t = {FLOAT_FMT % state.t}\n"
                f"{type(exc).__name__}: {exc}\n")
        (self.dir / "FAILED").write_text(text, encoding="utf-8")


def run(cfg: SimConfig,
        snapshot_times: Sequence[float] | None = None) -> tuple[SimState, Diagnostics]:
    """Run from t=0 to t_end with exact landings on t_end and snapshots.

    Frames go to cfg.output_dir (if set) at t=0, at every output_every-th
    step when positive, at each snapshot time, and at t_end.  On a
    numerical failure the partial diagnostics, the last good frame, and a
    FAILED marker are flushed before the exception propagates.
    """
    state = init_state(cfg)
    diag = Diagnostics()
    out = _Output(cfg.output_dir) if cfg.output_dir else None
    if out:
        out.frame(state)

    eps = 1e-12 * max(1.0, abs(cfg.t_end))
    targets = sorted({float(s) for s in (snapshot_times or []) if 0.0 < s <= cfg.t_end}
                     | ({cfg.t_end} if cfg.t_end > 0.0 else set()))
    snapshot_set = {float(s) for s in (snapshot_times or [])}

    try:
        while state.t < cfg.t_end - eps:
            target = next(s for s in targets if s > state.t + eps)
            new = step(state, cfg, target_t=target)
            if cfg.check_invariants:
                reports = step_reports(state, new, cfg)
                _warn_failures(reports, new.step, cfg.cfl.mode)
            else:
                reports = []
            diag.reports.append(reports)
            diag.records.append(_record(new, reports))
            landed = new.t == target
            if out and ((cfg.output_every > 0 and new.step % cfg.output_every == 0)
                        or (landed and (target in snapshot_set or target == cfg.t_end))):
                out.frame(new)
            state = new
    except Exception as exc:
        if out:
            out.diagnostics(diag)
            out.frame(state)
            out.failure_marker(state, exc)
        raise

    if out:
        out.frame(state)
        out.diagnostics(diag)
    return state, diag


def restrict(fine: ScalarField, factor: int) -> ScalarField:
    """Block-average factor x factor cell groups onto the coarser grid.

    Conserves mass exactly: the coarse cell value is the plain mean of its
    block, and the coarse cell area is factor^2 times the fine one.
    """
    n = fine.grid.n_cells
    if factor < 1 or n % factor != 0:
        raise IncompatibleGrids(f"factor {factor} does not divide {n} cells")
    nc = n // factor
    if nc < 2:
        raise IncompatibleGrids(f"restriction by {factor} leaves {nc} cells")
    coarse = GridSpec(fine.grid.lo, fine.grid.hi, nc)
    vals = fine.values.reshape(nc, factor, nc, factor).mean(axis=(1, 3))
    return ScalarField(coarse, vals)


@dataclass(frozen=True)
class ConvergenceRow:
    n_cells: int
    h: float
    diff_l1: float  # L1 distance to the next finer level, nan on the finest
    rate: float     # log2 ratio of consecutive diffs, nan where undefined


def convergence_study(cfg: SimConfig, levels: int = 3,
                      t_snapshot: float = 0.5) -> list[ConvergenceRow]:
    """Self-convergence: run at h, h/2, ..., compare adjacent levels in L1.

    Each finer solution is block-averaged onto the next coarser grid; the
    reported rate for level k is log2(e_k / e_{k+1}), defined from three
    levels onward.
    """
    if levels < 2:
        raise ValueError(f"need at least 2 levels, got {levels}")
    if not (math.isfinite(t_snapshot) and t_snapshot > 0.0):
        raise ValueError(f"t_snapshot must be positive, got {t_snapshot}")

    fields = []
    for k in range(levels):
        cfg_k = replace(cfg, n_cells=cfg.n_cells * 2 ** k, t_end=t_snapshot,
                        output_dir=None, output_every=0)
        state_k, _ = run(cfg_k)
        fields.append(state_k.n)

    diffs = []
    for k in range(levels - 1):
        coarse = fields[k]
        projected = restrict(fields[k + 1], 2)
        l1 = coarse.grid.h ** 2 * float(np.sum(np.abs(projected.values - coarse.values)))
        diffs.append(l1)

    rows = []
    for k in range(levels):
        diff = diffs[k] if k < len(diffs) else math.nan
        if k + 1 < len(diffs) and diffs[k] > 0.0 and diffs[k + 1] > 0.0:
            rate = math.log2(diffs[k] / diffs[k + 1])
        else:
            rate = math.nan
        rows.append(ConvergenceRow(fields[k].grid.n_cells, fields[k].grid.h, diff, rate))
    return rows


def write_frame(path, fld: ScalarField, t: float, name: str):
    """Write one field as CSV: header line, then row j per line, i within."""
    g = fld.grid
    header = f"t={FLOAT_FMT % t} nx={g.n_cells} h={FLOAT_FMT % g.h} field={name}"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        np.savetxt(fh, fld.values.T, fmt=FLOAT_FMT, delimiter=",",
                   header=header, comments="# ")


@dataclass(frozen=True)
class Frame:
    t: float
    nx: int
    h: float
    field: str
    values: np.ndarray  # (nx, nx), first axis x, as in ScalarField


def read_frame(path) -> Frame:
    """Parse a frame CSV back into (t, nx, h, field, values)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing frame header")
        meta = dict(item.split("=", 1) for item in header.lstrip("# ").split())
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    nx = int(meta["nx"])
    if data.shape != (nx, nx):
        raise ValueError(f"{path}: expected {nx}x{nx} values, got {data.shape}")
    return Frame(t=float(meta["t"]), nx=nx, h=float(meta["h"]),
                 field=meta.get("field", ""), values=data.T)


_TOP_FLOAT = {"lo", "hi", "t_end"}
_PARAM_KEYS = {"mu", "a", "gamma", "alpha", "beta", "theta"}
_CFL_FLOAT = {"safety", "practical_number", "dt_cap"}
_MODES = {m.value: m for m in CflMode}
_BCS = {b.value: b for b in BoundaryCondition}


def parse_config_text(text: str, overrides: Sequence[str] = ()) -> SimConfig:
    """Build a SimConfig from `key = value` lines plus override strings.

    Comments start with #; keys are the flat snake-case field names of the
    config and its parameter groups.  Overrides use the same key=value
    syntax and win over the file.
    """
    pairs: dict[str, str] = {}

    def take(line: str, where: str):
        body = line.split("#", 1)[0].strip()
        if not body:
            return
        if "=" not in body:
            raise ValueError(f"{where}: expected key = value, got {body!r}")
        key, value = body.split("=", 1)
        pairs[key.strip()] = value.strip()

    for lineno, line in enumerate(text.splitlines(), start=1):
        take(line, f"line {lineno}")
    for ov in overrides:
        take(ov, f"override {ov!r}")

    known = sorted(_TOP_FLOAT | _PARAM_KEYS | _CFL_FLOAT
                   | {"n_cells", "output_every", "output_dir", "init",
                      "check_invariants", "bc", "mode",
                      "rel_tolerance", "max_iterations"})
    kwargs: dict = {}
    params: dict = {}
    cfl: dict = {}
    elliptic: dict = {}
    for key, value in pairs.items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}; known keys: "
                             + ", ".join(known))
        try:
            if key in _TOP_FLOAT:
                kwargs[key] = float(value)
            elif key == "n_cells":
                kwargs[key] = int(value)
            elif key == "output_every":
                kwargs[key] = int(value)
            elif key == "output_dir":
                kwargs[key] = value or None
            elif key == "init":
                kwargs[key] = value
            elif key == "check_invariants":
                kwargs[key] = _parse_bool(value)
            elif key == "bc":
                kwargs[key] = _BCS[value.lower()]
            elif key in _PARAM_KEYS:
                params[key] = float(value)
            elif key == "mode":
                cfl[key] = _MODES[value.lower()]
            elif key in _CFL_FLOAT:
                cfl[key] = float(value)
            elif key == "rel_tolerance":
                elliptic[key] = float(value)
            elif key == "max_iterations":
                elliptic[key] = None if value.lower() == "none" else int(value)
        except (KeyError, ValueError) as exc:
            raise ValueError(f"bad value {value!r} for config key {key!r}") from exc

    if params:
        kwargs["params"] = ModelParams(**params)
    if cfl:
        kwargs["cfl"] = CflConfig(**cfl)
    if elliptic:
        kwargs["elliptic"] = EllipticSolverConfig(**elliptic)
    return SimConfig(**kwargs)


def _parse_bool(value: str) -> bool:
    low = value.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def load_config(path, overrides: Sequence[str] = ()) -> SimConfig:
    return parse_config_text(Path(path).read_text(encoding="utf-8"), overrides)
