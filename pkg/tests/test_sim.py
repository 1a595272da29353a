"""Driver behavior: stepping, landings, output files, config parsing."""

import math

import numpy as np
import pytest

from heleshaw.brinkman import EllipticSolverConfig, apply_helmholtz
from heleshaw.grid import BoundaryCondition, GridSpec, ScalarField
from heleshaw.sim import (
    Diagnostics,
    IncompatibleGrids,
    SimConfig,
    convergence_study,
    init_state,
    initial_condition,
    load_config,
    parse_config_text,
    read_frame,
    restrict,
    run,
    step,
    step_reports,
    write_frame,
)
from heleshaw.transport import CflConfig, CflMode, ModelParams, NonFiniteState, pressure

NEU = BoundaryCondition.NEUMANN
PER = BoundaryCondition.PERIODIC


def small_cfg(**kw):
    base = dict(n_cells=16, t_end=0.2, params=ModelParams(gamma=3.0))
    base.update(kw)
    return SimConfig(**base)


class TestInitialCondition:
    def test_gaussian1_peak(self):
        f = initial_condition("gaussian1")
        assert f(0.0, 0.0) == 0.5
        assert f(np.array([0.0, 1.0]), np.array([0.0, 0.0]))[1] == pytest.approx(
            0.5 * math.exp(-10.0))

    def test_gaussian2_peaks_at_offsets(self):
        f = initial_condition("gaussian2")
        assert f(0.7, 0.0) == pytest.approx(0.5, abs=1e-7)
        assert f(-0.6, 0.2) == pytest.approx(0.5, abs=1e-7)

    def test_uniform_and_custom(self):
        assert initial_condition("uniform:0.25")(0.0, 0.0) == 0.25
        assert initial_condition("custom: x + y")(1.0, 2.0) == 3.0

    @pytest.mark.parametrize("bad", [
        "uniform:abc", "uniform:inf", "plume", "custom:open('x')", "custom:",
    ])
    def test_bad_init_strings_rejected(self, bad):
        with pytest.raises(ValueError):
            initial_condition(bad)


class TestSimConfig:
    def test_zero_horizon_allowed(self):
        assert SimConfig(t_end=0.0).t_end == 0.0

    @pytest.mark.parametrize("kw", [
        dict(t_end=-0.1), dict(lo=1.0, hi=1.0), dict(n_cells=3),
        dict(output_every=-1), dict(init="nope"), dict(init="custom:x < y"),
    ])
    def test_invalid_configs_rejected(self, kw):
        with pytest.raises(ValueError):
            SimConfig(**kw)


class TestStepping:
    def test_initial_state_is_consistent(self):
        cfg = small_cfg(n_cells=32)
        state = init_state(cfg)
        assert state.t == 0.0 and state.step == 0
        assert 0.4 < state.n.max() < 0.5  # cell averages sit below the peak
        assert np.array_equal(state.p.values, pressure(state.n, cfg.params).values)
        resid = apply_helmholtz(state.W, cfg.params.mu, cfg.bc).values - state.p.values
        assert np.abs(resid).max() <= 1e-11 * max(1.0, state.p.max())

    def test_step_advances_consistently(self):
        cfg = small_cfg()
        s0 = init_state(cfg)
        s1 = step(s0, cfg)
        assert s1.step == 1
        assert s1.t == s0.t + s1.last_dt
        assert np.array_equal(s1.p.values, pressure(s1.n, cfg.params).values)
        assert all(r.passed for r in step_reports(s0, s1, cfg))

    def test_landing_hits_target_exactly(self):
        cfg = small_cfg(t_end=0.35)
        state, _ = run(cfg)
        assert state.t == 0.35

    def test_target_behind_current_time_rejected(self):
        cfg = small_cfg()
        state = init_state(cfg)
        with pytest.raises(ValueError):
            step(state, cfg, target_t=0.0)

    def test_invariants_can_be_skipped(self):
        state, diag = run(small_cfg(t_end=0.05, check_invariants=False))
        assert state.t == 0.05
        assert all(not reports for reports in diag.reports)
        assert math.isnan(diag.records[0].mass_residual)


class TestRunOutput:
    def test_zero_horizon_writes_single_frame(self, tmp_path):
        out = tmp_path / "o"
        state, diag = run(small_cfg(t_end=0.0, output_dir=str(out)))
        assert state.step == 0
        assert sorted(p.name for p in out.glob("*.csv")) == [
            "W_00000000.csv", "diag.csv", "n_00000000.csv", "p_00000000.csv"]
        assert not diag.records

    def test_output_every_and_final_frame(self, tmp_path):
        out = tmp_path / "o"
        state, _ = run(small_cfg(t_end=0.1, output_every=2, output_dir=str(out)))
        steps = sorted(int(p.stem.split("_")[1]) for p in out.glob("n_*.csv"))
        assert steps[0] == 0
        assert steps[-1] == state.step
        assert all(s % 2 == 0 or s == state.step for s in steps)
        # every n frame has matching W and p frames
        for s in steps:
            assert (out / f"W_{s:08d}.csv").exists()
            assert (out / f"p_{s:08d}.csv").exists()

    def test_snapshot_times_land_on_disk(self, tmp_path):
        out = tmp_path / "o"
        run(small_cfg(t_end=0.2, output_dir=str(out)),
            snapshot_times=[0.08, 0.16])
        times = sorted(read_frame(p).t for p in out.glob("n_*.csv"))
        assert times == [0.0, 0.08, 0.16, 0.2]

    def test_diag_csv_shape(self, tmp_path):
        out = tmp_path / "o"
        state, diag = run(small_cfg(t_end=0.1, output_dir=str(out)))
        lines = (out / "diag.csv").read_text().splitlines()
        assert lines[0] == ("step,t,dt,mass,min_n,max_n,max_W,cg_iters,"
                            "mass_residual,entropy_residual,bounds_residual")
        assert len(lines) == 1 + len(diag.records) == 1 + state.step
        first = lines[1].split(",")
        assert int(first[0]) == 1
        assert float(first[2]) == diag.records[0].dt

    def test_failure_flushes_partial_output(self, tmp_path):
        out = tmp_path / "o"
        cfg = SimConfig(n_cells=8, t_end=1.0, init="uniform:1e150",
                        params=ModelParams(gamma=2.0), output_dir=str(out))
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(NonFiniteState):
                run(cfg)
        marker = out / "FAILED"
        assert marker.exists()
        assert "NonFiniteState" in marker.read_text()
        assert (out / "diag.csv").exists()
        assert (out / "n_00000000.csv").exists()


class TestRestrict:
    def test_constant_preserved(self):
        grid = GridSpec(0.0, 1.0, 8)
        f = ScalarField(grid, np.full((8, 8), 0.7))
        r = restrict(f, 2)
        assert r.grid.n_cells == 4
        assert np.all(r.values == 0.7)

    def test_mass_conserved(self):
        rng = np.random.default_rng(41)
        grid = GridSpec(-1.0, 1.0, 12)
        f = ScalarField(grid, rng.random((12, 12)))
        r = restrict(f, 3)
        assert (grid.h ** 2 * f.values.sum()
                == pytest.approx(r.grid.h ** 2 * r.values.sum(), rel=1e-14))

    def test_checkerboard_averages_to_half(self):
        grid = GridSpec(0.0, 1.0, 8)
        i, j = np.indices((8, 8))
        f = ScalarField(grid, ((i + j) % 2).astype(float))
        assert np.all(restrict(f, 2).values == 0.5)

    def test_incompatible_factor(self):
        grid = GridSpec(0.0, 1.0, 8)
        f = ScalarField(grid, np.zeros((8, 8)))
        with pytest.raises(IncompatibleGrids):
            restrict(f, 3)
        with pytest.raises(IncompatibleGrids):
            restrict(f, 8)  # would leave a single cell


class TestConvergenceStudy:
    def test_three_levels_report_rates(self):
        rows = convergence_study(small_cfg(n_cells=8), levels=3, t_snapshot=0.1)
        assert [r.n_cells for r in rows] == [8, 16, 32]
        assert rows[0].diff_l1 > rows[1].diff_l1 > 0.0
        assert math.isnan(rows[2].diff_l1)
        assert math.isfinite(rows[0].rate)
        assert math.isnan(rows[1].rate) and math.isnan(rows[2].rate)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            convergence_study(small_cfg(), levels=1)
        with pytest.raises(ValueError):
            convergence_study(small_cfg(), t_snapshot=0.0)


class TestFrameFormat:
    def test_round_trip_is_exact(self, tmp_path):
        grid = GridSpec(-2.5, 2.5, 5)
        rng = np.random.default_rng(42)
        f = ScalarField(grid, rng.standard_normal((5, 5)))
        path = tmp_path / "n_00000007.csv"
        write_frame(path, f, t=1.0 / 3.0, name="n")
        frame = read_frame(path)
        assert frame.t == 1.0 / 3.0
        assert frame.nx == 5 and frame.h == 1.0
        assert frame.field == "n"
        assert np.array_equal(frame.values, f.values)

    def test_layout_row_per_line(self, tmp_path):
        grid = GridSpec(0.0, 4.0, 4)
        i, j = np.indices((4, 4))
        f = ScalarField(grid, (10 * i + j).astype(float))
        path = tmp_path / "n.csv"
        write_frame(path, f, t=0.0, name="n")
        lines = path.read_text().splitlines()
        assert lines[0] == "# t=0 nx=4 h=1 field=n"
        assert lines[1] == "0,10,20,30"  # j = 0 line, i ascending
        assert lines[2] == "1,11,21,31"

    def test_read_rejects_headerless_file(self, tmp_path):
        path = tmp_path / "n.csv"
        path.write_text("1,2\n3,4\n")
        with pytest.raises(ValueError):
            read_frame(path)


class TestConfigParsing:
    FULL = """
        # box and horizon
        lo = -1.0
        hi = 1.0
        n_cells = 40
        t_end = 2.5
        bc = periodic
        init = uniform:0.5
        output_every = 10
        output_dir = frames
        check_invariants = false

        mu = 0.5
        gamma = 4.0
        alpha = 2.0
        mode = strict_entropy
        safety = 0.8
        dt_cap = 0.01
        rel_tolerance = 1e-10
        max_iterations = none
    """

    def test_full_file(self):
        cfg = parse_config_text(self.FULL)
        assert (cfg.lo, cfg.hi, cfg.n_cells, cfg.t_end) == (-1.0, 1.0, 40, 2.5)
        assert cfg.bc is PER
        assert cfg.init == "uniform:0.5"
        assert cfg.output_every == 10 and cfg.output_dir == "frames"
        assert cfg.check_invariants is False
        assert cfg.params.mu == 0.5 and cfg.params.gamma == 4.0
        assert cfg.params.alpha == 2.0 and cfg.params.beta == 1.0
        assert cfg.cfl.mode is CflMode.STRICT_ENTROPY
        assert cfg.cfl.safety == 0.8 and cfg.cfl.dt_cap == 0.01
        assert cfg.elliptic.rel_tolerance == 1e-10
        assert cfg.elliptic.max_iterations is None

    def test_overrides_win(self):
        cfg = parse_config_text(self.FULL, overrides=["n_cells=20", "bc=neumann"])
        assert cfg.n_cells == 20
        assert cfg.bc is NEU

    def test_defaults_without_any_keys(self):
        cfg = parse_config_text("")
        assert cfg == SimConfig()

    def test_unknown_key_lists_known_ones(self):
        with pytest.raises(ValueError, match="unknown config key 'dx'"):
            parse_config_text("dx = 0.1")

    @pytest.mark.parametrize("line,key", [
        ("n_cells = many", "n_cells"),
        ("mu = fast", "mu"),
        ("bc = open", "bc"),
        ("mode = loose", "mode"),
        ("check_invariants = maybe", "check_invariants"),
        ("max_iterations = few", "max_iterations"),
    ])
    def test_bad_values_name_the_key(self, line, key):
        with pytest.raises(ValueError, match=key):
            parse_config_text(line)

    def test_line_without_assignment(self):
        with pytest.raises(ValueError, match="line 1"):
            parse_config_text("just words")

    def test_load_config_reads_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("n_cells = 8\nt_end = 0.1\n")
        cfg = load_config(path, overrides=["t_end=0.2"])
        assert cfg.n_cells == 8 and cfg.t_end == 0.2


def test_diagnostics_failed_reports_filter():
    diag = Diagnostics()
    from heleshaw.invariants import InvariantReport

    good = InvariantReport("a", True, -1.0, 0.0)
    bad = InvariantReport("b", False, 2.0, 1.0)
    diag.reports.append([good, bad])
    diag.reports.append([good])
    assert diag.failed_reports() == [bad]
