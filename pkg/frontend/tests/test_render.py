"""Rendering tests, ending with the end-to-end acceptance check.

The simulator is exercised only through its command line and the frame CSV
format on disk; nothing is imported from it.
"""

import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from heleshaw_plots.frames import (
    FrameDiscoveryError,
    FrameSet,
    load_values,
    parse_header,
)
from heleshaw_plots.render import (
    compose_panels,
    main,
    panel_grid,
    render_panels,
    select_frames,
)


def write_frame(directory, step, t, nx=6, h=0.5, field="n", peak=0.8):
    x = (np.arange(nx) + 0.5) * h - 0.5 * nx * h
    X, Y = np.meshgrid(x, x, indexing="ij")
    vals = peak * np.exp(-(X ** 2 + Y ** 2))
    lines = [f"# t={t:.17g} nx={nx} h={h:.17g} field={field}"]
    for j in range(nx):
        lines.append(",".join(f"{vals[i, j]:.17g}" for i in range(nx)))
    path = Path(directory) / f"{field}_{step:08d}.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


def frame_dir(tmp_path, times=(0.0, 1.0, 2.0, 4.0)):
    for step, t in enumerate(times):
        write_frame(tmp_path, 10 * step, t)
    return tmp_path


class TestPanelGrid:
    @pytest.mark.parametrize("count,grid", [
        (1, (1, 1)), (2, (1, 2)), (3, (2, 2)), (4, (2, 2)), (5, (3, 2)),
    ])
    def test_layouts(self, count, grid):
        assert panel_grid(count) == grid

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            panel_grid(0)


class TestDiscovery:
    def test_finds_and_orders_frames(self, tmp_path):
        frame_dir(tmp_path)
        fs = FrameSet.discover(tmp_path)
        assert fs.times() == [0.0, 1.0, 2.0, 4.0]
        assert fs.nx == 6 and fs.h == 0.5
        assert fs.matching_interval() == 2.0

    def test_empty_directory(self, tmp_path):
        with pytest.raises(FrameDiscoveryError, match="no n_"):
            FrameSet.discover(tmp_path)

    def test_other_fields_do_not_mix(self, tmp_path):
        frame_dir(tmp_path)
        write_frame(tmp_path, 0, 0.0, field="W")
        assert len(FrameSet.discover(tmp_path, field="W").frames) == 1

    def test_inconsistent_grid_rejected(self, tmp_path):
        frame_dir(tmp_path)
        write_frame(tmp_path, 99, 8.0, nx=4)
        with pytest.raises(FrameDiscoveryError, match="does not match"):
            FrameSet.discover(tmp_path)

    def test_duplicate_time_rejected(self, tmp_path):
        frame_dir(tmp_path)
        write_frame(tmp_path, 99, 4.0)
        with pytest.raises(FrameDiscoveryError, match="strictly increasing"):
            FrameSet.discover(tmp_path)

    def test_headerless_file_rejected(self, tmp_path):
        (tmp_path / "n_00000000.csv").write_text("1,2\n3,4\n")
        with pytest.raises(FrameDiscoveryError, match="header"):
            FrameSet.discover(tmp_path)

    def test_header_round_trip(self, tmp_path):
        path = write_frame(tmp_path, 3, 2.5)
        meta = parse_header(path)
        assert meta == {"t": 2.5, "nx": 6, "h": 0.5, "field": "n"}
        assert load_values(path, 6).shape == (6, 6)

    def test_payload_shape_checked(self, tmp_path):
        path = write_frame(tmp_path, 0, 0.0)
        with pytest.raises(FrameDiscoveryError, match="expected 7x7"):
            load_values(path, 7)


class TestSelection:
    def test_snaps_within_one_interval(self, tmp_path):
        fs = FrameSet.discover(frame_dir(tmp_path))
        assert select_frames(fs, [0.0, 1.0, 2.0, 4.0]) == fs.frames
        # 3.1 sits between frames; the largest gap (2.0) admits it
        assert select_frames(fs, [3.1])[0][0] == 4.0

    def test_missing_times_all_listed(self, tmp_path):
        fs = FrameSet.discover(frame_dir(tmp_path))
        with pytest.raises(FrameDiscoveryError, match=r"t = 30, 40"):
            select_frames(fs, [0.0, 30.0, 40.0])


class TestCompose:
    def test_four_panels_fixed_scale(self, tmp_path):
        fs = FrameSet.discover(frame_dir(tmp_path))
        fig = compose_panels(fs, [0.0, 1.0, 2.0, 4.0], vmax=1.0)
        image_axes = [ax for ax in fig.axes if ax.get_images()]
        assert len(image_axes) == 4
        for ax in image_axes:
            assert ax.get_images()[0].get_clim() == (0.0, 1.0)
        # extent derives from the header: 6 cells * 0.5 wide, centered
        extent = tuple(image_axes[0].get_images()[0].get_extent())
        assert extent == (-1.5, 1.5, -1.5, 1.5)
        titles = [ax.get_title() for ax in image_axes]
        assert titles == ["t = 0", "t = 1", "t = 2", "t = 4"]

    def test_single_panel(self, tmp_path):
        fs = FrameSet.discover(frame_dir(tmp_path))
        fig = compose_panels(fs, [1.0])
        assert len([ax for ax in fig.axes if ax.get_images()]) == 1

    def test_extent_override(self, tmp_path):
        fs = FrameSet.discover(frame_dir(tmp_path))
        fig = compose_panels(fs, [1.0], extent=(-2.0, 2.0))
        image = [ax for ax in fig.axes if ax.get_images()][0].get_images()[0]
        assert tuple(image.get_extent()) == (-2.0, 2.0, -2.0, 2.0)


class TestRenderPanels:
    def test_writes_nonempty_image(self, tmp_path):
        out = tmp_path / "panels.png"
        render_panels(frame_dir(tmp_path), [0.0, 1.0, 2.0, 4.0], out)
        assert out.stat().st_size > 0

    def test_rerun_overwrites_same_dimensions(self, tmp_path):
        from matplotlib.image import imread

        out = tmp_path / "panels.png"
        render_panels(frame_dir(tmp_path), [0.0, 4.0], out)
        first = imread(out).shape
        render_panels(tmp_path, [0.0, 4.0], out)
        assert imread(out).shape == first


class TestMain:
    def test_success(self, tmp_path, capsys):
        out = tmp_path / "fig.png"
        rc = main(["--dir", str(frame_dir(tmp_path)),
                   "--times", "0,1,2,4", "--out", str(out)])
        assert rc == 0
        assert out.exists()
        assert "wrote" in capsys.readouterr().out

    def test_empty_directory_lists_requested_times(self, tmp_path, capsys):
        rc = main(["--dir", str(tmp_path), "--times", "0,1,2,4",
                   "--out", str(tmp_path / "fig.png")])
        assert rc == 1
        err = capsys.readouterr().err
        assert "no n_" in err
        assert "requested t = 0, 1, 2, 4" in err

    @pytest.mark.parametrize("times", ["", "a,b", "1;2"])
    def test_bad_times_argument(self, tmp_path, times, capsys):
        rc = main(["--dir", str(frame_dir(tmp_path)), "--times", times,
                   "--out", str(tmp_path / "fig.png")])
        assert rc == 1
        assert "error" in capsys.readouterr().err


def test_10_end_to_end_against_simulator(tmp_path):
    """Criterion 10: render the simulator's own frames via the CLI boundary."""
    frames = tmp_path / "frames"
    proc = subprocess.run(
        [sys.executable, "-m", "heleshaw.cli", "reproduce", "fig1",
         "--scale", "16", "--out", str(frames)],
        capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr

    fs = FrameSet.discover(frames)
    fig = compose_panels(fs, [0.0, 1.0, 2.0, 4.0], vmax=1.0)
    image_axes = [ax for ax in fig.axes if ax.get_images()]
    grid_ok = len(image_axes) == 4 and panel_grid(4) == (2, 2)
    scale_ok = all(ax.get_images()[0].get_clim() == (0.0, 1.0)
                   for ax in image_axes)

    out = tmp_path / "fig1.png"
    render_panels(frames, [0.0, 1.0, 2.0, 4.0], out)
    image_ok = out.stat().st_size > 0

    empty = tmp_path / "empty"
    empty.mkdir()
    rc = main(["--dir", str(empty), "--times", "0,1,2,4", "--out",
               str(tmp_path / "nope.png")])
    errors_ok = rc == 1

    ok = grid_ok and scale_ok and image_ok and errors_ok
    print(f"criterion 10 {'PASS' if ok else 'FAIL'}  2x2 panels on fixed "
          f"[0, 1] scale from simulator frames; empty-directory discovery "
          f"error reported (grid {grid_ok}, scale {scale_ok}, image "
          f"{image_ok}, errors {errors_ok})")
    assert ok
